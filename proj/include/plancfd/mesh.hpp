#pragma once

// Structured periodic grid and halo-padded scalar fields.
//
// Layout: a field stores (n0+2h) x (n1+2h) x (n2+2h) doubles in row-major
// order with axis 2 contiguous. Interior point (i, j, k), 0 <= i < n0, lives at
// linear index ((i+h)*p1 + (j+h))*p2 + (k+h) where p = n + 2h. Negative and
// >= n indices address the halo.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstring>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "plancfd/errors.hpp"
#include "plancfd/parallel.hpp"

namespace plancfd {

struct Grid {
  static constexpr int ndim = 3;

  std::array<int, 3> npoints{};
  std::array<double, 3> lengths{};
  std::array<double, 3> delta{};
  int halo = 2;

  int padded(int axis) const { return npoints[axis] + 2 * halo; }

  std::array<std::ptrdiff_t, 3> strides() const {
    return {static_cast<std::ptrdiff_t>(padded(1)) * padded(2), padded(2), 1};
  }

  std::size_t padded_size() const {
    return static_cast<std::size_t>(padded(0)) * padded(1) * padded(2);
  }

  std::size_t interior_size() const {
    return static_cast<std::size_t>(npoints[0]) * npoints[1] * npoints[2];
  }

  std::ptrdiff_t index(int i, int j, int k) const {
    const auto s = strides();
    return (i + halo) * s[0] + (j + halo) * s[1] + (k + halo);
  }

  double coordinate(int axis, int i) const { return i * delta[axis]; }

  double cell_volume() const { return delta[0] * delta[1] * delta[2]; }

  friend bool operator==(const Grid&, const Grid&) = default;
};

inline Grid make_grid(std::array<int, 3> npoints, std::array<double, 3> lengths,
                      int halo = 2) {
  for (int a = 0; a < 3; ++a) {
    if (npoints[a] < 5) {
      throw ConfigError("grid axis " + std::to_string(a) + " has " +
                        std::to_string(npoints[a]) +
                        " points; the 5-point stencil needs at least 5");
    }
    if (!(lengths[a] > 0.0)) {
      throw ConfigError("grid axis " + std::to_string(a) +
                        " must have a positive length");
    }
  }
  if (halo < 2) {
    throw ConfigError("halo width " + std::to_string(halo) +
                      " is below the stencil radius 2");
  }
  Grid g;
  g.npoints = npoints;
  g.lengths = lengths;
  g.halo = halo;
  for (int a = 0; a < 3; ++a) g.delta[a] = lengths[a] / npoints[a];
  return g;
}

inline constexpr double kTwoPi = 2.0 * 3.14159265358979323846;

/// Periodic 2*pi cube with n points per axis.
inline Grid make_periodic_cube(int n, int halo = 2) {
  return make_grid({n, n, n}, {kTwoPi, kTwoPi, kTwoPi}, halo);
}

/// One grid-sized, halo-padded array of doubles.
///
/// Every Field owning storage is counted in a process-wide live counter so the
/// work-array footprint of a kernel plan can be observed from tests.
class Field {
 public:
  explicit Field(const Grid& grid, double value = 0.0)
      : grid_(grid), data_(grid.padded_size(), value), counted_(true) {
    ++live_;
  }

  Field(const Field& other)
      : grid_(other.grid_), data_(other.data_), counted_(other.counted_) {
    if (counted_) ++live_;
  }

  Field(Field&& other) noexcept
      : grid_(other.grid_),
        data_(std::move(other.data_)),
        counted_(std::exchange(other.counted_, false)) {}

  Field& operator=(const Field& other) {
    if (this == &other) return *this;
    if (!counted_ && other.counted_) ++live_;
    if (counted_ && !other.counted_) --live_;
    grid_ = other.grid_;
    data_ = other.data_;
    counted_ = other.counted_;
    return *this;
  }

  Field& operator=(Field&& other) noexcept {
    if (this == &other) return *this;
    if (counted_) --live_;
    grid_ = other.grid_;
    data_ = std::move(other.data_);
    counted_ = std::exchange(other.counted_, false);
    return *this;
  }

  ~Field() {
    if (counted_) --live_;
  }

  const Grid& grid() const { return grid_; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  double& operator()(int i, int j, int k) { return data_[grid_.index(i, j, k)]; }
  double operator()(int i, int j, int k) const {
    return data_[grid_.index(i, j, k)];
  }

  /// Number of grid-sized arrays currently alive in this process.
  static long live_count() { return live_.load(); }

 private:
  Grid grid_;
  std::vector<double> data_;
  bool counted_ = false;
  inline static std::atomic<long> live_{0};
};

/// Calls body(i, j, k, n) for every interior point; n is the linear index.
/// Work is split over axis 0.
template <class Body>
void for_each_interior(const Grid& g, Body&& body) {
  parallel_for(0, g.npoints[0], [&](std::ptrdiff_t i) {
    for (int j = 0; j < g.npoints[1]; ++j) {
      std::ptrdiff_t n = g.index(static_cast<int>(i), j, 0);
      for (int k = 0; k < g.npoints[2]; ++k, ++n) body(static_cast<int>(i), j, k, n);
    }
  });
}

/// Sets the interior of f from fn(x, y, z) at grid coordinates.
template <class Fn>
void fill_interior(Field& f, Fn&& fn) {
  const Grid& g = f.grid();
  double* d = f.data();
  for_each_interior(g, [&](int i, int j, int k, std::ptrdiff_t n) {
    d[n] = fn(g.coordinate(0, i), g.coordinate(1, j), g.coordinate(2, k));
  });
}

/// Copies periodic images into every ghost cell, edges and corners included.
/// Axes are processed in order over the full padded extent of the other axes,
/// so corner cells pick up values already wrapped along earlier axes.
inline void halo_exchange(Field& f) {
  const Grid& g = f.grid();
  const int h = g.halo;
  const auto s = g.strides();
  double* d = f.data();
  auto wrap = [](int idx, int n) { return ((idx % n) + n) % n; };

  // axis 0: whole contiguous planes
  {
    const int n = g.npoints[0];
    const std::size_t plane = static_cast<std::size_t>(s[0]);
    for (int gi = 1; gi <= h; ++gi) {
      const int lo = -gi, hi = n - 1 + gi;
      std::memcpy(d + (lo + h) * s[0], d + (wrap(lo, n) + h) * s[0], plane * sizeof(double));
      std::memcpy(d + (hi + h) * s[0], d + (wrap(hi, n) + h) * s[0], plane * sizeof(double));
    }
  }
  // axis 1: contiguous rows
  {
    const int n = g.npoints[1];
    const std::size_t row = static_cast<std::size_t>(g.padded(2));
    for (int pi = 0; pi < g.padded(0); ++pi) {
      double* base = d + pi * s[0];
      for (int gj = 1; gj <= h; ++gj) {
        const int lo = -gj, hi = n - 1 + gj;
        std::memcpy(base + (lo + h) * s[1], base + (wrap(lo, n) + h) * s[1], row * sizeof(double));
        std::memcpy(base + (hi + h) * s[1], base + (wrap(hi, n) + h) * s[1], row * sizeof(double));
      }
    }
  }
  // axis 2: strided elements
  {
    const int n = g.npoints[2];
    for (int pi = 0; pi < g.padded(0); ++pi) {
      for (int pj = 0; pj < g.padded(1); ++pj) {
        double* row = d + pi * s[0] + pj * s[1] + h;
        for (int gk = 1; gk <= h; ++gk) {
          const int lo = -gk, hi = n - 1 + gk;
          row[lo] = row[wrap(lo, n)];
          row[hi] = row[wrap(hi, n)];
        }
      }
    }
  }
}

/// Sum over interior points.
///
/// Each axis-0 plane is summed sequentially in (j, k) order, then plane sums
/// are added in i order. The result therefore does not depend on the number
/// of workers.
inline double reduce_sum(const Field& f) {
  const Grid& g = f.grid();
  std::vector<double> planes(static_cast<std::size_t>(g.npoints[0]), 0.0);
  const double* d = f.data();
  parallel_for(0, g.npoints[0], [&](std::ptrdiff_t i) {
    double acc = 0.0;
    for (int j = 0; j < g.npoints[1]; ++j) {
      const double* row = d + g.index(static_cast<int>(i), j, 0);
      for (int k = 0; k < g.npoints[2]; ++k) acc += row[k];
    }
    planes[static_cast<std::size_t>(i)] = acc;
  });
  double total = 0.0;
  for (double p : planes) total += p;
  return total;
}

/// Interior sum of fn(n) over linear indices, with the reduce_sum ordering.
template <class Fn>
double reduce_sum_of(const Grid& g, Fn&& fn) {
  std::vector<double> planes(static_cast<std::size_t>(g.npoints[0]), 0.0);
  parallel_for(0, g.npoints[0], [&](std::ptrdiff_t i) {
    double acc = 0.0;
    for (int j = 0; j < g.npoints[1]; ++j) {
      std::ptrdiff_t n = g.index(static_cast<int>(i), j, 0);
      for (int k = 0; k < g.npoints[2]; ++k, ++n) acc += fn(n);
    }
    planes[static_cast<std::size_t>(i)] = acc;
  });
  double total = 0.0;
  for (double p : planes) total += p;
  return total;
}

inline double reduce_max_abs(const Field& f) {
  const Grid& g = f.grid();
  const double* d = f.data();
  double m = 0.0;
  for (int i = 0; i < g.npoints[0]; ++i)
    for (int j = 0; j < g.npoints[1]; ++j) {
      const double* row = d + g.index(i, j, 0);
      for (int k = 0; k < g.npoints[2]; ++k) m = std::max(m, std::abs(row[k]));
    }
  return m;
}

/// max |a - b| over the interior.
inline double max_abs_difference(const Field& a, const Field& b) {
  const Grid& g = a.grid();
  double m = 0.0;
  for (int i = 0; i < g.npoints[0]; ++i)
    for (int j = 0; j < g.npoints[1]; ++j)
      for (int k = 0; k < g.npoints[2]; ++k)
        m = std::max(m, std::abs(a(i, j, k) - b(i, j, k)));
  return m;
}

}  // namespace plancfd
