#pragma once

// Fourth-order central differences on the 5-point stencil.
//
//   first:  [ 1, -8, 0, 8, -1] / (12 h)
//   second: [-1, 16, -30, 16, -1] / (12 h^2)
//
// Weights are divided by the spacing once, when StencilWeights is built. The
// point kernels below are shared by every code path (whole-field operators,
// stored work arrays, loop-local and inline evaluation), so a given derivative
// is computed with the same floating-point operation sequence everywhere.

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>

#include "plancfd/mesh.hpp"

namespace plancfd {

using Weights5 = std::array<double, 5>;

struct StencilWeights {
  std::array<Weights5, 3> first{};
  std::array<Weights5, 3> second{};

  static StencilWeights for_grid(const Grid& g) {
    StencilWeights w;
    for (int a = 0; a < 3; ++a) {
      const double inv_d = 1.0 / g.delta[a];
      const double inv_d2 = inv_d * inv_d;
      w.first[a] = {inv_d / 12.0, -8.0 * inv_d / 12.0, 0.0, 8.0 * inv_d / 12.0,
                    -inv_d / 12.0};
      w.second[a] = {-inv_d2 / 12.0, 16.0 * inv_d2 / 12.0, -30.0 * inv_d2 / 12.0,
                     16.0 * inv_d2 / 12.0, -inv_d2 / 12.0};
    }
    return w;
  }
};

/// First derivative at f[0] along a direction with stride s.
inline double d1(const double* f, std::ptrdiff_t s, const Weights5& w) {
  return w[3] * (f[s] - f[-s]) + w[4] * (f[2 * s] - f[-2 * s]);
}

/// First derivative of the pointwise product a*b at offset 0.
inline double d1_product(const double* a, const double* b, std::ptrdiff_t s,
                         const Weights5& w) {
  return w[3] * (a[s] * b[s] - a[-s] * b[-s]) +
         w[4] * (a[2 * s] * b[2 * s] - a[-2 * s] * b[-2 * s]);
}

/// Second derivative at f[0]. Differences are taken against the centre value,
/// which uses that the weights sum to zero and makes constants map to 0 exactly.
inline double d2(const double* f, std::ptrdiff_t s, const Weights5& w) {
  const double c = f[0];
  return w[3] * ((f[s] - c) + (f[-s] - c)) + w[4] * ((f[2 * s] - c) + (f[-2 * s] - c));
}

/// D_outer(D_inner f) at f[0] without storing the inner derivative.
/// Equal, operation for operation, to applying d1 along the outer axis to an
/// array holding d1 along the inner axis.
inline double d11(const double* f, std::ptrdiff_t s_inner, const Weights5& w_inner,
                  std::ptrdiff_t s_outer, const Weights5& w_outer) {
  const double p1 = d1(f + s_outer, s_inner, w_inner);
  const double m1 = d1(f - s_outer, s_inner, w_inner);
  const double p2 = d1(f + 2 * s_outer, s_inner, w_inner);
  const double m2 = d1(f - 2 * s_outer, s_inner, w_inner);
  return w_outer[3] * (p1 - m1) + w_outer[4] * (p2 - m2);
}

namespace detail {
inline void check_axis(int axis) {
  if (axis < 0 || axis > 2) {
    throw std::invalid_argument("axis " + std::to_string(axis) + " is not 0, 1 or 2");
  }
}
}  // namespace detail

/// Interior first derivative along axis. f's halo must be current; the
/// returned field's halo is not.
inline Field first_derivative(const Field& f, int axis) {
  detail::check_axis(axis);
  const Grid& g = f.grid();
  const auto w = StencilWeights::for_grid(g);
  const std::ptrdiff_t s = g.strides()[axis];
  Field out(g);
  const double* in = f.data();
  double* o = out.data();
  for_each_interior(g, [&](int, int, int, std::ptrdiff_t n) {
    o[n] = d1(in + n, s, w.first[axis]);
  });
  return out;
}

inline Field second_derivative(const Field& f, int axis) {
  detail::check_axis(axis);
  const Grid& g = f.grid();
  const auto w = StencilWeights::for_grid(g);
  const std::ptrdiff_t s = g.strides()[axis];
  Field out(g);
  const double* in = f.data();
  double* o = out.data();
  for_each_interior(g, [&](int, int, int, std::ptrdiff_t n) {
    o[n] = d2(in + n, s, w.second[axis]);
  });
  return out;
}

/// d^2 f / (dx_a dx_b) for a != b, as first_derivative(first_derivative(f, a), b)
/// with a halo refresh in between.
inline Field cross_derivative(const Field& f, int axis_a, int axis_b) {
  detail::check_axis(axis_a);
  detail::check_axis(axis_b);
  if (axis_a == axis_b) {
    throw std::invalid_argument("cross_derivative needs distinct axes; use second_derivative");
  }
  Field inner = first_derivative(f, axis_a);
  halo_exchange(inner);
  return first_derivative(inner, axis_b);
}

}  // namespace plancfd
