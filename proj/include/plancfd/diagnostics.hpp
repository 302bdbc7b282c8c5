#pragma once

// Taylor-Green vortex setup, integral diagnostics and the time-series file.
//
// CSV layout: header `time,ke,enstrophy,mass,mom0,mom1,mom2,energy`, one row
// per record, values printed with %.17g (round-trips exactly), '.' radix,
// '\n' line endings.

#include <array>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "plancfd/errors.hpp"
#include "plancfd/mesh.hpp"
#include "plancfd/physics.hpp"
#include "plancfd/stencil.hpp"

namespace plancfd {

/// Taylor-Green vortex at uniform temperature T = 1. Conservative halos are
/// exchanged before returning.
inline ConservativeState taylor_green_init(const Grid& g, const PhysicalConstants& c) {
  for (int a = 0; a < 3; ++a) {
    if (std::abs(g.lengths[a] - kTwoPi) > 1e-12 * kTwoPi)
      throw ConfigError("Taylor-Green initial condition needs a 2*pi periodic cube; axis " +
                        std::to_string(a) + " has length " + std::to_string(g.lengths[a]));
  }
  ConservativeState s(g);
  const double p0 = 1.0 / c.gamma_m2;
  double* rho = s.rho.data();
  double* m0 = s.rhou[0].data();
  double* m1 = s.rhou[1].data();
  double* m2 = s.rhou[2].data();
  double* rhoE = s.rhoE.data();
  for_each_interior(g, [&](int i, int j, int k, std::ptrdiff_t n) {
    const double x = g.coordinate(0, i), y = g.coordinate(1, j), z = g.coordinate(2, k);
    const double u = std::sin(x) * std::cos(y) * std::cos(z);
    const double v = -std::cos(x) * std::sin(y) * std::cos(z);
    const double p = p0 + (std::cos(2.0 * x) + std::cos(2.0 * y)) * (std::cos(2.0 * z) + 2.0) / 16.0;
    const double r = c.gamma_m2 * p;
    rho[n] = r;
    m0[n] = r * u;
    m1[n] = r * v;
    m2[n] = 0.0;
    rhoE[n] = p / c.gm1 + 0.5 * r * (u * u + v * v);
  });
  halo_exchange(s.rho);
  for (auto& f : s.rhou) halo_exchange(f);
  halo_exchange(s.rhoE);
  return s;
}

inline double mean_density(const ConservativeState& s) {
  return reduce_sum(s.rho) / static_cast<double>(s.grid().interior_size());
}

/// sum of rho |u|^2 / 2 times the cell volume, without normalization.
inline double kinetic_energy_raw(const ConservativeState& s) {
  const Grid& g = s.grid();
  const double* rho = s.rho.data();
  const double* m0 = s.rhou[0].data();
  const double* m1 = s.rhou[1].data();
  const double* m2 = s.rhou[2].data();
  const double sum = reduce_sum_of(g, [&](std::ptrdiff_t n) {
    return 0.5 * (m0[n] * m0[n] + m1[n] * m1[n] + m2[n] * m2[n]) / rho[n];
  });
  return sum * g.cell_volume();
}

inline double box_volume(const Grid& g) { return g.lengths[0] * g.lengths[1] * g.lengths[2]; }

/// Kinetic energy integral normalized by rho0 V, rho0 the mean density.
inline double kinetic_energy_integral(const ConservativeState& s) {
  return kinetic_energy_raw(s) / (mean_density(s) * box_volume(s.grid()));
}

/// Density-weighted enstrophy, (1/(rho0 V)) int rho |curl u|^2 / 2 dV.
/// Velocity is recovered from the conservative fields, so stale primitives
/// in the state do not matter.
inline double enstrophy_integral(const ConservativeState& s) {
  const Grid& g = s.grid();
  std::array<Field, 3> u{Field(g), Field(g), Field(g)};
  {
    const double* rho = s.rho.data();
    for (int i = 0; i < 3; ++i) {
      const double* m = s.rhou[i].data();
      double* v = u[i].data();
      for_each_padded(g, [&](std::ptrdiff_t n) { v[n] = m[n] / rho[n]; });
    }
  }
  // curl components: (D1 u2 - D2 u1, D2 u0 - D0 u2, D0 u1 - D1 u0)
  const Field d1u2 = first_derivative(u[2], 1), d2u1 = first_derivative(u[1], 2);
  const Field d2u0 = first_derivative(u[0], 2), d0u2 = first_derivative(u[2], 0);
  const Field d0u1 = first_derivative(u[1], 0), d1u0 = first_derivative(u[0], 1);
  const double* rho = s.rho.data();
  const double *a = d1u2.data(), *b = d2u1.data(), *cc = d2u0.data(), *d = d0u2.data(),
               *e = d0u1.data(), *f = d1u0.data();
  const double sum = reduce_sum_of(g, [&](std::ptrdiff_t n) {
    const double w0 = a[n] - b[n], w1 = cc[n] - d[n], w2 = e[n] - f[n];
    return 0.5 * rho[n] * (w0 * w0 + w1 * w1 + w2 * w2);
  });
  return sum * g.cell_volume() / (mean_density(s) * box_volume(g));
}

struct ConservationSums {
  double mass = 0.0;
  std::array<double, 3> momentum{};
  double energy = 0.0;
};

inline ConservationSums conservation_sums(const ConservativeState& s) {
  const double dv = s.grid().cell_volume();
  return {reduce_sum(s.rho) * dv,
          {reduce_sum(s.rhou[0]) * dv, reduce_sum(s.rhou[1]) * dv, reduce_sum(s.rhou[2]) * dv},
          reduce_sum(s.rhoE) * dv};
}

inline ConservationSums conservation_sums(const Residual& r) {
  const double dv = r.d_rho.grid().cell_volume();
  return {reduce_sum(r.d_rho) * dv,
          {reduce_sum(r.d_rhou[0]) * dv, reduce_sum(r.d_rhou[1]) * dv, reduce_sum(r.d_rhou[2]) * dv},
          reduce_sum(r.d_rhoE) * dv};
}

struct DiagnosticsRecord {
  double time = 0.0;
  double kinetic_energy = 0.0;
  double enstrophy = 0.0;
  double total_mass = 0.0;
  std::array<double, 3> total_momentum{};
  double total_energy = 0.0;

  friend bool operator==(const DiagnosticsRecord&, const DiagnosticsRecord&) = default;
};

inline DiagnosticsRecord make_record(const ConservativeState& s, double time) {
  const ConservationSums sums = conservation_sums(s);
  return {time, kinetic_energy_integral(s), enstrophy_integral(s), sums.mass, sums.momentum, sums.energy};
}

inline constexpr const char* kTimeseriesHeader = "time,ke,enstrophy,mass,mom0,mom1,mom2,energy";

inline std::string format_record(const DiagnosticsRecord& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", r.time, r.kinetic_energy,
                r.enstrophy, r.total_mass, r.total_momentum[0], r.total_momentum[1], r.total_momentum[2],
                r.total_energy);
  return buf;
}

inline void write_timeseries(const std::vector<DiagnosticsRecord>& records, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw IoError("cannot open " + path + " for writing: " + std::strerror(errno));
  bool ok = std::fprintf(f, "%s\n", kTimeseriesHeader) > 0;
  for (const auto& r : records) ok = ok && std::fprintf(f, "%s\n", format_record(r).c_str()) > 0;
  ok = (std::fclose(f) == 0) && ok;
  if (!ok) throw IoError("failed writing " + path);
}

inline std::vector<DiagnosticsRecord> read_timeseries(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != kTimeseriesHeader) throw IoError(path + ": unexpected header");
  std::vector<DiagnosticsRecord> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::array<double, 8> v{};
    const char* p = line.c_str();
    for (std::size_t i = 0; i < v.size(); ++i) {
      char* end = nullptr;
      v[i] = std::strtod(p, &end);
      if (end == p || (i + 1 < v.size() && *end != ',') || (i + 1 == v.size() && *end != '\0'))
        throw IoError(path + ":" + std::to_string(lineno) + ": malformed row");
      p = end + 1;
    }
    out.push_back({v[0], v[1], v[2], v[3], {v[4], v[5], v[6]}, v[7]});
  }
  return out;
}

}  // namespace plancfd
