#pragma once

// Compressible Navier-Stokes building blocks: constants, the conservative
// state, primitive recovery, viscous stress, heat flux and the split
// (skew-symmetric) convective operator.

#include <array>
#include <cmath>
#include <string>

#include "plancfd/errors.hpp"
#include "plancfd/mesh.hpp"
#include "plancfd/stencil.hpp"

namespace plancfd {

/// Non-dimensional flow constants with every reciprocal the kernels need
/// evaluated once at setup.
struct PhysicalConstants {
  double gamma = 1.4;
  double mach = 0.1;
  double prandtl = 0.71;
  double reynolds = 1600.0;

  double inv_re = 0.0;      // 1/Re
  double heat_coeff = 0.0;  // 1/((gamma-1) M^2 Pr Re)
  double gm1 = 0.0;         // gamma-1
  double gamma_m2 = 0.0;    // gamma M^2
};

inline PhysicalConstants make_constants(double gamma = 1.4, double mach = 0.1,
                                        double prandtl = 0.71, double reynolds = 1600.0) {
  if (!(gamma > 1.0)) throw ConfigError("gamma must exceed 1");
  if (!(mach > 0.0)) throw ConfigError("Mach number must be positive");
  if (!(prandtl > 0.0)) throw ConfigError("Prandtl number must be positive");
  if (!(reynolds > 0.0)) throw ConfigError("Reynolds number must be positive");
  PhysicalConstants c;
  c.gamma = gamma;
  c.mach = mach;
  c.prandtl = prandtl;
  c.reynolds = reynolds;
  c.inv_re = 1.0 / reynolds;
  c.gm1 = gamma - 1.0;
  c.gamma_m2 = gamma * mach * mach;
  c.heat_coeff = 1.0 / (c.gm1 * mach * mach * prandtl * reynolds);
  return c;
}

/// Prognostic fields (rho, rho u_i, rho E) plus the stored primitives.
struct ConservativeState {
  explicit ConservativeState(const Grid& g)
      : rho(g),
        rhou{Field(g), Field(g), Field(g)},
        rhoE(g),
        u{Field(g), Field(g), Field(g)},
        p(g),
        T(g) {}

  const Grid& grid() const { return rho.grid(); }

  Field rho;
  std::array<Field, 3> rhou;
  Field rhoE;
  std::array<Field, 3> u;
  Field p;
  Field T;
};

/// Right-hand sides of the mass, momentum and energy equations (interior only).
struct Residual {
  explicit Residual(const Grid& g) : d_rho(g), d_rhou{Field(g), Field(g), Field(g)}, d_rhoE(g) {}

  Field d_rho;
  std::array<Field, 3> d_rhou;
  Field d_rhoE;
};

/// Copy of the conservative fields taken at the start of each time step.
struct SavedState {
  explicit SavedState(const Grid& g) : rho(g), rhou{Field(g), Field(g), Field(g)}, rhoE(g) {}

  void copy_from(const ConservativeState& s) {
    copy_values(s.rho, rho);
    for (int i = 0; i < 3; ++i) copy_values(s.rhou[i], rhou[i]);
    copy_values(s.rhoE, rhoE);
  }

  Field rho;
  std::array<Field, 3> rhou;
  Field rhoE;

 private:
  static void copy_values(const Field& from, Field& to) {
    const Grid& g = from.grid();
    const auto s = g.strides();
    const double* src = from.data();
    double* dst = to.data();
    parallel_for(0, g.padded(0), [&](std::ptrdiff_t i) {
      for (std::ptrdiff_t n = i * s[0]; n < (i + 1) * s[0]; ++n) dst[n] = src[n];
    });
  }
};

/// Calls body(n) for every linear index of the padded array.
template <class Body>
void for_each_padded(const Grid& g, Body&& body) {
  const std::ptrdiff_t plane = g.strides()[0];
  parallel_for(0, g.padded(0), [&](std::ptrdiff_t i) {
    for (std::ptrdiff_t n = i * plane; n < (i + 1) * plane; ++n) body(n);
  });
}

namespace detail {
inline void require_finite(const Field& f, const char* what) {
  const double* d = f.data();
  const std::size_t size = f.grid().padded_size();
  bool ok = true;
#pragma omp parallel for reduction(&& : ok) schedule(static)
  for (std::size_t n = 0; n < size; ++n) ok = ok && std::isfinite(d[n]);
  if (!ok) throw DivergenceError(std::string("non-finite ") + what);
}
}  // namespace detail

// Primitive recovery runs over the whole padded array. Conservative halos are
// current on entry, so primitive halos are current on exit without an exchange.

/// u_i = rho u_i / rho.
inline void eval_velocity(ConservativeState& s) {
  const Grid& g = s.grid();
  const double* rho = s.rho.data();
  const double* m0 = s.rhou[0].data();
  const double* m1 = s.rhou[1].data();
  const double* m2 = s.rhou[2].data();
  double* u0 = s.u[0].data();
  double* u1 = s.u[1].data();
  double* u2 = s.u[2].data();
  for_each_padded(g, [&](std::ptrdiff_t n) {
    const double inv_rho = 1.0 / rho[n];
    u0[n] = m0[n] * inv_rho;
    u1[n] = m1[n] * inv_rho;
    u2[n] = m2[n] * inv_rho;
  });
}

/// p = (gamma-1)(rho E - rho u_j u_j / 2) from the stored velocity.
inline void eval_pressure(ConservativeState& s, const PhysicalConstants& c) {
  const Grid& g = s.grid();
  const double* rho = s.rho.data();
  const double* rhoE = s.rhoE.data();
  const double* u0 = s.u[0].data();
  const double* u1 = s.u[1].data();
  const double* u2 = s.u[2].data();
  double* p = s.p.data();
  for_each_padded(g, [&](std::ptrdiff_t n) {
    p[n] = c.gm1 * (rhoE[n] - 0.5 * rho[n] * (u0[n] * u0[n] + u1[n] * u1[n] + u2[n] * u2[n]));
  });
}

/// T = gamma M^2 p / rho from the stored pressure.
inline void eval_temperature(ConservativeState& s, const PhysicalConstants& c) {
  const Grid& g = s.grid();
  const double* rho = s.rho.data();
  const double* p = s.p.data();
  double* T = s.T.data();
  for_each_padded(g, [&](std::ptrdiff_t n) { T[n] = c.gamma_m2 * p[n] * (1.0 / rho[n]); });
  detail::require_finite(s.T, "primitive variables");
}

/// Velocity, then pressure, then temperature: three loops, none of which
/// reads what it writes.
inline void eval_primitives_grouped(ConservativeState& s, const PhysicalConstants& c) {
  eval_velocity(s);
  eval_pressure(s, c);
  eval_temperature(s, c);
}

/// Pressure and temperature written in terms of the conservative variables,
/// so all primitives come out of a single loop that reads only rho, rho u_i
/// and rho E.
inline void eval_primitives_fused(ConservativeState& s, const PhysicalConstants& c) {
  const Grid& g = s.grid();
  const double* rho = s.rho.data();
  const double* rhoE = s.rhoE.data();
  const double* m0 = s.rhou[0].data();
  const double* m1 = s.rhou[1].data();
  const double* m2 = s.rhou[2].data();
  double* u0 = s.u[0].data();
  double* u1 = s.u[1].data();
  double* u2 = s.u[2].data();
  double* p = s.p.data();
  double* T = s.T.data();
  for_each_padded(g, [&](std::ptrdiff_t n) {
    const double inv_rho = 1.0 / rho[n];
    const double v0 = m0[n] * inv_rho;
    const double v1 = m1[n] * inv_rho;
    const double v2 = m2[n] * inv_rho;
    const double pn = c.gm1 * (rhoE[n] - 0.5 * rho[n] * (v0 * v0 + v1 * v1 + v2 * v2));
    u0[n] = v0;
    u1[n] = v1;
    u2[n] = v2;
    p[n] = pn;
    T[n] = c.gamma_m2 * pn * (1.0 / rho[n]);
  });
  detail::require_finite(s.T, "primitive variables");
}

/// Symmetric 3x3 tensor stored as xx, yy, zz, xy, xz, yz.
struct SymmetricTensor {
  std::array<double, 6> v{};

  double operator()(int i, int j) const {
    if (i == j) return v[static_cast<std::size_t>(i)];
    const int lo = i < j ? i : j;
    const int hi = i < j ? j : i;
    return v[static_cast<std::size_t>(lo == 0 ? 2 + hi : 5)];
  }
  double trace() const { return v[0] + v[1] + v[2]; }
};

using Gradient3 = std::array<std::array<double, 3>, 3>;

/// tau_ij = (1/Re)(du_i/dx_j + du_j/dx_i - 2/3 delta_ij du_k/dx_k),
/// grad[i][j] = du_i/dx_j.
inline SymmetricTensor stress_tensor(const Gradient3& grad, const PhysicalConstants& c) {
  const double two_thirds_div = (2.0 / 3.0) * (grad[0][0] + grad[1][1] + grad[2][2]);
  SymmetricTensor t;
  for (int i = 0; i < 3; ++i) {
    t.v[static_cast<std::size_t>(i)] = c.inv_re * (grad[i][i] + grad[i][i] - two_thirds_div);
  }
  t.v[3] = c.inv_re * (grad[0][1] + grad[1][0]);
  t.v[4] = c.inv_re * (grad[0][2] + grad[2][0]);
  t.v[5] = c.inv_re * (grad[1][2] + grad[2][1]);
  return t;
}

/// q_j = dT/dx_j / ((gamma-1) M^2 Pr Re).
inline std::array<double, 3> heat_flux(const std::array<double, 3>& grad_T,
                                       const PhysicalConstants& c) {
  return {c.heat_coeff * grad_T[0], c.heat_coeff * grad_T[1], c.heat_coeff * grad_T[2]};
}

namespace detail {
inline Field split_convective(const Field& rho_phi, const Field& uj, int axis) {
  const Grid& g = uj.grid();
  Field flux(g);
  {
    const double* a = rho_phi.data();
    const double* b = uj.data();
    double* f = flux.data();
    for_each_padded(g, [&](std::ptrdiff_t n) { f[n] = a[n] * b[n]; });
  }
  const Field d_flux = first_derivative(flux, axis);
  const Field d_rho_phi = first_derivative(rho_phi, axis);
  const Field d_u = first_derivative(uj, axis);
  Field out(g);
  const double* df = d_flux.data();
  const double* drp = d_rho_phi.data();
  const double* du = d_u.data();
  const double* rp = rho_phi.data();
  const double* u = uj.data();
  double* o = out.data();
  for_each_interior(g, [&](int, int, int, std::ptrdiff_t n) {
    o[n] = 0.5 * (df[n] + u[n] * drp[n] + rp[n] * du[n]);
  });
  return out;
}
}  // namespace detail

/// 1/2 [ D_j(rho phi u_j) + u_j D_j(rho phi) + rho phi D_j(u_j) ] with phi = 1.
/// Inputs need current halos.
inline Field skew_convective(const Field& uj, const Field& rho, int axis) {
  detail::check_axis(axis);
  return detail::split_convective(rho, uj, axis);
}

/// Same split form for a general transported quantity phi.
inline Field skew_convective(const Field& phi, const Field& uj, const Field& rho, int axis) {
  detail::check_axis(axis);
  const Grid& g = rho.grid();
  Field rho_phi(g);
  const double* a = rho.data();
  const double* b = phi.data();
  double* r = rho_phi.data();
  for_each_padded(g, [&](std::ptrdiff_t n) { r[n] = a[n] * b[n]; });
  return detail::split_convective(rho_phi, uj, axis);
}

}  // namespace plancfd
