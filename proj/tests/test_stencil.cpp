#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "plancfd/stencil.hpp"

using namespace plancfd;

namespace {
constexpr double kPi = 3.14159265358979323846;

Grid periodic(int n) { return make_grid({n, n, n}, {2 * kPi, 2 * kPi, 2 * kPi}, 2); }

template <class Fn>
Field field(const Grid& g, Fn fn) {
  Field f(g);
  fill_interior(f, fn);
  halo_exchange(f);
  return f;
}

template <class Fn>
double max_error(const Field& d, Fn exact) {
  const Grid& g = d.grid();
  double m = 0.0;
  for (int i = 0; i < g.npoints[0]; ++i)
    for (int j = 0; j < g.npoints[1]; ++j)
      for (int k = 0; k < g.npoints[2]; ++k)
        m = std::max(m, std::abs(d(i, j, k) - exact(g.coordinate(0, i), g.coordinate(1, j), g.coordinate(2, k))));
  return m;
}

/// max error over points whose 5-point stencil along `axis` stays inside the interior.
template <class Fn>
double max_error_wrap_free(const Field& d, int axis, Fn exact, int reach = 2) {
  const Grid& g = d.grid();
  double m = 0.0;
  for (int i = 0; i < g.npoints[0]; ++i)
    for (int j = 0; j < g.npoints[1]; ++j)
      for (int k = 0; k < g.npoints[2]; ++k) {
        const int idx[3] = {i, j, k};
        bool inside = true;
        for (int a = 0; a < 3; ++a)
          if ((a == axis || reach > 2) && (idx[a] < reach || idx[a] >= g.npoints[a] - reach)) inside = false;
        if (!inside) continue;
        m = std::max(m, std::abs(d(i, j, k) - exact(g.coordinate(0, i), g.coordinate(1, j), g.coordinate(2, k))));
      }
  return m;
}
}  // namespace

TEST(StencilWeights, Properties) {
  const Grid g = make_grid({10, 20, 40}, {1, 2, 3}, 2);
  const auto w = StencilWeights::for_grid(g);
  for (int a = 0; a < 3; ++a) {
    EXPECT_EQ(w.first[a][2], 0.0);
    EXPECT_EQ(w.first[a][0], -w.first[a][4]);
    EXPECT_EQ(w.first[a][1], -w.first[a][3]);
    EXPECT_EQ(w.second[a][0], w.second[a][4]);
    EXPECT_EQ(w.second[a][1], w.second[a][3]);
    double sum = 0.0, big = 0.0;
    for (double x : w.second[a]) {
      sum += x;
      big = std::max(big, std::abs(x));
    }
    EXPECT_LE(std::abs(sum), 1e-15 * big);
    const double d = g.delta[a];
    EXPECT_NEAR(w.first[a][3], 8.0 / (12.0 * d), 1e-14 / d);
    EXPECT_NEAR(w.second[a][2], -30.0 / (12.0 * d * d), 1e-13 / (d * d));
  }
}

TEST(FirstDerivative, ConstantIsExactlyZero) {
  const Grid g = periodic(16);
  const Field f = field(g, [](double, double, double) { return 3.7; });
  for (int a = 0; a < 3; ++a) EXPECT_EQ(reduce_max_abs(first_derivative(f, a)), 0.0);
}

TEST(FirstDerivative, LinearAndQuarticExactAwayFromWrap) {
  const Grid g = make_grid({12, 12, 12}, {1.2, 1.2, 1.2}, 2);
  for (int a = 0; a < 3; ++a) {
    const Field lin = field(g, [a](double x, double y, double z) { return a == 0 ? x : a == 1 ? y : z; });
    EXPECT_LE(max_error_wrap_free(first_derivative(lin, a), a, [](double, double, double) { return 1.0; }), 1e-13);
    const Field quart = field(g, [a](double x, double y, double z) {
      const double s = a == 0 ? x : a == 1 ? y : z;
      return s * s * s * s - 2 * s * s + s;
    });
    EXPECT_LE(max_error_wrap_free(first_derivative(quart, a), a,
                                  [a](double x, double y, double z) {
                                    const double s = a == 0 ? x : a == 1 ? y : z;
                                    return 4 * s * s * s - 4 * s + 1;
                                  }),
              1e-12);
  }
}

TEST(FirstDerivative, SineErrorBound) {
  const Grid g = periodic(32);
  const Field f = field(g, [](double x, double, double) { return std::sin(x); });
  EXPECT_LE(max_error(first_derivative(f, 0), [](double x, double, double) { return std::cos(x); }), 6e-5);
}

TEST(FirstDerivative, InvalidAxis) {
  const Grid g = periodic(8);
  const Field f(g);
  EXPECT_THROW(first_derivative(f, 3), std::invalid_argument);
  EXPECT_THROW(second_derivative(f, -1), std::invalid_argument);
}

TEST(SecondDerivative, ConstantIsExactlyZero) {
  const Grid g = periodic(16);
  const Field f = field(g, [](double x, double, double) { return 0.1 + 0 * x; });
  for (int a = 0; a < 3; ++a) EXPECT_EQ(reduce_max_abs(second_derivative(f, a)), 0.0);
}

TEST(SecondDerivative, QuadraticExactAwayFromWrap) {
  const Grid g = make_grid({12, 12, 12}, {1.2, 1.2, 1.2}, 2);
  for (int a = 0; a < 3; ++a) {
    const Field f = field(g, [a](double x, double y, double z) {
      const double s = a == 0 ? x : a == 1 ? y : z;
      return s * s;
    });
    EXPECT_LE(max_error_wrap_free(second_derivative(f, a), a, [](double, double, double) { return 2.0; }), 1e-12);
  }
}

TEST(Convergence, FourthOrderOnSine) {
  std::vector<double> e1, e2;
  for (int n : {32, 64, 128}) {
    const Grid g = make_grid({n, 5, 5}, {2 * kPi, 1, 1}, 2);
    const Field f = field(g, [](double x, double, double) { return std::sin(x); });
    e1.push_back(max_error(first_derivative(f, 0), [](double x, double, double) { return std::cos(x); }));
    e2.push_back(max_error(second_derivative(f, 0), [](double x, double, double) { return -std::sin(x); }));
  }
  for (std::size_t i = 0; i + 1 < e1.size(); ++i) {
    EXPECT_NEAR(std::log2(e1[i] / e1[i + 1]), 4.0, 0.3);
    EXPECT_NEAR(std::log2(e2[i] / e2[i + 1]), 4.0, 0.3);
  }
  EXPECT_GE(e2[0] / e2[1], 12.0);
  EXPECT_LE(e2[0] / e2[1], 20.0);
}

TEST(CrossDerivative, BilinearExactAwayFromWrap) {
  const Grid g = make_grid({14, 14, 14}, {1.4, 1.4, 1.4}, 2);
  const Field f = field(g, [](double x, double y, double) { return x * y; });
  EXPECT_LE(max_error_wrap_free(cross_derivative(f, 0, 1), -1, [](double, double, double) { return 1.0; }, 4), 1e-12);
}

TEST(CrossDerivative, TrigFourthOrder) {
  std::vector<double> err;
  for (int n : {16, 32}) {
    const Grid g = periodic(n);
    const Field f = field(g, [](double x, double y, double) { return std::sin(x) * std::cos(y); });
    err.push_back(max_error(cross_derivative(f, 0, 1), [](double x, double y, double) { return -std::cos(x) * std::sin(y); }));
  }
  EXPECT_NEAR(std::log2(err[0] / err[1]), 4.0, 0.3);
}

TEST(CrossDerivative, Commutes) {
  const Grid g = periodic(16);
  const Field f = field(g, [](double x, double y, double z) { return std::exp(std::sin(x + 2 * y)) * std::cos(z - y); });
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      if (a != b) {
        EXPECT_LE(max_abs_difference(cross_derivative(f, a, b), cross_derivative(f, b, a)), 1e-12);
      }
  EXPECT_THROW(cross_derivative(f, 1, 1), std::invalid_argument);
}

TEST(SummationByParts, ProductRule) {
  const Grid g = periodic(24);
  const Field a = field(g, [](double x, double y, double z) { return 1.0 + 0.3 * std::sin(x + y) * std::cos(z); });
  const Field b = field(g, [](double x, double y, double z) { return std::cos(2 * x) + std::sin(y - z); });
  Field ab(g);
  for (std::size_t n = 0; n < g.padded_size(); ++n) ab.data()[n] = a.data()[n] * b.data()[n];
  for (int ax = 0; ax < 3; ++ax) {
    const Field da = first_derivative(a, ax), db = first_derivative(b, ax), dab = first_derivative(ab, ax);
    const double s_a = reduce_sum_of(g, [&](std::ptrdiff_t n) { return b.data()[n] * da.data()[n]; });
    const double s_b = reduce_sum_of(g, [&](std::ptrdiff_t n) { return a.data()[n] * db.data()[n]; });
    const double scale = reduce_sum_of(g, [&](std::ptrdiff_t n) { return std::abs(b.data()[n] * da.data()[n]); });
    // periodic antisymmetric stencil: sum g D(h) = -sum h D(g) and sum D(f) = 0
    EXPECT_LE(std::abs(s_a + s_b), 1e-12 * scale);
    EXPECT_LE(std::abs(reduce_sum(dab)), 1e-12 * scale);
  }
}

TEST(PointKernels, ComposedEqualsStoredComposition) {
  const Grid g = make_grid({12, 12, 12}, {2 * kPi, 2 * kPi, 2 * kPi}, 4);
  const Field f = field(g, [](double x, double y, double z) { return std::sin(x) * std::cos(2 * y) + z; });
  const auto w = StencilWeights::for_grid(g);
  const auto s = g.strides();
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      Field inner = first_derivative(f, a);
      halo_exchange(inner);
      const Field outer = first_derivative(inner, b);
      int mismatches = 0;
      for (int i = 0; i < 12; ++i)
        for (int j = 0; j < 12; ++j)
          for (int k = 0; k < 12; ++k) {
            const std::ptrdiff_t n = g.index(i, j, k);
            if (d11(f.data() + n, s[a], w.first[a], s[b], w.first[b]) != outer.data()[n]) ++mismatches;
          }
      EXPECT_EQ(mismatches, 0) << a << " " << b;
    }
}
