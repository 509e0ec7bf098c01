// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "jcaslab/numerics.hpp"

using namespace jcaslab;

namespace {

// Adaptive Simpson, used as an independent quadrature oracle. Deliberately
// not the library's Gauss-Kronrod machinery.
double simpson_step(const std::function<double(double)>& f, double a, double b, double fa,
                    double fm, double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::fabs(left + right - whole) <= 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double simpson(const std::function<double(double)>& f, double a, double b, double tol) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_step(f, a, b, fa, fm, fb, whole, tol, 28);
}

// Composite Simpson on a fixed fine grid; relative accuracy tracks the
// integrand smoothness, which suits huge-magnitude positive integrands.
double simpson_fixed(const std::function<double(double)>& f, double a, double b, int panels) {
  const double h = (b - a) / panels;
  double acc = f(a) + f(b);
  for (int i = 1; i < panels; ++i) acc += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return acc * h / 3.0;
}

double chi2_pdf_oracle(int dof, double x) {
  const double hd = 0.5 * dof;
  return std::exp((hd - 1.0) * std::log(x) - 0.5 * x - hd * M_LN2 - std::lgamma(hd));
}

}  // namespace

TEST_CASE("ln_gamma matches known values and std::lgamma") {
  CHECK(ln_gamma(1.0) == Catch::Approx(0.0).margin(1e-14));
  CHECK(ln_gamma(0.5) == Catch::Approx(std::log(std::sqrt(M_PI))).epsilon(1e-13));
  CHECK(ln_gamma(10.0) == Catch::Approx(std::log(362880.0)).epsilon(1e-13));  // 9!
  for (double lx = -3.0; lx <= 6.0; lx += 0.0625) {
    const double x = std::pow(10.0, lx);
    const double ref = std::lgamma(x);
    const double got = ln_gamma(x);
    const double scale = std::max(std::fabs(ref), 1.0);
    CHECK(std::fabs(got - ref) / scale < 1e-13);
  }
  CHECK_THROWS_AS(ln_gamma(0.0), std::domain_error);
  CHECK_THROWS_AS(ln_gamma(-1.0), std::domain_error);
}

TEST_CASE("reg_gamma_lower basics") {
  // a = 1: exponential CDF
  for (double x : {0.0, 0.1, 0.5, 1.0, 3.0, 10.0, 40.0})
    CHECK(reg_gamma_lower(1.0, x) == Catch::Approx(-std::expm1(-x)).margin(1e-14));
  CHECK(reg_gamma_lower(7.3, 0.0) == 0.0);
  // integral of t e^-t over [0, 2] gives 1 - 3 e^-2
  CHECK(reg_gamma_lower(2.0, 2.0) == Catch::Approx(1.0 - 3.0 * std::exp(-2.0)).epsilon(1e-13));
  CHECK(reg_gamma_lower(5.0, 1e4) == Catch::Approx(1.0).margin(1e-14));
  CHECK_THROWS_AS(reg_gamma_lower(0.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(reg_gamma_lower(1.0, -1.0), std::domain_error);

  SECTION("monotone nondecreasing in x") {
    for (double a : {0.3, 1.0, 2.5, 17.0, 240.0}) {
      double prev = -1.0;
      for (int i = 0; i <= 200; ++i) {
        const double x = 0.05 * i * a;
        const double p = reg_gamma_lower(a, x);
        CHECK(p >= prev);
        prev = p;
      }
    }
  }

  SECTION("log versions agree with linear versions") {
    for (double a : {0.5, 3.0, 120.0}) {
      for (double x : {0.01, 0.5 * a, a, 2.0 * a}) {
        if (x <= 0) continue;
        CHECK(std::exp(ln_reg_gamma_lower(a, x)) ==
              Catch::Approx(reg_gamma_lower(a, x)).epsilon(1e-12));
        CHECK(std::exp(ln_reg_gamma_upper(a, x)) ==
              Catch::Approx(reg_gamma_upper(a, x)).epsilon(1e-12));
      }
    }
    // far tails stay finite in log space
    CHECK(ln_reg_gamma_lower(200.0, 1.0) < -500.0);
    CHECK(ln_reg_gamma_upper(2.0, 900.0) < -800.0);
  }
}

TEST_CASE("chi2_cdf") {
  for (double x : {0.0, 0.3, 1.0, 2.0, 7.5})
    CHECK(chi2_cdf(2, x) == Catch::Approx(-std::expm1(-0.5 * x)).margin(1e-14));
  CHECK(chi2_cdf(2, 2.0 * M_LN2) == Catch::Approx(0.5).epsilon(1e-13));

  // quadrature oracle, independent of the incomplete-gamma implementation
  const double q99 = chi2_quantile(480, 0.99);
  const double by_quadrature =
      simpson([](double x) { return chi2_pdf_oracle(480, x); }, 1e-9, q99, 1e-11);
  CHECK(by_quadrature == Catch::Approx(0.99).margin(1e-9));
  // frozen from the bisection oracle (also scipy/mpmath): cdf(480, 553.127)
  CHECK(chi2_cdf(480, 553.127) == Catch::Approx(0.9884327433934).margin(1e-10));
}

TEST_CASE("chi2_quantile") {
  CHECK(chi2_quantile(2, 0.5) == Catch::Approx(2.0 * M_LN2).epsilon(1e-12));

  SECTION("dof=480, p=0.99 against a bisection oracle") {
    // bracketed bisection directly on the CDF
    double lo = 0.0, hi = 2000.0;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      (chi2_cdf(480, mid) < 0.99 ? lo : hi) = mid;
    }
    const double oracle = 0.5 * (lo + hi);
    CHECK(chi2_quantile(480, 0.99) == Catch::Approx(oracle).margin(1e-8));
    CHECK(oracle == Catch::Approx(555.0061753503767).margin(1e-6));

    // Wilson-Hilferty cube approximation as a sanity cross-check
    const double z = 2.3263478740408408;  // normal quantile of 0.99
    const double f = 2.0 / (9.0 * 480.0);
    const double wh = 480.0 * std::pow(1.0 - f + z * std::sqrt(f), 3.0);
    CHECK(wh == Catch::Approx(oracle).epsilon(0.005));
  }

  SECTION("round trip cdf(quantile(p)) = p") {
    for (int dof : {1, 2, 3, 10, 57, 480, 2000}) {
      for (double p : {1e-6, 1e-3, 0.01, 0.1, 0.5, 0.9, 0.99, 0.9999}) {
        const double x = chi2_quantile(dof, p);
        CHECK(std::fabs(chi2_cdf(dof, x) - p) < 1e-10);
      }
    }
  }

  SECTION("strictly increasing in p") {
    double prev = 0.0;
    for (double p = 0.05; p < 1.0; p += 0.05) {
      const double x = chi2_quantile(17, p);
      CHECK(x > prev);
      prev = x;
    }
  }

  CHECK_THROWS_AS(chi2_quantile(4, 0.0), std::domain_error);
  CHECK_THROWS_AS(chi2_quantile(4, 1.0), std::domain_error);
  CHECK_THROWS_AS(chi2_quantile(4, -0.2), std::domain_error);
}

TEST_CASE("std_normal_cdf") {
  CHECK(std_normal_cdf(0.0) == 0.5);
  for (double x : {0.1, 0.7, 1.0, 2.5, 6.0})
    CHECK(std_normal_cdf(-x) == Catch::Approx(1.0 - std_normal_cdf(x)).margin(1e-15));
  CHECK(std_normal_cdf(40.0) == Catch::Approx(1.0).margin(1e-15));
  CHECK(std_normal_cdf(-40.0) == Catch::Approx(0.0).margin(1e-15));

  // quadrature of the Gaussian density as the oracle for Phi(1)
  const double phi1 =
      0.5 + simpson_fixed([](double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * M_PI); },
                          0.0, 1.0, 20000);
  CHECK(std_normal_cdf(1.0) == Catch::Approx(phi1).margin(1e-12));
  CHECK(std_normal_cdf(1.0) == Catch::Approx(0.841344746).margin(1e-9));
}

TEST_CASE("kummer_1f1_int") {
  for (int m : {1, 2, 5, 20}) CHECK(kummer_1f1_int(m, 0.0) == Catch::Approx(1.0).margin(1e-15));
  for (double z : {-8.0, -1.0, 0.3, 2.0, 12.0})
    CHECK(kummer_1f1_int(1, z) == Catch::Approx(std::expm1(z) / z).epsilon(1e-13));

  SECTION("(3, 0.7) against quadrature of the defining integral") {
    const double oracle =
        3.0 * simpson_fixed([](double t) { return t * t * std::exp(0.7 * t); }, 0.0, 1.0, 20000);
    CHECK(kummer_1f1_int(3, 0.7) == Catch::Approx(oracle).margin(1e-12));
  }

  SECTION("integral identity over M <= 20, |a s| <= 30") {
    struct Case {
      int m;
      double alpha, s;
    };
    for (const auto& c : std::vector<Case>{{1, -3.0, 10.0},
                                           {2, 1.5, 4.0},
                                           {5, -0.5, 60.0},
                                           {7, 2.0, 15.0},
                                           {12, -6.0, 5.0},
                                           {20, 0.9, 33.0},
                                           {20, -1.0, 30.0}}) {
      const double z = c.alpha * c.s;
      if (std::fabs(z) > 30.0) continue;
      const double lhs = std::exp(c.m * std::log(c.s)) / c.m * kummer_1f1_int(c.m, z);
      const double rhs = simpson_fixed(
          [&c](double t) { return std::pow(t, c.m - 1) * std::exp(c.alpha * t); }, 0.0, c.s,
          40000);
      CHECK(lhs == Catch::Approx(rhs).epsilon(1e-10));
    }
  }

  CHECK_THROWS_AS(kummer_1f1_int(0, 1.0), std::domain_error);
  CHECK_THROWS_AS(kummer_1f1_int(5, 1.0e6), std::range_error);
}

TEST_CASE("imhof_tail single-component reductions") {
  for (int d : {1, 2, 5, 480}) {
    for (double frac : {0.2, 0.8, 1.0, 1.5, 3.0}) {
      const double x = frac * d;
      QuadraticForm q{{{1.0, d}}};
      CHECK(imhof_tail(q, x) == Catch::Approx(1.0 - chi2_cdf(d, x)).margin(1e-9));
    }
  }
  // scaling: weight w is a pure change of units
  for (double w : {0.25, 3.0}) {
    QuadraticForm q{{{w, 4}}};
    const double x = 5.0;
    CHECK(imhof_tail(q, x) == Catch::Approx(1.0 - chi2_cdf(4, x / w)).margin(1e-9));
  }
  CHECK(imhof_tail(QuadraticForm{{{1.0, 2}}}, 0.0) == 1.0);
  CHECK_THROWS_AS(imhof_tail(QuadraticForm{}, 1.0), std::domain_error);
  CHECK_THROWS_AS(imhof_tail(QuadraticForm{{{-1.0, 2}}}, 1.0), std::domain_error);
}

TEST_CASE("imhof_tail two-rate case against analytic tail and Monte Carlo") {
  // Q = chi2_2 + 2 chi2_2 = Exp(mean 2) + Exp(mean 4)
  QuadraticForm q{{{1.0, 2}, {2.0, 2}}};
  const double x = 3.0;
  const double r1 = 0.5, r2 = 0.25;
  const double analytic = r2 / (r2 - r1) * std::exp(-r1 * x) + r1 / (r1 - r2) * std::exp(-r2 * x);
  const double got = imhof_tail(q, x);
  CHECK(got == Catch::Approx(analytic).margin(1e-9));

  std::mt19937_64 eng(12345);
  auto exp_draw = [&eng]() {
    return -std::log(1.0 - (eng() >> 11) * 0x1.0p-53);
  };
  const long n = 10'000'000;
  long hits = 0;
  for (long i = 0; i < n; ++i) {
    const double draw = 2.0 * exp_draw() + 4.0 * exp_draw();
    if (draw > x) ++hits;
  }
  const double mc = static_cast<double>(hits) / n;
  const double se = std::sqrt(analytic * (1.0 - analytic) / n);
  CHECK(std::fabs(mc - got) < 3.0 * se);
}

TEST_CASE("imhof_tail equals hypoexponential survival for distinct dof-2 spectra") {
  std::mt19937_64 eng(99);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 2 + static_cast<int>(eng() % 4);
    std::vector<double> w(n);
    for (auto& v : w) v = 0.3 + 4.0 * ((eng() >> 11) * 0x1.0p-53);
    // enforce distinctness
    bool ok = true;
    for (int i = 0; i < n && ok; ++i)
      for (int j = i + 1; j < n; ++j)
        if (std::fabs(w[i] - w[j]) < 1e-3) ok = false;
    if (!ok) continue;
    QuadraticForm q;
    std::vector<double> rates(n);
    for (int i = 0; i < n; ++i) {
      q.terms.push_back({w[i], 2});
      rates[i] = 1.0 / (2.0 * w[i]);
    }
    double mean = 0.0;
    for (double v : w) mean += 2.0 * v;
    const double x = mean * (0.5 + (eng() >> 11) * 0x1.0p-53);
    double analytic = 0.0;
    for (int l = 0; l < n; ++l) {
      double coef = 1.0;
      for (int j = 0; j < n; ++j)
        if (j != l) coef *= rates[j] / (rates[j] - rates[l]);
      analytic += coef * std::exp(-rates[l] * x);
    }
    CHECK(imhof_tail(q, x) == Catch::Approx(analytic).margin(1e-7));
  }
}

TEST_CASE("inverse_laplace recovers known pairs") {
  std::vector<double> grid;
  for (double t = 0.01; t <= 20.0; t *= 1.25) grid.push_back(t);

  SECTION("unit exponential, Talbot") {
    auto f = inverse_laplace(
        [](std::complex<double> s) { return 1.0 / (1.0 + s); }, grid);
    for (std::size_t i = 0; i < grid.size(); ++i)
      CHECK(f[i] == Catch::Approx(std::exp(-grid[i])).margin(1e-8));
  }

  SECTION("Erlang-2 and Erlang-5, Talbot") {
    auto f2 = inverse_laplace(
        [](std::complex<double> s) { return 1.0 / std::pow(1.0 + s, 2); }, grid);
    auto f5 = inverse_laplace(
        [](std::complex<double> s) { return 1.0 / std::pow(1.0 + s, 5); }, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double t = grid[i];
      CHECK(f2[i] == Catch::Approx(t * std::exp(-t)).margin(1e-8));
      CHECK(f5[i] == Catch::Approx(std::pow(t, 4) * std::exp(-t) / 24.0).margin(1e-8));
    }
  }

  SECTION("Euler method cross-check") {
    InverseLaplaceOptions o;
    o.method = InverseLaplaceOptions::Method::euler;
    auto f = inverse_laplace(
        [](std::complex<double> s) { return 1.0 / (1.0 + s); }, grid, o);
    for (std::size_t i = 0; i < grid.size(); ++i)
      CHECK(f[i] == Catch::Approx(std::exp(-grid[i])).margin(1e-6));
  }

  SECTION("nonnegativity and normalization for a density") {
    std::vector<double> wide;
    const int n = 4000;
    for (int i = 1; i <= n; ++i) wide.push_back(25.0 * i / n);
    auto f = inverse_laplace(
        [](std::complex<double> s) { return 1.0 / std::pow(1.0 + s, 2); }, wide);
    double integral = 0.5 * f[0] * wide[0];  // leading triangle from t = 0
    for (int i = 1; i < n; ++i)
      integral += 0.5 * (f[i] + f[i - 1]) * (wide[i] - wide[i - 1]);
    for (double v : f) CHECK(v >= -1e-9);
    CHECK(integral == Catch::Approx(1.0).margin(1e-3));
  }

  SECTION("input validation") {
    auto id = [](std::complex<double> s) { return 1.0 / (1.0 + s); };
    CHECK_THROWS_AS(inverse_laplace(id, {}), std::domain_error);
    CHECK_THROWS_AS(inverse_laplace(id, {1.0, 0.5}), std::domain_error);
    CHECK_THROWS_AS(inverse_laplace(id, {-1.0, 0.5}), std::domain_error);
  }
}
