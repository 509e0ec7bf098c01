// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "jcaslab/numerics.hpp"

namespace jcaslab {

// ------------------------------------------------------------------
// Scale spectrum: the law of a sum of independent exponentials, given as
// (scale, multiplicity) entries. The power-detector statistic conditioned on
// the per-block gains is exactly of this form.
// ------------------------------------------------------------------

struct ScaleSpectrum {
  struct Entry {
    double scale;      // mean of each exponential component, > 0
    int multiplicity;  // >= 1
  };
  std::vector<Entry> entries;

  void validate() const {
    if (entries.empty()) throw std::domain_error("ScaleSpectrum: empty");
    for (const auto& e : entries) {
      if (!(e.scale > 0.0)) throw std::domain_error("ScaleSpectrum: scales must be > 0");
      if (e.multiplicity < 1) throw std::domain_error("ScaleSpectrum: multiplicities must be >= 1");
    }
  }

  long total_multiplicity() const {
    long n = 0;
    for (const auto& e : entries) n += e.multiplicity;
    return n;
  }
};

// Merges entries whose scales differ by less than rel_eps (relative), sorted
// by descending scale. Repeated scales become Erlang blocks.
inline ScaleSpectrum cluster_scales(const ScaleSpectrum& sp, double rel_eps = 1e-9) {
  sp.validate();
  auto entries = sp.entries;
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.scale > b.scale; });
  ScaleSpectrum out;
  for (const auto& e : entries) {
    if (!out.entries.empty()) {
      auto& last = out.entries.back();
      if (last.scale - e.scale <= rel_eps * last.scale) {
        // weighted merge keeps the first two moments of the block exact-ish
        const double total = static_cast<double>(last.multiplicity) + e.multiplicity;
        last.scale = (last.scale * last.multiplicity + e.scale * e.multiplicity) / total;
        last.multiplicity += e.multiplicity;
        continue;
      }
    }
    out.entries.push_back(e);
  }
  return out;
}

// Detector-statistic spectrum from per-block gains: one entry
// (sigma_ns2 + K |c_l|^2 sigma_s2, 1) per block plus a merged noise entry
// (sigma_ns2, (K-1) N_block). Blocks with zero signal fold into the noise
// entry.
inline ScaleSpectrum spectrum_from_gains(const std::vector<double>& c_abs2, int K,
                                         double sigma_s2, double sigma_ns2) {
  if (!(sigma_ns2 > 0.0)) throw std::domain_error("spectrum_from_gains: sigma_ns2 must be > 0");
  if (K < 1) throw std::domain_error("spectrum_from_gains: K must be >= 1");
  if (c_abs2.empty()) throw std::domain_error("spectrum_from_gains: needs at least one block");
  if (!(sigma_s2 >= 0.0)) throw std::domain_error("spectrum_from_gains: sigma_s2 must be >= 0");
  const long n_block = static_cast<long>(c_abs2.size());
  ScaleSpectrum sp;
  long noise_mult = (static_cast<long>(K) - 1) * n_block;
  for (double c2 : c_abs2) {
    if (!(c2 >= 0.0)) throw std::domain_error("spectrum_from_gains: |c|^2 must be >= 0");
    const double sig = c2 * sigma_s2;
    if (sig == 0.0) ++noise_mult;
    else sp.entries.push_back({sigma_ns2 + K * sig, 1});
  }
  if (noise_mult > 0) sp.entries.push_back({sigma_ns2, static_cast<int>(noise_mult)});
  return sp;
}

// Hypoexponential partial-fraction coefficients for pairwise distinct rates:
// L_l = prod_{j != l} r_j / (r_j - r_l); sum_l L_l = 1.
inline std::vector<double> hypoexp_coeffs(const std::vector<double>& rates) {
  if (rates.empty()) throw std::domain_error("hypoexp_coeffs: empty rate list");
  for (double r : rates)
    if (!(r > 0.0)) throw std::domain_error("hypoexp_coeffs: rates must be > 0");
  const std::size_t n = rates.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::fabs(rates[i] - rates[j]) <= 1e-9 * std::max(rates[i], rates[j]))
        throw std::domain_error(
            "hypoexp_coeffs: degenerate rates; merge them into an Erlang block "
            "(repeated-scale spectrum) instead");
  std::vector<double> lam(n);
  for (std::size_t l = 0; l < n; ++l) {
    double p = 1.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != l) p *= rates[j] / (rates[j] - rates[l]);
    lam[l] = p;
  }
  return lam;
}

// ------------------------------------------------------------------
// Analytic density / survival of a scale spectrum.
//
// The clustered spectrum is split into the entry with the largest
// multiplicity (the Erlang base, rate ln_, multiplicity M_) and the rest.
// The rest is expanded by generalized partial fractions,
//   f_rest^(p) = sum_i sum_j c_ij / (p + r_i)^j,
// and each convolution against the Erlang base reduces to an Euler integral
//   K(a, b; s) = Int_0^x u^(a-1) (x-u)^b e^(-s u) du
//              = x^(a+b) B(a, b+1) 1F1(a; a+b+1; -s x),
// which is evaluated through the all-positive Kummer series (after a Kummer
// transformation when the argument is negative). Expanding only the rest
// keeps the cancellation bounded by the rest's own conditioning, which is
// measured and triggers an inverse-Laplace fallback when excessive.
// ------------------------------------------------------------------

struct SpectrumLawOptions {
  double cluster_eps = 1e-9;   // relative gap merged into Erlang blocks
  double cond_limit = 1e8;     // partial-fraction conditioning score limit
  int ilt_digits = 12;         // accuracy of the fallback inversion
};

namespace detail {

// ln 1F1(a; b; z) for b > a > 0 and any real z, always via a positive series.
inline double ln_kummer_general(double a, double b, double z) {
  if (z >= 0.0) return ln_kummer_series(a, b, z);
  return z + ln_kummer_series(b - a, b, -z);
}

struct PartialFraction {
  // c[i][j-1] multiplies 1/(p + r_i)^j, j = 1..mult_i
  std::vector<std::vector<double>> c;
  double condition_score = 1.0;  // sum_ij |c_ij| / r_i^j; exact value is 1
  bool finite = true;
};

// Generalized partial fractions of prod_k (r_k / (p + r_k))^(m_k) via Taylor
// expansion of the deflated product about each pole.
inline PartialFraction partial_fractions(const std::vector<ScaleSpectrum::Entry>& entries) {
  PartialFraction out;
  const std::size_t n = entries.size();
  out.c.resize(n);
  double score = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double ri = 1.0 / entries[i].scale;
    const int mi = entries[i].multiplicity;
    // a_0 = r_i^m_i prod_{k != i} (r_k / (r_k - r_i))^(m_k), tracked as log+sign
    double ln_a0 = mi * std::log(ri);
    double sign_a0 = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i) continue;
      const double rk = 1.0 / entries[k].scale;
      const double d = rk - ri;
      ln_a0 += entries[k].multiplicity * (std::log(rk) - std::log(std::fabs(d)));
      if (d < 0.0 && (entries[k].multiplicity & 1)) sign_a0 = -sign_a0;
    }
    std::vector<double> a(mi);
    a[0] = sign_a0 * std::exp(ln_a0);
    if (mi > 1) {
      // b_j = (-1)^(j+1) sum_{k != i} m_k / (r_k - r_i)^(j+1)
      std::vector<double> b(mi - 1);
      for (int j = 0; j < mi - 1; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          if (k == i) continue;
          const double d = (1.0 / entries[k].scale) - ri;
          s += entries[k].multiplicity / std::pow(d, j + 1);
        }
        b[j] = ((j & 1) ? 1.0 : -1.0) * s;
      }
      for (int m = 1; m < mi; ++m) {
        double s = 0.0;
        for (int j = 0; j < m; ++j) s += b[j] * a[m - 1 - j];
        a[m] = s / m;
      }
    }
    out.c[i].resize(mi);
    for (int j = 1; j <= mi; ++j) {
      const double cij = a[mi - j];
      out.c[i][j - 1] = cij;
      score += std::fabs(cij) / std::pow(ri, j);
      if (!std::isfinite(cij)) out.finite = false;
    }
  }
  out.condition_score = score;
  return out;
}

}  // namespace detail

class SpectrumLaw {
 public:
  explicit SpectrumLaw(const ScaleSpectrum& sp, SpectrumLawOptions opts = {})
      : opts_(opts), clustered_(cluster_scales(sp, opts.cluster_eps)) {
    // base = largest multiplicity (ties: smaller scale, i.e. later in the
    // descending order, so the noise block wins)
    std::size_t base = 0;
    for (std::size_t i = 1; i < clustered_.entries.size(); ++i)
      if (clustered_.entries[i].multiplicity >= clustered_.entries[base].multiplicity) base = i;
    base_ = clustered_.entries[base];
    for (std::size_t i = 0; i < clustered_.entries.size(); ++i)
      if (i != base) rest_.push_back(clustered_.entries[i]);

    if (!rest_.empty()) {
      pf_ = detail::partial_fractions(rest_);
      ilt_fallback_ = !pf_.finite || !(pf_.condition_score <= opts_.cond_limit);
      if (!ilt_fallback_) {
        // g[i][n] multiplies w^n e^(-r_i w) in the rest's survival function
        g_.resize(rest_.size());
        for (std::size_t i = 0; i < rest_.size(); ++i) {
          const double ri = 1.0 / rest_[i].scale;
          const int mi = rest_[i].multiplicity;
          g_[i].resize(mi);
          double ln_fact = 0.0;
          for (int n = 0; n < mi; ++n) {
            if (n > 0) ln_fact += std::log(static_cast<double>(n));
            double s = 0.0;
            for (int j = n + 1; j <= mi; ++j) s += pf_.c[i][j - 1] / std::pow(ri, j);
            g_[i][n] = s * std::exp(n * std::log(ri) - ln_fact);
            if (!std::isfinite(g_[i][n])) ilt_fallback_ = true;
          }
        }
      }
    }
  }

  const ScaleSpectrum& clustered() const { return clustered_; }
  bool ilt_fallback() const { return ilt_fallback_; }
  bool precision_warning() const { return precision_warning_; }
  double condition_score() const { return pf_.condition_score; }

  // MGF at -p, i.e. the Laplace transform of the density.
  std::complex<double> laplace(std::complex<double> p) const {
    std::complex<double> ln_f = 0.0;
    for (const auto& e : clustered_.entries) {
      const double r = 1.0 / e.scale;
      ln_f += static_cast<double>(e.multiplicity) * (std::log(r) - std::log(r + p));
    }
    return std::exp(ln_f);
  }

  double pdf(double x) const {
    if (!(x >= 0.0)) throw std::domain_error("SpectrumLaw::pdf: requires x >= 0");
    if (x == 0.0) {
      if (clustered_.entries.size() == 1 && base_.multiplicity == 1) return 1.0 / base_.scale;
      return 0.0;
    }
    if (ilt_fallback_) return pdf_ilt(x);
    const double ln_ = 1.0 / base_.scale;
    const int M = base_.multiplicity;
    if (rest_.empty()) {
      // pure Erlang
      return std::exp(M * std::log(ln_) + (M - 1) * std::log(x) - ln_ * x - ln_gamma(M));
    }
    const double base_ln_terms = M * std::log(ln_) - ln_gamma(M) - ln_ * x;
    double sum = 0.0, abs_sum = 0.0;
    for (std::size_t i = 0; i < rest_.size(); ++i) {
      const double ri = 1.0 / rest_[i].scale;
      const double s = ln_ - ri;
      for (int j = 1; j <= rest_[i].multiplicity; ++j) {
        const double cij = pf_.c[i][j - 1];
        if (cij == 0.0) continue;
        // (c_ij / G(j)) (ln^M / G(M)) e^(-ln x) x^(M+j-1) B(j, M) 1F1(j; M+j; s x),
        // the G(j) G(M) factors cancel against the beta function
        const double ln_term = base_ln_terms + (M + j - 1) * std::log(x) + ln_gamma(M) -
                               ln_gamma(M + j) + detail::ln_kummer_general(j, M + j, s * x);
        const double term = std::copysign(std::exp(ln_term), cij) * std::fabs(cij);
        sum += term;
        abs_sum += std::fabs(term);
      }
    }
    note_precision(sum, abs_sum);
    return std::max(sum, 0.0);
  }

  // P[S > x]
  double survival(double x) const {
    if (!(x >= 0.0)) throw std::domain_error("SpectrumLaw::survival: requires x >= 0");
    if (x == 0.0) return 1.0;
    if (ilt_fallback_) return survival_ilt(x);
    const double ln_ = 1.0 / base_.scale;
    const int M = base_.multiplicity;
    const double q_base = reg_gamma_upper(M, ln_ * x);
    if (rest_.empty()) return q_base;
    const double base_ln_terms = M * std::log(ln_) - ln_gamma(M);
    double sum = q_base, abs_sum = std::fabs(q_base);
    for (std::size_t i = 0; i < rest_.size(); ++i) {
      const double ri = 1.0 / rest_[i].scale;
      const double s = ln_ - ri;
      for (int n = 0; n < rest_[i].multiplicity; ++n) {
        const double gin = g_[i][n];
        if (gin == 0.0) continue;
        const double ln_term = base_ln_terms - ri * x + (M + n) * std::log(x) +
                               ln_gamma(M) + ln_gamma(n + 1.0) - ln_gamma(M + n + 1.0) +
                               detail::ln_kummer_general(M, M + n + 1, -s * x);
        const double term = std::copysign(std::exp(ln_term), gin) * std::fabs(gin);
        sum += term;
        abs_sum += std::fabs(term);
      }
    }
    note_precision(sum, abs_sum);
    return std::min(1.0, std::max(sum, 0.0));
  }

  double cdf(double x) const { return 1.0 - survival(x); }

 private:
  void note_precision(double sum, double abs_sum) const {
    if (std::fabs(sum) < 1e-9 * abs_sum) precision_warning_ = true;
  }

  double pdf_ilt(double x) const {
    InverseLaplaceOptions o;
    o.target_digits = opts_.ilt_digits;
    o.method = InverseLaplaceOptions::Method::euler;  // poles sit on the negative real axis
    auto v = inverse_laplace([this](std::complex<double> p) { return laplace(p); }, {x}, o);
    return std::max(v[0], 0.0);
  }

  double survival_ilt(double x) const {
    InverseLaplaceOptions o;
    o.target_digits = opts_.ilt_digits;
    o.method = InverseLaplaceOptions::Method::euler;
    auto v = inverse_laplace(
        [this](std::complex<double> p) { return (1.0 - laplace(p)) / p; }, {x}, o);
    return std::min(1.0, std::max(v[0], 0.0));
  }

  SpectrumLawOptions opts_;
  ScaleSpectrum clustered_;
  ScaleSpectrum::Entry base_{1.0, 1};
  std::vector<ScaleSpectrum::Entry> rest_;
  detail::PartialFraction pf_;
  std::vector<std::vector<double>> g_;
  bool ilt_fallback_ = false;
  mutable bool precision_warning_ = false;
};

// Density of the spectrum law on a grid.
inline std::vector<double> spectrum_pdf(const ScaleSpectrum& sp, const std::vector<double>& s_grid,
                                        SpectrumLawOptions opts = {}) {
  SpectrumLaw law(sp, opts);
  std::vector<double> out(s_grid.size());
  for (std::size_t i = 0; i < s_grid.size(); ++i) out[i] = law.pdf(s_grid[i]);
  return out;
}

// Density of (hypoexponential sum with the given distinct rates) + Erlang(M,
// lambda_n):
//   f_S(s) = sum_l L_l l_l ln^M e^(-l_l s) s^M / (M (M-1)!) 1F1(M; M+1; (l_l - ln) s),
// with the degenerate direction l_l -> ln handled by its limit
// I_l(s) = s^M / M.
inline std::vector<double> signal_noise_sum_pdf(const std::vector<double>& rates, int M,
                                                double lambda_n,
                                                const std::vector<double>& s_grid,
                                                double cluster_eps = 1e-9) {
  if (M < 1) throw std::domain_error("signal_noise_sum_pdf: requires M >= 1");
  if (!(lambda_n > 0.0)) throw std::domain_error("signal_noise_sum_pdf: requires lambda_n > 0");
  const auto lam = hypoexp_coeffs(rates);
  std::vector<double> out(s_grid.size(), 0.0);
  const double lgM = ln_gamma(M);
  for (std::size_t g = 0; g < s_grid.size(); ++g) {
    const double s = s_grid[g];
    if (!(s >= 0.0)) throw std::domain_error("signal_noise_sum_pdf: grid must be >= 0");
    if (s == 0.0) continue;  // density starts at zero (at least two summands)
    double acc = 0.0;
    for (std::size_t l = 0; l < rates.size(); ++l) {
      const double rl = rates[l];
      const double alpha = rl - lambda_n;
      double ln_f1 = 0.0;
      if (std::fabs(alpha) > cluster_eps * std::max(rl, lambda_n))
        ln_f1 = detail::ln_kummer_general(M, M + 1, alpha * s);
      const double ln_term = std::log(rl) + M * std::log(lambda_n) - rl * s +
                             M * std::log(s) - std::log(static_cast<double>(M)) - lgM + ln_f1;
      acc += std::copysign(std::exp(ln_term), lam[l]) * std::fabs(lam[l]);
    }
    out[g] = std::max(acc, 0.0);
  }
  return out;
}

// ------------------------------------------------------------------
// Moments, mixture kurtosis and the Gaussian (weighted-CLT) approximation.
// ------------------------------------------------------------------

struct MomentSummary {
  double mean = 0.0;
  double variance = 0.0;
};

inline MomentSummary moments_from_spectrum(const ScaleSpectrum& sp) {
  sp.validate();
  MomentSummary m;
  for (const auto& e : sp.entries) {
    m.mean += e.multiplicity * e.scale;
    m.variance += e.multiplicity * e.scale * e.scale;
  }
  return m;
}

// Effective kurtosis of a beamformed mixture of independent unit-power
// streams: kt = sum_u |b_u|^2 k_u + 2 |b_u| (1 - |b_u|), with sum |b_u| = 1.
inline double mixture_kurtosis(const std::vector<double>& beta_abs,
                               const std::vector<double>& kappa) {
  if (beta_abs.size() != kappa.size())
    throw std::domain_error("mixture_kurtosis: length mismatch");
  if (beta_abs.empty()) throw std::domain_error("mixture_kurtosis: empty");
  double total = 0.0;
  for (double b : beta_abs) {
    if (!(b >= 0.0)) throw std::domain_error("mixture_kurtosis: |beta| must be >= 0");
    total += b;
  }
  if (std::fabs(total - 1.0) > 1e-9)
    throw std::domain_error("mixture_kurtosis: allocation must sum to 1");
  double kt = 0.0;
  for (std::size_t u = 0; u < beta_abs.size(); ++u)
    kt += beta_abs[u] * beta_abs[u] * kappa[u] + 2.0 * beta_abs[u] * (1.0 - beta_abs[u]);
  return kt;
}

// Diagonal of the Hessian of the mixture kurtosis: 2 k_u - 4. Non-positive
// for constellation kurtosis in [1, 2], which makes the mixture concave and
// pushes the optimum to a vertex.
inline std::vector<double> kappa_hessian_diag(const std::vector<double>& kappa) {
  std::vector<double> out(kappa.size());
  for (std::size_t i = 0; i < kappa.size(); ++i) out[i] = 2.0 * kappa[i] - 4.0;
  return out;
}

// One-hot allocation at the smallest kurtosis (ties: lowest index).
inline std::vector<double> optimal_allocation(const std::vector<double>& kappa) {
  if (kappa.empty()) throw std::domain_error("optimal_allocation: empty");
  std::size_t best = 0;
  for (std::size_t i = 1; i < kappa.size(); ++i)
    if (kappa[i] < kappa[best]) best = i;
  std::vector<double> out(kappa.size(), 0.0);
  out[best] = 1.0;
  return out;
}

struct GaussianApprox {
  double mean = 0.0;
  double std = 1.0;
};

// Gaussian approximation of the detector statistic under a target, including
// the signal-noise mixing contribution 2 N K sigma_ns^2 sigma_s^2 lambda.
// lambda is the second moment E|c|^2 of the mixed gain and kappa_tilde its
// fourth moment E|c|^4 (equal to the normalized mixture kurtosis when
// lambda = 1).
inline GaussianApprox clt_approx(int K, int n_block, double sigma_s2, double sigma_ns2,
                                 double lambda, double kappa_tilde) {
  if (K < 1 || n_block < 1) throw std::domain_error("clt_approx: K, N_block must be >= 1");
  if (!(sigma_ns2 > 0.0)) throw std::domain_error("clt_approx: sigma_ns2 must be > 0");
  if (!(sigma_s2 >= 0.0)) throw std::domain_error("clt_approx: sigma_s2 must be >= 0");
  if (!(lambda > 0.0)) throw std::domain_error("clt_approx: lambda must be > 0");
  const double N = n_block;
  GaussianApprox g;
  g.mean = N * K * sigma_s2 * lambda + N * K * sigma_ns2;
  const double var = N * K * K * sigma_s2 * sigma_s2 * kappa_tilde +
                     N * K * sigma_ns2 * sigma_ns2 +
                     2.0 * N * K * sigma_ns2 * sigma_s2 * lambda;
  g.std = std::sqrt(var);
  return g;
}

inline double clt_pd(const GaussianApprox& g, double threshold) {
  if (!(g.std > 0.0)) throw std::domain_error("clt_pd: std must be > 0");
  return 1.0 - std_normal_cdf((threshold - g.mean) / g.std);
}

}  // namespace jcaslab
