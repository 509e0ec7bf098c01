// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "jcaslab/numerics.hpp"
#include "jcaslab/rng.hpp"

namespace jcaslab {

using cplx = std::complex<double>;

inline double deg2rad(double deg) { return deg * M_PI / 180.0; }

// ULA response toward azimuth phi (degrees), half-wavelength spacing:
// entry k = exp(j pi k sin(phi)), k = 0..K-1.
inline std::vector<cplx> steering(int K, double phi_deg) {
  if (K < 1) throw std::domain_error("steering: K must be >= 1");
  const double s = std::sin(deg2rad(phi_deg));
  std::vector<cplx> a(K);
  for (int k = 0; k < K; ++k) a[k] = std::polar(1.0, M_PI * k * s);
  return a;
}

// ------------------------------------------------------------------
// Constellations
// ------------------------------------------------------------------

struct Constellation {
  enum class Kind { qam16, psk, cm_continuous };
  Kind kind = Kind::cm_continuous;
  std::string name = "cm";
  int bits_per_symbol = 0;  // 0 for the continuous constant-modulus alphabet
  std::vector<cplx> points;
  std::vector<std::uint32_t> labels;  // bit pattern of points[i]
  double kurtosis = 1.0;              // E|x|^4 for unit power

  bool is_data_bearing() const { return bits_per_symbol > 0; }

  cplx draw(RngStream& rng, int* index = nullptr) const {
    if (kind == Kind::cm_continuous) {
      if (index) *index = -1;
      return std::polar(1.0, 2.0 * M_PI * rng.uniform());
    }
    const int i = static_cast<int>(rng.below(points.size()));
    if (index) *index = i;
    return points[i];
  }
};

namespace detail {

inline void finalize_constellation(Constellation& c) {
  if (c.kind == Constellation::Kind::cm_continuous) {
    c.kurtosis = 1.0;
    return;
  }
  const std::size_t n = c.points.size();
  if (n != (1u << c.bits_per_symbol))
    throw std::domain_error("constellation: point count must be 2^bits");
  cplx mean = 0.0;
  double p2 = 0.0, p4 = 0.0;
  for (const auto& x : c.points) {
    mean += x;
    p2 += std::norm(x);
    p4 += std::norm(x) * std::norm(x);
  }
  mean /= static_cast<double>(n);
  p2 /= static_cast<double>(n);
  p4 /= static_cast<double>(n);
  if (std::abs(mean) > 1e-12) throw std::domain_error("constellation: not zero-mean");
  if (std::fabs(p2 - 1.0) > 1e-12) throw std::domain_error("constellation: not unit power");
  c.kurtosis = p4;
  std::vector<bool> seen(n, false);
  for (auto l : c.labels) {
    if (l >= n || seen[l]) throw std::domain_error("constellation: labels not a bijection");
    seen[l] = true;
  }
}

}  // namespace detail

// "qam16", "cm" (continuous uniform phase) or "psk<N>" with N a power of two.
inline Constellation make_constellation(const std::string& kind) {
  Constellation c;
  c.name = kind;
  if (kind == "qam16") {
    c.kind = Constellation::Kind::qam16;
    c.bits_per_symbol = 4;
    // Gray mapping per axis: 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3
    const double inv = 1.0 / std::sqrt(10.0);
    const int pattern[4] = {0b00, 0b01, 0b11, 0b10};
    const double level[4] = {-3.0, -1.0, 1.0, 3.0};
    for (int i = 0; i < 4; ++i)
      for (int q = 0; q < 4; ++q) {
        c.points.emplace_back(level[i] * inv, level[q] * inv);
        c.labels.push_back(static_cast<std::uint32_t>((pattern[i] << 2) | pattern[q]));
      }
  } else if (kind == "cm") {
    c.kind = Constellation::Kind::cm_continuous;
    c.bits_per_symbol = 0;
  } else if (kind.rfind("psk", 0) == 0) {
    const int n = std::stoi(kind.substr(3));
    if (n < 2 || (n & (n - 1)) != 0)
      throw std::domain_error("constellation: psk order must be a power of two >= 2");
    c.kind = Constellation::Kind::psk;
    c.bits_per_symbol = static_cast<int>(std::round(std::log2(n)));
    for (int k = 0; k < n; ++k) {
      c.points.push_back(std::polar(1.0, 2.0 * M_PI * k / n));
      c.labels.push_back(static_cast<std::uint32_t>(k ^ (k >> 1)));  // Gray
    }
  } else {
    throw std::domain_error("constellation: unknown kind '" + kind + "'");
  }
  detail::finalize_constellation(c);
  return c;
}

// ------------------------------------------------------------------
// Scenario
// ------------------------------------------------------------------

enum class Allocation { cm, qam, qam_cm };

inline const char* to_string(Allocation a) {
  switch (a) {
    case Allocation::cm: return "cm";
    case Allocation::qam: return "qam";
    case Allocation::qam_cm: return "qam_cm";
  }
  return "?";
}

struct Scenario {
  int antennas = 16;      // K
  int block_length = 15;  // N_block
  int num_ues = 2;
  double sigma_s2 = 1.0;
  double sigma_ns2 = 3.1622776601683795;  // sqrt(10): -5 dB ratio to sigma_s2
  double sigma_nc2 = 0.01;
  double p_f = 0.01;
  std::vector<double> ue_angles_deg{50.0, 70.0};
  double sensing_lo_deg = -20.0, sensing_hi_deg = 20.0;
  double interference_lo_deg = 10.0, interference_hi_deg = 20.0;
  double sigma_c_target = 0.0;
  Allocation allocation = Allocation::cm;
  double sensing_power = -1.0;     // < 0: auto, sized for unit mean sector gain
  double mode_switch_sigma = 0.08; // qam_cm: interference handover point
  std::string ue_constellation = "qam16";
  std::string sensing_constellation = "cm";
  std::uint64_t seed = 1;
  long trials = 100000;
  int gain_draws = 50;        // symbol draws for the analytic detection routes
  double theta_step_deg = 1.0;

  int num_streams() const { return num_ues + 1; }

  void validate() const {
    if (antennas < 1) throw std::domain_error("scenario: antennas must be >= 1");
    if (block_length < 1) throw std::domain_error("scenario: block_length must be >= 1");
    if (num_ues < 1) throw std::domain_error("scenario: num_ues must be >= 1");
    if (static_cast<int>(ue_angles_deg.size()) != num_ues)
      throw std::domain_error("scenario: ue_angles size must equal num_ues");
    if (!(sigma_s2 >= 0.0)) throw std::domain_error("scenario: sigma_s2 must be >= 0");
    if (!(sigma_ns2 > 0.0)) throw std::domain_error("scenario: sigma_ns2 must be > 0");
    if (!(sigma_nc2 > 0.0)) throw std::domain_error("scenario: sigma_nc2 must be > 0");
    if (!(p_f > 0.0 && p_f < 1.0)) throw std::domain_error("scenario: p_f must be in (0,1)");
    for (double a : ue_angles_deg)
      if (!(a > -90.0 && a < 90.0)) throw std::domain_error("scenario: ue angle out of (-90,90)");
    if (!(sensing_lo_deg > -90.0 && sensing_hi_deg < 90.0 && sensing_lo_deg < sensing_hi_deg))
      throw std::domain_error("scenario: bad sensing sector");
    if (!(interference_lo_deg >= sensing_lo_deg && interference_hi_deg <= sensing_hi_deg &&
          interference_lo_deg < interference_hi_deg))
      throw std::domain_error("scenario: interference sector must lie inside the sensing sector");
    if (!(sigma_c_target >= 0.0)) throw std::domain_error("scenario: sigma_c_target must be >= 0");
    if (sensing_power >= 0.0 && !(sensing_power <= 0.95))
      throw std::domain_error("scenario: sensing_power must be <= 0.95");
    if (trials < 1) throw std::domain_error("scenario: trials must be >= 1");
    if (gain_draws < 1) throw std::domain_error("scenario: gain_draws must be >= 1");
    if (!(theta_step_deg > 0.0)) throw std::domain_error("scenario: theta_step must be > 0");
    make_constellation(ue_constellation);
    make_constellation(sensing_constellation);
  }

  std::vector<Constellation> stream_constellations() const {
    std::vector<Constellation> cs;
    for (int u = 0; u < num_ues; ++u) cs.push_back(make_constellation(ue_constellation));
    cs.push_back(make_constellation(sensing_constellation));
    return cs;
  }

  std::vector<double> sensing_theta_grid() const {
    std::vector<double> g;
    for (double t = sensing_lo_deg; t <= sensing_hi_deg + 1e-9; t += theta_step_deg)
      g.push_back(std::min(t, sensing_hi_deg));
    return g;
  }
};

// ------------------------------------------------------------------
// Precoder synthesis
// ------------------------------------------------------------------

struct Precoder {
  int antennas = 0;
  // columns[s][k]: weight of stream s at antenna k; stream num_ues is the
  // dedicated sensing column
  std::vector<std::vector<cplx>> columns;
  std::vector<int> roles;  // UE index, or -1 for the dedicated sensing column

  double total_power() const {
    double p = 0.0;
    for (const auto& col : columns)
      for (const auto& w : col) p += std::norm(w);
    return p;
  }
};

struct PrecoderReport {
  double sector_ripple_db = 0.0;   // max/min of total in-sector illumination
  double mean_sector_gain = 0.0;   // mean total power gain over the sector
  double sensing_power = 0.0;      // share of unit power spent on illumination
  bool flatness_ok = true;         // ripple <= 3 dB
  bool power_capped = false;       // auto sizing hit the cap
};

namespace detail {

// Solves the Hermitian positive-definite system M x = b (in-place Cholesky).
inline std::vector<cplx> solve_hermitian(std::vector<cplx> m, int n, std::vector<cplx> b) {
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      cplx s = m[i * n + j];
      for (int k = 0; k < j; ++k) s -= m[i * n + k] * std::conj(m[j * n + k]);
      if (i == j) {
        if (!(s.real() > 0.0)) throw numeric_error("solve_hermitian: matrix not positive definite");
        m[i * n + i] = std::sqrt(s.real());
      } else {
        m[i * n + j] = s / m[j * n + j].real();
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    cplx s = b[i];
    for (int k = 0; k < i; ++k) s -= m[i * n + k] * b[k];
    b[i] = s / m[i * n + i].real();
  }
  for (int i = n - 1; i >= 0; --i) {
    cplx s = b[i];
    for (int k = i + 1; k < n; ++k) s -= std::conj(m[k * n + i]) * b[k];
    b[i] = s / m[i * n + i].real();
  }
  return b;
}

inline std::vector<double> angle_grid(double lo, double hi, double step) {
  std::vector<double> g;
  for (double t = lo; t <= hi + 1e-9; t += step) g.push_back(std::min(t, hi));
  return g;
}

// Diffraction-limited transition width at an edge angle: one beamwidth
// (2/K in sine space) converted to degrees.
inline double guard_deg(int K, double edge_deg) {
  const double c = std::cos(deg2rad(edge_deg));
  return (2.0 / K) / std::max(c, 0.2) * 180.0 / M_PI;
}

// Least-squares beampattern fit over the full (-90, 90) grid against an
// amplitude target. Returns the raw (unnormalized) weight vector, so the
// synthesized pattern approximates the target amplitude directly. A fit
// restricted to the passband alone would degenerate to a single-element
// omni pattern.
template <class TargetFn>
inline std::vector<cplx> ls_beam(int K, double step, const TargetFn& target) {
  std::vector<cplx> normal(K * K, 0.0), rhs(K, 0.0);
  for (double ang = -89.0; ang <= 89.0 + 1e-9; ang += step) {
    const double t = target(ang);
    const auto a = steering(K, ang);
    for (int i = 0; i < K; ++i) {
      rhs[i] += t * std::conj(a[i]);
      for (int j = 0; j < K; ++j) normal[i * K + j] += std::conj(a[i]) * a[j];
    }
  }
  for (int i = 0; i < K; ++i) normal[i * K + i] += 1e-9;
  return solve_hermitian(std::move(normal), K, std::move(rhs));
}

// amplitude envelope: 1 inside [lo, hi], raised-cosine to 0 across a guard
// band outside each edge
inline double sector_envelope(int K, double lo, double hi, double ang) {
  const double glo = guard_deg(K, lo), ghi = guard_deg(K, hi);
  if (ang >= lo && ang <= hi) return 1.0;
  if (ang > hi && ang < hi + ghi) return 0.5 * (1.0 + std::cos(M_PI * (ang - hi) / ghi));
  if (ang < lo && ang > lo - glo) return 0.5 * (1.0 + std::cos(M_PI * (lo - ang) / glo));
  return 0.0;
}

// power fraction handed to the interference stream: 0 outside the
// interference interval, 1 inside, smooth sine-squared ramps of one guard
// width across interior boundaries (boundaries that coincide with the sector
// edge need no ramp)
inline double interference_weight(int K, const Scenario& sc, double ang) {
  const double g = guard_deg(K, sc.interference_lo_deg);
  double w = 1.0;
  if (sc.interference_lo_deg > sc.sensing_lo_deg + 1e-9) {
    const double d = ang - (sc.interference_lo_deg - 0.5 * g);
    if (d <= 0.0) return 0.0;
    if (d < g) w = std::min(w, std::pow(std::sin(0.5 * M_PI * d / g), 2.0));
  }
  if (sc.interference_hi_deg < sc.sensing_hi_deg - 1e-9) {
    const double d = (sc.interference_hi_deg + 0.5 * g) - ang;
    if (d <= 0.0) return 0.0;
    if (d < g) w = std::min(w, std::pow(std::sin(0.5 * M_PI * d / g), 2.0));
  }
  return w;
}

}  // namespace detail

// Per-stream power gains of the precoder toward theta: |a(theta)^T col_s|^2.
struct BeamGains {
  std::vector<double> raw;
  std::vector<double> normalized;  // scaled to sum to 1
  double total = 0.0;
};

inline BeamGains beamforming_gain(const Precoder& p, double theta_deg) {
  const auto a = steering(p.antennas, theta_deg);
  BeamGains g;
  for (const auto& col : p.columns) {
    cplx dot = 0.0;
    for (int k = 0; k < p.antennas; ++k) dot += a[k] * col[k];
    g.raw.push_back(std::norm(dot));
    g.total += std::norm(dot);
  }
  if (!(g.total > 1e-30))
    throw std::domain_error("beamforming_gain: degenerate illumination at this angle");
  g.normalized = g.raw;
  for (auto& v : g.normalized) v /= g.total;
  return g;
}

// Deterministic precoder: conjugate (matched) beams for the UEs plus
// least-squares flat sector illumination. The allocation mode picks which
// stream carries the sector:
//   cm     - the dedicated constant-modulus column
//   qam    - UE1's column (communication signal reused for sensing)
//   qam_cm - the interference part of the sector rides on UE1, the rest on
//            the dedicated column
// With sensing_power < 0 the illumination power is sized so the mean
// in-sector power gain is 1.
inline Precoder synthesize_precoder(const Scenario& sc, PrecoderReport* report = nullptr) {
  sc.validate();
  const int K = sc.antennas;
  const int S = sc.num_streams();
  PrecoderReport rep;

  struct Part {
    std::vector<cplx> beam;
    double mean_gain = 0.0;
    int stream = 0;  // column the part is added to
  };
  std::vector<Part> parts;
  const double step = sc.theta_step_deg;
  if (sc.allocation == Allocation::qam_cm) {
    Part low;  // non-interfering sub-sector on the dedicated column
    low.beam = detail::flat_sector_beam(K, sc.sensing_lo_deg, sc.interference_lo_deg, step,
                                        &low.mean_gain);
    low.stream = S - 1;
    parts.push_back(std::move(low));
    Part intf;  // interference sub-sector on UE1
    intf.beam = detail::flat_sector_beam(K, sc.interference_lo_deg, sc.interference_hi_deg, step,
                                         &intf.mean_gain);
    intf.stream = 0;
    parts.push_back(std::move(intf));
  } else {
    Part whole;
    whole.beam =
        detail::flat_sector_beam(K, sc.sensing_lo_deg, sc.sensing_hi_deg, step, &whole.mean_gain);
    whole.stream = (sc.allocation == Allocation::qam) ? 0 : S - 1;
    parts.push_back(std::move(whole));
  }

  // illumination power: per part, auto sizing targets unit mean power gain
  double auto_total = 0.0;
  for (const auto& pt : parts) auto_total += 1.0 / pt.mean_gain;
  double p_s = (sc.sensing_power >= 0.0) ? sc.sensing_power : auto_total;
  if (sc.sensing_power < 0.0 && p_s > 0.85) {
    p_s = 0.85;
    rep.power_capped = true;
  }
  rep.sensing_power = p_s;
  const double p_c = (1.0 - p_s) / sc.num_ues;

  Precoder p;
  p.antennas = K;
  p.columns.assign(S, std::vector<cplx>(K, 0.0));
  p.roles.resize(S);
  for (int u = 0; u < sc.num_ues; ++u) {
    p.roles[u] = u;
    const auto a = steering(K, sc.ue_angles_deg[u]);
    const double w = std::sqrt(p_c / K);
    for (int k = 0; k < K; ++k) p.columns[u][k] = w * std::conj(a[k]);
  }
  p.roles[S - 1] = -1;
  for (const auto& pt : parts) {
    const double share = (1.0 / pt.mean_gain) / auto_total;
    const double w = std::sqrt(p_s * share);
    for (int k = 0; k < K; ++k) p.columns[pt.stream][k] += w * pt.beam[k];
  }

  // exact unit total power
  const double scale = 1.0 / std::sqrt(p.total_power());
  for (auto& col : p.columns)
    for (auto& w : col) w *= scale;

  // sector flatness of the total illumination
  double gmin = std::numeric_limits<double>::infinity(), gmax = 0.0, gsum = 0.0;
  const auto grid = detail::angle_grid(sc.sensing_lo_deg, sc.sensing_hi_deg, step);
  for (double ang : grid) {
    const auto g = beamforming_gain(p, ang);
    gmin = std::min(gmin, g.total);
    gmax = std::max(gmax, g.total);
    gsum += g.total;
  }
  rep.sector_ripple_db = 10.0 * std::log10(gmax / gmin);
  rep.mean_sector_gain = gsum / grid.size();
  rep.flatness_ok = rep.sector_ripple_db <= 3.0;
  if (report) *report = rep;
  return p;
}

// ------------------------------------------------------------------
// Sampling
// ------------------------------------------------------------------

// streams x block_length table of iid symbols, streams mutually independent
inline std::vector<std::vector<cplx>> draw_symbols(const std::vector<Constellation>& constellations,
                                                   int n_block, RngStream& rng) {
  std::vector<std::vector<cplx>> x(constellations.size(), std::vector<cplx>(n_block));
  for (std::size_t u = 0; u < constellations.size(); ++u)
    for (int l = 0; l < n_block; ++l) x[u][l] = constellations[u].draw(rng);
  return x;
}

struct SensingSnapshot {
  int antennas = 0;
  int blocks = 0;
  std::vector<cplx> samples;  // index k + antennas * l
  bool target_present = false;
  double theta_deg = 0.0;
  std::vector<cplx> gains;  // c_l = a(theta)^T V x_l per block

  cplx at(int k, int l) const { return samples[static_cast<std::size_t>(l) * antennas + k]; }
};

// Per-block gains c_l = a(theta)^T V x_l for one symbol table.
inline std::vector<cplx> block_gains(const Precoder& p, double theta_deg,
                                     const std::vector<std::vector<cplx>>& x) {
  const int K = p.antennas;
  const int S = static_cast<int>(p.columns.size());
  const int N = static_cast<int>(x[0].size());
  const auto a = steering(K, theta_deg);
  // a^T V per stream, then mix symbols
  std::vector<cplx> av(S, 0.0);
  for (int s = 0; s < S; ++s)
    for (int k = 0; k < K; ++k) av[s] += a[k] * p.columns[s][k];
  std::vector<cplx> c(N, 0.0);
  for (int l = 0; l < N; ++l)
    for (int s = 0; s < S; ++s) c[l] += av[s] * x[s][l];
  return c;
}

// One observation window of the monostatic sensing channel. Swerling-1: the
// reflection coefficient is redrawn per block, constant across antennas.
inline SensingSnapshot sample_sensing_snapshot(const Scenario& sc, const Precoder& p,
                                               double theta_deg, bool target,
                                               RngStream& rng) {
  if (!(theta_deg > -90.0 && theta_deg < 90.0))
    throw std::domain_error("sample_sensing_snapshot: theta out of (-90,90)");
  const int K = sc.antennas, N = sc.block_length;
  SensingSnapshot snap;
  snap.antennas = K;
  snap.blocks = N;
  snap.target_present = target;
  snap.theta_deg = theta_deg;
  snap.samples.resize(static_cast<std::size_t>(K) * N);
  const auto x = draw_symbols(sc.stream_constellations(), N, rng);
  snap.gains = block_gains(p, theta_deg, x);
  const auto a_rx = steering(K, theta_deg);
  for (int l = 0; l < N; ++l) {
    const cplx amp = target ? rng.cgaussian(sc.sigma_s2) * snap.gains[l] : cplx(0.0, 0.0);
    for (int k = 0; k < K; ++k)
      snap.samples[static_cast<std::size_t>(l) * K + k] =
          amp * a_rx[k] + rng.cgaussian(sc.sigma_ns2);
  }
  return snap;
}

// Effective scalar channel of one UE: per-stream taps through a single
// Rayleigh direct path at the UE's angle, plus (for UE1) the target
// reflection riding on the stream that illuminates the interference sector.
struct EffectiveChannel {
  std::vector<cplx> taps;      // direct taps per stream
  cplx reflection{0.0, 0.0};   // target tap, CN(0, sigma_c_target^2)
  int target_stream = -1;      // stream the reflection multiplies; -1 if none
  double noise_var = 0.0;

  double h_target_abs() const { return std::abs(reflection); }

  // taps with the reflection folded into its stream
  std::vector<cplx> effective_taps() const {
    auto t = taps;
    if (target_stream >= 0) t[target_stream] += reflection;
    return t;
  }
};

// Stream whose beam covers the interference sector under the given mode.
inline int interfering_stream(const Scenario& sc) {
  switch (sc.allocation) {
    case Allocation::cm: return sc.num_ues;
    case Allocation::qam: return 0;
    case Allocation::qam_cm:
      return sc.sigma_c_target >= sc.mode_switch_sigma ? 0 : sc.num_ues;
  }
  return sc.num_ues;
}

inline EffectiveChannel sample_comm_channel(const Scenario& sc, const Precoder& p,
                                            RngStream& rng, int ue_index = 0) {
  if (ue_index < 0 || ue_index >= sc.num_ues)
    throw std::domain_error("sample_comm_channel: bad UE index");
  EffectiveChannel ch;
  ch.noise_var = sc.sigma_nc2;
  const auto a = steering(sc.antennas, sc.ue_angles_deg[ue_index]);
  const cplx fading = rng.cgaussian(1.0);  // single direct path, unit variance
  ch.taps.resize(p.columns.size());
  for (std::size_t s = 0; s < p.columns.size(); ++s) {
    cplx dot = 0.0;
    for (int k = 0; k < sc.antennas; ++k) dot += a[k] * p.columns[s][k];
    ch.taps[s] = fading * dot;
  }
  if (ue_index == 0 && sc.sigma_c_target > 0.0) {
    ch.reflection = rng.cgaussian(sc.sigma_c_target * sc.sigma_c_target);
    ch.target_stream = interfering_stream(sc);
  }
  return ch;
}

}  // namespace jcaslab
