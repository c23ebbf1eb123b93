// SPDX-License-Identifier: Apache-2.0

#include "riswsr/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "riswsr/error.hpp"
#include "riswsr/precoding.hpp"

namespace riswsr::channel {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double db_to_power(double db) { return std::pow(10.0, db / 10.0); }
double db_to_amplitude(double db) { return std::pow(10.0, db / 20.0); }

struct Direction {
  double ux = 0.0;
  double uy = 0.0;
};

class SampleRng {
 public:
  explicit SampleRng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  // Circular complex Gaussian with E|z|^2 = variance.
  cplx complex_gaussian(double variance) {
    std::normal_distribution<double> n(0.0, std::sqrt(variance / 2.0));
    const double re = n(engine_);
    const double im = n(engine_);
    return {re, im};
  }
  double exponential() { return std::exponential_distribution<double>(1.0)(engine_); }
  // Direction cosines uniform on the disk of radius r.
  Direction disk(double r) {
    const double rho = r * std::sqrt(uniform(0.0, 1.0));
    const double a = uniform(0.0, kTwoPi);
    return {rho * std::cos(a), rho * std::sin(a)};
  }

 private:
  std::mt19937_64 engine_;
};

cplx ris_steering(const GeometryConfig& geo, std::size_t n, Direction dir) {
  const double r = static_cast<double>(n / geo.ris_cols);
  const double c = static_cast<double>(n % geo.ris_cols);
  return std::polar(1.0, kTwoPi * geo.ris_spacing * (r * dir.uy + c * dir.ux));
}

cplx bs_steering(const GeometryConfig& geo, std::size_t m, double u) {
  return std::polar(1.0, kTwoPi * geo.bs_spacing * static_cast<double>(m) * u);
}

// N x M sum of planar-wavefront paths, E|h_nm|^2 = gain^2.
ComplexMatrix geometric_h(const GeometryConfig& geo, std::size_t paths, double gain,
                          SampleRng& rng) {
  const std::size_t n_el = geo.elements();
  ComplexMatrix h(n_el, geo.bs_antennas);
  for (std::size_t k = 0; k < paths; ++k) {
    const Direction at_ris = rng.disk(0.9);
    const double at_bs = rng.uniform(-0.9, 0.9);
    const cplx alpha = rng.complex_gaussian(gain * gain / static_cast<double>(paths));
    for (std::size_t n = 0; n < n_el; ++n) {
      const cplx a = alpha * ris_steering(geo, n, at_ris);
      for (std::size_t m = 0; m < geo.bs_antennas; ++m) h(n, m) += a * bs_steering(geo, m, at_bs);
    }
  }
  return h;
}

void fill_iid(ComplexMatrix& m, double variance, SampleRng& rng) {
  for (cplx& z : m.entries()) z = rng.complex_gaussian(variance);
}

std::vector<double> simplex_weights(std::size_t users, SampleRng& rng) {
  std::vector<double> w(users);
  double total = 0.0;
  for (double& x : w) {
    x = rng.exponential();
    total += x;
  }
  for (double& x : w) x /= total;
  // Put the rounding residue on the largest entry so the sum is 1 to an ulp.
  double sum = 0.0;
  for (double x : w) sum += x;
  *std::max_element(w.begin(), w.end()) += 1.0 - sum;
  return w;
}

void validate_generator(const GeometryConfig&, Regime regime, const GeneratorConfig& cfg) {
  if (!(cfg.gain_scale > 0.0) || !(cfg.power_budget > 0.0) || cfg.noise_power < 0.0 ||
      cfg.coupling_strength < 0.0 || cfg.user_spread < 0.0) {
    throw ConfigError("generator: gain_scale and power_budget must be > 0; noise_power, "
                      "coupling_strength and user_spread must be >= 0");
  }
  if (regime != Regime::iid) {
    if (cfg.paths_h == 0 || cfg.paths_g == 0 || cfg.paths_d == 0) {
      throw ConfigError("generator: paths_h, paths_g and paths_d must be >= 1");
    }
  }
}

}  // namespace

void GeometryConfig::validate() const {
  if (bs_antennas < 1) throw ConfigError("geometry: bs_antennas must be >= 1");
  if (ris_rows < 1 || ris_cols < 1) throw ConfigError("geometry: RIS grid must be non-empty");
  if (users < 2) throw ConfigError("geometry: users must be >= 2");
  if (!(carrier_frequency > 0.0) || !(bs_spacing > 0.0) || !(ris_spacing > 0.0)) {
    throw ConfigError("geometry: frequency and spacings must be > 0");
  }
}

std::string to_string(Regime r) {
  switch (r) {
    case Regime::deterministic:
      return "deterministic";
    case Regime::deterministic_plus_scatter:
      return "deterministic_plus_scatter";
    case Regime::iid:
      return "iid";
  }
  return "unknown";
}

Regime regime_from_string(const std::string& s) {
  if (s == "deterministic") return Regime::deterministic;
  if (s == "deterministic_plus_scatter") return Regime::deterministic_plus_scatter;
  if (s == "iid") return Regime::iid;
  throw ConfigError("unknown regime '" + s +
                    "' (expected deterministic, deterministic_plus_scatter or iid)");
}

void ChannelSample::validate() const {
  const std::size_t n = h.rows();
  const std::size_t m = h.cols();
  const std::size_t u = g.rows();
  if (g.cols() != n || d.rows() != u || d.cols() != m || s_ii.rows() != n || s_ii.cols() != n ||
      weights.size() != u) {
    throw DimensionError("ChannelSample: inconsistent shapes H " + h.shape_string() + ", G " +
                         g.shape_string() + ", D " + d.shape_string() + ", S_II " +
                         s_ii.shape_string() + ", w " + std::to_string(weights.size()));
  }
  if (!h.all_finite() || !g.all_finite() || !d.all_finite() || !s_ii.all_finite()) {
    throw NonFiniteError("ChannelSample: non-finite channel entry");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (s_ii(i, i) != cplx{}) throw DomainError("ChannelSample: S_II diagonal must be zero");
  }
  if (spectral_norm(s_ii) >= kCouplingNormBound) {
    throw DomainError("ChannelSample: ||S_II||_2 must be < 0.9");
  }
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw DomainError("ChannelSample: weights must be nonnegative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw DomainError("ChannelSample: weights must sum to 1");
  if (!(noise_power > 0.0) || !(power_budget > 0.0)) {
    throw DomainError("ChannelSample: noise power and power budget must be > 0");
  }
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  // splitmix64 finalizer over a Weyl-sequence offset.
  std::uint64_t z = master + (index + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

CouplingMatrix generate_s_ii(const GeometryConfig& geometry, double coupling_strength,
                             std::uint64_t /*master_seed*/) {
  if (coupling_strength < 0.0) throw DomainError("generate_s_ii: coupling strength must be >= 0");
  const std::size_t n = geometry.elements();
  CouplingMatrix out;
  out.s_ii = ComplexMatrix(n, n);
  if (coupling_strength == 0.0) return out;
  for (std::size_t p = 0; p < n; ++p) {
    const double rp = static_cast<double>(p / geometry.ris_cols);
    const double cp = static_cast<double>(p % geometry.ris_cols);
    for (std::size_t q = 0; q < n; ++q) {
      if (p == q) continue;
      const double dr = rp - static_cast<double>(q / geometry.ris_cols);
      const double dc = cp - static_cast<double>(q % geometry.ris_cols);
      const double dist = geometry.ris_spacing * std::hypot(dr, dc);
      out.s_ii(p, q) = std::polar(coupling_strength / (kTwoPi * dist), kTwoPi * dist);
    }
  }
  // Power iteration approaches the norm from below, so the guard keeps a small margin.
  constexpr double kMargin = 1e-3;
  out.spectral_norm_before = linalg::spectral_norm(out.s_ii, 1000);
  if (out.spectral_norm_before >= kCouplingNormBound * (1.0 - kMargin)) {
    out.rescale = kCouplingNormBound * (1.0 - kMargin) / out.spectral_norm_before;
    out.s_ii *= out.rescale;
  }
  return out;
}

std::vector<ChannelSample> generate_channels(const GeometryConfig& geometry, Regime regime,
                                             std::size_t count, std::uint64_t master_seed,
                                             const GeneratorConfig& cfg) {
  geometry.validate();
  validate_generator(geometry, regime, cfg);
  if (count == 0) throw DomainError("generate_channels: count must be >= 1");

  const std::size_t n_el = geometry.elements();
  const std::size_t users = geometry.users;
  const std::size_t m = geometry.bs_antennas;
  const double g2 = cfg.gain_scale * cfg.gain_scale;
  // The direct link is set relative to the incoherent RIS link.
  const double d_rms =
      g2 * std::sqrt(static_cast<double>(n_el)) * db_to_amplitude(cfg.direct_blockage_db);

  const std::uint64_t deployment =
      cfg.deployment_seed.value_or(derive_seed(master_seed, 0xDE9107ULL));
  const CouplingMatrix coupling = generate_s_ii(geometry, cfg.coupling_strength, deployment);

  ComplexMatrix shared_h;
  Direction cluster;
  if (regime != Regime::iid) {
    SampleRng rng(derive_seed(deployment, 0));
    shared_h = geometric_h(geometry, cfg.paths_h, cfg.gain_scale, rng);
    cluster = rng.disk(0.5);
  }

  std::vector<ChannelSample> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    ChannelSample& s = out[i];
    s.seed = derive_seed(master_seed, i);
    s.regime = regime;
    s.power_budget = cfg.power_budget;
    s.noise_power = cfg.noise_power > 0.0 ? cfg.noise_power : 1.0;
    s.s_ii = coupling.s_ii;
    SampleRng rng(s.seed);

    if (regime == Regime::iid) {
      s.h = ComplexMatrix(n_el, m);
      s.g = ComplexMatrix(users, n_el);
      s.d = ComplexMatrix(users, m);
      fill_iid(s.h, g2, rng);
      fill_iid(s.g, g2, rng);
      fill_iid(s.d, d_rms * d_rms, rng);
    } else {
      s.h = shared_h;
      s.g = ComplexMatrix(users, n_el);
      s.d = ComplexMatrix(users, m);
      const double los = db_to_power(cfg.los_factor_db);
      const double path_norm = los + static_cast<double>(cfg.paths_g - 1);
      for (std::size_t u = 0; u < users; ++u) {
        for (std::size_t k = 0; k < cfg.paths_g; ++k) {
          Direction dir;
          double power;
          if (k == 0) {
            dir = {cluster.ux + rng.uniform(-cfg.user_spread, cfg.user_spread),
                   cluster.uy + rng.uniform(-cfg.user_spread, cfg.user_spread)};
            power = los / path_norm;
          } else {
            dir = rng.disk(0.9);
            power = 1.0 / path_norm;
          }
          const cplx beta = rng.complex_gaussian(g2 * power);
          for (std::size_t n = 0; n < n_el; ++n) s.g(u, n) += beta * ris_steering(geometry, n, dir);
        }
        for (std::size_t k = 0; k < cfg.paths_d; ++k) {
          const double at_bs = rng.uniform(-0.9, 0.9);
          const cplx gamma =
              rng.complex_gaussian(d_rms * d_rms / static_cast<double>(cfg.paths_d));
          for (std::size_t mm = 0; mm < m; ++mm) s.d(u, mm) += gamma * bs_steering(geometry, mm, at_bs);
        }
      }
      if (regime == Regime::deterministic_plus_scatter) {
        const double var = g2 * db_to_power(cfg.scatter_relative_db);
        for (cplx& z : s.g.entries()) z += rng.complex_gaussian(var);
      }
    }
    s.weights = simplex_weights(users, rng);
  }

  if (!(cfg.noise_power > 0.0)) {
    const double sigma2 =
        calibrate_noise_power(out, cfg.target_snr_db, derive_seed(master_seed, 0xCA11BULL));
    for (ChannelSample& s : out) s.noise_power = sigma2;
  }
  return out;
}

double calibrate_noise_power(std::span<const ChannelSample> samples, double target_snr_db,
                             std::uint64_t seed) {
  if (samples.empty()) throw DomainError("calibrate_noise_power: no samples");
  double signal = 0.0;
  std::size_t terms = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const ChannelSample& s = samples[i];
    const std::vector<double> phases =
        precoding::random_phase_baseline(s.elements(), derive_seed(seed, i));
    const ComplexMatrix c = cascaded_channel(s, phases, CascadeMode::closed_form);
    const ComplexMatrix v = precoding::mrt_precoder(c, s.power_budget);
    const ComplexMatrix l = linalg::cmatmul(c, v);
    for (std::size_t u = 0; u < s.users(); ++u) {
      signal += std::norm(l(u, u));
      ++terms;
    }
  }
  const double mean_signal = signal / static_cast<double>(terms);
  if (!(mean_signal > 0.0)) throw DomainError("calibrate_noise_power: zero received power");
  return mean_signal / db_to_power(target_snr_db);
}

namespace {

void check_phases(const ChannelSample& s, std::span<const double> phases) {
  if (phases.size() != s.elements()) {
    throw DimensionError("cascaded_channel: " + std::to_string(phases.size()) +
                         " phases for " + std::to_string(s.elements()) + " elements");
  }
  if (s.g.cols() != s.elements() || s.d.rows() != s.users() || s.d.cols() != s.antennas()) {
    throw DimensionError("cascaded_channel: H " + s.h.shape_string() + ", G " +
                         s.g.shape_string() + ", D " + s.d.shape_string());
  }
  for (double p : phases) {
    if (!std::isfinite(p)) throw NonFiniteError("cascaded_channel: non-finite phase");
  }
}

std::vector<cplx> unit_diagonal(std::span<const double> phases) {
  std::vector<cplx> phi(phases.size());
  for (std::size_t n = 0; n < phases.size(); ++n) phi[n] = {std::cos(phases[n]), std::sin(phases[n])};
  return phi;
}

ComplexMatrix scale_rows(const ComplexMatrix& a, std::span<const cplx> diag) {
  ComplexMatrix out = a;
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (cplx& z : out.row(r)) z *= diag[r];
  return out;
}

}  // namespace

ComplexMatrix cascaded_channel(const ChannelSample& sample, std::span<const double> phases,
                               CascadeMode mode) {
  check_phases(sample, phases);
  const std::vector<cplx> phi = unit_diagonal(phases);
  const ComplexMatrix phi_h = scale_rows(sample.h, phi);

  if (mode == CascadeMode::no_coupling) {
    ComplexMatrix g_phi = sample.g;
    for (std::size_t u = 0; u < g_phi.rows(); ++u)
      for (std::size_t n = 0; n < g_phi.cols(); ++n) g_phi(u, n) *= phi[n];
    return sample.d + linalg::cmatmul(g_phi, sample.h);
  }

  // X (I - Phi S_II) = G, C = D + X Phi H.
  const std::size_t n_el = sample.elements();
  ComplexMatrix a = scale_rows(sample.s_ii, phi);
  a *= -1.0;
  for (std::size_t n = 0; n < n_el; ++n) a(n, n) += 1.0;
  const linalg::LUFactorization f = linalg::lu_factor(std::move(a));
  const ComplexMatrix x = linalg::lu_solve(f, sample.g, linalg::Side::right);
  ComplexMatrix c = sample.d + linalg::cmatmul(x, phi_h);
  if (mode == CascadeMode::closed_form) return c;

  // T_TT = H^T (I - Phi S_II)^{-1} Phi H, C <- C (I + T_TT)^{-1}.
  const ComplexMatrix y = linalg::lu_solve(f, phi_h, linalg::Side::left);
  ComplexMatrix t_tt = linalg::cmatmul(sample.h.transpose(), y);
  for (std::size_t i = 0; i < t_tt.rows(); ++i) t_tt(i, i) += 1.0;
  return linalg::lu_solve(linalg::lu_factor(std::move(t_tt)), c, linalg::Side::right);
}

ComplexMatrix oracle_channel_general(const ChannelSample& sample, std::span<const double> phases) {
  check_phases(sample, phases);
  const std::size_t m = sample.antennas();
  const std::size_t n = sample.elements();
  const std::size_t u = sample.users();
  const std::size_t total = m + n + u;
  const std::size_t oi = m;      // offset of the RIS block
  const std::size_t orx = m + n; // offset of the receiver block

  ComplexMatrix s(total, total);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      s(oi + i, j) = sample.h(i, j);   // S_IT
      s(j, oi + i) = sample.h(i, j);   // S_TI
    }
  for (std::size_t i = 0; i < u; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      s(orx + i, j) = sample.d(i, j);  // S_RT
      s(j, orx + i) = sample.d(i, j);  // S_TR
    }
    for (std::size_t j = 0; j < n; ++j) {
      s(orx + i, oi + j) = sample.g(i, j);  // S_RI
      s(oi + j, orx + i) = sample.g(i, j);  // S_IR
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s(oi + i, oi + j) = sample.s_ii(i, j);

  // I - Lambda S with Lambda = diag(0, Phi, 0).
  ComplexMatrix a = ComplexMatrix::identity(total);
  for (std::size_t i = 0; i < n; ++i) {
    const cplx p{std::cos(phases[i]), std::sin(phases[i])};
    for (std::size_t j = 0; j < total; ++j) a(oi + i, j) -= p * s(oi + i, j);
  }
  const ComplexMatrix t = linalg::lu_solve(linalg::lu_factor(std::move(a)), s, linalg::Side::right);

  ComplexMatrix t_rt(u, m);
  ComplexMatrix i_plus_t_tt(m, m);
  for (std::size_t i = 0; i < u; ++i)
    for (std::size_t j = 0; j < m; ++j) t_rt(i, j) = t(orx + i, j);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) i_plus_t_tt(i, j) = t(i, j);
    i_plus_t_tt(i, i) += 1.0;
  }
  return linalg::lu_solve(linalg::lu_factor(std::move(i_plus_t_tt)), t_rt, linalg::Side::right);
}

double friis_gain(double frequency, double distance) {
  if (!(distance > 0.0)) throw DomainError("friis_gain: distance must be > 0");
  if (!(frequency > 0.0)) throw DomainError("friis_gain: frequency must be > 0");
  const double lambda = kSpeedOfLight / frequency;
  const double a = lambda / (4.0 * std::numbers::pi * distance);
  return a * a;
}

namespace {

// 20 log10 |x| with the amplitude floored relative to `peak`.
double floored_db(cplx x, double peak) {
  const double floor_amp = db_to_amplitude(kLogFloorDb) * peak;
  const double a = std::max(std::abs(x), floor_amp);
  return a > 0.0 ? 20.0 * std::log10(a) : 0.0;
}

double phase_of(cplx x) {
  const double p = std::atan2(x.imag(), x.real());
  return p == -std::numbers::pi ? std::numbers::pi : p;
}

struct Moments {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::size_t count = 0;
  void add(double x) {
    sum += x;
    sum_sq += x * x;
    ++count;
  }
  std::pair<double, double> mean_std() const {
    const double mean = sum / static_cast<double>(count);
    const double var = std::max(sum_sq / static_cast<double>(count) - mean * mean, 0.0);
    const double sd = std::sqrt(var);
    return {mean, sd > 0.0 ? sd : 1.0};
  }
};

}  // namespace

FeatureStats compute_feature_stats(std::span<const ChannelSample> samples) {
  if (samples.empty()) throw DomainError("compute_feature_stats: no samples");
  Moments g_mom;
  Moments j_mom;
  for (const ChannelSample& s : samples) {
    const ComplexMatrix j = linalg::cmatmul(s.d, linalg::pinv_left(s.h));
    const double g_peak = s.g.max_abs();
    const double j_peak = j.max_abs();
    for (cplx z : s.g.entries()) g_mom.add(floored_db(z, g_peak));
    for (cplx z : j.entries()) j_mom.add(floored_db(z, j_peak));
  }
  FeatureStats st;
  std::tie(st.g_mean_db, st.g_std_db) = g_mom.mean_std();
  std::tie(st.j_mean_db, st.j_std_db) = j_mom.mean_std();
  return st;
}

ad::Tensor compute_features(const ChannelSample& sample, const FeatureStats& stats,
                            std::optional<std::span<const std::size_t>> anchors) {
  const std::size_t n_el = sample.elements();
  const std::size_t users = sample.users();
  if (sample.g.cols() != n_el || sample.d.rows() != users || sample.weights.size() != users) {
    throw DimensionError("compute_features: inconsistent sample shapes");
  }
  std::vector<std::size_t> cols;
  if (anchors) {
    cols.assign(anchors->begin(), anchors->end());
    for (std::size_t n : cols) {
      if (n >= n_el) throw DimensionError("compute_features: anchor index out of range");
    }
  } else {
    cols.resize(n_el);
    for (std::size_t n = 0; n < n_el; ++n) cols[n] = n;
  }
  const ComplexMatrix j = linalg::cmatmul(sample.d, linalg::pinv_left(sample.h));
  const double g_peak = sample.g.max_abs();
  const double j_peak = j.max_abs();

  const std::size_t sel = cols.size();
  ad::Tensor f({kInputFeatures, sel, users});
  auto at = [&](std::size_t feat, std::size_t n, std::size_t u) -> double& {
    return f.data[(feat * sel + n) * users + u];
  };
  for (std::size_t k = 0; k < sel; ++k) {
    const std::size_t n = cols[k];
    for (std::size_t u = 0; u < users; ++u) {
      const cplx g = sample.g(u, n);
      const cplx jj = j(u, n);
      at(0, k, u) = sample.weights[u];
      at(1, k, u) = (floored_db(g, g_peak) - stats.g_mean_db) / stats.g_std_db;
      at(2, k, u) = phase_of(g);
      at(3, k, u) = (floored_db(jj, j_peak) - stats.j_mean_db) / stats.j_std_db;
      at(4, k, u) = phase_of(jj);
    }
  }
  return f;
}

std::vector<std::size_t> anchor_indices(const GeometryConfig& geometry, std::size_t anchor_rows,
                                        std::size_t anchor_cols, std::size_t expansions) {
  std::size_t factor = 1;
  for (std::size_t e = 0; e < expansions; ++e) factor *= 3;
  if (anchor_rows == 0 || anchor_cols == 0 || anchor_rows * factor != geometry.ris_rows ||
      anchor_cols * factor != geometry.ris_cols) {
    throw ConfigError("anchor grid " + std::to_string(anchor_rows) + "x" +
                      std::to_string(anchor_cols) + " expanded " + std::to_string(expansions) +
                      " times does not tile the " + std::to_string(geometry.ris_rows) + "x" +
                      std::to_string(geometry.ris_cols) + " RIS");
  }
  const std::size_t centre = (factor - 1) / 2;
  std::vector<std::size_t> out;
  out.reserve(anchor_rows * anchor_cols);
  for (std::size_t r = 0; r < anchor_rows; ++r)
    for (std::size_t c = 0; c < anchor_cols; ++c)
      out.push_back((factor * r + centre) * geometry.ris_cols + factor * c + centre);
  return out;
}

}  // namespace riswsr::channel
