#pragma once

// Stochastic environment of the emitter: spectral diffusion, charge state,
// the detuning-to-phase conversion, and single-shot spin readout statistics.

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

#include "nvlink/core/error.hpp"
#include "nvlink/nvmodel.hpp"
#include "nvlink/qcore.hpp"

namespace nvlink::noise {

enum class ChargeState { NVMinus, NV0 };

inline const char* to_string(ChargeState c) { return c == ChargeState::NVMinus ? "NV-" : "NV0"; }

struct NoiseEnvironment {
  double detuning_hz = 0.0;
  ChargeState charge = ChargeState::NVMinus;
  double sigma_diffusion_hz = 0.0;
  double p_ionize = 0.0;  // per measurement block

  void validate() const {
    if (!(sigma_diffusion_hz >= 0.0)) throw ConfigError("noise.sigma_diffusion_hz must be >= 0");
    if (!(p_ionize >= 0.0 && p_ionize <= 1.0)) throw ConfigError("noise.p_ionize must be in [0, 1]");
  }
};

// delta ~ Normal(0, sigma); stored in the environment.
template <class Rng>
double sample_detuning(NoiseEnvironment& env, Rng& rng) {
  if (env.sigma_diffusion_hz <= 0.0) {
    env.detuning_hz = 0.0;
    return 0.0;
  }
  std::normal_distribution<double> nd(0.0, env.sigma_diffusion_hz);
  env.detuning_hz = nd(rng);
  return env.detuning_hz;
}

// Ornstein-Uhlenbeck step with per-step correlation `rho`; stationary RMS is
// sigma_diffusion.
template <class Rng>
double drift_detuning(NoiseEnvironment& env, double rho, Rng& rng) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("OU correlation outside [0, 1]");
  std::normal_distribution<double> nd(0.0, 1.0);
  env.detuning_hz = rho * env.detuning_hz +
                    std::sqrt(1.0 - rho * rho) * env.sigma_diffusion_hz * nd(rng);
  return env.detuning_hz;
}

inline double detuning_phase(double delta_hz, double arm_delay_s) {
  return 2.0 * std::numbers::pi * delta_hz * arm_delay_s;
}

// E[cos(2 pi delta tau)] for delta ~ Normal(0, sigma).
inline double analytic_contrast(double sigma_hz, double arm_delay_s) {
  if (sigma_hz < 0.0) throw std::invalid_argument("sigma must be >= 0");
  const double x = 2.0 * std::numbers::pi * sigma_hz * arm_delay_s;
  return std::exp(-0.5 * x * x);
}

// Gaussian phase noise with E[cos] = factor.
inline double jitter_rms_for_factor(double factor) {
  if (!(factor > 0.0 && factor <= 1.0)) throw std::invalid_argument("contrast factor must be in (0, 1]");
  return std::sqrt(-2.0 * std::log(factor));
}
inline double factor_for_jitter(double rms) { return std::exp(-0.5 * rms * rms); }

// ---------------------------------------------------------------------------
// Poisson helpers
// ---------------------------------------------------------------------------

// P(X <= k), X ~ Poisson(lambda)
inline double poisson_cdf(int k, double lambda) {
  if (k < 0) return 0.0;
  if (lambda <= 0.0) return 1.0;
  double term = std::exp(-lambda);
  double sum = term;
  for (int i = 1; i <= k; ++i) {
    term *= lambda / i;
    sum += term;
  }
  return std::min(1.0, sum);
}

// P(X >= k)
inline double poisson_tail(int k, double lambda) { return k <= 0 ? 1.0 : 1.0 - poisson_cdf(k - 1, lambda); }

template <class Rng>
int sample_poisson(double mean, Rng& rng) {
  if (mean <= 0.0) return 0;
  std::poisson_distribution<int> pd(mean);
  return pd(rng);
}

// ---------------------------------------------------------------------------
// Single-shot readout
// ---------------------------------------------------------------------------

struct ReadoutModel {
  double lambda_bright = 20.0;  // mean PSB counts for m_s = 0
  double lambda_dark = 0.5;     // mean counts for m_s = +-1
  int threshold = 3;            // counts >= threshold => inferred |0>
  double combined_init_readout_fidelity = 1.0;
  double readout_share = 0.5;   // readout factor = combined^share

  void validate() const {
    if (!(lambda_dark >= 0.0)) throw ConfigError("readout.lambda_dark must be >= 0");
    if (!(lambda_bright > lambda_dark)) throw ConfigError("readout.lambda_bright must exceed lambda_dark");
    if (threshold < 0) throw ConfigError("readout.threshold must be >= 0");
    if (!(combined_init_readout_fidelity > 0.0 && combined_init_readout_fidelity <= 1.0)) {
      throw ConfigError("readout.combined_init_readout_fidelity must be in (0, 1]");
    }
    if (!(readout_share >= 0.0 && readout_share <= 1.0)) {
      throw ConfigError("readout.readout_share must be in [0, 1]");
    }
  }
};

struct ReadoutResult {
  int counts = 0;
  int inferred = 0;  // qubit value: 0 bright, 1 dark
};

template <class Rng>
ReadoutResult single_shot_readout(bool bright, const ReadoutModel& m, Rng& rng) {
  const int counts = sample_poisson(bright ? m.lambda_bright : m.lambda_dark, rng);
  return {counts, counts >= m.threshold ? 0 : 1};
}

struct Confusion {
  double bright_as_dark = 0.0;  // P(inferred 1 | m_s = 0)
  double dark_as_bright = 0.0;  // P(inferred 0 | m_s = -1)
};

inline Confusion readout_confusion(const ReadoutModel& m) {
  return {poisson_cdf(m.threshold - 1, m.lambda_bright), poisson_tail(m.threshold, m.lambda_dark)};
}

// Correlation retained by readout: 1 - P(0->1) - P(1->0).
inline double readout_contrast(const ReadoutModel& m) {
  const auto c = readout_confusion(m);
  return 1.0 - c.bright_as_dark - c.dark_as_bright;
}

struct FidelitySplit {
  double init = 1.0;
  double readout = 1.0;
};

// Multiplicative split of the combined init x readout factor.
inline FidelitySplit split_fidelity(double combined, double readout_share) {
  return {std::pow(combined, 1.0 - readout_share), std::pow(combined, readout_share)};
}

// Split with a given init factor; the readout factor absorbs the rest.
inline FidelitySplit split_from_init(double combined, double init) {
  if (!(init > 0.0 && init <= 1.0)) throw std::invalid_argument("init factor must be in (0, 1]");
  return {init, combined / init};
}

// Bright-state mean count that gives the requested readout contrast for a
// fixed dark rate and threshold (bisection; contrast rises monotonically with
// lambda_bright).
inline double calibrate_bright_rate(double target_contrast, double lambda_dark, int threshold) {
  ReadoutModel m;
  m.lambda_dark = lambda_dark;
  m.threshold = threshold;
  const double ceiling = 1.0 - poisson_tail(threshold, lambda_dark);
  if (!(target_contrast > 0.0 && target_contrast < ceiling)) {
    throw ConfigError("requested readout contrast is unreachable with this dark rate/threshold");
  }
  double lo = lambda_dark;
  double hi = std::max(1.0, lambda_dark * 2.0);
  auto contrast_at = [&](double lb) {
    m.lambda_bright = lb;
    return readout_contrast(m);
  };
  while (contrast_at(hi) < target_contrast) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (contrast_at(mid) < target_contrast ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Readout model whose Poisson contrast equals combined^share.
inline ReadoutModel calibrated(ReadoutModel m) {
  const auto split = split_fidelity(m.combined_init_readout_fidelity, m.readout_share);
  m.lambda_bright = calibrate_bright_rate(split.readout, m.lambda_dark, m.threshold);
  return m;
}

// Init contrast implied by the combined figure and the model's readout contrast.
// A combined figure of 1 means ideal initialization whatever the readout.
inline double init_contrast(const ReadoutModel& m) {
  if (m.combined_init_readout_fidelity >= 1.0) return 1.0;
  const double r = readout_contrast(m);
  if (!(r > 0.0)) throw ConfigError("readout model has no contrast");
  const double f = m.combined_init_readout_fidelity / r;
  if (f > 1.0 + 1e-9) {
    throw ConfigError("readout contrast is below the combined init/readout fidelity");
  }
  return std::min(1.0, f);
}

// Probability that initialization prepares the orthogonal qubit state. A bit
// flip with probability p scales correlations by 1 - 2p.
inline double init_flip_probability(const ReadoutModel& m) { return 0.5 * (1.0 - init_contrast(m)); }

inline qcore::GateOp init_error_gate(double p_flip) {
  if (!(p_flip >= 0.0 && p_flip <= 1.0)) throw std::invalid_argument("flip probability outside [0, 1]");
  const qcore::CMatrix x = nv::lift(nv::su2(std::numbers::pi, 0.0) * qcore::Complex{0.0, 1.0},
                                    nv::branch_levels(nv::ElectronBranch::Minus));
  return qcore::GateOp::kraus({nv::kElectron},
                              {std::sqrt(1.0 - p_flip) * qcore::CMatrix::Identity(3, 3), std::sqrt(p_flip) * x});
}

template <class Rng>
qcore::PureState apply_init_error(const qcore::PureState& s, const ReadoutModel& m, Rng& rng) {
  const double p = init_flip_probability(m);
  if (p <= 0.0) return s;
  return qcore::sample_kraus(s, init_error_gate(p), rng).state;
}

}  // namespace nvlink::noise
