#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "nvlink/noise.hpp"

using namespace nvlink;
using namespace nvlink::noise;

namespace {

constexpr double pi = std::numbers::pi;

// Poisson pmf summed term by term with lgamma, independent of poisson_cdf.
double pmf(int k, double lambda) {
  if (lambda == 0.0) return k == 0 ? 1.0 : 0.0;
  return std::exp(k * std::log(lambda) - lambda - std::lgamma(k + 1.0));
}

double cdf_oracle(int k, double lambda) {
  double s = 0;
  for (int i = 0; i <= k; ++i) s += pmf(i, lambda);
  return s;
}

}  // namespace

TEST(Detuning, ZeroWidthIsAlwaysZero) {
  NoiseEnvironment env;
  CounterRng rng(1, Stream::kTest, 0);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(sample_detuning(env, rng), 0.0);
}

TEST(Detuning, RmsAndIndependence) {
  NoiseEnvironment env;
  env.sigma_diffusion_hz = 3e6;
  CounterRng rng(2, Stream::kTest, 0);
  const int n = 1000000;
  double ss = 0, lag = 0, prev = 0, sum = 0;
  for (int i = 0; i < n; ++i) {
    const double d = sample_detuning(env, rng);
    EXPECT_EQ(env.detuning_hz, d);
    ss += d * d;
    sum += d;
    if (i > 0) lag += d * prev;
    prev = d;
  }
  EXPECT_NEAR(std::sqrt(ss / n), 3e6, 0.01 * 3e6);
  EXPECT_NEAR(sum / n, 0.0, 5 * 3e6 / std::sqrt(n));
  EXPECT_LT(std::abs(lag / (n - 1) / (ss / n)), 0.01);
}

TEST(Detuning, DriftKeepsStationaryWidth) {
  NoiseEnvironment env;
  env.sigma_diffusion_hz = 1e6;
  CounterRng rng(3, Stream::kTest, 0);
  sample_detuning(env, rng);
  double ss = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double d = drift_detuning(env, 0.9, rng);
    ss += d * d;
  }
  EXPECT_NEAR(std::sqrt(ss / n), 1e6, 0.03e6);
  EXPECT_THROW(drift_detuning(env, 1.5, rng), std::invalid_argument);
}

TEST(DetuningPhase, Examples) {
  EXPECT_EQ(detuning_phase(0.0, 70e-9), 0.0);
  EXPECT_NEAR(detuning_phase(3e6, 70e-9), 2 * pi * 0.21, 1e-12);
  EXPECT_NEAR(detuning_phase(3e6, 70e-9), 1.319, 1e-3);
  EXPECT_LT(detuning_phase(-1e6, 70e-9), 0.0);
  EXPECT_GT(detuning_phase(1e6, 70e-9), 0.0);
}

TEST(AnalyticContrast, ClosedForm) {
  EXPECT_EQ(analytic_contrast(0.0, 70e-9), 1.0);
  const double tau = 70e-9;
  const double sigma = 1.0 / (2 * pi * tau);
  EXPECT_NEAR(analytic_contrast(sigma, tau), std::exp(-0.5), 1e-14);
  EXPECT_NEAR(analytic_contrast(sigma, tau), 0.6065, 1e-4);
  EXPECT_THROW(analytic_contrast(-1.0, tau), std::invalid_argument);
}

TEST(AnalyticContrast, MatchesSampledMean) {
  const int n = 1000000;
  for (auto [sigma, tau] : {std::pair{3e6, 70e-9}, std::pair{1e6, 70e-9}, std::pair{5e6, 30e-9}}) {
    NoiseEnvironment env;
    env.sigma_diffusion_hz = sigma;
    CounterRng rng(4, Stream::kTest, static_cast<std::uint64_t>(sigma));
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
      const double c = std::cos(detuning_phase(sample_detuning(env, rng), tau));
      s += c;
      s2 += c * c;
    }
    const double mean = s / n;
    const double se = std::sqrt((s2 / n - mean * mean) / n);
    EXPECT_NEAR(mean, analytic_contrast(sigma, tau), 3 * se) << sigma << " " << tau;
  }
}

TEST(AnalyticContrast, MonotoneInSigmaAndDelay) {
  double prev = 1.0;
  for (double s = 0.25e6; s <= 10e6; s += 0.25e6) {
    const double c = analytic_contrast(s, 70e-9);
    EXPECT_LT(c, prev);
    prev = c;
  }
  prev = 1.0;
  for (double t = 5e-9; t <= 200e-9; t += 5e-9) {
    const double c = analytic_contrast(2e6, t);
    EXPECT_LT(c, prev);
    prev = c;
  }
}

TEST(PhaseJitter, FactorRoundTrip) {
  for (double f : {1.0, 0.97, 0.84, 0.5}) EXPECT_NEAR(factor_for_jitter(jitter_rms_for_factor(f)), f, 1e-14);
  EXPECT_NEAR(jitter_rms_for_factor(0.97), 0.2468165613758873, 1e-15);
  EXPECT_THROW(jitter_rms_for_factor(0.0), std::invalid_argument);
}

TEST(Poisson, CdfMatchesOracle) {
  for (double lambda : {0.0, 0.5, 3.0, 20.0, 60.0}) {
    for (int k : {0, 1, 2, 5, 19, 40}) EXPECT_NEAR(poisson_cdf(k, lambda), cdf_oracle(k, lambda), 1e-12);
    EXPECT_EQ(poisson_tail(0, lambda), 1.0);
  }
  EXPECT_EQ(poisson_cdf(-1, 3.0), 0.0);
}

TEST(Readout, PoissonThresholdExample) {
  ReadoutModel m;
  m.lambda_bright = 20;
  m.lambda_dark = 0.5;
  m.threshold = 3;
  const auto c = readout_confusion(m);
  EXPECT_GT(1 - c.bright_as_dark, 0.95);
  EXPECT_GT(1 - c.dark_as_bright, 0.95);
  EXPECT_NEAR(c.bright_as_dark, cdf_oracle(2, 20), 1e-14);
  EXPECT_NEAR(c.dark_as_bright, 1 - cdf_oracle(2, 0.5), 1e-14);
}

TEST(Readout, DarkStateNeverMisreadWithoutBackground) {
  ReadoutModel m;
  m.lambda_bright = 10;
  m.lambda_dark = 0;
  m.threshold = 1;
  CounterRng rng(5, Stream::kTest, 0);
  for (int i = 0; i < 10000; ++i) EXPECT_EQ(single_shot_readout(false, m, rng).inferred, 1);
  EXPECT_EQ(readout_confusion(m).dark_as_bright, 0.0);
}

TEST(Readout, EmpiricalConfusionMatchesClosedForm) {
  ReadoutModel m;
  m.lambda_bright = 6;
  m.lambda_dark = 0.8;
  m.threshold = 3;
  const int n = 100000;
  int bd = 0, db = 0;
  CounterRng rng(6, Stream::kTest, 0);
  for (int i = 0; i < n; ++i) {
    bd += single_shot_readout(true, m, rng).inferred == 1;
    db += single_shot_readout(false, m, rng).inferred == 0;
  }
  const auto c = readout_confusion(m);
  EXPECT_NEAR(bd / double(n), c.bright_as_dark, 3 * std::sqrt(c.bright_as_dark * (1 - c.bright_as_dark) / n));
  EXPECT_NEAR(db / double(n), c.dark_as_bright, 3 * std::sqrt(c.dark_as_bright * (1 - c.dark_as_bright) / n));
}

TEST(Readout, CountsArePoisson) {
  ReadoutModel m;
  CounterRng rng(7, Stream::kTest, 0);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double k = single_shot_readout(true, m, rng).counts;
    s += k;
    s2 += k * k;
  }
  const double mean = s / n;
  EXPECT_NEAR(mean, m.lambda_bright, 3 * std::sqrt(m.lambda_bright / n));
  EXPECT_NEAR(s2 / n - mean * mean, m.lambda_bright, 0.02 * m.lambda_bright);
}

TEST(Split, ProductIsCombinedFigure) {
  const auto s = split_from_init(0.80, 0.90);
  EXPECT_NEAR(s.init * s.readout, 0.80, 1e-15);
  EXPECT_NEAR(s.readout, 0.889, 1e-3);
  const auto e = split_fidelity(0.80, 0.5);
  EXPECT_NEAR(e.init, std::sqrt(0.8), 1e-15);
  EXPECT_NEAR(e.readout, std::sqrt(0.8), 1e-15);
  EXPECT_NEAR(e.init * e.readout, 0.80, 1e-15);
}

TEST(Calibration, JointFigureIsEightyPercent) {
  ReadoutModel m;
  m.combined_init_readout_fidelity = 0.80;
  m.lambda_dark = 0.5;
  m.threshold = 3;
  const auto c = calibrated(m);
  EXPECT_NEAR(readout_contrast(c), std::sqrt(0.8), 1e-9);
  EXPECT_NEAR(init_contrast(c) * readout_contrast(c), 0.80, 1e-9);
  EXPECT_NEAR(init_flip_probability(c), 0.5 * (1 - std::sqrt(0.8)), 1e-9);
  m.readout_share = 0.0;
  EXPECT_THROW(calibrated(m), ConfigError);  // contrast 1 unreachable with dark counts
}

TEST(Calibration, ReadoutBelowCombinedIsRejected) {
  ReadoutModel m;
  m.lambda_bright = 2;
  m.lambda_dark = 0.5;
  m.threshold = 2;
  m.combined_init_readout_fidelity = 0.9;
  EXPECT_THROW(init_contrast(m), ConfigError);
  m.combined_init_readout_fidelity = 1.0;
  EXPECT_EQ(init_contrast(m), 1.0);
}

TEST(InitError, PassThroughAtUnitFidelity) {
  ReadoutModel m;
  m.combined_init_readout_fidelity = 1.0;
  const auto spec = std::make_shared<const qcore::RegisterSpec>(std::vector<qcore::Subsystem>{{nv::kElectron, 3}});
  const auto s = qcore::basis_state(spec, {nv::kQubit0});
  CounterRng rng(8, Stream::kTest, 0);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ((apply_init_error(s, m, rng).amplitudes() - s.amplitudes()).norm(), 0.0);
  }
}

TEST(InitError, FlipFractionMatchesRate) {
  ReadoutModel m;
  m.combined_init_readout_fidelity = 0.80;
  m.lambda_dark = 0.5;
  m.threshold = 3;
  m = calibrated(m);
  const double p = init_flip_probability(m);
  const auto spec = std::make_shared<const qcore::RegisterSpec>(std::vector<qcore::Subsystem>{{nv::kElectron, 3}});
  const auto s = qcore::basis_state(spec, {nv::kQubit0});
  const int n = 100000;
  int flips = 0;
  for (int i = 0; i < n; ++i) {
    CounterRng rng(9, Stream::kTest, static_cast<std::uint64_t>(i));
    const auto out = apply_init_error(s, m, rng);
    flips += std::norm(out.amplitudes()[nv::kQubit1]) > 0.5;
  }
  EXPECT_NEAR(flips / double(n), p, 3 * std::sqrt(p * (1 - p) / n));
}

TEST(InitError, GateIsTracePreserving) {
  const auto g = init_error_gate(0.2);
  qcore::CMatrix sum = qcore::CMatrix::Zero(3, 3);
  for (const auto& k : g.kraus_ops()) sum += k.adjoint() * k;
  EXPECT_LT((sum - qcore::CMatrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_THROW(init_error_gate(1.5), std::invalid_argument);
}

TEST(Environment, Invariants) {
  NoiseEnvironment e;
  e.sigma_diffusion_hz = -1;
  EXPECT_THROW(e.validate(), ConfigError);
  e = {};
  e.p_ionize = 2;
  EXPECT_THROW(e.validate(), ConfigError);
  ReadoutModel m;
  m.lambda_bright = 0.1;
  m.lambda_dark = 0.5;
  EXPECT_THROW(m.validate(), ConfigError);
}
