#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "nvlink/analysis.hpp"
#include "nvlink/control.hpp"

using namespace nvlink;
using namespace nvlink::control;

namespace {

SimulationSetup ideal_setup() {
  SimulationSetup s;
  s.readout.lambda_bright = 60;
  s.readout.lambda_dark = 0;
  s.readout.threshold = 1;
  return s;
}

std::string log_of(const ExperimentResult& r) {
  std::ostringstream os;
  write_herald_log(os, r.records);
  return os.str();
}

double fano(const std::vector<double>& v) {
  double s = 0, s2 = 0;
  for (double x : v) {
    s += x;
    s2 += x * x;
  }
  const double n = static_cast<double>(v.size());
  const double m = s / n;
  return (s2 / n - m * m) * n / (n - 1) / m;
}

}  // namespace

TEST(Crc, DefaultRateGivesNinetyFivePercentOnResonance) {
  CrcConfig c;
  NoiseEnvironment env;
  EXPECT_NEAR(c.pass_probability(env), 0.95, 1e-4);
  EXPECT_NEAR(calibrate_crc_rate(0.95, c.threshold, c.window), c.rate_on_resonance, 1.0);
  EXPECT_THROW(calibrate_crc_rate(1.0, 5, 1e-5), std::invalid_argument);
}

TEST(Crc, BrightResonantEmitterPasses) {
  CrcConfig c;
  c.rate_on_resonance = 1e6;  // 50 counts per window
  NoiseEnvironment env;
  EXPECT_GT(c.pass_probability(env), 0.999);
  int pass = 0;
  for (int i = 0; i < 10000; ++i) {
    CounterRng rng(1, Stream::kTest, static_cast<std::uint64_t>(i));
    NoiseEnvironment e;
    pass += crc_check(e, c, rng).passed;
  }
  EXPECT_GE(pass, 9990);
}

TEST(Crc, NeutralChargeAlwaysFails) {
  CrcConfig c;
  c.rate_on_resonance = 1e7;
  NoiseEnvironment env;
  env.charge = ChargeState::NV0;
  EXPECT_EQ(c.mean_counts(env), 0.0);
  c.recharge_success = 0.0;
  CounterRng rng(2, Stream::kTest, 0);
  for (int i = 0; i < 1000; ++i) {
    const auto o = crc_check(env, c, rng);
    EXPECT_FALSE(o.passed);
    EXPECT_EQ(o.counts, 0);
  }
}

TEST(Crc, FailureRedrawsDetuning) {
  CrcConfig c;
  c.rate_on_resonance = 0;
  NoiseEnvironment env;
  env.sigma_diffusion_hz = 1e6;
  env.detuning_hz = 123.0;
  CounterRng rng(3, Stream::kTest, 0);
  EXPECT_FALSE(crc_check(env, c, rng).passed);
  EXPECT_NE(env.detuning_hz, 123.0);
}

TEST(Crc, ResyncAfterMaxAttempts) {
  CrcConfig c;
  c.rate_on_resonance = 1e6;
  c.max_recharge_attempts = 4;
  c.recharge_success = 0.0;
  NoiseEnvironment env;
  env.charge = ChargeState::NV0;
  CounterRng rng(4, Stream::kTest, 0);
  const auto t = run_crc_until_pass(env, c, rng);
  EXPECT_EQ(t.resyncs, 1);
  EXPECT_GE(t.recharges, 4);
  EXPECT_EQ(env.charge, ChargeState::NVMinus);
  EXPECT_EQ(env.detuning_hz, 0.0);

  c.rate_on_resonance = 0.0;
  NoiseEnvironment dead;
  EXPECT_THROW(run_crc_until_pass(dead, c, rng), NumericalError);
}

TEST(Crc, PostSelectionNarrowsDetuning) {
  NoiseEnvironment env;
  env.sigma_diffusion_hz = 3e6;
  CrcConfig c;
  const auto cycles = crc_statistics(env, c, 100000, 5);
  double s_all = 0, s_acc = 0;
  std::size_t n_acc = 0;
  std::vector<double> before, after;
  for (const auto& cy : cycles) {
    s_all += cy.detuning_hz * cy.detuning_hz;
    before.push_back(cy.counts);
    if (cy.passed) {
      ++n_acc;
      s_acc += cy.detuning_hz * cy.detuning_hz;
      after.push_back(cy.probe_counts);
    }
  }
  const double prior = std::sqrt(s_all / cycles.size());
  const double accepted = std::sqrt(s_acc / n_acc);
  EXPECT_NEAR(prior, 3e6, 0.03e6);
  EXPECT_LT(accepted, 0.8 * prior);
  // overdispersed before, closer to Poisson after
  const double fb = fano(before);
  const double fa = fano(after);
  EXPECT_GT(fb, 1.1);
  EXPECT_LT(std::abs(fa - 1), std::abs(fb - 1));
}

TEST(Crc, ConfigInvariants) {
  CrcConfig c;
  c.block_length = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.threshold = -1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.recharge_success = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Options, BasisSpecificHeraldBins) {
  photonics::EodConfig eod;
  const auto zz = options_for(Basis::ZZ, eod);
  EXPECT_DOUBLE_EQ(zz.routing_offset, 0.5 * eod.switch_period);
  EXPECT_TRUE(zz.herald_bins[1] && zz.herald_bins[3] && !zz.herald_bins[2]);
  const auto xx = options_for(Basis::XX, eod);
  EXPECT_EQ(xx.routing_offset, 0.0);
  EXPECT_TRUE(xx.herald_bins[2] && !xx.herald_bins[1] && !xx.herald_bins[3]);
  EXPECT_FALSE(histogram_options().spin_readout);
}

TEST(Experiment, ReadoutOnlyOnHeralds) {
  auto s = ideal_setup();
  s.detector.dark_rate = 5e4;
  s.readout.combined_init_readout_fidelity = 0.8;
  s.readout.lambda_dark = 0.5;
  s.readout.threshold = 3;
  s.readout = noise::calibrated(s.readout);
  for (Basis b : {Basis::ZZ, Basis::XX}) {
    const auto r = run_controlled_experiment(protocol::electron_script(b), s, options_for(b, s.eod), 20000, 7, 1);
    std::uint64_t heralded = 0, read = 0;
    for (const auto& rec : r.records) {
      heralded += rec.photon_heralded;
      read += rec.readout_performed;
      EXPECT_TRUE(!rec.readout_performed || rec.photon_heralded);
    }
    EXPECT_EQ(heralded, read);
    EXPECT_EQ(heralded, r.summary.heralds);
    EXPECT_EQ(r.records.size(), 20000u);
  }
}

TEST(Experiment, HeraldRateIsProductOfAcceptances) {
  auto s = ideal_setup();
  s.emitter.eta_collect = 0.2;
  s.emitter.eta_detect = 0.5;
  s.eod.fidelity = 0.97;
  const std::uint64_t n = 200000;
  const auto r =
      run_controlled_experiment(protocol::electron_script(Basis::XX), s, options_for(Basis::XX, s.eod), n, 8, 1);
  const double p = 0.2 * 0.5 * 0.97;
  EXPECT_NEAR(r.summary.herald_rate(), p, 3 * std::sqrt(p * (1 - p) / n));
}

TEST(Experiment, DeterministicAcrossThreadCounts) {
  auto s = ideal_setup();
  s.noise.sigma_diffusion_hz = 2e6;
  s.detector.dark_rate = 1e5;
  s.crc.enabled = true;
  s.crc.block_length = 50;
  const auto script = protocol::electron_script(Basis::XX);
  const auto o = options_for(Basis::XX, s.eod);
  const auto a = run_controlled_experiment(script, s, o, 5000, 9, 1);
  const auto b = run_controlled_experiment(script, s, o, 5000, 9, 4);
  const auto c = run_controlled_experiment(script, s, o, 5000, 9, 3);
  EXPECT_EQ(log_of(a), log_of(b));
  EXPECT_EQ(log_of(a), log_of(c));
  EXPECT_EQ(a.summary.recharges, b.summary.recharges);
  EXPECT_NE(log_of(a), log_of(run_controlled_experiment(script, s, o, 5000, 10, 1)));
}

TEST(Experiment, ZeroThresholdSingleShotBlocksEqualNoCrc) {
  auto s = ideal_setup();
  s.noise.sigma_diffusion_hz = 3e6;
  s.crc.block_length = 1;
  s.crc.threshold = 0;
  const auto script = protocol::electron_script(Basis::XX);
  const auto o = options_for(Basis::XX, s.eod);
  const auto off = run_controlled_experiment(script, s, o, 3000, 11, 1);
  s.crc.enabled = true;
  const auto on = run_controlled_experiment(script, s, o, 3000, 11, 1);
  EXPECT_EQ(log_of(off), log_of(on));
}

TEST(Experiment, CrcRaisesContrastUnderSpectralDiffusion) {
  auto s = ideal_setup();
  s.noise.sigma_diffusion_hz = 3e6;
  s.crc.block_length = 10;
  const auto script = protocol::electron_script(Basis::XX);
  const auto o = options_for(Basis::XX, s.eod);
  const std::uint64_t n = 60000;
  const auto off = run_controlled_experiment(script, s, o, n, 12, 1);
  s.crc.enabled = true;
  const auto on = run_controlled_experiment(script, s, o, n, 12, 1);
  const auto t_off = analysis::correlation_table({{off.records, Basis::XX, false}});
  const auto t_on = analysis::correlation_table({{on.records, Basis::XX, false}});
  const double diff = std::abs(t_on.xx_aggregate()) - std::abs(t_off.xx_aggregate());
  EXPECT_GT(diff, 3 * std::hypot(t_on.xx_aggregate_stderr(), t_off.xx_aggregate_stderr()));
}

TEST(HeraldLog, OneJsonLinePerShot) {
  const auto r = run_controlled_experiment(protocol::electron_script(), ideal_setup(),
                                           options_for(Basis::ZZ, {}), 100, 13, 1);
  const auto text = log_of(r);
  std::istringstream is(text);
  std::string line;
  int n = 0;
  while (std::getline(is, line)) {
    ++n;
    EXPECT_EQ(line.front(), '{');
    EXPECT_EQ(line.back(), '}');
    EXPECT_NE(line.find("\"crc_passed\":"), std::string::npos);
    EXPECT_NE(line.find("\"recharge_count\":"), std::string::npos);
  }
  EXPECT_EQ(n, 100);
}
