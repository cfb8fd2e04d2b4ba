#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "nvlink/analysis.hpp"
#include "nvlink/control.hpp"
#include "nvlink/photonics.hpp"

using namespace nvlink;
using namespace nvlink::photonics;
using qcore::DensityOracle;

namespace {

constexpr double pi = std::numbers::pi;

qcore::SpecPtr electron_photon() {
  return std::make_shared<const qcore::RegisterSpec>(
      std::vector<qcore::Subsystem>{{nv::kElectron, 3}, {nv::kPhoton, 3}});
}

// (|1, long> + |0, short>)/sqrt2: the routed central-bin state.
PureState dual_rail() {
  const auto spec = electron_photon();
  qcore::CVector v = qcore::CVector::Zero(9);
  v[3 * nv::kQubit1 + kLong] = 1;
  v[3 * nv::kQubit0 + kShort] = 1;
  return qcore::normalized(spec, v);
}

// Joint (spin after the pi/2 readout pulse, detector) probabilities in the
// outcome order (0,D1), (1,D1), (0,D2), (1,D2), computed by brute-force oracle.
analysis::Quad joint(double phi, double overlap) {
  auto rho = DensityOracle::from_pure(dual_rail());
  rho = qcore::oracle_evolve(rho, long_arm_phase(phi));
  if (overlap < 1.0) rho = qcore::oracle_evolve(rho, overlap_channel(overlap));
  rho = qcore::oracle_evolve(rho, output_splitter());
  rho = qcore::oracle_evolve(rho, nv::mw_gate(pi / 2, pi / 2));
  analysis::Quad q{};
  for (int d : {kD1, kD2}) {
    for (int s : {0, 1}) {
      const int lvl = s == 0 ? nv::kQubit0 : nv::kQubit1;
      const auto i = static_cast<Eigen::Index>(3 * lvl + d);
      q[static_cast<std::size_t>(analysis::outcome_index(s, d == kD1 ? Detector::D1 : Detector::D2))] =
          rho.matrix()(i, i).real();
    }
  }
  return q;
}

control::SimulationSetup ideal_setup() {
  control::SimulationSetup s;
  s.readout.lambda_bright = 60;
  s.readout.lambda_dark = 0;
  s.readout.threshold = 1;
  return s;
}

Histogram run_histogram(const control::SimulationSetup& s, std::uint64_t shots, std::uint64_t seed) {
  const auto res = control::run_controlled_experiment(protocol::electron_script(), s, control::histogram_options(),
                                                      shots, seed, 1);
  std::vector<ArrivalRecord> recs;
  for (const auto& r : res.records) {
    if (r.photon_heralded) recs.push_back({r.detector, r.arrival_bin, r.herald_origin, r.shot_index, r.arrival_time});
  }
  return histogram(recs);
}

}  // namespace

TEST(Route, AlignedEodSendsEarlyLongLateShort) {
  EodConfig eod;
  CounterRng rng(1, Stream::kTest, 0);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(route(TimeBin::Early, eod, rng), Arm::Long);
    EXPECT_EQ(route(TimeBin::Late, eod, rng), Arm::Short);
  }
}

TEST(Route, HalfPeriodDelaySwapsDeterministically) {
  EodConfig eod;
  eod.fidelity = 0.9;
  eod.drive_delay = 0.5 * eod.switch_period;
  EXPECT_EQ(routing_of(eod), Routing::Swapped);
  eod.drive_delay = 0.2 * eod.switch_period;
  EXPECT_EQ(routing_of(eod), Routing::Aligned);
  eod.drive_delay = -0.2 * eod.switch_period;
  EXPECT_EQ(routing_of(eod), Routing::Aligned);
  eod.drive_delay = 3.0 * eod.switch_period;
  EXPECT_EQ(routing_of(eod), Routing::Aligned);
  eod.fidelity = 1.0;
  eod.drive_delay = 0.5 * eod.switch_period;
  CounterRng rng(1, Stream::kTest, 1);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(route(TimeBin::Early, eod, rng), Arm::Short);
}

TEST(Route, PassiveSplitterIsFair) {
  EodConfig eod;
  eod.enabled = false;
  int n_long = 0;
  for (std::uint64_t i = 0; i < 100000; ++i) {
    CounterRng rng(3, Stream::kTest, i);
    n_long += route(i % 2 ? TimeBin::Early : TimeBin::Late, eod, rng) == Arm::Long;
  }
  EXPECT_NEAR(n_long / 1e5, 0.5, 0.01);
}

TEST(ArrivalBin, ThreePeaks) {
  EXPECT_EQ(arrival_bin(TimeBin::Early, Arm::Short), 1);
  EXPECT_EQ(arrival_bin(TimeBin::Early, Arm::Long), 2);
  EXPECT_EQ(arrival_bin(TimeBin::Late, Arm::Short), 2);
  EXPECT_EQ(arrival_bin(TimeBin::Late, Arm::Long), 3);
}

TEST(RoutingChannel, KrausIndexIsArrivalBinAndSpinUntouched) {
  // Spin marginal before and after routing must agree for any p_center.
  const auto spec = electron_photon();
  qcore::CVector v(9);
  v << 0.1, 0.3, 0.2, 0.5, 0.1, 0.4, 0.2, 0.6, 0.1;
  const auto rho = DensityOracle::from_pure(qcore::normalized(spec, v));
  for (double p : {0.0, 0.3, 0.5, 0.97, 1.0}) {
    const auto out = qcore::oracle_evolve(rho, routing_channel(p));
    const auto a = qcore::partial_trace(rho, {nv::kElectron}).matrix();
    const auto b = qcore::partial_trace(out, {nv::kElectron}).matrix();
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-14);
  }
  // early photon, p = 0.97: bin 2 with 0.97, bin 1 with 0.03
  const auto e = DensityOracle::from_pure(qcore::basis_state(spec, {nv::kQubit0, nv::kEarly}));
  EXPECT_NEAR(qcore::oracle_kraus_branch(e, routing_channel(0.97), 2).probability, 0.97, 1e-14);
  EXPECT_NEAR(qcore::oracle_kraus_branch(e, routing_channel(0.97), 1).probability, 0.03, 1e-14);
  EXPECT_EQ(qcore::oracle_kraus_branch(e, routing_channel(0.97), 3).probability, 0.0);
}

TEST(Splitter, UnitaryAndConstructivePort) {
  const CMatrix m = splitter_matrix();
  EXPECT_LT((m.adjoint() * m - CMatrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-15);
  const auto spec = std::make_shared<const qcore::RegisterSpec>(std::vector<qcore::Subsystem>{{nv::kPhoton, 3}});
  qcore::CVector v = qcore::CVector::Zero(3);
  v[kShort] = 1;
  v[kLong] = 1;
  const auto out = qcore::apply_unitary(qcore::normalized(spec, v), output_splitter());
  EXPECT_NEAR(std::norm(out.amplitudes()[kD1]), 1.0, 1e-15);
}

TEST(Interference, JointProbabilitiesFollowCosineLaw) {
  for (int k = 0; k < 12; ++k) {
    const double phi = 2 * pi * k / 12;
    const auto q = joint(phi, 1.0);
    const auto e = analysis::eq4_probabilities(phi);
    double sum = 0;
    for (int i = 0; i < 4; ++i) {
      EXPECT_NEAR(q[i], e[i], 1e-12);
      sum += q[i];
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
  EXPECT_NEAR(joint(0.0, 1.0)[analysis::outcome_index(1, Detector::D1)], 0.5, 1e-12);
  for (double p : joint(pi / 2, 1.0)) EXPECT_NEAR(p, 0.25, 1e-12);
}

TEST(Interference, ZeroOverlapRemovesPhaseDependence) {
  for (double phi : {0.0, 1.0, pi}) {
    for (double p : joint(phi, 0.0)) EXPECT_NEAR(p, 0.25, 1e-12);
  }
  // partial overlap scales the cosine term
  const auto q = joint(0.0, 0.95);
  EXPECT_NEAR(q[analysis::outcome_index(1, Detector::D1)], 0.25 * (1 + 0.95), 1e-12);
}

TEST(Interference, TrajectoryDetectorFrequencies) {
  InterferometerConfig cfg;
  cfg.phase_phi = 1.1;
  int d1 = 0;
  const int n = 100000;
  const auto s = qcore::apply_unitary(dual_rail(), nv::mw_gate(0, 0));
  for (int i = 0; i < n; ++i) {
    CounterRng rng(4, Stream::kTest, static_cast<std::uint64_t>(i));
    d1 += interfere_and_detect(s, cfg, rng).level == kD1;
  }
  // spin traced out: D1 with probability 1/2
  EXPECT_NEAR(d1 / double(n), 0.5, 3 * std::sqrt(0.25 / n));
}

TEST(DarkCounts, RateRecovered) {
  DetectorConfig det;
  det.dark_rate = 2e5;
  det.detection_window = 210e-9;
  const int n = 200000;
  std::uint64_t total = 0;
  std::array<std::uint64_t, 3> per_bin{};
  for (int i = 0; i < n; ++i) {
    CounterRng rng(6, Stream::kTest, static_cast<std::uint64_t>(i));
    for (const auto& r : sample_dark_counts(det, 70e-9, static_cast<std::uint64_t>(i), rng)) {
      ++total;
      per_bin[static_cast<std::size_t>(r.arrival_bin - 1)]++;
      EXPECT_TRUE(r.is_dark());
    }
  }
  const double mean = 2 * det.dark_rate * det.detection_window * n;
  EXPECT_NEAR(static_cast<double>(total), mean, 3 * std::sqrt(mean));
  for (auto c : per_bin) EXPECT_NEAR(static_cast<double>(c), mean / 3, 3 * std::sqrt(mean / 3));
}

TEST(Histogram, PassiveSplitterThreePeaks) {
  auto s = ideal_setup();
  s.eod.enabled = false;
  const auto h = run_histogram(s, 100000, 21);
  EXPECT_NEAR(h.bin_fraction(1), 0.25, 0.01);
  EXPECT_NEAR(h.bin_fraction(2), 0.50, 0.01);
  EXPECT_NEAR(h.bin_fraction(3), 0.25, 0.01);
}

TEST(Histogram, EodRaisesCentralFraction) {
  auto s = ideal_setup();
  s.eod.fidelity = 0.97;
  EXPECT_NEAR(run_histogram(s, 100000, 22).central_fraction(), 0.97, 0.005);
  s.eod.fidelity = 1.0;
  EXPECT_EQ(run_histogram(s, 20000, 23).central_fraction(), 1.0);
}

TEST(Histogram, ExactTallyAndCsv) {
  std::vector<ArrivalRecord> recs{{Detector::D1, 1}, {Detector::D2, 2}, {Detector::D2, 2}, {Detector::D1, 3}};
  const auto h = histogram(recs);
  EXPECT_EQ(h.total(), 4u);
  EXPECT_EQ(h.counts[1][1], 2u);
  EXPECT_DOUBLE_EQ(h.central_fraction(), 0.5);
  std::ostringstream os;
  h.write_csv(os);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "detector,bin,count,fraction");
  EXPECT_NE(os.str().find("D2,2,2,0.500000"), std::string::npos);
  EXPECT_THROW(histogram(std::vector<ArrivalRecord>{}), std::invalid_argument);
}

TEST(Config, Invariants) {
  InterferometerConfig i;
  i.arm_delay = 0;
  EXPECT_THROW(i.validate(), ConfigError);
  i = {};
  i.mode_overlap = 1.2;
  EXPECT_THROW(i.validate(), ConfigError);
  EodConfig e;
  e.fidelity = 1.3;
  EXPECT_THROW(e.validate(), ConfigError);
  DetectorConfig d;
  d.dark_rate = -1;
  EXPECT_THROW(d.validate(), ConfigError);
}
