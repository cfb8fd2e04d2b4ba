#pragma once

// Experiment orchestration: charge-resonance check (CRC) gating with
// recharge/resync escalation, the per-shot executor for a ProtocolScript, and
// heralded readout over independent measurement-block lanes.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "nvlink/core/error.hpp"
#include "nvlink/core/rng.hpp"
#include "nvlink/noise.hpp"
#include "nvlink/nvmodel.hpp"
#include "nvlink/photonics.hpp"
#include "nvlink/protocol.hpp"
#include "nvlink/qcore.hpp"

namespace nvlink::control {

using noise::ChargeState;
using noise::NoiseEnvironment;
using protocol::Instruction;
using protocol::Op;
using protocol::ProtocolScript;
using qcore::Basis;
using qcore::GateOp;
using qcore::PureState;

// ---------------------------------------------------------------------------
// Charge-resonance check
// ---------------------------------------------------------------------------

struct CrcConfig {
  bool enabled = false;
  double window = 50e-6;
  int threshold = 5;
  double rate_on_resonance = 183070.0;  // 9.15 counts per window: P(pass | delta = 0) = 0.95
  double linewidth_hz = 2e6;            // Lorentzian HWHM
  int block_length = 1000;
  int max_recharge_attempts = 20;
  double recharge_success = 0.7;
  // Per-shot Ornstein-Uhlenbeck correlation of the detuning inside a block.
  // 1 keeps the detuning frozen until the next CRC.
  double drift_correlation = 1.0;

  void validate() const {
    if (!(window > 0.0)) throw ConfigError("crc.window must be > 0");
    if (threshold < 0) throw ConfigError("crc.threshold must be >= 0");
    if (!(rate_on_resonance >= 0.0)) throw ConfigError("crc.rate_on_resonance must be >= 0");
    if (!(linewidth_hz > 0.0)) throw ConfigError("crc.linewidth_hz must be > 0");
    if (block_length < 1) throw ConfigError("crc.block_length must be >= 1");
    if (max_recharge_attempts < 1) throw ConfigError("crc.max_recharge_attempts must be >= 1");
    if (!(recharge_success >= 0.0 && recharge_success <= 1.0)) {
      throw ConfigError("crc.recharge_success must be in [0, 1]");
    }
    if (!(drift_correlation >= 0.0 && drift_correlation <= 1.0)) {
      throw ConfigError("crc.drift_correlation must be in [0, 1]");
    }
  }

  double lorentzian(double detuning_hz) const {
    const double x = detuning_hz / linewidth_hz;
    return 1.0 / (1.0 + x * x);
  }

  double mean_counts(const NoiseEnvironment& env) const {
    if (env.charge == ChargeState::NV0) return 0.0;
    return window * rate_on_resonance * lorentzian(env.detuning_hz);
  }

  double pass_probability(const NoiseEnvironment& env) const {
    return noise::poisson_tail(threshold, mean_counts(env));
  }
};

// Rate that makes the on-resonance pass probability equal `p`.
inline double calibrate_crc_rate(double p, int threshold, double window) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("pass probability must be in (0, 1)");
  double lo = 0.0;
  double hi = 1.0;
  while (noise::poisson_tail(threshold, hi) < p) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (noise::poisson_tail(threshold, mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi) / window;
}

// Recharge pulse: the charge bath is perturbed, so the detuning is redrawn and
// NV0 returns to NV- with the configured probability.
template <class Rng>
void recharge(NoiseEnvironment& env, const CrcConfig& cfg, Rng& rng) {
  noise::sample_detuning(env, rng);
  if (env.charge == ChargeState::NV0 && rng.uniform() < cfg.recharge_success) {
    env.charge = ChargeState::NVMinus;
  }
}

// PLE scan and refocus: back on resonance in NV-.
inline void resync(NoiseEnvironment& env) {
  env.detuning_hz = 0.0;
  env.charge = ChargeState::NVMinus;
}

struct CrcOutcome {
  bool passed = false;
  int counts = 0;
};

template <class Rng>
CrcOutcome crc_check(NoiseEnvironment& env, const CrcConfig& cfg, Rng& rng) {
  const int counts = noise::sample_poisson(cfg.mean_counts(env), rng);
  const bool ok = counts >= cfg.threshold;
  if (!ok) recharge(env, cfg, rng);
  return {ok, counts};
}

struct CrcTrail {
  int checks = 0;
  int recharges = 0;
  int resyncs = 0;
  int first_counts = 0;
  int final_counts = 0;
};

template <class Rng>
CrcTrail run_crc_until_pass(NoiseEnvironment& env, const CrcConfig& cfg, Rng& rng) {
  CrcTrail t;
  int attempts = 0;
  for (;;) {
    const auto o = crc_check(env, cfg, rng);
    if (t.checks == 0) t.first_counts = o.counts;
    ++t.checks;
    t.final_counts = o.counts;
    if (o.passed) return t;
    ++t.recharges;
    if (++attempts >= cfg.max_recharge_attempts) {
      resync(env);
      ++t.resyncs;
      attempts = 0;
      if (t.resyncs > 10000) throw NumericalError("CRC never passes, even after resync");
    }
  }
}

// ---------------------------------------------------------------------------
// Setup and records
// ---------------------------------------------------------------------------

struct SimulationSetup {
  nv::EmitterParams emitter;
  photonics::InterferometerConfig interferometer;
  photonics::EodConfig eod;
  photonics::DetectorConfig detector;
  NoiseEnvironment noise;
  noise::ReadoutModel readout;
  nv::MemoryParams memory;
  CrcConfig crc;
  nv::NuclearInitErrors nuclear_init;
  // Failure probability of every RF and CNOT pulse in the script and in the
  // nuclear readout mapping (the pulse acts as identity).
  double nuclear_op_failure = 0.0;
  // Residual spectral contrast as a scalar; realized as extra Gaussian phase
  // noise with E[cos] = spectral_factor. Independent of noise.sigma_diffusion_hz.
  double spectral_factor = 1.0;

  void validate() const {
    emitter.validate();
    interferometer.validate();
    eod.validate();
    detector.validate();
    noise.validate();
    readout.validate();
    memory.validate();
    crc.validate();
    if (!(nuclear_op_failure >= 0.0 && nuclear_op_failure <= 1.0)) {
      throw ConfigError("protocol.nuclear_op_failure must be in [0, 1]");
    }
    if (!(spectral_factor > 0.0 && spectral_factor <= 1.0)) {
      throw ConfigError("noise.spectral_factor must be in (0, 1]");
    }
    noise::init_flip_probability(readout);  // throws when readout cannot carry the combined figure
  }

  double spectral_jitter_rms() const { return noise::jitter_rms_for_factor(spectral_factor); }
};

// How the photon is analyzed for one run.
struct ShotOptions {
  double routing_offset = 0.0;  // added to eod.drive_delay
  std::array<bool, 4> herald_bins{false, true, true, true};
  bool spin_readout = true;
};

// ZZ: EOD shifted by half a period so early/late land in bins 1/3.
// XX: aligned EOD, heralds in the central bin.
inline ShotOptions options_for(Basis b, const photonics::EodConfig& eod) {
  ShotOptions o;
  if (b == Basis::ZZ) {
    o.routing_offset = 0.5 * eod.switch_period;
    o.herald_bins = {false, true, false, true};
  } else {
    o.herald_bins = {false, false, true, false};
  }
  return o;
}

inline ShotOptions histogram_options() {
  ShotOptions o;
  o.spin_readout = false;
  return o;
}

struct ShotRecord {
  std::uint64_t shot_index = 0;
  std::uint64_t block_index = 0;
  bool crc_passed = true;
  int recharge_count = 0;  // CRC recharges before this shot (first shot of a block)
  int resync_count = 0;
  bool photon_emitted = false;  // a signal photon reached the analyzer
  bool photon_heralded = false;
  photonics::Detector detector = photonics::Detector::D1;
  int arrival_bin = 0;
  photonics::Origin herald_origin = photonics::Origin::Signal;
  double arrival_time = 0.0;
  bool readout_performed = false;
  int spin_counts = 0;
  int spin_inferred = 0;
  double detuning_hz = 0.0;
  ChargeState charge = ChargeState::NVMinus;
};

inline void write_json_line(std::ostream& os, const ShotRecord& r) {
  os << fmt::format(
      "{{\"shot\":{},\"block\":{},\"crc_passed\":{},\"recharge_count\":{},\"resync_count\":{},"
      "\"photon_heralded\":{},\"readout_performed\":{},\"detector\":\"{}\",\"bin\":{},\"dark\":{},"
      "\"arrival_time\":{:.6e},\"counts\":{},\"inferred\":{},\"detuning_hz\":{:.6e},\"charge\":\"{}\"}}\n",
      r.shot_index, r.block_index, r.crc_passed, r.recharge_count, r.resync_count, r.photon_heralded,
      r.readout_performed, photonics::to_string(r.detector), r.arrival_bin,
      r.photon_heralded && r.herald_origin != photonics::Origin::Signal, r.arrival_time, r.spin_counts,
      r.spin_inferred, r.detuning_hz, noise::to_string(r.charge));
}

inline void write_herald_log(std::ostream& os, const std::vector<ShotRecord>& records) {
  for (const auto& r : records) write_json_line(os, r);
}

// ---------------------------------------------------------------------------
// Per-shot executor
// ---------------------------------------------------------------------------

// Gates and register for one (script, setup, options) triple, built once.
class Executor {
 public:
  Executor(ProtocolScript script, SimulationSetup setup, ShotOptions options)
      : script_(std::move(script)), setup_(std::move(setup)), opts_(options) {
    script_.validate();
    setup_.validate();
    nuclear_ = script_.uses_nuclear();
    std::vector<qcore::Subsystem> subs{{nv::kElectron, nv::kSpinDim}};
    if (nuclear_) subs.push_back({nv::kNuclear, nv::kSpinDim});
    subs.push_back({nv::kPhoton, nv::kPhotonDim});
    spec_ = std::make_shared<const qcore::RegisterSpec>(subs);

    const double pf = setup_.nuclear_op_failure;
    for (const auto& s : script_.steps) {
      switch (s.op) {
        case Op::Mw: gates_.push_back(nv::mw_gate(s.theta, s.phase, s.branch)); break;
        case Op::Rf: gates_.push_back(nv::with_failure(nv::rf_gate(s.theta, s.phase, s.pair, s.cond_ms), pf)); break;
        case Op::Cnot: gates_.push_back(nv::with_failure(nv::cnot_gate(s.control, s.branch), pf)); break;
        default: gates_.push_back(std::nullopt); break;
      }
    }
    pump_ = nv::pump_gate(0.0);
    init_flip_ = noise::init_flip_probability(setup_.readout);
    if (init_flip_ > 0.0) init_error_ = noise::init_error_gate(init_flip_);
    nuclear_init_ = nv::nuclear_init_gates(setup_.nuclear_init);

    const auto routing = photonics::routing_of(setup_.eod, opts_.routing_offset);
    routing_ = photonics::routing_channel(photonics::central_probability(routing, setup_.eod.fidelity));
    splitter_ = photonics::output_splitter();
    if (setup_.interferometer.mode_overlap < 1.0) {
      overlap_ = photonics::overlap_channel(setup_.interferometer.mode_overlap);
    }
    phase_rms_ = std::hypot(setup_.interferometer.phase_jitter_rms, setup_.spectral_jitter_rms());

    constexpr double pi = std::numbers::pi;
    const Basis basis = script_.basis();
    if (nuclear_) {
      if (basis == Basis::XX) {
        readout_map_.push_back(nv::with_failure(nv::rf_gate(pi / 2, pi / 2, nv::NuclearPair::Memory, -1), pf));
      }
      readout_map_.push_back(nv::with_failure(nv::cnot_gate(0, nv::ElectronBranch::Minus), pf));
    } else if (basis == Basis::XX) {
      readout_map_.push_back(nv::mw_gate(pi / 2, pi / 2));
    }
    confusion_ = noise::readout_confusion(setup_.readout);
    early_emit_ = nv::emission_gate(nv::TimeBin::Early, 0.0, setup_.emitter.optical_pi_fidelity);
  }

  const ProtocolScript& script() const { return script_; }
  const SimulationSetup& setup() const { return setup_; }
  const ShotOptions& options() const { return opts_; }
  const qcore::SpecPtr& spec() const { return spec_; }

  template <class Rng>
  ShotRecord run_shot(const NoiseEnvironment& env, std::uint64_t shot_index, Rng& rng) const {
    ShotRecord rec;
    rec.shot_index = shot_index;
    rec.detuning_hz = env.detuning_hz;
    rec.charge = env.charge;
    const bool dark_emitter = env.charge == ChargeState::NV0;
    const double sep = setup_.interferometer.arm_delay;

    std::vector<int> digits(spec_->size(), 0);
    digits[0] = nv::kQubit0;
    if (nuclear_) digits[1] = nv::kQubit0;
    if (nuclear_ && has_init_n()) {
      digits[1] = static_cast<int>(rng.uniform() * 3.0);  // thermal nuclear spin
    }
    PureState s = qcore::basis_state(spec_, digits);
    std::vector<photonics::ArrivalRecord> extra;

    for (std::size_t i = 0; i < script_.steps.size(); ++i) {
      const auto& st = script_.steps[i];
      switch (st.op) {
        case Op::Crc: break;
        case Op::InitE:
          s = qcore::sample_kraus(s, pump_, rng).state;
          if (init_error_) s = qcore::sample_kraus(s, *init_error_, rng).state;
          break;
        case Op::InitN:
          for (const auto& g : nuclear_init_) s = qcore::sample_kraus(s, g, rng).state;
          break;
        case Op::Mw:
        case Op::Rf:
        case Op::Cnot: s = qcore::sample_kraus(s, *gates_[i], rng).state; break;
        case Op::Wait:
          if (nuclear_ && st.duration > 0.0) {
            const double f = nv::memory_decay_factor(st.duration, setup_.memory);
            s = qcore::sample_kraus(s, nv::dephasing_gate(nv::kNuclear, {nv::kQubit0, nv::kQubit1}, f), rng).state;
          }
          break;
        case Op::OpticalPi: {
          sample_leakage(st.bin, shot_index, extra, rng);
          if (dark_emitter) break;
          const GateOp emit = st.bin == nv::TimeBin::Early
                                  ? early_emit_
                                  : nv::emission_gate(st.bin, nv::emission_phase(st.bin, env.detuning_hz, sep),
                                                      setup_.emitter.optical_pi_fidelity);
          s = qcore::sample_kraus(s, emit, rng).state;
          s = qcore::sample_kraus(s, nv::collection_gate(st.bin, setup_.emitter.efficiency()), rng).state;
          break;
        }
        case Op::Readout: {
          finish_shot(s, rec, extra, dark_emitter, rng);
          break;
        }
      }
    }
    return rec;
  }

 private:
  bool has_init_n() const {
    return std::any_of(script_.steps.begin(), script_.steps.end(),
                       [](const Instruction& i) { return i.op == Op::InitN; });
  }

  template <class Rng>
  void sample_leakage(nv::TimeBin bin, std::uint64_t shot, std::vector<photonics::ArrivalRecord>& out,
                      Rng& rng) const {
    const auto& em = setup_.emitter;
    if (em.leakage_counts_per_pulse <= 0.0) return;
    const int n = noise::sample_poisson(em.leakage_counts_per_pulse, rng);
    std::normal_distribution<double> nd(0.0, em.leakage_width);
    for (int k = 0; k < n; ++k) {
      const auto arm = photonics::route(bin, setup_.eod, rng, opts_.routing_offset);
      const int ab = photonics::arrival_bin(bin, arm);
      const auto det = rng.uniform() < 0.5 ? photonics::Detector::D1 : photonics::Detector::D2;
      const double delay = std::abs(nd(rng));
      out.push_back({det, ab, photonics::Origin::Leakage, shot,
                     (ab - 1) * setup_.interferometer.arm_delay + delay, delay});
    }
  }

  bool accepted(const photonics::ArrivalRecord& r) const {
    const auto& em = setup_.emitter;
    const auto& det = setup_.detector;
    return opts_.herald_bins[static_cast<std::size_t>(r.arrival_bin)] && r.delay >= em.time_filter_start &&
           r.delay < em.time_filter_end && r.arrival_time >= det.time_filter_start &&
           r.arrival_time < det.time_filter_end;
  }

  template <class Rng>
  void finish_shot(PureState s, ShotRecord& rec, std::vector<photonics::ArrivalRecord>& extra,
                   bool dark_emitter, Rng& rng) const {
    const double sep = setup_.interferometer.arm_delay;
    auto routed = qcore::sample_kraus(s, routing_, rng);
    const int bin = static_cast<int>(routed.kraus_index);
    s = std::move(routed.state);

    double phi = setup_.interferometer.phase_phi;
    if (phase_rms_ > 0.0) {
      std::normal_distribution<double> nd(0.0, phase_rms_);
      phi += nd(rng);
    }
    s = qcore::apply_unitary(s, photonics::long_arm_phase(phi));
    if (overlap_) s = qcore::sample_kraus(s, *overlap_, rng).state;
    s = qcore::apply_unitary(s, splitter_);
    auto m = qcore::measure(s, nv::kPhoton, rng);
    s = std::move(m.state);

    std::vector<photonics::ArrivalRecord> records;
    if (bin > 0 && m.outcome != nv::kVac) {
      rec.photon_emitted = true;
      std::exponential_distribution<double> ex(1.0 / setup_.emitter.excited_lifetime);
      const double delay = ex(rng);
      records.push_back({m.outcome == photonics::kD1 ? photonics::Detector::D1 : photonics::Detector::D2, bin,
                         photonics::Origin::Signal, rec.shot_index, (bin - 1) * sep + delay, delay});
    }
    auto dark = photonics::sample_dark_counts(setup_.detector, sep, rec.shot_index, rng);
    records.insert(records.end(), dark.begin(), dark.end());
    records.insert(records.end(), extra.begin(), extra.end());

    const photonics::ArrivalRecord* first = nullptr;
    for (const auto& r : records) {
      if (!accepted(r)) continue;
      if (!first || r.arrival_time < first->arrival_time) first = &r;
    }
    if (!first) return;
    rec.photon_heralded = true;
    rec.detector = first->detector;
    rec.arrival_bin = first->arrival_bin;
    rec.herald_origin = first->origin;
    rec.arrival_time = first->arrival_time;
    if (!opts_.spin_readout) return;

    for (const auto& g : readout_map_) s = qcore::sample_kraus(s, g, rng).state;
    const auto e = qcore::measure(s, nv::kElectron, rng);
    const bool bright = !dark_emitter && e.outcome == nv::kQubit0;
    const auto r = noise::single_shot_readout(bright, setup_.readout, rng);
    rec.readout_performed = true;
    rec.spin_counts = r.counts;
    rec.spin_inferred = r.inferred;
  }

  ProtocolScript script_;
  SimulationSetup setup_;
  ShotOptions opts_;
  bool nuclear_ = false;
  qcore::SpecPtr spec_;
  std::vector<std::optional<GateOp>> gates_;
  GateOp pump_ = nv::pump_gate(0.0);
  double init_flip_ = 0.0;
  std::optional<GateOp> init_error_;
  std::vector<GateOp> nuclear_init_;
  GateOp routing_ = photonics::routing_channel(1.0);
  GateOp splitter_ = photonics::output_splitter();
  std::optional<GateOp> overlap_;
  double phase_rms_ = 0.0;
  std::vector<GateOp> readout_map_;
  noise::Confusion confusion_;
  GateOp early_emit_ = nv::emission_gate(nv::TimeBin::Early, 0.0);
};

// ---------------------------------------------------------------------------
// Controller
// ---------------------------------------------------------------------------

struct RunSummary {
  std::uint64_t shots = 0;
  std::uint64_t blocks = 0;
  std::uint64_t heralds = 0;
  std::uint64_t dark_heralds = 0;
  std::uint64_t crc_checks = 0;
  std::uint64_t recharges = 0;
  std::uint64_t resyncs = 0;

  double herald_rate() const { return shots ? static_cast<double>(heralds) / static_cast<double>(shots) : 0.0; }
  double dark_fraction() const {
    return heralds ? static_cast<double>(dark_heralds) / static_cast<double>(heralds) : 0.0;
  }
};

struct ExperimentResult {
  std::vector<ShotRecord> records;
  RunSummary summary;
};

// One block lane: environment draw, optional CRC, then block_length shots.
inline std::vector<ShotRecord> run_block(const Executor& ex, std::uint64_t seed, std::uint64_t block,
                                         std::uint64_t first_shot, std::uint64_t n, RunSummary& sum) {
  const auto& setup = ex.setup();
  CounterRng brng(seed, Stream::kBlock, block);
  NoiseEnvironment env = setup.noise;
  noise::sample_detuning(env, brng);
  if (env.sigma_diffusion_hz <= 0.0) env.detuning_hz = setup.noise.detuning_hz;
  env.charge = brng.uniform() < env.p_ionize ? ChargeState::NV0 : setup.noise.charge;

  CrcTrail trail;
  const bool gated = setup.crc.enabled && ex.script().has_crc();
  if (gated) {
    CounterRng crng(seed, Stream::kCrc, block);
    trail = run_crc_until_pass(env, setup.crc, crng);
    sum.crc_checks += static_cast<std::uint64_t>(trail.checks);
    sum.recharges += static_cast<std::uint64_t>(trail.recharges);
    sum.resyncs += static_cast<std::uint64_t>(trail.resyncs);
  }

  std::vector<ShotRecord> out;
  out.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    if (i > 0 && setup.crc.drift_correlation < 1.0) noise::drift_detuning(env, setup.crc.drift_correlation, brng);
    CounterRng rng(seed, Stream::kShot, first_shot + i);
    ShotRecord r = ex.run_shot(env, first_shot + i, rng);
    r.block_index = block;
    if (i == 0) {
      r.recharge_count = trail.recharges;
      r.resync_count = trail.resyncs;
    }
    if (r.photon_heralded) {
      ++sum.heralds;
      if (r.herald_origin != photonics::Origin::Signal) ++sum.dark_heralds;
    }
    out.push_back(r);
  }
  sum.shots += n;
  sum.blocks += 1;
  return out;
}

inline int default_threads() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Blocks run on `threads` workers and are merged in block order, so the
// record stream does not depend on the worker count.
inline ExperimentResult run_controlled_experiment(const Executor& ex, std::uint64_t n_shots, std::uint64_t seed,
                                                  int threads = 1) {
  const auto L = static_cast<std::uint64_t>(ex.setup().crc.block_length);
  const std::uint64_t nb = (n_shots + L - 1) / L;
  std::vector<std::vector<ShotRecord>> blocks(nb);
  std::vector<RunSummary> sums(nb);
  std::atomic<std::uint64_t> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(std::max(1, threads)));

  auto worker = [&](std::size_t w) {
    try {
      for (std::uint64_t b = next++; b < nb; b = next++) {
        const std::uint64_t first = b * L;
        blocks[b] = run_block(ex, seed, b, first, std::min(L, n_shots - first), sums[b]);
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  const int nt = std::clamp(threads, 1, static_cast<int>(std::max<std::uint64_t>(1, nb)));
  if (nt == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < nt; ++w) pool.emplace_back(worker, static_cast<std::size_t>(w));
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  ExperimentResult res;
  res.records.reserve(n_shots);
  for (std::uint64_t b = 0; b < nb; ++b) {
    res.records.insert(res.records.end(), blocks[b].begin(), blocks[b].end());
    const auto& s = sums[b];
    res.summary.shots += s.shots;
    res.summary.blocks += s.blocks;
    res.summary.heralds += s.heralds;
    res.summary.dark_heralds += s.dark_heralds;
    res.summary.crc_checks += s.crc_checks;
    res.summary.recharges += s.recharges;
    res.summary.resyncs += s.resyncs;
  }
  return res;
}

inline ExperimentResult run_controlled_experiment(const ProtocolScript& script, const SimulationSetup& setup,
                                                  const ShotOptions& options, std::uint64_t n_shots,
                                                  std::uint64_t seed, int threads = 1) {
  return run_controlled_experiment(Executor(script, setup, options), n_shots, seed, threads);
}

// ---------------------------------------------------------------------------
// CRC statistics
// ---------------------------------------------------------------------------

// One cycle: fresh detuning/charge draw, one CRC, and if it passes a second
// probe window under the same conditions.
struct CrcCycle {
  double detuning_hz = 0.0;
  int counts = 0;
  bool passed = false;
  int probe_counts = 0;
};

inline std::vector<CrcCycle> crc_statistics(const NoiseEnvironment& base, const CrcConfig& cfg,
                                            std::uint64_t cycles, std::uint64_t seed) {
  cfg.validate();
  base.validate();
  std::vector<CrcCycle> out;
  out.reserve(cycles);
  for (std::uint64_t c = 0; c < cycles; ++c) {
    CounterRng rng(seed, Stream::kCrc, c, 1);
    NoiseEnvironment env = base;
    noise::sample_detuning(env, rng);
    env.charge = rng.uniform() < env.p_ionize ? ChargeState::NV0 : ChargeState::NVMinus;
    CrcCycle cy;
    cy.detuning_hz = env.detuning_hz;
    cy.counts = noise::sample_poisson(cfg.mean_counts(env), rng);
    cy.passed = cy.counts >= cfg.threshold;
    if (cy.passed) cy.probe_counts = noise::sample_poisson(cfg.mean_counts(env), rng);
    out.push_back(cy);
  }
  return out;
}

}  // namespace nvlink::control
