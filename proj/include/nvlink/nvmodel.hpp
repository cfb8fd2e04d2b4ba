#pragma once

// NV-center physics layer: spin-1 electron and 14N nuclear level structure,
// MW/RF/CNOT pulses, spin-conditional ZPL emission with collection loss, the
// six-step nuclear initialization, and Hahn-echo memory decay.
//
// Level order for both spins is {m = +1, 0, -1}. Qubit convention:
// |0> = m 0 (level 1), |1> = m -1 (level 2).

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nvlink/core/error.hpp"
#include "nvlink/qcore.hpp"

namespace nvlink::nv {

using qcore::CMatrix;
using qcore::Complex;
using qcore::GateOp;
using qcore::PureState;

inline const std::string kElectron = "electron";
inline const std::string kNuclear = "nuclear";
inline const std::string kPhoton = "photon";

constexpr int kSpinDim = 3;
constexpr int kPhotonDim = 3;

// m in {+1, 0, -1} -> level index {0, 1, 2}
constexpr int level_of(int m) { return 1 - m; }
constexpr int m_of(int level) { return 1 - level; }
constexpr int kQubit0 = level_of(0);
constexpr int kQubit1 = level_of(-1);

// Photon register levels. The same three levels are re-read as time bins,
// interferometer arms or detectors as the photon moves through the analyzer.
constexpr int kVac = 0;
constexpr int kEarly = 1;
constexpr int kLate = 2;

enum class TimeBin { Early, Late };

constexpr int photon_level(TimeBin b) { return b == TimeBin::Early ? kEarly : kLate; }

// Which electron transition a MW pulse drives: {0, -1} or {0, +1}.
enum class ElectronBranch { Minus, Plus };
// Which nuclear hyperfine pair an RF pulse drives: memory {0, -1} or upper {0, +1}.
enum class NuclearPair { Memory, Upper };

// (qubit-0 level, qubit-1 level)
constexpr std::pair<int, int> branch_levels(ElectronBranch b) {
  return b == ElectronBranch::Minus ? std::pair{level_of(0), level_of(-1)}
                                    : std::pair{level_of(0), level_of(+1)};
}
constexpr std::pair<int, int> pair_levels(NuclearPair p) {
  return p == NuclearPair::Memory ? std::pair{level_of(0), level_of(-1)}
                                  : std::pair{level_of(0), level_of(+1)};
}

struct EmitterParams {
  double eta_collect = 1.0;
  double eta_detect = 1.0;
  double excited_lifetime = 12e-9;
  // Laser breakthrough: mean counts per optical pulse and the width of the
  // half-Gaussian profile starting at the pulse.
  double leakage_counts_per_pulse = 0.0;
  double leakage_width = 1e-9;
  // Gate on the arrival delay after the excitation pulse.
  double time_filter_start = 0.0;
  double time_filter_end = 1.0;
  // Probability that the optical pi pulse actually excites m_s = 0.
  double optical_pi_fidelity = 1.0;

  double efficiency() const { return eta_collect * eta_detect; }

  void validate() const {
    auto prob = [](double v, const char* name) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw ConfigError(std::string("emitter.") + name + " must be in [0, 1]");
      }
    };
    prob(eta_collect, "eta_collect");
    prob(eta_detect, "eta_detect");
    prob(optical_pi_fidelity, "optical_pi_fidelity");
    if (!(excited_lifetime > 0.0)) throw ConfigError("emitter.excited_lifetime must be > 0");
    if (!(leakage_counts_per_pulse >= 0.0)) {
      throw ConfigError("emitter.leakage_counts_per_pulse must be >= 0");
    }
    if (!(leakage_width > 0.0)) throw ConfigError("emitter.leakage_width must be > 0");
    if (!(time_filter_start < time_filter_end)) {
      throw ConfigError("emitter time filter needs start < end");
    }
  }

  // Fraction of emitted photons whose exponential arrival delay falls in the gate.
  double gate_acceptance() const {
    const double a = std::max(0.0, time_filter_start);
    const double b = std::max(a, time_filter_end);
    return std::exp(-a / excited_lifetime) - std::exp(-b / excited_lifetime);
  }
};

struct MemoryParams {
  double t2_hahn = 0.1;
  double decay_exponent = 1.0;

  void validate() const {
    if (!(t2_hahn > 0.0)) throw ConfigError("memory.t2_hahn must be > 0");
    if (!(decay_exponent >= 1.0)) throw ConfigError("memory.decay_exponent must be >= 1");
  }
};

// exp(-i theta/2 (cos(phase) sx + sin(phase) sy))
inline Eigen::Matrix2cd su2(double theta, double phase) {
  const double c = std::cos(theta / 2.0);
  const double s = std::sin(theta / 2.0);
  const Complex i{0.0, 1.0};
  Eigen::Matrix2cd m;
  m << c, -i * s * std::exp(-i * phase), -i * s * std::exp(i * phase), c;
  return m;
}

// Lift a 2x2 block onto levels (l0, l1) of a d-level system; other levels untouched.
inline CMatrix lift(const Eigen::Matrix2cd& m, std::pair<int, int> levels, int dim = kSpinDim) {
  CMatrix out = CMatrix::Identity(dim, dim);
  const int l[2] = {levels.first, levels.second};
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) out(l[r], l[c]) = m(r, c);
  }
  return out;
}

inline GateOp mw_gate(double theta, double phase, ElectronBranch branch = ElectronBranch::Minus) {
  return GateOp::unitary({kElectron}, lift(su2(theta, phase), branch_levels(branch)));
}

// Block-diagonal controlled operation on (electron, nuclear): `on_target` acts
// on the target spin only where the control spin sits at `control_level`.
inline CMatrix controlled_block(const CMatrix& on_target, bool target_is_nuclear,
                                int control_level) {
  CMatrix full = CMatrix::Identity(kSpinDim * kSpinDim, kSpinDim * kSpinDim);
  // Register order is (electron, nuclear): flat = 3 * e + n.
  for (int a = 0; a < kSpinDim; ++a) {
    for (int b = 0; b < kSpinDim; ++b) {
      for (int ctl = 0; ctl < kSpinDim; ++ctl) {
        if (ctl != control_level) continue;
        const int row = target_is_nuclear ? 3 * ctl + a : 3 * a + ctl;
        const int col = target_is_nuclear ? 3 * ctl + b : 3 * b + ctl;
        full(row, col) = on_target(a, b);
      }
    }
  }
  return full;
}

// RF rotation on a nuclear pair, only inside the electron block m_s = cond_ms.
inline GateOp rf_gate(double theta, double phase, NuclearPair pair, int cond_ms) {
  const CMatrix on_n = lift(su2(theta, phase), pair_levels(pair));
  return GateOp::unitary({kElectron, kNuclear}, controlled_block(on_n, true, level_of(cond_ms)));
}

// Nuclear-conditional electron flip. The ideal gate is an exact X on the
// chosen electron branch (an involution); `area_error` scales the pulse area.
inline GateOp cnot_gate(int control_mI, ElectronBranch branch, double area_error = 0.0) {
  const Complex i{0.0, 1.0};
  const Eigen::Matrix2cd flip = i * su2(std::numbers::pi * (1.0 - area_error), 0.0);
  const CMatrix on_e = lift(flip, branch_levels(branch));
  return GateOp::unitary({kElectron, kNuclear}, controlled_block(on_e, false, level_of(control_mI)));
}

// Mixed-unitary failure model: with probability p the pulse is not applied.
inline GateOp with_failure(const GateOp& gate, double p) {
  if (!gate.is_unitary()) throw std::invalid_argument("with_failure expects a unitary");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("failure probability outside [0, 1]");
  if (p == 0.0) return gate;
  const auto n = gate.unitary_matrix().rows();
  return GateOp::kraus(gate.targets(), {std::sqrt(1.0 - p) * gate.unitary_matrix(),
                                        std::sqrt(p) * CMatrix::Identity(n, n)});
}

// E_{1,2} optical pumping: every electron level ends in m_s = 0, except a
// residual fraction left in m_s = -1. Nuclear spin is not touched.
inline GateOp pump_gate(double residual = 0.0) {
  if (!(residual >= 0.0 && residual <= 1.0)) {
    throw std::invalid_argument("pump residual outside [0, 1]");
  }
  std::vector<CMatrix> ops;
  for (int from = 0; from < kSpinDim; ++from) {
    CMatrix good = CMatrix::Zero(kSpinDim, kSpinDim);
    good(level_of(0), from) = std::sqrt(1.0 - residual);
    ops.push_back(good);
    if (residual > 0.0) {
      CMatrix bad = CMatrix::Zero(kSpinDim, kSpinDim);
      bad(level_of(-1), from) = std::sqrt(residual);
      ops.push_back(bad);
    }
  }
  return GateOp::kraus({kElectron}, std::move(ops));
}

// Spin-conditional ZPL emission into `bin` on (electron, photon).
// Kraus 0: m_s = 0 with an empty photon register emits (with phase
//   e^{i phase}); everything else is untouched.
// Kraus 1: m_s = 0 with the other bin already occupied. The second photon is
//   emitted but never detected; tracing it out decoheres this component.
// Kraus 2: (only if optical_pi_fidelity < 1) the pulse failed to excite m_s = 0.
// Register order (electron, photon): flat = 3 * e + p.
inline GateOp emission_gate(TimeBin bin, double phase, double optical_pi_fidelity = 1.0) {
  const int z = level_of(0);
  const int tgt = photon_level(bin);
  const int other = bin == TimeBin::Early ? kLate : kEarly;
  const int n = kSpinDim * kPhotonDim;
  auto at = [](int e, int p) { return 3 * e + p; };
  const double f = optical_pi_fidelity;
  const Complex ph = std::polar(1.0, phase);

  CMatrix emit = CMatrix::Identity(n, n);
  emit(at(z, kVac), at(z, kVac)) = 0.0;
  emit(at(z, other), at(z, other)) = 0.0;
  emit(at(z, tgt), at(z, tgt)) = 0.0;
  // |0, vac> -> sqrt(f) e^{i phase} |0, bin>; |0, bin> completes the swap.
  emit(at(z, tgt), at(z, kVac)) = std::sqrt(f) * ph;
  emit(at(z, kVac), at(z, tgt)) = std::sqrt(f) * std::conj(ph);

  CMatrix second = CMatrix::Zero(n, n);
  second(at(z, other), at(z, other)) = 1.0;

  std::vector<CMatrix> ops{emit, second};
  if (f < 1.0) {
    CMatrix failed = CMatrix::Zero(n, n);
    failed(at(z, kVac), at(z, kVac)) = std::sqrt(1.0 - f);
    failed(at(z, tgt), at(z, tgt)) = std::sqrt(1.0 - f);
    ops.push_back(failed);
  }
  return GateOp::kraus({kElectron, kPhoton}, std::move(ops));
}

// Collection/detection loss of a photon in `bin`. Kraus 1 is the lost branch:
// the photon is traced out and the register returns to vacuum.
inline GateOp collection_gate(TimeBin bin, double efficiency) {
  if (!(efficiency >= 0.0 && efficiency <= 1.0)) {
    throw std::invalid_argument("collection efficiency outside [0, 1]");
  }
  const int b = photon_level(bin);
  CMatrix keep = CMatrix::Identity(kPhotonDim, kPhotonDim);
  keep(b, b) = std::sqrt(efficiency);
  CMatrix lost = CMatrix::Zero(kPhotonDim, kPhotonDim);
  lost(kVac, b) = std::sqrt(1.0 - efficiency);
  return GateOp::kraus({kPhoton}, {keep, lost});
}

// Phase-flip channel on a qubit pair that multiplies its coherence by `factor`.
inline GateOp dephasing_gate(const std::string& label, std::pair<int, int> levels, double factor,
                             int dim = kSpinDim) {
  if (!(factor >= -1.0 && factor <= 1.0)) throw std::invalid_argument("dephasing factor outside [-1, 1]");
  CMatrix z = CMatrix::Identity(dim, dim);
  z(levels.second, levels.second) = -1.0;
  return GateOp::kraus({label}, {std::sqrt((1.0 + factor) / 2.0) * CMatrix::Identity(dim, dim),
                                 std::sqrt((1.0 - factor) / 2.0) * z});
}

// ---------------------------------------------------------------------------
// State-level pulse operations
// ---------------------------------------------------------------------------

inline PureState mw_rotation(const PureState& s, double theta, double phase,
                             ElectronBranch branch = ElectronBranch::Minus) {
  return qcore::apply_unitary(s, mw_gate(theta, phase, branch));
}

inline PureState rf_rotation(const PureState& s, double theta, double phase, NuclearPair pair,
                             int conditioned_on_ms) {
  return qcore::apply_unitary(s, rf_gate(theta, phase, pair, conditioned_on_ms));
}

inline PureState cnot(const PureState& s, int control_mI, ElectronBranch branch) {
  return qcore::apply_unitary(s, cnot_gate(control_mI, branch));
}

struct EmissionResult {
  PureState state;
  bool emitted = false;     // the emission branch put a photon in the register
  bool lost = false;        // collection loss traced the new photon out
  bool second_photon = false;
};

// Emission phase 2 pi delta tau_bin; tau_early = 0, tau_late = bin separation.
inline double emission_phase(TimeBin bin, double detuning_hz, double bin_separation) {
  return bin == TimeBin::Early ? 0.0 : 2.0 * std::numbers::pi * detuning_hz * bin_separation;
}

template <class Rng>
EmissionResult optical_pi_emit(const PureState& s, TimeBin bin, const EmitterParams& params,
                               double detuning_hz, double bin_separation, Rng& rng) {
  const auto& spec = s.spec();
  const auto ie = spec.index_of(kElectron);
  const auto ip = spec.index_of(kPhoton);
  const int tgt = photon_level(bin);
  for (std::size_t f = 0; f < spec.total_dimension(); ++f) {
    if (spec.digit(f, ie) == level_of(0) && spec.digit(f, ip) == tgt &&
        std::norm(s.amplitudes()[static_cast<Eigen::Index>(f)]) > 1e-24) {
      throw std::invalid_argument("optical_pi_emit: photon slot already occupied");
    }
  }
  auto e = qcore::sample_kraus(
      s, emission_gate(bin, emission_phase(bin, detuning_hz, bin_separation), params.optical_pi_fidelity), rng);
  EmissionResult out{e.state};
  out.second_photon = e.kraus_index == 1;
  const double in_bin = qcore::outcome_probabilities(out.state, kPhoton)[static_cast<std::size_t>(tgt)];
  if (in_bin <= 0.0) return out;
  out.emitted = true;
  auto c = qcore::sample_kraus(out.state, collection_gate(bin, params.efficiency()), rng);
  out.state = c.state;
  out.lost = c.kraus_index == 1;
  return out;
}

// ---------------------------------------------------------------------------
// Nuclear initialization through the electron
// ---------------------------------------------------------------------------

struct NuclearInitErrors {
  double rf_area_error = 0.0;
  double mw_area_error = 0.0;
  double pump_residual = 0.0;
};

// 1. pump electron to m_s 0; 2. CNOT 0 -> +1 on m_I = 0; 3. RF m_I +1 -> 0 in
// m_s 0; 4. CNOT 0 -> -1 on m_I = 0; 5. RF m_I -1 -> 0 in m_s 0; 6. pump.
inline std::vector<GateOp> nuclear_init_gates(const NuclearInitErrors& err = {}) {
  const double rf_pi = std::numbers::pi * (1.0 - err.rf_area_error);
  return {
      pump_gate(err.pump_residual),
      cnot_gate(0, ElectronBranch::Plus, err.mw_area_error),
      rf_gate(rf_pi, 0.0, NuclearPair::Upper, 0),
      cnot_gate(0, ElectronBranch::Minus, err.mw_area_error),
      rf_gate(rf_pi, 0.0, NuclearPair::Memory, 0),
      pump_gate(err.pump_residual),
  };
}

template <class Rng>
PureState nuclear_init_sequence(const PureState& s, const NuclearInitErrors& err, Rng& rng) {
  PureState cur = s;
  for (const auto& g : nuclear_init_gates(err)) cur = qcore::sample_kraus(cur, g, rng).state;
  return cur;
}

inline qcore::DensityOracle nuclear_init_oracle(const qcore::DensityOracle& rho,
                                                const NuclearInitErrors& err = {}) {
  qcore::DensityOracle cur = rho;
  for (const auto& g : nuclear_init_gates(err)) cur = qcore::oracle_evolve(cur, g);
  return cur;
}

// ---------------------------------------------------------------------------
// Memory decay
// ---------------------------------------------------------------------------

inline double memory_decay_factor(double t, const MemoryParams& p) {
  if (t < 0.0) throw std::invalid_argument("memory decay time must be >= 0");
  return std::exp(-std::pow(t / p.t2_hahn, p.decay_exponent));
}

// Scales the coherence between the two memory levels of `label`. Realized as
// a phase flip on the second level so the map stays completely positive when
// a third level is populated.
inline qcore::DensityOracle memory_decay(const qcore::DensityOracle& rho, const std::string& label,
                                         double t, const MemoryParams& p,
                                         std::pair<int, int> levels = {kQubit0, kQubit1}) {
  const auto dim = rho.spec().dim(rho.spec().index_of(label));
  return qcore::oracle_evolve(rho, dephasing_gate(label, levels, memory_decay_factor(t, p), dim));
}

}  // namespace nvlink::nv
