#pragma once

// Density-matrix evaluation of a protocol script: the exact per-shot outcome
// distribution that the trajectory executor samples from. Covers every
// channel of the executor except charge-state dynamics, CRC post-selection,
// dark counts and laser leakage.

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "nvlink/analysis.hpp"
#include "nvlink/control.hpp"
#include "nvlink/noise.hpp"
#include "nvlink/nvmodel.hpp"
#include "nvlink/photonics.hpp"
#include "nvlink/protocol.hpp"
#include "nvlink/qcore.hpp"

namespace nvlink::reference {

using control::ShotOptions;
using control::SimulationSetup;
using protocol::Op;
using protocol::ProtocolScript;
using qcore::DensityOracle;

// p[bin][detector level][inferred]: probability per shot of a signal herald in
// `bin` (1..3) on detector level (1 = D1, 2 = D2) followed by the spin readout
// result. Index 0 entries stay zero.
struct OutcomeDistribution {
  std::array<std::array<std::array<double, 2>, 3>, 4> p{};

  double at(int bin, int det, int inferred) const {
    return p[static_cast<std::size_t>(bin)][static_cast<std::size_t>(det)][static_cast<std::size_t>(inferred)];
  }
  double herald_probability(const std::array<bool, 4>& bins) const {
    double t = 0.0;
    for (int b = 1; b <= 3; ++b) {
      if (!bins[static_cast<std::size_t>(b)]) continue;
      for (int d = 1; d <= 2; ++d) t += at(b, d, 0) + at(b, d, 1);
    }
    return t;
  }
};

// Probability that a photon arriving in `bin` passes both the emitter gate on
// its exponential delay and the absolute detector filter.
inline double bin_acceptance(const SimulationSetup& s, int bin) {
  const double off = (bin - 1) * s.interferometer.arm_delay;
  const double lo = std::max({0.0, s.emitter.time_filter_start, s.detector.time_filter_start - off});
  const double hi = std::min(s.emitter.time_filter_end, s.detector.time_filter_end - off);
  if (!(hi > lo)) return 0.0;
  const double tau = s.emitter.excited_lifetime;
  return std::exp(-lo / tau) - std::exp(-hi / tau);
}

inline qcore::SpecPtr register_for(const ProtocolScript& script) {
  std::vector<qcore::Subsystem> subs{{nv::kElectron, nv::kSpinDim}};
  if (script.uses_nuclear()) subs.push_back({nv::kNuclear, nv::kSpinDim});
  subs.push_back({nv::kPhoton, nv::kPhotonDim});
  return std::make_shared<const qcore::RegisterSpec>(subs);
}

inline DensityOracle initial_oracle(const ProtocolScript& script) {
  const auto spec = register_for(script);
  const bool nuclear = script.uses_nuclear();
  const bool thermal = nuclear && std::any_of(script.steps.begin(), script.steps.end(),
                                              [](const auto& i) { return i.op == Op::InitN; });
  std::vector<qcore::PureState> states;
  for (int n = 0; n < (thermal ? 3 : 1); ++n) {
    std::vector<int> d(spec->size(), 0);
    d[0] = nv::kQubit0;
    if (nuclear) d[1] = thermal ? n : nv::kQubit0;
    states.push_back(qcore::basis_state(spec, d));
  }
  return DensityOracle::mixture(states);
}

// Evolves everything before the readout step.
inline DensityOracle evolve_to_readout(const ProtocolScript& script, const SimulationSetup& setup) {
  script.validate();
  setup.validate();
  const double pf = setup.nuclear_op_failure;
  const double sep = setup.interferometer.arm_delay;
  DensityOracle rho = initial_oracle(script);
  for (const auto& st : script.steps) {
    switch (st.op) {
      case Op::Crc:
      case Op::Readout: break;
      case Op::InitE: {
        rho = qcore::oracle_evolve(rho, nv::pump_gate(0.0));
        const double p = noise::init_flip_probability(setup.readout);
        if (p > 0.0) rho = qcore::oracle_evolve(rho, noise::init_error_gate(p));
        break;
      }
      case Op::InitN:
        rho = nv::nuclear_init_oracle(rho, setup.nuclear_init);
        break;
      case Op::Mw: rho = qcore::oracle_evolve(rho, nv::mw_gate(st.theta, st.phase, st.branch)); break;
      case Op::Rf:
        rho = qcore::oracle_evolve(rho, nv::with_failure(nv::rf_gate(st.theta, st.phase, st.pair, st.cond_ms), pf));
        break;
      case Op::Cnot:
        rho = qcore::oracle_evolve(rho, nv::with_failure(nv::cnot_gate(st.control, st.branch), pf));
        break;
      case Op::Wait:
        if (script.uses_nuclear() && st.duration > 0.0) {
          rho = nv::memory_decay(rho, nv::kNuclear, st.duration, setup.memory);
        }
        break;
      case Op::OpticalPi: {
        const double sigma = setup.noise.sigma_diffusion_hz;
        const double delta = sigma > 0.0 ? 0.0 : setup.noise.detuning_hz;
        rho = qcore::oracle_evolve(
            rho, nv::emission_gate(st.bin, nv::emission_phase(st.bin, delta, sep), setup.emitter.optical_pi_fidelity));
        if (st.bin == nv::TimeBin::Late && sigma > 0.0) {
          rho = qcore::oracle_evolve(rho, nv::dephasing_gate(nv::kPhoton, {nv::kEarly, nv::kLate},
                                                             noise::analytic_contrast(sigma, sep),
                                                             nv::kPhotonDim));
        }
        rho = qcore::oracle_evolve(rho, nv::collection_gate(st.bin, setup.emitter.efficiency()));
        break;
      }
    }
  }
  return rho;
}

inline OutcomeDistribution oracle_outcomes(const ProtocolScript& script, const SimulationSetup& setup,
                                           const ShotOptions& opts) {
  constexpr double pi = std::numbers::pi;
  const DensityOracle pre = evolve_to_readout(script, setup);
  const bool nuclear = script.uses_nuclear();
  const double pf = setup.nuclear_op_failure;

  std::vector<qcore::GateOp> readout_map;
  if (nuclear) {
    if (script.basis() == qcore::Basis::XX) {
      readout_map.push_back(nv::with_failure(nv::rf_gate(pi / 2, pi / 2, nv::NuclearPair::Memory, -1), pf));
    }
    readout_map.push_back(nv::with_failure(nv::cnot_gate(0, nv::ElectronBranch::Minus), pf));
  } else if (script.basis() == qcore::Basis::XX) {
    readout_map.push_back(nv::mw_gate(pi / 2, pi / 2));
  }
  const auto conf = noise::readout_confusion(setup.readout);
  const auto routing = photonics::routing_channel(
      photonics::central_probability(photonics::routing_of(setup.eod, opts.routing_offset), setup.eod.fidelity));
  const double rms = std::hypot(setup.interferometer.phase_jitter_rms, setup.spectral_jitter_rms());

  OutcomeDistribution out;
  for (int bin = 1; bin <= 3; ++bin) {
    const double acc = bin_acceptance(setup, bin);
    if (!opts.herald_bins[static_cast<std::size_t>(bin)] || acc <= 0.0) continue;
    auto br = qcore::oracle_kraus_branch(pre, routing, static_cast<std::size_t>(bin));
    if (!br.state) continue;
    DensityOracle r = *br.state;
    r = qcore::oracle_evolve(r, photonics::long_arm_phase(setup.interferometer.phase_phi));
    if (setup.interferometer.mode_overlap < 1.0) {
      r = qcore::oracle_evolve(r, photonics::overlap_channel(setup.interferometer.mode_overlap));
    }
    if (rms > 0.0) r = qcore::oracle_evolve(r, photonics::jitter_channel(rms));
    r = qcore::oracle_evolve(r, photonics::output_splitter());
    for (int d = 1; d <= 2; ++d) {
      auto pd = qcore::oracle_project(r, nv::kPhoton, d);
      if (!pd.state) continue;
      DensityOracle e = *pd.state;
      if (opts.spin_readout) {
        for (const auto& g : readout_map) e = qcore::oracle_evolve(e, g);
      }
      const auto pe = qcore::oracle_probabilities(e, nv::kElectron);
      const double bright = pe[static_cast<std::size_t>(nv::kQubit0)];
      const double p_one = bright * conf.bright_as_dark + (1.0 - bright) * (1.0 - conf.dark_as_bright);
      const double w = br.probability * pd.probability * acc;
      out.p[static_cast<std::size_t>(bin)][static_cast<std::size_t>(d)][0] = w * (1.0 - p_one);
      out.p[static_cast<std::size_t>(bin)][static_cast<std::size_t>(d)][1] = w * p_one;
    }
  }
  return out;
}

// Fidelity of the heralded memory-photon pair with (|1,E> + e^{i theta}|0,L>)/sqrt2,
// maximized over theta (the analyzer phase absorbs it). The memory qubit is the
// nuclear spin when the script uses it, the electron otherwise.
inline double target_fidelity(const ProtocolScript& script, const SimulationSetup& setup) {
  const DensityOracle rho = evolve_to_readout(script, setup);
  const std::string mem = script.uses_nuclear() ? nv::kNuclear : nv::kElectron;
  const auto red = qcore::partial_trace(rho, {mem, nv::kPhoton});
  const auto& rs = red.spec();
  const bool mem_first = rs.label(0) == mem;
  auto idx = [&](int q, int p) {
    std::vector<int> d = mem_first ? std::vector<int>{q, p} : std::vector<int>{p, q};
    return static_cast<Eigen::Index>(rs.flat_index(d));
  };
  const std::array<int, 2> ql{nv::kQubit0, nv::kQubit1};
  double pop = 0.0;
  for (int q : ql) {
    for (int p : {nv::kEarly, nv::kLate}) pop += red.matrix()(idx(q, p), idx(q, p)).real();
  }
  if (!(pop > 0.0)) throw NumericalError("no heralded photon population");
  const auto a = idx(nv::kQubit1, nv::kEarly);
  const auto b = idx(nv::kQubit0, nv::kLate);
  const auto& m = red.matrix();
  return (0.5 * (m(a, a).real() + m(b, b).real()) + std::abs(m(a, b))) / pop;
}

// Exact correlation table conditioned on a herald. XX uses the analyzer
// phases phi0 and phi0 + pi with equal weight, phi0 located from four phase
// points of p(1, D1).
struct OracleTable {
  analysis::Quad zz{};
  analysis::Quad xx{};
  double phi0 = 0.0;
  double visibility = 0.0;
  double zz_herald = 0.0;  // per-shot herald probability of the ZZ run
  double xx_herald = 0.0;

  double bound() const { return analysis::fidelity_lower_bound(zz, xx); }
};

inline analysis::Quad conditional_outcomes(const OutcomeDistribution& d, int bin) {
  analysis::Quad q{d.at(bin, 1, 0), d.at(bin, 1, 1), d.at(bin, 2, 0), d.at(bin, 2, 1)};
  const double t = q[0] + q[1] + q[2] + q[3];
  if (!(t > 0.0)) throw NumericalError("oracle: no herald probability in bin " + std::to_string(bin));
  for (auto& v : q) v /= t;
  return q;
}

inline OracleTable oracle_table(const ProtocolScript& script, SimulationSetup setup) {
  OracleTable t;
  const auto zs = script.with_basis(qcore::Basis::ZZ);
  const auto zo = control::options_for(qcore::Basis::ZZ, setup.eod);
  const auto zd = oracle_outcomes(zs, setup, zo);
  t.zz_herald = zd.herald_probability(zo.herald_bins);
  double n = 0.0;
  for (int bin : {1, 3}) {
    for (int det = 1; det <= 2; ++det) {
      for (int s = 0; s < 2; ++s) {
        const int cell = 2 * s + (bin == 1 ? 0 : 1);
        t.zz[static_cast<std::size_t>(cell)] += zd.at(bin, det, s);
        n += zd.at(bin, det, s);
      }
    }
  }
  if (!(n > 0.0)) throw NumericalError("oracle: ZZ run never heralds");
  for (auto& v : t.zz) v /= n;

  const auto xs = script.with_basis(qcore::Basis::XX);
  const auto xo = control::options_for(qcore::Basis::XX, setup.eod);
  const double base = setup.interferometer.phase_phi;
  auto p1d1 = [&](double phi) {
    setup.interferometer.phase_phi = phi;
    return conditional_outcomes(oracle_outcomes(xs, setup, xo), 2);
  };
  constexpr double pi = std::numbers::pi;
  const auto a0 = p1d1(base);
  const auto a1 = p1d1(base + pi / 2);
  const auto a2 = p1d1(base + pi);
  const auto a3 = p1d1(base + 3 * pi / 2);
  const double c = 0.5 * (a0[1] - a2[1]);
  const double s = 0.5 * (a1[1] - a3[1]);
  t.phi0 = analysis::wrap_phase(base + std::atan2(s, c));
  t.visibility = 4.0 * std::hypot(c, s);

  for (bool flipped : {false, true}) {
    setup.interferometer.phase_phi = t.phi0 + (flipped ? pi : 0.0);
    const auto d = oracle_outcomes(xs, setup, xo);
    if (!flipped) t.xx_herald = d.herald_probability(xo.herald_bins);
    const auto q = conditional_outcomes(d, 2);
    // q in (inferred, detector) order; map to XX cells 2 * spin + photon.
    for (int det = 1; det <= 2; ++det) {
      for (int inf = 0; inf < 2; ++inf) {
        const int spin = inf == 1 ? 0 : 1;
        const int photon = ((det == 1) != flipped) ? 0 : 1;
        t.xx[static_cast<std::size_t>(2 * spin + photon)] += 0.5 * q[static_cast<std::size_t>((det - 1) * 2 + inf)];
      }
    }
  }
  return t;
}

}  // namespace nvlink::reference
