#pragma once

// Time-bin analyzer: EOD or passive-splitter routing into an unbalanced
// Mach-Zehnder, long-arm phase, output beam splitter, detectors with dark
// counts, and arrival-bin bookkeeping.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "nvlink/core/error.hpp"
#include "nvlink/nvmodel.hpp"
#include "nvlink/noise.hpp"
#include "nvlink/qcore.hpp"

namespace nvlink::photonics {

using nv::TimeBin;
using qcore::CMatrix;
using qcore::GateOp;
using qcore::PureState;

enum class Arm { Short, Long };
enum class Detector { D1, D2 };

// Photon register levels in the spatial and detector encodings.
constexpr int kShort = 1;
constexpr int kLong = 2;
constexpr int kD1 = 1;
constexpr int kD2 = 2;

inline const char* to_string(Detector d) { return d == Detector::D1 ? "D1" : "D2"; }

struct InterferometerConfig {
  double phase_phi = 0.0;
  double arm_delay = 70e-9;  // long - short; equals the time-bin separation
  double mode_overlap = 1.0;
  double phase_jitter_rms = 0.0;

  void validate() const {
    if (!(arm_delay > 0.0)) throw ConfigError("interferometer.arm_delay must be > 0");
    if (!(mode_overlap >= 0.0 && mode_overlap <= 1.0)) {
      throw ConfigError("interferometer.mode_overlap must be in [0, 1]");
    }
    if (!(phase_jitter_rms >= 0.0)) throw ConfigError("interferometer.phase_jitter_rms must be >= 0");
  }
};

struct EodConfig {
  bool enabled = true;
  double fidelity = 1.0;        // probability of routing a bin to its intended arm
  double switch_period = 70e-9;
  double drive_delay = 0.0;

  void validate() const {
    if (!(fidelity >= 0.0 && fidelity <= 1.0)) throw ConfigError("eod.fidelity must be in [0, 1]");
    if (!(switch_period > 0.0)) throw ConfigError("eod.switch_period must be > 0");
  }
};

struct DetectorConfig {
  double dark_rate = 0.0;          // counts / s per detector
  double detection_window = 210e-9;
  double time_filter_start = 0.0;  // absolute gate within the detection window
  double time_filter_end = 210e-9;

  void validate() const {
    if (!(dark_rate >= 0.0)) throw ConfigError("detector.dark_rate must be >= 0");
    if (!(detection_window > 0.0)) throw ConfigError("detector.detection_window must be > 0");
    if (!(time_filter_start < time_filter_end)) {
      throw ConfigError("detector time filter needs start < end");
    }
  }
};

enum class Origin { Signal, Dark, Leakage };

struct ArrivalRecord {
  Detector detector = Detector::D1;
  int arrival_bin = 2;  // 1, 2 or 3
  Origin origin = Origin::Signal;
  std::uint64_t shot_index = 0;
  double arrival_time = 0.0;  // within the detection window
  double delay = 0.0;         // after the bin's nominal arrival

  bool is_dark() const { return origin != Origin::Signal; }
};

// ---------------------------------------------------------------------------
// Routing
// ---------------------------------------------------------------------------

enum class Routing { Aligned, Swapped, Passive };

// EOD drive delay is taken modulo the switch period; within a quarter period
// of zero the switch is aligned (early -> long), otherwise fully swapped.
inline Routing routing_of(const EodConfig& eod, double extra_delay = 0.0) {
  if (!eod.enabled) return Routing::Passive;
  double d = std::fmod(eod.drive_delay + extra_delay, eod.switch_period);
  if (d < 0.0) d += eod.switch_period;
  const double off = std::min(d, eod.switch_period - d);
  return off <= 0.25 * eod.switch_period ? Routing::Aligned : Routing::Swapped;
}

// Probability that a photon is routed so that it lands in the central bin
// (early -> long, late -> short).
inline double central_probability(Routing r, double fidelity) {
  switch (r) {
    case Routing::Aligned: return fidelity;
    case Routing::Swapped: return 1.0 - fidelity;
    case Routing::Passive: return 0.5;
  }
  return 0.5;
}

template <class Rng>
Arm route(TimeBin bin, const EodConfig& eod, Rng& rng, double extra_delay = 0.0) {
  const double p_center = central_probability(routing_of(eod, extra_delay), eod.fidelity);
  const bool center = rng.uniform() < p_center;
  if (bin == TimeBin::Early) return center ? Arm::Long : Arm::Short;
  return center ? Arm::Short : Arm::Long;
}

inline int arrival_bin(TimeBin bin, Arm arm) {
  if (bin == TimeBin::Early) return arm == Arm::Short ? 1 : 2;
  return arm == Arm::Short ? 2 : 3;
}

// Routing as a photon-only channel from time-bin to arm encoding. Kraus index
// k = arrival bin (0: no photon). Bin 2 keeps early/late coherence, since the
// switch splits amplitude rather than choosing a path at random.
inline GateOp routing_channel(double p_center) {
  const double a = std::sqrt(p_center);
  const double b = std::sqrt(1.0 - p_center);
  CMatrix vac = CMatrix::Zero(3, 3);
  vac(nv::kVac, nv::kVac) = 1.0;
  CMatrix bin1 = CMatrix::Zero(3, 3);
  bin1(kShort, nv::kEarly) = b;
  CMatrix bin2 = CMatrix::Zero(3, 3);
  bin2(kLong, nv::kEarly) = a;
  bin2(kShort, nv::kLate) = a;
  CMatrix bin3 = CMatrix::Zero(3, 3);
  bin3(kLong, nv::kLate) = b;
  return GateOp::kraus({nv::kPhoton}, {vac, bin1, bin2, bin3});
}

inline GateOp long_arm_phase(double phi) {
  CMatrix m = CMatrix::Identity(3, 3);
  m(kLong, kLong) = std::polar(1.0, phi);
  return GateOp::unitary({nv::kPhoton}, m);
}

// Imperfect spatial mode overlap: arm coherence multiplied by `overlap`.
inline GateOp overlap_channel(double overlap) {
  CMatrix keep = std::sqrt(overlap) * CMatrix::Identity(3, 3);
  CMatrix s = CMatrix::Zero(3, 3);
  s(nv::kVac, nv::kVac) = std::sqrt(1.0 - overlap);
  s(kShort, kShort) = std::sqrt(1.0 - overlap);
  CMatrix l = CMatrix::Zero(3, 3);
  l(kLong, kLong) = std::sqrt(1.0 - overlap);
  return GateOp::kraus({nv::kPhoton}, {keep, s, l});
}

// Gaussian phase noise averaged out: arm coherence multiplied by E[cos].
inline GateOp jitter_channel(double rms) {
  return nv::dephasing_gate(nv::kPhoton, {kShort, kLong}, noise::factor_for_jitter(rms));
}

// |short> -> (|D1> + |D2>)/sqrt2, |long> -> (|D1> - |D2>)/sqrt2
inline CMatrix splitter_matrix() {
  const double s = 1.0 / std::sqrt(2.0);
  CMatrix m = CMatrix::Zero(3, 3);
  m(nv::kVac, nv::kVac) = 1.0;
  m(kD1, kShort) = s;
  m(kD2, kShort) = s;
  m(kD1, kLong) = s;
  m(kD2, kLong) = -s;
  return m;
}

inline GateOp output_splitter() { return GateOp::unitary({nv::kPhoton}, splitter_matrix()); }

struct DetectResult {
  int level = 0;  // 0 no click, kD1, kD2
  PureState state;
  double applied_phase = 0.0;
};

// Photon (already in arm encoding) through phase, overlap, splitter and a
// projective detector measurement. `extra_phase_rms` adds Gaussian phase noise
// on top of the interferometer jitter.
template <class Rng>
DetectResult interfere_and_detect(const PureState& s, const InterferometerConfig& cfg, Rng& rng,
                                  double extra_phase_rms = 0.0) {
  double phi = cfg.phase_phi;
  const double rms = std::hypot(cfg.phase_jitter_rms, extra_phase_rms);
  if (rms > 0.0) {
    std::normal_distribution<double> nd(0.0, rms);
    phi += nd(rng);
  }
  PureState cur = qcore::apply_unitary(s, long_arm_phase(phi));
  if (cfg.mode_overlap < 1.0) cur = qcore::sample_kraus(cur, overlap_channel(cfg.mode_overlap), rng).state;
  cur = qcore::apply_unitary(cur, output_splitter());
  auto m = qcore::measure(cur, nv::kPhoton, rng);
  return {m.outcome, std::move(m.state), phi};
}

// Arrival bin of a time inside the detection window; bins are one arm delay
// wide and anything past the third bin is folded into it.
inline int bin_of_time(double t, double bin_width) {
  return std::clamp(1 + static_cast<int>(std::floor(t / bin_width)), 1, 3);
}

// Dark counts spread uniformly over detectors and the detection window.
template <class Rng>
std::vector<ArrivalRecord> sample_dark_counts(const DetectorConfig& det, double bin_width,
                                              std::uint64_t shot, Rng& rng) {
  std::vector<ArrivalRecord> out;
  const double mean = det.dark_rate * det.detection_window;
  for (Detector d : {Detector::D1, Detector::D2}) {
    const int n = noise::sample_poisson(mean, rng);
    for (int i = 0; i < n; ++i) {
      const double t = rng.uniform() * det.detection_window;
      const int bin = bin_of_time(t, bin_width);
      out.push_back({d, bin, Origin::Dark, shot, t, t - (bin - 1) * bin_width});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Histogram
// ---------------------------------------------------------------------------

struct Histogram {
  std::array<std::array<std::uint64_t, 3>, 2> counts{};  // [detector][bin - 1]

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (const auto& d : counts) {
      for (auto c : d) t += c;
    }
    return t;
  }
  std::uint64_t bin_total(int bin) const {
    return counts[0][static_cast<std::size_t>(bin - 1)] + counts[1][static_cast<std::size_t>(bin - 1)];
  }
  double bin_fraction(int bin) const {
    const auto t = total();
    return t == 0 ? 0.0 : static_cast<double>(bin_total(bin)) / static_cast<double>(t);
  }
  double central_fraction() const { return bin_fraction(2); }

  void write_csv(std::ostream& os) const {
    os << "detector,bin,count,fraction\n";
    const double t = static_cast<double>(total());
    for (int d = 0; d < 2; ++d) {
      for (int b = 1; b <= 3; ++b) {
        const auto c = counts[static_cast<std::size_t>(d)][static_cast<std::size_t>(b - 1)];
        os << fmt::format("{},{},{},{:.6f}\n", d == 0 ? "D1" : "D2", b, c,
                          t > 0 ? static_cast<double>(c) / t : 0.0);
      }
    }
  }
};

inline Histogram histogram(std::span<const ArrivalRecord> records) {
  if (records.empty()) throw std::invalid_argument("histogram of an empty record set");
  Histogram h;
  for (const auto& r : records) {
    if (r.arrival_bin < 1 || r.arrival_bin > 3) throw std::invalid_argument("arrival bin outside 1..3");
    h.counts[r.detector == Detector::D1 ? 0 : 1][static_cast<std::size_t>(r.arrival_bin - 1)]++;
  }
  return h;
}

}  // namespace nvlink::photonics
