#pragma once

// Estimators and closed forms: detection probabilities of the routed
// interferometer, the ZZ/XX fidelity lower bound, correlation tables from
// heralded records, phase-sweep fitting, dark-count correction and the
// contrast budget.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "nvlink/control.hpp"
#include "nvlink/core/error.hpp"
#include "nvlink/qcore.hpp"

namespace nvlink::analysis {

using control::ShotRecord;
using qcore::Basis;

using Quad = std::array<double, 4>;

// Outcome order used by sweeps: (0,D1), (1,D1), (0,D2), (1,D2), where the
// first entry is the inferred spin value.
inline Quad eq4_probabilities(double phi) {
  const double c = std::cos(phi);
  return {(1.0 - c) / 4.0, (1.0 + c) / 4.0, (1.0 + c) / 4.0, (1.0 - c) / 4.0};
}

// Sign of the cos term per outcome in the order above.
constexpr std::array<double, 4> kOutcomeSign{-1.0, 1.0, 1.0, -1.0};

inline int outcome_index(int inferred, photonics::Detector d) {
  return (d == photonics::Detector::D1 ? 0 : 2) + inferred;
}

// Cells are indexed 2 * spin + photon, so index 0 is rho_11 and 3 is rho_44.
inline double fidelity_lower_bound(const Quad& zz, const Quad& xx, double tol = 1e-9) {
  for (const auto* q : {&zz, &xx}) {
    double sum = 0.0;
    for (double v : *q) {
      if (!(v >= 0.0)) throw std::invalid_argument("fidelity bound needs non-negative diagonals");
      sum += v;
    }
    if (sum > 1.0 + tol) throw std::invalid_argument("diagonals sum above 1");
  }
  return 0.5 * (zz[1] + zz[2] - 2.0 * std::sqrt(zz[0] * zz[3]) + xx[0] + xx[3] - xx[1] - xx[2]);
}

inline double zz_aggregate(const Quad& zz) { return zz[1] + zz[2]; }
inline double xx_aggregate(const Quad& xx) { return xx[0] + xx[3] - xx[1] - xx[2]; }

// ---------------------------------------------------------------------------
// Correlation table
// ---------------------------------------------------------------------------

struct CorrelationTable {
  std::array<std::uint64_t, 4> zz_counts{};
  std::array<std::uint64_t, 4> xx_counts{};

  static Quad normalize(const std::array<std::uint64_t, 4>& c) {
    const double n = static_cast<double>(c[0] + c[1] + c[2] + c[3]);
    Quad q{};
    if (n == 0.0) return q;
    for (std::size_t i = 0; i < 4; ++i) q[i] = static_cast<double>(c[i]) / n;
    return q;
  }
  static Quad stderrs(const std::array<std::uint64_t, 4>& c) {
    const double n = static_cast<double>(c[0] + c[1] + c[2] + c[3]);
    Quad q{};
    if (n == 0.0) return q;
    for (std::size_t i = 0; i < 4; ++i) {
      const double p = static_cast<double>(c[i]) / n;
      q[i] = std::sqrt(p * (1.0 - p) / n);
    }
    return q;
  }

  Quad zz() const { return normalize(zz_counts); }
  Quad xx() const { return normalize(xx_counts); }
  Quad zz_stderr() const { return stderrs(zz_counts); }
  Quad xx_stderr() const { return stderrs(xx_counts); }
  std::uint64_t zz_total() const { return zz_counts[0] + zz_counts[1] + zz_counts[2] + zz_counts[3]; }
  std::uint64_t xx_total() const { return xx_counts[0] + xx_counts[1] + xx_counts[2] + xx_counts[3]; }

  double zz_aggregate() const { return analysis::zz_aggregate(zz()); }
  double xx_aggregate() const { return analysis::xx_aggregate(xx()); }
  // Binomial error of the aggregate: each herald contributes +1 or -1 (XX) or 1/0 (ZZ).
  double zz_aggregate_stderr() const {
    const double n = static_cast<double>(zz_total());
    const double p = zz_aggregate();
    return n > 0 ? std::sqrt(p * (1.0 - p) / n) : 0.0;
  }
  double xx_aggregate_stderr() const {
    const double n = static_cast<double>(xx_total());
    const double e = xx_aggregate();
    return n > 0 ? std::sqrt((1.0 - e * e) / n) : 0.0;
  }
  double bound() const { return fidelity_lower_bound(zz(), xx()); }
};

// A batch of records measured in one basis. For XX, `photon_flipped` marks the
// run at phi0 + pi, where D2 is the photon "+" outcome.
struct LabeledRun {
  std::span<const ShotRecord> records;
  Basis basis = Basis::ZZ;
  bool photon_flipped = false;
};

// ZZ: spin = inferred value, photon = 0 for bin 1 (early), 1 for bin 3 (late).
// XX: spin "+" is inferred 1, photon "+" is D1 at phi0; "+" maps to bit 0.
inline int zz_cell(const ShotRecord& r) {
  return 2 * r.spin_inferred + (r.arrival_bin == 1 ? 0 : 1);
}
inline int xx_cell(const ShotRecord& r, bool photon_flipped) {
  const int spin = r.spin_inferred == 1 ? 0 : 1;
  const bool d1 = r.detector == photonics::Detector::D1;
  const int photon = (d1 != photon_flipped) ? 0 : 1;
  return 2 * spin + photon;
}

inline CorrelationTable correlation_table(const std::vector<LabeledRun>& runs) {
  CorrelationTable t;
  for (const auto& run : runs) {
    for (const auto& r : run.records) {
      if (!r.readout_performed) continue;
      if (run.basis == Basis::ZZ) {
        if (r.arrival_bin != 1 && r.arrival_bin != 3) continue;
        t.zz_counts[static_cast<std::size_t>(zz_cell(r))]++;
      } else {
        if (r.arrival_bin != 2) continue;
        t.xx_counts[static_cast<std::size_t>(xx_cell(r, run.photon_flipped))]++;
      }
    }
  }
  if (t.zz_total() + t.xx_total() == 0) throw std::invalid_argument("correlation table from an empty herald set");
  return t;
}

// ---------------------------------------------------------------------------
// Dark-count correction
// ---------------------------------------------------------------------------

struct CorrectedQuad {
  Quad p{};
  bool signal_undefined = false;
};

// Accidentals are spread evenly over the four cells.
inline CorrectedQuad dark_count_correct(const Quad& raw, double dark_fraction) {
  if (!(dark_fraction >= 0.0)) throw std::invalid_argument("dark fraction must be >= 0");
  if (dark_fraction >= 1.0) throw std::invalid_argument("dark fraction must be < 1");
  CorrectedQuad out;
  double sum = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    out.p[i] = std::max(0.0, (raw[i] - dark_fraction / 4.0) / (1.0 - dark_fraction));
    sum += out.p[i];
  }
  if (!(sum > 0.0)) {
    out.p = {0.25, 0.25, 0.25, 0.25};
    out.signal_undefined = true;
    return out;
  }
  for (auto& v : out.p) v /= sum;
  out.signal_undefined = dark_fraction >= 0.5;
  return out;
}

// Forward model: a fraction of heralds replaced by uniformly distributed accidentals.
inline Quad mix_accidentals(const Quad& signal, double dark_fraction) {
  Quad q{};
  for (std::size_t i = 0; i < 4; ++i) q[i] = (1.0 - dark_fraction) * signal[i] + dark_fraction / 4.0;
  return q;
}

inline double correct_visibility(double raw_visibility, double dark_fraction) {
  if (!(dark_fraction >= 0.0 && dark_fraction < 1.0)) throw std::invalid_argument("dark fraction outside [0, 1)");
  return raw_visibility / (1.0 - dark_fraction);
}

// ---------------------------------------------------------------------------
// Phase sweep
// ---------------------------------------------------------------------------

struct SweepPoint {
  double phi = 0.0;
  std::array<std::uint64_t, 4> counts{};  // sweep outcome order

  std::uint64_t total() const { return counts[0] + counts[1] + counts[2] + counts[3]; }
  double frequency(std::size_t o) const {
    const auto n = total();
    return n ? static_cast<double>(counts[o]) / static_cast<double>(n) : 0.0;
  }
  double stderr_of(std::size_t o) const {
    const auto n = static_cast<double>(total());
    const double p = frequency(o);
    return n > 0 ? std::sqrt(p * (1.0 - p) / n) : 0.0;
  }
};

inline SweepPoint sweep_point(double phi, std::span<const ShotRecord> records) {
  SweepPoint p;
  p.phi = phi;
  for (const auto& r : records) {
    if (!r.readout_performed || r.arrival_bin != 2) continue;
    p.counts[static_cast<std::size_t>(outcome_index(r.spin_inferred, r.detector))]++;
  }
  return p;
}

// A + B cos(phi - phi0) for one outcome.
struct SinusoidFit {
  double offset = 0.0;
  double amplitude = 0.0;
  double phi0 = 0.0;
};

struct PhaseSweepResult {
  std::vector<SweepPoint> points;
  std::array<SinusoidFit, 4> per_outcome{};
  std::array<double, 4> offsets{};  // joint fit
  double amplitude = 0.0;           // joint fit, shared by all outcomes
  double phi0 = 0.0;                // phase of maximal p(1, D1)
  double visibility = 0.0;
  double visibility_stderr = 0.0;
  double phi0_stderr = 0.0;
  bool degenerate = false;
};

inline double wrap_phase(double x) {
  const double two_pi = 2.0 * std::numbers::pi;
  x = std::fmod(x, two_pi);
  if (x < 0.0) x += two_pi;
  return x;
}

// Joint linear least squares: f_o(phi) = a_o + s_o (c cos phi + d sin phi),
// six parameters over all outcomes. Visibility = sqrt(c^2 + d^2) / mean(a_o).
inline PhaseSweepResult fit_phase_sweep(std::vector<SweepPoint> points) {
  if (points.size() < 6) throw std::invalid_argument("phase sweep fit needs at least 6 points");
  PhaseSweepResult res;
  res.points = std::move(points);
  const auto n = static_cast<Eigen::Index>(res.points.size());

  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(4 * n, 6);
  Eigen::VectorXd y(4 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& pt = res.points[static_cast<std::size_t>(i)];
    for (int o = 0; o < 4; ++o) {
      const auto row = 4 * i + o;
      X(row, o) = 1.0;
      X(row, 4) = kOutcomeSign[static_cast<std::size_t>(o)] * std::cos(pt.phi);
      X(row, 5) = kOutcomeSign[static_cast<std::size_t>(o)] * std::sin(pt.phi);
      y(row) = pt.frequency(static_cast<std::size_t>(o));
    }
  }
  const Eigen::MatrixXd XtX = X.transpose() * X;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(XtX);
  if (!lu.isInvertible()) throw NumericalError("phase sweep design matrix is singular (phases not spread)");
  const Eigen::VectorXd beta = lu.solve(X.transpose() * y);
  const Eigen::VectorXd resid = y - X * beta;
  const double dof = static_cast<double>(4 * n - 6);
  const double s2 = dof > 0 ? resid.squaredNorm() / dof : 0.0;
  const Eigen::MatrixXd cov = s2 * lu.inverse();

  for (int o = 0; o < 4; ++o) res.offsets[static_cast<std::size_t>(o)] = beta(o);
  const double c = beta(4);
  const double d = beta(5);
  const double mean_a = 0.25 * (beta(0) + beta(1) + beta(2) + beta(3));
  res.amplitude = std::hypot(c, d);
  if (!(res.amplitude > 1e-12) || !(mean_a > 0.0)) {
    res.degenerate = true;
    res.visibility = 0.0;
  } else {
    res.phi0 = wrap_phase(std::atan2(d, c));
    res.visibility = std::min(1.0, res.amplitude / mean_a);
    // Delta-method errors; the offsets are nearly exact (they sum to 1).
    const double b = res.amplitude;
    Eigen::Vector2d gb(c / b, d / b);
    Eigen::Vector2d gp(-d / (b * b), c / (b * b));
    const Eigen::Matrix2d cd = cov.block<2, 2>(4, 4);
    res.visibility_stderr = std::sqrt(std::max(0.0, gb.dot(cd * gb))) / mean_a;
    res.phi0_stderr = std::sqrt(std::max(0.0, gp.dot(cd * gp)));
  }

  for (int o = 0; o < 4; ++o) {
    Eigen::MatrixXd A(n, 3);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& pt = res.points[static_cast<std::size_t>(i)];
      A(i, 0) = 1.0;
      A(i, 1) = std::cos(pt.phi);
      A(i, 2) = std::sin(pt.phi);
      v(i) = pt.frequency(static_cast<std::size_t>(o));
    }
    const Eigen::Vector3d b = A.colPivHouseholderQr().solve(v);
    auto& f = res.per_outcome[static_cast<std::size_t>(o)];
    f.offset = b(0);
    f.amplitude = std::hypot(b(1), b(2));
    f.phi0 = f.amplitude > 1e-12 ? wrap_phase(std::atan2(b(2), b(1))) : 0.0;
  }
  return res;
}

inline void write_sweep_csv(std::ostream& os, const PhaseSweepResult& r) {
  static constexpr const char* names[4] = {"0_D1", "1_D1", "0_D2", "1_D2"};
  os << "phi,outcome,frequency,stderr\n";
  for (const auto& p : r.points) {
    for (std::size_t o = 0; o < 4; ++o) {
      os << fmt::format("{:.6f},{},{:.6f},{:.6f}\n", p.phi, names[o], p.frequency(o), p.stderr_of(o));
    }
  }
}

// ---------------------------------------------------------------------------
// Contrast budget
// ---------------------------------------------------------------------------

struct ContrastBudget {
  double init_readout = 1.0;
  double interferometer_stability = 1.0;
  double mode_overlap = 1.0;
  double spectral = 1.0;

  double product() const { return init_readout * interferometer_stability * mode_overlap * spectral; }
};

inline ContrastBudget contrast_budget(double init_readout, double stability, double overlap, double spectral) {
  for (double f : {init_readout, stability, overlap, spectral}) {
    if (!(f > 0.0 && f <= 1.0)) throw std::invalid_argument("contrast factors must be in (0, 1]");
  }
  return {init_readout, stability, overlap, spectral};
}

// The budget a simulation setup realizes when its spectral contrast comes
// from the scalar factor and the Gaussian detuning (both multiply).
inline ContrastBudget budget_of(const control::SimulationSetup& s) {
  return contrast_budget(s.readout.combined_init_readout_fidelity,
                         noise::factor_for_jitter(s.interferometer.phase_jitter_rms), s.interferometer.mode_overlap,
                         s.spectral_factor *
                             noise::analytic_contrast(s.noise.sigma_diffusion_hz, s.interferometer.arm_delay));
}

}  // namespace nvlink::analysis
