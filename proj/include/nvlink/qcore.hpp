#pragma once

// Small composite-qudit engine: dense pure states for trajectory sampling and
// an exact density-matrix oracle used to verify them.
//
// Basis ordering is row-major over subsystems: the first subsystem is the most
// significant digit of the flat index.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "nvlink/core/error.hpp"
#include "nvlink/core/rng.hpp"

namespace nvlink::qcore {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

struct Tolerance {
  double op = 1e-10;    // U^dagger U = I, sum K^dagger K = I, trace preservation
  double norm = 1e-12;  // state norms, oracle hermiticity and trace
  double eig = 1e-10;   // smallest admissible oracle eigenvalue is -eig
};

struct Subsystem {
  std::string label;
  int dim = 2;
  friend bool operator==(const Subsystem&, const Subsystem&) = default;
};

class RegisterSpec {
 public:
  static constexpr std::size_t kMaxDimension = 4096;

  explicit RegisterSpec(std::vector<Subsystem> subsystems)
      : subsystems_(std::move(subsystems)) {
    if (subsystems_.empty()) {
      throw std::invalid_argument("register needs at least one subsystem");
    }
    total_ = 1;
    for (std::size_t i = 0; i < subsystems_.size(); ++i) {
      const auto& s = subsystems_[i];
      if (s.dim < 2) {
        throw std::invalid_argument("subsystem '" + s.label +
                                    "' must have dimension >= 2");
      }
      for (std::size_t j = 0; j < i; ++j) {
        if (subsystems_[j].label == s.label) {
          throw std::invalid_argument("duplicate subsystem label '" + s.label +
                                      "'");
        }
      }
      total_ *= static_cast<std::size_t>(s.dim);
      if (total_ > kMaxDimension) {
        throw std::invalid_argument("register dimension exceeds 4096");
      }
    }
    strides_.assign(subsystems_.size(), 1);
    for (std::size_t i = subsystems_.size() - 1; i > 0; --i) {
      strides_[i - 1] = strides_[i] * static_cast<std::size_t>(subsystems_[i].dim);
    }
  }

  std::size_t size() const { return subsystems_.size(); }
  std::size_t total_dimension() const { return total_; }
  const std::vector<Subsystem>& subsystems() const { return subsystems_; }
  int dim(std::size_t i) const { return subsystems_.at(i).dim; }
  const std::string& label(std::size_t i) const { return subsystems_.at(i).label; }
  std::size_t stride(std::size_t i) const { return strides_.at(i); }

  bool contains(std::string_view label) const {
    return std::any_of(subsystems_.begin(), subsystems_.end(),
                       [&](const Subsystem& s) { return s.label == label; });
  }

  std::size_t index_of(std::string_view label) const {
    for (std::size_t i = 0; i < subsystems_.size(); ++i) {
      if (subsystems_[i].label == label) return i;
    }
    throw std::invalid_argument("no subsystem labelled '" + std::string(label) + "'");
  }

  int digit(std::size_t flat, std::size_t i) const {
    return static_cast<int>((flat / strides_[i]) % static_cast<std::size_t>(subsystems_[i].dim));
  }

  std::size_t flat_index(std::span<const int> digits) const {
    if (digits.size() != subsystems_.size()) {
      throw std::invalid_argument("basis label count does not match register");
    }
    std::size_t flat = 0;
    for (std::size_t i = 0; i < digits.size(); ++i) {
      if (digits[i] < 0 || digits[i] >= subsystems_[i].dim) {
        throw std::invalid_argument("basis index out of range for '" +
                                    subsystems_[i].label + "'");
      }
      flat += static_cast<std::size_t>(digits[i]) * strides_[i];
    }
    return flat;
  }

  friend bool operator==(const RegisterSpec& a, const RegisterSpec& b) {
    return a.subsystems_ == b.subsystems_;
  }

 private:
  std::vector<Subsystem> subsystems_;
  std::vector<std::size_t> strides_;
  std::size_t total_ = 1;
};

using SpecPtr = std::shared_ptr<const RegisterSpec>;

class PureState {
 public:
  PureState(SpecPtr spec, CVector amplitudes, double weight = 1.0,
            const Tolerance& tol = {})
      : spec_(std::move(spec)), amps_(std::move(amplitudes)), weight_(weight) {
    if (!spec_) throw std::invalid_argument("state without register");
    if (static_cast<std::size_t>(amps_.size()) != spec_->total_dimension()) {
      throw std::invalid_argument("amplitude vector length does not match register");
    }
    if (!(weight_ >= 0.0 && weight_ <= 1.0 + tol.op)) {
      throw std::invalid_argument("branch weight outside [0, 1]");
    }
    weight_ = std::min(weight_, 1.0);
    const double n2 = amps_.squaredNorm();
    if (std::abs(n2 - 1.0) > tol.norm) {
      throw NumericalError("state norm^2 = " + std::to_string(n2) + " is not 1");
    }
  }

  const RegisterSpec& spec() const { return *spec_; }
  const SpecPtr& spec_ptr() const { return spec_; }
  const CVector& amplitudes() const { return amps_; }
  double weight() const { return weight_; }
  std::size_t dimension() const { return static_cast<std::size_t>(amps_.size()); }

  Complex amplitude(std::initializer_list<int> digits) const {
    std::vector<int> d(digits);
    return amps_[static_cast<Eigen::Index>(spec_->flat_index(d))];
  }

  PureState with_weight(double w) const { return PureState(spec_, amps_, w); }

 private:
  SpecPtr spec_;
  CVector amps_;
  double weight_;
};

// Product basis state over the concatenation of `specs`, one basis index per
// subsystem in order.
inline PureState compose(const std::vector<RegisterSpec>& specs,
                         const std::vector<int>& basis_indices) {
  if (specs.empty()) throw std::invalid_argument("compose: empty register list");
  std::vector<Subsystem> all;
  for (const auto& s : specs) {
    all.insert(all.end(), s.subsystems().begin(), s.subsystems().end());
  }
  auto spec = std::make_shared<const RegisterSpec>(std::move(all));
  CVector amps = CVector::Zero(static_cast<Eigen::Index>(spec->total_dimension()));
  amps[static_cast<Eigen::Index>(spec->flat_index(basis_indices))] = 1.0;
  return PureState(spec, std::move(amps));
}

inline PureState basis_state(const SpecPtr& spec, const std::vector<int>& digits) {
  CVector amps = CVector::Zero(static_cast<Eigen::Index>(spec->total_dimension()));
  amps[static_cast<Eigen::Index>(spec->flat_index(digits))] = 1.0;
  return PureState(spec, std::move(amps));
}

// Normalizes an arbitrary non-zero vector into a state.
inline PureState normalized(const SpecPtr& spec, CVector v, double weight = 1.0) {
  const double n = v.norm();
  if (!(n > 0.0)) throw NumericalError("cannot normalize a zero vector");
  v /= n;
  return PureState(spec, std::move(v), weight);
}

class GateOp {
 public:
  struct Unitary {
    CMatrix matrix;
  };
  struct Kraus {
    std::vector<CMatrix> ops;
  };

  static GateOp unitary(std::vector<std::string> targets, CMatrix u,
                        const Tolerance& tol = {}) {
    if (u.rows() != u.cols()) throw std::invalid_argument("unitary must be square");
    const CMatrix id = CMatrix::Identity(u.rows(), u.cols());
    const double err = (u.adjoint() * u - id).cwiseAbs().maxCoeff();
    if (err > tol.op) {
      throw NumericalError("matrix passed as unitary deviates by " + std::to_string(err));
    }
    return GateOp(std::move(targets), Unitary{std::move(u)});
  }

  static GateOp kraus(std::vector<std::string> targets, std::vector<CMatrix> ops,
                      const Tolerance& tol = {}) {
    if (ops.empty()) throw std::invalid_argument("empty Kraus set");
    const auto n = ops.front().cols();
    CMatrix sum = CMatrix::Zero(n, n);
    for (const auto& k : ops) {
      if (k.rows() != n || k.cols() != n) {
        throw std::invalid_argument("Kraus operators must share a square shape");
      }
      sum += k.adjoint() * k;
    }
    const double err = (sum - CMatrix::Identity(n, n)).cwiseAbs().maxCoeff();
    if (err > tol.op) {
      throw NumericalError("Kraus set is not complete (deviation " + std::to_string(err) + ")");
    }
    return GateOp(std::move(targets), Kraus{std::move(ops)});
  }

  const std::vector<std::string>& targets() const { return targets_; }
  bool is_unitary() const { return std::holds_alternative<Unitary>(kind_); }
  const CMatrix& unitary_matrix() const { return std::get<Unitary>(kind_).matrix; }
  const std::vector<CMatrix>& kraus_ops() const { return std::get<Kraus>(kind_).ops; }
  Eigen::Index local_dimension() const {
    return is_unitary() ? unitary_matrix().rows() : kraus_ops().front().rows();
  }

 private:
  GateOp(std::vector<std::string> targets, std::variant<Unitary, Kraus> kind)
      : targets_(std::move(targets)), kind_(std::move(kind)) {
    if (targets_.empty()) throw std::invalid_argument("gate without targets");
  }

  std::vector<std::string> targets_;
  std::variant<Unitary, Kraus> kind_;
};

namespace detail {

// Flat offsets of every local basis state of the target subsystems, and the
// flat indices of all "rest" configurations with the targets at digit 0.
struct TargetLayout {
  std::vector<std::size_t> bases;
  std::vector<std::size_t> offsets;
};

inline TargetLayout layout_for(const RegisterSpec& spec,
                               const std::vector<std::string>& targets,
                               Eigen::Index expected_dim) {
  std::vector<std::size_t> idx;
  idx.reserve(targets.size());
  for (const auto& t : targets) {
    const auto i = spec.index_of(t);
    if (std::find(idx.begin(), idx.end(), i) != idx.end()) {
      throw std::invalid_argument("gate targets repeat subsystem '" + t + "'");
    }
    idx.push_back(i);
  }
  std::size_t local = 1;
  for (auto i : idx) local *= static_cast<std::size_t>(spec.dim(i));
  if (static_cast<Eigen::Index>(local) != expected_dim) {
    throw std::invalid_argument("gate dimension does not match target subspace");
  }
  TargetLayout out;
  out.offsets.resize(local);
  for (std::size_t l = 0; l < local; ++l) {
    std::size_t rem = l;
    std::size_t off = 0;
    for (std::size_t k = idx.size(); k-- > 0;) {
      const auto d = static_cast<std::size_t>(spec.dim(idx[k]));
      off += (rem % d) * spec.stride(idx[k]);
      rem /= d;
    }
    out.offsets[l] = off;
  }
  out.bases.reserve(spec.total_dimension() / local);
  for (std::size_t f = 0; f < spec.total_dimension(); ++f) {
    bool zero = true;
    for (auto i : idx) {
      if (spec.digit(f, i) != 0) {
        zero = false;
        break;
      }
    }
    if (zero) out.bases.push_back(f);
  }
  return out;
}

inline CVector apply_local(const TargetLayout& layout, const CMatrix& m,
                           const CVector& in) {
  CVector out = CVector::Zero(in.size());
  const auto n = static_cast<Eigen::Index>(layout.offsets.size());
  for (const auto base : layout.bases) {
    for (Eigen::Index r = 0; r < n; ++r) {
      Complex acc{0.0, 0.0};
      for (Eigen::Index c = 0; c < n; ++c) {
        const Complex mrc = m(r, c);
        if (mrc != Complex{0.0, 0.0}) {
          acc += mrc * in[static_cast<Eigen::Index>(base + layout.offsets[static_cast<std::size_t>(c)])];
        }
      }
      out[static_cast<Eigen::Index>(base + layout.offsets[static_cast<std::size_t>(r)])] = acc;
    }
  }
  return out;
}

}  // namespace detail

// Full-register operator for a local matrix acting on `targets`.
inline CMatrix embed(const RegisterSpec& spec, const std::vector<std::string>& targets,
                     const CMatrix& local) {
  const auto layout = detail::layout_for(spec, targets, local.rows());
  const auto n = static_cast<Eigen::Index>(spec.total_dimension());
  CMatrix full = CMatrix::Zero(n, n);
  for (const auto base : layout.bases) {
    for (std::size_t r = 0; r < layout.offsets.size(); ++r) {
      for (std::size_t c = 0; c < layout.offsets.size(); ++c) {
        full(static_cast<Eigen::Index>(base + layout.offsets[r]),
             static_cast<Eigen::Index>(base + layout.offsets[c])) =
            local(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      }
    }
  }
  return full;
}

inline PureState apply_unitary(const PureState& state, const GateOp& gate,
                               const Tolerance& tol = {}) {
  if (!gate.is_unitary()) throw std::invalid_argument("apply_unitary on a Kraus gate");
  const auto layout = detail::layout_for(state.spec(), gate.targets(), gate.local_dimension());
  CVector out = detail::apply_local(layout, gate.unitary_matrix(), state.amplitudes());
  const double n2 = out.squaredNorm();
  if (std::abs(n2 - 1.0) > tol.op) {
    throw NumericalError("unitary changed the state norm");
  }
  out /= std::sqrt(n2);
  return PureState(state.spec_ptr(), std::move(out), state.weight());
}

struct Branch {
  std::size_t kraus_index = 0;
  double probability = 0.0;  // conditional on the input state
  PureState state;           // renormalized; weight = input weight * probability
};

// Every non-vanishing Kraus branch. Branch weights sum to the input weight.
inline std::vector<Branch> kraus_branches(const PureState& state, const GateOp& gate,
                                          const Tolerance& tol = {}) {
  if (gate.is_unitary()) {
    return {Branch{0, 1.0, apply_unitary(state, gate, tol)}};
  }
  const auto layout = detail::layout_for(state.spec(), gate.targets(), gate.local_dimension());
  std::vector<Branch> out;
  double total = 0.0;
  for (std::size_t k = 0; k < gate.kraus_ops().size(); ++k) {
    CVector v = detail::apply_local(layout, gate.kraus_ops()[k], state.amplitudes());
    const double p = v.squaredNorm();
    total += p;
    if (p <= 0.0) continue;
    v /= std::sqrt(p);
    out.push_back(Branch{k, p, PureState(state.spec_ptr(), std::move(v), state.weight() * p)});
  }
  if (std::abs(total - 1.0) > tol.op) {
    throw NumericalError("Kraus branch probabilities sum to " + std::to_string(total));
  }
  return out;
}

using GateResult = std::variant<PureState, std::vector<Branch>>;

inline GateResult apply_gate(const PureState& state, const GateOp& gate,
                             const Tolerance& tol = {}) {
  if (gate.is_unitary()) return apply_unitary(state, gate, tol);
  return kraus_branches(state, gate, tol);
}

// Trajectory step: pick one Kraus branch by its probability. The returned
// state keeps the input weight (unbiased sampling, not weight splitting).
template <class Rng>
Branch sample_kraus(const PureState& state, const GateOp& gate, Rng& rng,
                    const Tolerance& tol = {}) {
  if (gate.is_unitary()) return Branch{0, 1.0, apply_unitary(state, gate, tol)};
  const auto layout = detail::layout_for(state.spec(), gate.targets(), gate.local_dimension());
  const double u = rng.uniform();
  double acc = 0.0;
  std::optional<std::pair<std::size_t, CVector>> last;
  double last_p = 0.0;
  for (std::size_t k = 0; k < gate.kraus_ops().size(); ++k) {
    CVector v = detail::apply_local(layout, gate.kraus_ops()[k], state.amplitudes());
    const double p = v.squaredNorm();
    if (p <= 0.0) continue;
    acc += p;
    if (u < acc) {
      v /= std::sqrt(p);
      return Branch{k, p, PureState(state.spec_ptr(), std::move(v), state.weight())};
    }
    last.emplace(k, std::move(v));
    last_p = p;
  }
  // u landed in the rounding gap above the accumulated total.
  if (!last || std::abs(acc - 1.0) > tol.op) {
    throw NumericalError("Kraus sampling found no branch");
  }
  last->second /= std::sqrt(last_p);
  return Branch{last->first, last_p, PureState(state.spec_ptr(), std::move(last->second), state.weight())};
}

inline std::vector<double> outcome_probabilities(const PureState& state,
                                                 std::string_view label) {
  const auto& spec = state.spec();
  const auto i = spec.index_of(label);
  std::vector<double> p(static_cast<std::size_t>(spec.dim(i)), 0.0);
  const auto& a = state.amplitudes();
  for (std::size_t f = 0; f < spec.total_dimension(); ++f) {
    p[static_cast<std::size_t>(spec.digit(f, i))] += std::norm(a[static_cast<Eigen::Index>(f)]);
  }
  return p;
}

// Projects onto `outcome` of subsystem `label`; returns the Born probability
// and the renormalized post-state. A vanishing projection is an error.
inline std::pair<double, PureState> project(const PureState& state, std::string_view label,
                                            int outcome, double min_probability = 1e-300) {
  const auto& spec = state.spec();
  const auto i = spec.index_of(label);
  if (outcome < 0 || outcome >= spec.dim(i)) {
    throw std::invalid_argument("projection outcome out of range");
  }
  CVector v = state.amplitudes();
  for (std::size_t f = 0; f < spec.total_dimension(); ++f) {
    if (spec.digit(f, i) != outcome) v[static_cast<Eigen::Index>(f)] = 0.0;
  }
  const double p = v.squaredNorm();
  if (!(p > min_probability)) {
    throw NumericalError("projection onto a zero-norm outcome of '" + std::string(label) + "'");
  }
  v /= std::sqrt(p);
  return {p, PureState(state.spec_ptr(), std::move(v), state.weight())};
}

struct Measurement {
  int outcome = 0;
  double probability = 0.0;
  PureState state;
};

template <class Rng>
Measurement measure(const PureState& state, std::string_view label, Rng& rng) {
  const auto p = outcome_probabilities(state, label);
  const double u = rng.uniform();
  double acc = 0.0;
  int pick = -1;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] <= 0.0) continue;
    acc += p[k];
    pick = static_cast<int>(k);
    if (u < acc) break;
  }
  if (pick < 0) throw NumericalError("measurement of an empty state");
  auto [prob, post] = project(state, label, pick);
  return Measurement{pick, prob, std::move(post)};
}

// ---------------------------------------------------------------------------
// Density-matrix oracle
// ---------------------------------------------------------------------------

class DensityOracle {
 public:
  DensityOracle(SpecPtr spec, CMatrix rho, const Tolerance& tol = {})
      : spec_(std::move(spec)), rho_(std::move(rho)) {
    if (!spec_) throw std::invalid_argument("oracle without register");
    const auto n = static_cast<Eigen::Index>(spec_->total_dimension());
    if (rho_.rows() != n || rho_.cols() != n) {
      throw std::invalid_argument("density matrix shape does not match register");
    }
    validate(tol);
  }

  static DensityOracle from_pure(const PureState& s) {
    return DensityOracle(s.spec_ptr(), s.amplitudes() * s.amplitudes().adjoint());
  }

  // Convex mixture of same-register states, weighted by their branch weights.
  static DensityOracle mixture(const std::vector<PureState>& states) {
    if (states.empty()) throw std::invalid_argument("empty mixture");
    const auto n = static_cast<Eigen::Index>(states.front().dimension());
    CMatrix rho = CMatrix::Zero(n, n);
    double w = 0.0;
    for (const auto& s : states) {
      if (!(s.spec() == states.front().spec())) {
        throw std::invalid_argument("mixture over different registers");
      }
      rho += s.weight() * (s.amplitudes() * s.amplitudes().adjoint());
      w += s.weight();
    }
    if (!(w > 0.0)) throw NumericalError("mixture with zero total weight");
    return DensityOracle(states.front().spec_ptr(), rho / w);
  }

  const RegisterSpec& spec() const { return *spec_; }
  const SpecPtr& spec_ptr() const { return spec_; }
  const CMatrix& matrix() const { return rho_; }
  double trace() const { return rho_.trace().real(); }

  void validate(const Tolerance& tol) const {
    const double herm = (rho_ - rho_.adjoint()).cwiseAbs().maxCoeff();
    if (herm > tol.norm) throw NumericalError("density matrix is not Hermitian");
    const double tr = rho_.trace().real();
    if (std::abs(tr - 1.0) > tol.norm) {
      throw NumericalError("density matrix trace " + std::to_string(tr) + " is not 1");
    }
    Eigen::SelfAdjointEigenSolver<CMatrix> es(rho_, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -tol.eig) {
      throw NumericalError("density matrix has a negative eigenvalue");
    }
  }

 private:
  SpecPtr spec_;
  CMatrix rho_;
};

namespace detail {
inline CMatrix hermitize(const CMatrix& m) { return 0.5 * (m + m.adjoint()); }
}  // namespace detail

inline DensityOracle oracle_evolve(const DensityOracle& oracle, const GateOp& gate,
                                   const Tolerance& tol = {}) {
  const auto& spec = oracle.spec();
  CMatrix out;
  if (gate.is_unitary()) {
    const CMatrix u = embed(spec, gate.targets(), gate.unitary_matrix());
    out = u * oracle.matrix() * u.adjoint();
  } else {
    out = CMatrix::Zero(oracle.matrix().rows(), oracle.matrix().cols());
    for (const auto& k : gate.kraus_ops()) {
      const CMatrix kf = embed(spec, gate.targets(), k);
      out += kf * oracle.matrix() * kf.adjoint();
    }
  }
  out = detail::hermitize(out);
  if (std::abs(out.trace().real() - 1.0) > tol.op) {
    throw NumericalError("oracle evolution did not preserve the trace");
  }
  out /= out.trace().real();
  return DensityOracle(oracle.spec_ptr(), std::move(out), tol);
}

struct OracleBranch {
  double probability = 0.0;
  std::optional<DensityOracle> state;  // empty when the branch has zero weight
};

// Single Kraus branch K_k rho K_k^dagger, split into probability and
// normalized state.
inline OracleBranch oracle_kraus_branch(const DensityOracle& oracle, const GateOp& gate,
                                        std::size_t k) {
  const CMatrix& local = gate.is_unitary() ? gate.unitary_matrix() : gate.kraus_ops().at(k);
  const CMatrix kf = embed(oracle.spec(), gate.targets(), local);
  CMatrix out = detail::hermitize(kf * oracle.matrix() * kf.adjoint());
  const double p = out.trace().real();
  if (!(p > 1e-15)) return {0.0, std::nullopt};
  return {p, DensityOracle(oracle.spec_ptr(), out / p)};
}

inline std::vector<double> oracle_probabilities(const DensityOracle& oracle,
                                                std::string_view label) {
  const auto& spec = oracle.spec();
  const auto i = spec.index_of(label);
  std::vector<double> p(static_cast<std::size_t>(spec.dim(i)), 0.0);
  for (std::size_t f = 0; f < spec.total_dimension(); ++f) {
    const auto fi = static_cast<Eigen::Index>(f);
    p[static_cast<std::size_t>(spec.digit(f, i))] += oracle.matrix()(fi, fi).real();
  }
  return p;
}

inline OracleBranch oracle_project(const DensityOracle& oracle, std::string_view label,
                                   int outcome) {
  const auto& spec = oracle.spec();
  const auto i = spec.index_of(label);
  CMatrix p = CMatrix::Zero(oracle.matrix().rows(), oracle.matrix().cols());
  for (std::size_t f = 0; f < spec.total_dimension(); ++f) {
    if (spec.digit(f, i) == outcome) {
      p(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(f)) = 1.0;
    }
  }
  CMatrix out = detail::hermitize(p * oracle.matrix() * p);
  const double prob = out.trace().real();
  if (!(prob > 1e-15)) return {0.0, std::nullopt};
  return {prob, DensityOracle(oracle.spec_ptr(), out / prob)};
}

// Reduced state on the subsystems in `keep` (kept in register order).
inline DensityOracle partial_trace(const DensityOracle& oracle,
                                   const std::vector<std::string>& keep) {
  const auto& spec = oracle.spec();
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    if (std::find(keep.begin(), keep.end(), spec.label(i)) != keep.end()) kept.push_back(i);
  }
  if (kept.size() != keep.size()) {
    throw std::invalid_argument("partial_trace: unknown label in keep list");
  }
  std::vector<Subsystem> subs;
  for (auto i : kept) subs.push_back(spec.subsystems()[i]);
  auto rspec = std::make_shared<const RegisterSpec>(subs);
  const auto rn = static_cast<Eigen::Index>(rspec->total_dimension());
  CMatrix r = CMatrix::Zero(rn, rn);
  auto reduced_index = [&](std::size_t f) {
    std::size_t idx = 0;
    for (std::size_t k = 0; k < kept.size(); ++k) {
      idx += static_cast<std::size_t>(spec.digit(f, kept[k])) * rspec->stride(k);
    }
    return idx;
  };
  auto traced_equal = [&](std::size_t a, std::size_t b) {
    for (std::size_t i = 0; i < spec.size(); ++i) {
      if (std::find(kept.begin(), kept.end(), i) != kept.end()) continue;
      if (spec.digit(a, i) != spec.digit(b, i)) return false;
    }
    return true;
  };
  const auto n = spec.total_dimension();
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (!traced_equal(a, b)) continue;
      r(static_cast<Eigen::Index>(reduced_index(a)), static_cast<Eigen::Index>(reduced_index(b))) +=
          oracle.matrix()(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    }
  }
  return DensityOracle(rspec, detail::hermitize(r));
}

// <psi| rho |psi>
inline double fidelity(const DensityOracle& oracle, const PureState& target) {
  if (!(oracle.spec() == target.spec())) {
    throw std::invalid_argument("fidelity across different registers");
  }
  const auto& v = target.amplitudes();
  return (v.adjoint() * oracle.matrix() * v)(0, 0).real();
}

enum class Basis { ZZ, XX };

// A two-level subspace inside one subsystem: levels (zero, one) play the role
// of qubit |0> and |1>.
struct QubitSelector {
  std::string label;
  int zero = 0;
  int one = 1;
};

// Joint populations (|00>, |01>, |10>, |11>) of two embedded qubits. For XX
// the restricted 4x4 block is rotated by H (x) H first, so index 0 is |++>
// and index 3 is |-->. Values sum to the population inside the subspace.
inline std::array<double, 4> basis_diagonals(const DensityOracle& oracle, Basis basis,
                                             const QubitSelector& a, const QubitSelector& b) {
  const auto& spec = oracle.spec();
  const auto ia = spec.index_of(a.label);
  const auto ib = spec.index_of(b.label);
  if (ia == ib) throw std::invalid_argument("basis_diagonals needs two distinct subsystems");
  for (const auto& [sel, i] : {std::pair{a, ia}, std::pair{b, ib}}) {
    if (sel.zero < 0 || sel.one < 0 || sel.zero >= spec.dim(i) || sel.one >= spec.dim(i) ||
        sel.zero == sel.one) {
      throw std::invalid_argument("qubit sublabels outside subsystem '" + sel.label + "'");
    }
  }
  const auto reduced = partial_trace(oracle, {spec.label(std::min(ia, ib)), spec.label(std::max(ia, ib))});
  const auto& rs = reduced.spec();
  const bool a_first = ia < ib;
  auto flat = [&](int da, int db) {
    std::vector<int> d = a_first ? std::vector<int>{da, db} : std::vector<int>{db, da};
    return static_cast<Eigen::Index>(rs.flat_index(d));
  };
  const std::array<int, 2> la{a.zero, a.one};
  const std::array<int, 2> lb{b.zero, b.one};
  Eigen::Matrix4cd block;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      block(r, c) = reduced.matrix()(flat(la[static_cast<std::size_t>(r / 2)], lb[static_cast<std::size_t>(r % 2)]),
                                     flat(la[static_cast<std::size_t>(c / 2)], lb[static_cast<std::size_t>(c % 2)]));
    }
  }
  if (basis == Basis::XX) {
    const double s = 1.0 / std::sqrt(2.0);
    Eigen::Matrix2cd h;
    h << s, s, s, -s;
    Eigen::Matrix4cd hh;
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) hh(r, c) = h(r / 2, c / 2) * h(r % 2, c % 2);
    }
    block = hh * block * hh.adjoint();
  }
  std::array<double, 4> out{};
  for (int i = 0; i < 4; ++i) out[static_cast<std::size_t>(i)] = std::max(0.0, block(i, i).real());
  return out;
}

}  // namespace nvlink::qcore
