// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "nvlink/runners.hpp"

#ifndef NVLINK_PRESET_DIR
#define NVLINK_PRESET_DIR "presets"
#endif

using namespace nvlink;
using config::ExperimentConfig;

namespace {


ExperimentConfig preset(const std::string& name) {
  return config::load_config(std::string(NVLINK_PRESET_DIR) + "/" + name + ".cfg");
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

bool in_band(double v, double lo, double hi) { return v >= lo && v <= hi; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Cosine law at 12 phases, noise-free electron protocol.
Verdict ideal_cosine_law() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = preset("ideal");
  const auto rep = runners::phase_sweep(cfg, cfg.run.threads);
  double worst = 0.0;
  bool ok = true;
  for (const auto& pt : rep.fit.points) {
    const auto p = analysis::eq4_probabilities(pt.phi);
    const double n = static_cast<double>(pt.total());
    for (std::size_t o = 0; o < 4; ++o) {
      const double sigma = std::sqrt(p[o] * (1 - p[o]) / n);
      const double dev = std::abs(pt.frequency(o) - p[o]);
      if (sigma > 1e-12) {
        worst = std::max(worst, dev / sigma);
        ok = ok && dev <= 3 * sigma;
      } else {
        ok = ok && dev <= 1e-12;
      }
    }
  }
  const double secs = seconds_since(t0);
  ok = ok && rep.fit.visibility >= 0.99 && secs < 30.0;
  return {ok, fmt::format("worst deviation {:.2f} sigma, visibility {:.4f}, {:.1f} s", worst, rep.fit.visibility, secs)};
}

Verdict routing_efficiency() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = preset("fig2bc");
  auto passive = cfg.setup;
  passive.eod.enabled = false;
  const double fp = runners::arrival_histogram(cfg, passive, derive_seed(cfg.run.seed, runners::kPassive), 1)
                        .central_fraction();
  const double fe =
      runners::arrival_histogram(cfg, cfg.setup, derive_seed(cfg.run.seed, runners::kZz), 1).central_fraction();
  const double secs = seconds_since(t0);
  const bool ok = std::abs(fp - 0.50) <= 0.01 && std::abs(fe - 0.97) <= 0.005 && secs < 10.0;
  return {ok, fmt::format("passive {:.4f}, EOD {:.4f}, {:.1f} s", fp, fe, secs)};
}

Verdict fidelity_bound() {
  const double agg = analysis::fidelity_lower_bound({0, 0.475, 0.475, 0}, {0.365, 0.135, 0.135, 0.365});
  const double bell = analysis::fidelity_lower_bound({0, 0.5, 0.5, 0}, {0.5, 0, 0, 0.5});

  const auto spec = std::make_shared<const qcore::RegisterSpec>(std::vector<qcore::Subsystem>{{"a", 2}, {"b", 2}});
  qcore::CVector v = qcore::CVector::Zero(4);
  v[1] = v[2] = 1;
  const auto target = qcore::normalized(spec, v);
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> g;
  int violations = 0;
  double tightest = -1.0;
  for (int k = 0; k < 100; ++k) {
    qcore::CMatrix G(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) G(i, j) = {g(rng), g(rng)};
    if (k % 2) G += 3.0 * v * v.adjoint();
    qcore::CMatrix rho = G * G.adjoint();
    rho /= rho.trace().real();
    const qcore::DensityOracle o(spec, rho);
    const double f = qcore::fidelity(o, target);
    const double b = analysis::fidelity_lower_bound(qcore::basis_diagonals(o, qcore::Basis::ZZ, {"a"}, {"b"}),
                                                    qcore::basis_diagonals(o, qcore::Basis::XX, {"a"}, {"b"}));
    if (b > f + 1e-12) ++violations;
    tightest = std::max(tightest, b - f);
  }
  const bool ok = std::abs(agg - 0.705) < 1e-12 && bell == 1.0 && violations == 0;
  return {ok, fmt::format("aggregates {:.4f}, Bell {:.4f}, {} violations in 100 states (max bound - F = {:.3g})", agg,
                          bell, violations, tightest)};
}

Verdict contrast_budget(const runners::CorrelationReport& r) {
  const double product = r.budget.product();
  const double exact = 0.80 * 0.97 * 0.95 * 0.84;
  const double v = r.sweep.visibility_corrected;
  const bool ok = std::abs(product - exact) < 1e-12 && std::round(product * 1000) == 619 &&
                  std::abs(v - 0.62) <= 0.03;
  return {ok, fmt::format("sweep visibility {:.4f} (raw {:.4f}, dark fraction {:.3f}), budget product {:.4f}", v,
                          r.sweep.fit.visibility, r.sweep.dark_fraction, product)};
}

Verdict correlation_tables(const runners::CorrelationReport& e, const runners::CorrelationReport& n) {
  const double ezz = e.table.zz_aggregate();
  const double exx = e.table.xx_aggregate();
  const double nzz = n.table.zz_aggregate();
  const double nxx = n.table.xx_aggregate();
  const double nb = n.bound_raw;
  const bool ok = in_band(ezz, 0.91, 0.99) && in_band(exx, 0.30, 0.62) && in_band(nzz, 0.73, 0.89) &&
                  in_band(nxx, 0.20, 0.56) && in_band(nb, 0.5, 0.7);
  return {ok, fmt::format("electron ZZ {:.3f} XX {:.3f} (bound {:.3f}); nuclear ZZ {:.3f} XX {:.3f} bound {:.3f}", ezz,
                          exx, e.bound_raw, nzz, nxx, nb)};
}

Verdict spectral_contrast() {
  const auto cfg = preset("sm-contrast");
  const auto pts = runners::contrast_sweep(cfg, cfg.run.threads);
  bool ok = pts.size() == 10;
  double worst = 0.0;
  for (const auto& p : pts) {
    const double dev = std::abs(p.contrast - p.analytic);
    worst = std::max(worst, dev / p.stderr_);
    ok = ok && dev <= 3 * p.stderr_;
  }
  return {ok, fmt::format("{} sigma points, worst deviation {:.2f} standard errors", pts.size(), worst)};
}

Verdict crc_narrowing() {
  const auto r = runners::crc_report(preset("sm-crc"));
  const double fb = r.before.fano();
  const double fa = r.after.fano();
  const bool ok = r.accepted_rms_hz < r.prior_rms_hz && fb > 1.2 && fa <= 0.7 * fb;
  return {ok, fmt::format("detuning RMS {:.3g} -> {:.3g} Hz, variance/mean {:.3f} -> {:.3f}", r.prior_rms_hz,
                          r.accepted_rms_hz, fb, fa)};
}

Verdict nuclear_init() {
  const auto spec = std::make_shared<const qcore::RegisterSpec>(
      std::vector<qcore::Subsystem>{{nv::kElectron, nv::kSpinDim}, {nv::kNuclear, nv::kSpinDim}});
  std::vector<qcore::PureState> thermal;
  for (int m : {1, 0, -1}) thermal.push_back(qcore::basis_state(spec, {nv::level_of(0), nv::level_of(m)}));
  const auto out = nv::nuclear_init_oracle(qcore::DensityOracle::mixture(thermal));
  const double p = qcore::oracle_probabilities(out, nv::kNuclear)[static_cast<std::size_t>(nv::level_of(0))];
  return {std::abs(p - 1.0) <= 1e-10, fmt::format("P(m_I = 0) = {:.15f}", p)};
}

// Trajectories against the density oracle, per-shot probabilities of the
// 4 ZZ and 4 XX cells. Noise: phase jitter, mode overlap, init/readout.
Verdict oracle_equivalence() {
  control::SimulationSetup s;
  s.interferometer.phase_jitter_rms = 0.4;
  s.interferometer.mode_overlap = 0.9;
  s.readout.combined_init_readout_fidelity = 0.8;
  s.readout.lambda_dark = 0.5;
  s.readout.threshold = 3;
  s.readout = noise::calibrated(s.readout);
  s.emitter.eta_collect = 1.0;
  s.emitter.eta_detect = 1.0;
  const auto script = protocol::electron_script();
  s.interferometer.phase_phi = reference::oracle_table(script, s).phi0;
  const std::uint64_t n = 100000;

  double worst = 0.0;
  bool ok = true;
  for (qcore::Basis b : {qcore::Basis::ZZ, qcore::Basis::XX}) {
    const auto sc = script.with_basis(b);
    const auto opts = control::options_for(b, s.eod);
    const auto d = reference::oracle_outcomes(sc, s, opts);
    std::array<double, 4> want{};
    for (int bin = 1; bin <= 3; ++bin) {
      if (!opts.herald_bins[static_cast<std::size_t>(bin)]) continue;
      for (int det = 1; det <= 2; ++det) {
        for (int inf = 0; inf < 2; ++inf) {
          const int cell = b == qcore::Basis::ZZ ? 2 * inf + (bin == 1 ? 0 : 1) : 2 * (inf == 1 ? 0 : 1) + (det == 1 ? 0 : 1);
          want[static_cast<std::size_t>(cell)] += d.at(bin, det, inf);
        }
      }
    }
    const auto res = control::run_controlled_experiment(sc, s, opts, n, derive_seed(9, b == qcore::Basis::ZZ ? 0 : 1), 1);
    std::array<std::uint64_t, 4> got{};
    for (const auto& r : res.records) {
      if (!r.readout_performed) continue;
      got[static_cast<std::size_t>(b == qcore::Basis::ZZ ? analysis::zz_cell(r) : analysis::xx_cell(r, false))]++;
    }
    for (std::size_t c = 0; c < 4; ++c) {
      const double f = static_cast<double>(got[c]) / n;
      const double sigma = std::sqrt(want[c] * (1 - want[c]) / n);
      const double dev = std::abs(f - want[c]);
      worst = std::max(worst, sigma > 0 ? dev / sigma : (dev > 0 ? 1e9 : 0.0));
      ok = ok && (sigma > 0 ? dev <= 3 * sigma : dev == 0.0);
    }
  }
  return {ok, fmt::format("8 cells, worst deviation {:.2f} sigma", worst)};
}

Verdict determinism() {
  auto cfg = preset("fig3");
  cfg.run.shots = 5000;
  cfg.setup.crc.block_length = 250;
  cfg.run.herald_log = true;
  auto crc = preset("sm-crc");
  crc.run.crc_cycles = 20000;
  auto con = preset("sm-contrast");
  con.run.shots = 2000;
  auto hist = preset("fig2bc");
  hist.run.shots = 10000;
  hist.setup.crc.block_length = 500;

  const std::vector<std::function<runners::Artifacts(int)>> jobs{
      [&](int t) { return runners::correlation_artifacts(cfg, t); },
      [&](int t) { return runners::histogram_artifacts(hist, t); },
      [&](int t) { return runners::contrast_artifacts(con, t); },
      [&](int) { return runners::crc_artifacts(crc); },
      [&](int) { return runners::fidelity_artifacts(cfg); },
  };
  int files = 0;
  int mismatches = 0;
  for (const auto& job : jobs) {
    const auto a = job(1);
    const auto b = job(1);
    const auto c = job(4);
    for (const auto& [name, body] : a.files) {
      ++files;
      if (!b.files.count(name) || b.files.at(name) != body) ++mismatches;
      if (!c.files.count(name) || c.files.at(name) != body) ++mismatches;
    }
    if (a.files.size() != b.files.size() || a.files.size() != c.files.size()) ++mismatches;
  }
  return {mismatches == 0, fmt::format("{} artifacts compared across repeat and 4-worker runs, {} mismatches", files,
                                       mismatches)};
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int id, const char* name, const std::function<Verdict()>& f) {
    Verdict v;
    try {
      v = f();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failed;
    std::printf("%s %2d %s: %s\n", v.pass ? "PASS" : "FAIL", id, name, v.detail.c_str());
    std::fflush(stdout);
  };

  report(1, "cosine law, ideal config", ideal_cosine_law);
  report(2, "routing efficiency", routing_efficiency);
  report(3, "fidelity lower bound", fidelity_bound);

  std::optional<runners::CorrelationReport> electron;
  std::optional<runners::CorrelationReport> nuclear;
  std::string setup_error;
  try {
    const auto e = preset("fig3");
    electron = runners::correlation(e, e.run.threads);
    const auto n = preset("fig4");
    nuclear = runners::correlation(n, n.run.threads);
  } catch (const std::exception& ex) {
    setup_error = ex.what();
  }
  auto need = [&](auto f) {
    return [=, &electron, &nuclear]() -> Verdict {
      if (!electron || !nuclear) return {false, "correlation run failed: " + setup_error};
      return f();
    };
  };
  report(4, "contrast budget", need([&] { return contrast_budget(*electron); }));
  report(5, "correlation tables", need([&] { return correlation_tables(*electron, *nuclear); }));
  report(6, "spectral-diffusion contrast", spectral_contrast);
  report(7, "charge-resonance check narrowing", crc_narrowing);
  report(8, "nuclear initialization", nuclear_init);
  report(9, "trajectory vs density oracle", oracle_equivalence);
  report(10, "determinism", determinism);

  std::printf("%d of 10 criteria passed\n", 10 - failed);
  return failed == 0 ? 0 : 1;
}
