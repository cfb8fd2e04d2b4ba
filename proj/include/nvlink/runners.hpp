#pragma once

// Experiment runners behind the command-line tool. Each returns its artifacts
// as in-memory files so that callers can compare or write them.

#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "nvlink/analysis.hpp"
#include "nvlink/config.hpp"
#include "nvlink/control.hpp"
#include "nvlink/core/rng.hpp"
#include "nvlink/reference.hpp"

namespace nvlink::runners {

using analysis::Quad;
using config::ExperimentConfig;
using control::ShotRecord;
using qcore::Basis;
using json = nlohmann::ordered_json;

constexpr int kSchemaVersion = 1;

struct Artifacts {
  std::map<std::string, std::string> files;
  std::string summary;  // one line for the terminal
};

// Sub-run seed tags.
enum SeedTag : std::uint64_t { kZz = 0, kXxPlus = 1, kXxMinus = 2, kPassive = 3, kSweepBase = 100, kGridBase = 1000 };

inline json quad_json(const Quad& q) { return json::array({q[0], q[1], q[2], q[3]}); }

inline double dark_fraction(const std::vector<ShotRecord>& recs) {
  std::uint64_t h = 0;
  std::uint64_t d = 0;
  for (const auto& r : recs) {
    if (!r.readout_performed) continue;
    ++h;
    if (r.herald_origin != photonics::Origin::Signal) ++d;
  }
  return h ? static_cast<double>(d) / static_cast<double>(h) : 0.0;
}

// ---------------------------------------------------------------------------
// Phase sweep
// ---------------------------------------------------------------------------

struct SweepReport {
  analysis::PhaseSweepResult fit;
  double dark_fraction = 0.0;
  double visibility_corrected = 0.0;
};

inline SweepReport phase_sweep(const ExperimentConfig& cfg, int threads) {
  const auto script = cfg.script().with_basis(Basis::XX);
  auto setup = cfg.setup;
  const auto opts = control::options_for(Basis::XX, setup.eod);
  std::vector<analysis::SweepPoint> pts;
  std::uint64_t heralds = 0;
  std::uint64_t darks = 0;
  const auto grid = cfg.phases();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    setup.interferometer.phase_phi = grid[i];
    const auto res = control::run_controlled_experiment(script, setup, opts, cfg.run.shots,
                                                        derive_seed(cfg.run.seed, kSweepBase + i), threads);
    pts.push_back(analysis::sweep_point(grid[i], res.records));
    for (const auto& r : res.records) {
      if (!r.readout_performed || r.arrival_bin != 2) continue;
      ++heralds;
      if (r.herald_origin != photonics::Origin::Signal) ++darks;
    }
  }
  SweepReport rep;
  rep.fit = analysis::fit_phase_sweep(std::move(pts));
  rep.dark_fraction = heralds ? static_cast<double>(darks) / static_cast<double>(heralds) : 0.0;
  rep.visibility_corrected = std::min(1.0, analysis::correct_visibility(rep.fit.visibility, rep.dark_fraction));
  return rep;
}

inline json sweep_json(const SweepReport& s) {
  json per = json::array();
  static constexpr const char* names[4] = {"0_D1", "1_D1", "0_D2", "1_D2"};
  for (std::size_t o = 0; o < 4; ++o) {
    const auto& f = s.fit.per_outcome[o];
    per.push_back({{"outcome", names[o]}, {"offset", f.offset}, {"amplitude", f.amplitude}, {"phi0", f.phi0}});
  }
  return {{"points", s.fit.points.size()},
          {"phi0", s.fit.phi0},
          {"phi0_stderr", s.fit.phi0_stderr},
          {"visibility_raw", s.fit.visibility},
          {"visibility_raw_stderr", s.fit.visibility_stderr},
          {"dark_fraction", s.dark_fraction},
          {"visibility", s.visibility_corrected},
          {"degenerate", s.fit.degenerate},
          {"per_outcome", per}};
}

// ---------------------------------------------------------------------------
// Correlation measurement: ZZ run, phase sweep, XX runs at phi0 and phi0 + pi
// ---------------------------------------------------------------------------

struct CorrelationReport {
  SweepReport sweep;
  analysis::CorrelationTable table;
  double zz_dark_fraction = 0.0;
  double xx_dark_fraction = 0.0;
  analysis::CorrectedQuad zz_corrected;
  analysis::CorrectedQuad xx_corrected;
  double bound_raw = 0.0;
  double bound_corrected = 0.0;
  analysis::ContrastBudget budget;
  control::RunSummary zz_summary;
  control::RunSummary xx_summary;
  std::vector<ShotRecord> zz_records;
  std::vector<ShotRecord> xx_records;  // phi0 run followed by phi0 + pi
};

inline CorrelationReport correlation(const ExperimentConfig& cfg, int threads) {
  CorrelationReport rep;
  const auto script = cfg.script();
  const auto& setup = cfg.setup;

  auto zz = control::run_controlled_experiment(script.with_basis(Basis::ZZ), setup,
                                               control::options_for(Basis::ZZ, setup.eod), cfg.run.shots,
                                               derive_seed(cfg.run.seed, kZz), threads);
  rep.sweep = phase_sweep(cfg, threads);

  auto xs = setup;
  const auto xopts = control::options_for(Basis::XX, setup.eod);
  xs.interferometer.phase_phi = rep.sweep.fit.phi0;
  auto xp = control::run_controlled_experiment(script.with_basis(Basis::XX), xs, xopts, cfg.run.shots,
                                               derive_seed(cfg.run.seed, kXxPlus), threads);
  xs.interferometer.phase_phi = rep.sweep.fit.phi0 + std::numbers::pi;
  auto xm = control::run_controlled_experiment(script.with_basis(Basis::XX), xs, xopts, cfg.run.shots,
                                               derive_seed(cfg.run.seed, kXxMinus), threads);

  rep.table = analysis::correlation_table({{zz.records, Basis::ZZ, false},
                                           {xp.records, Basis::XX, false},
                                           {xm.records, Basis::XX, true}});
  rep.zz_dark_fraction = dark_fraction(zz.records);
  rep.xx_records = std::move(xp.records);
  rep.xx_records.insert(rep.xx_records.end(), xm.records.begin(), xm.records.end());
  rep.xx_dark_fraction = dark_fraction(rep.xx_records);
  rep.zz_corrected = analysis::dark_count_correct(rep.table.zz(), rep.zz_dark_fraction);
  rep.xx_corrected = analysis::dark_count_correct(rep.table.xx(), rep.xx_dark_fraction);
  rep.bound_raw = rep.table.bound();
  rep.bound_corrected = analysis::fidelity_lower_bound(rep.zz_corrected.p, rep.xx_corrected.p);
  rep.budget = analysis::budget_of(setup);
  rep.zz_summary = zz.summary;
  rep.xx_summary = xp.summary;
  rep.xx_summary.shots += xm.summary.shots;
  rep.xx_summary.heralds += xm.summary.heralds;
  rep.xx_summary.dark_heralds += xm.summary.dark_heralds;
  rep.zz_records = std::move(zz.records);
  return rep;
}

inline json budget_json(const analysis::ContrastBudget& b) {
  return {{"init_readout", b.init_readout},
          {"interferometer_stability", b.interferometer_stability},
          {"mode_overlap", b.mode_overlap},
          {"spectral", b.spectral},
          {"product", b.product()}};
}

inline std::string table_csv(const CorrelationReport& r) {
  std::string out = "basis,cell,count,probability,stderr,corrected\n";
  const auto zz = r.table.zz();
  const auto xx = r.table.xx();
  const auto ze = r.table.zz_stderr();
  const auto xe = r.table.xx_stderr();
  for (std::size_t i = 0; i < 4; ++i) {
    out += fmt::format("ZZ,{},{},{:.6f},{:.6f},{:.6f}\n", i, r.table.zz_counts[i], zz[i], ze[i], r.zz_corrected.p[i]);
  }
  for (std::size_t i = 0; i < 4; ++i) {
    out += fmt::format("XX,{},{},{:.6f},{:.6f},{:.6f}\n", i, r.table.xx_counts[i], xx[i], xe[i], r.xx_corrected.p[i]);
  }
  return out;
}

inline std::string sweep_csv(const analysis::PhaseSweepResult& r) {
  std::ostringstream os;
  analysis::write_sweep_csv(os, r);
  return os.str();
}

inline std::string herald_log(const std::vector<ShotRecord>& recs) {
  std::ostringstream os;
  control::write_herald_log(os, recs);
  return os.str();
}

inline Artifacts correlation_artifacts(const ExperimentConfig& cfg, int threads) {
  const auto r = correlation(cfg, threads);
  json j;
  j["schema_version"] = kSchemaVersion;
  j["experiment"] = "correlation";
  j["protocol"] = cfg.protocol.kind;
  j["zz"] = {{"raw", quad_json(r.table.zz())},
             {"stderr", quad_json(r.table.zz_stderr())},
             {"corrected", quad_json(r.zz_corrected.p)},
             {"aggregate", r.table.zz_aggregate()},
             {"aggregate_stderr", r.table.zz_aggregate_stderr()},
             {"aggregate_corrected", analysis::zz_aggregate(r.zz_corrected.p)},
             {"dark_fraction", r.zz_dark_fraction},
             {"heralds", r.table.zz_total()},
             {"shots", r.zz_summary.shots}};
  j["xx"] = {{"raw", quad_json(r.table.xx())},
             {"stderr", quad_json(r.table.xx_stderr())},
             {"corrected", quad_json(r.xx_corrected.p)},
             {"aggregate", r.table.xx_aggregate()},
             {"aggregate_stderr", r.table.xx_aggregate_stderr()},
             {"aggregate_corrected", analysis::xx_aggregate(r.xx_corrected.p)},
             {"dark_fraction", r.xx_dark_fraction},
             {"heralds", r.table.xx_total()},
             {"shots", r.xx_summary.shots}};
  j["bound"] = {{"raw", r.bound_raw}, {"corrected", r.bound_corrected}};
  j["visibility"] = sweep_json(r.sweep);
  j["budget"] = budget_json(r.budget);

  Artifacts a;
  a.files["summary.json"] = j.dump(2) + "\n";
  a.files["sweep.csv"] = sweep_csv(r.sweep.fit);
  a.files["table.csv"] = table_csv(r);
  if (cfg.run.herald_log) {
    a.files["heralds_zz.jsonl"] = herald_log(r.zz_records);
    a.files["heralds_xx.jsonl"] = herald_log(r.xx_records);
  }
  a.summary = fmt::format("ZZ {:.3f} +- {:.3f}  XX {:.3f} +- {:.3f}  bound {:.3f} (corrected {:.3f})  visibility {:.3f}",
                          r.table.zz_aggregate(), r.table.zz_aggregate_stderr(), r.table.xx_aggregate(),
                          r.table.xx_aggregate_stderr(), r.bound_raw, r.bound_corrected, r.sweep.visibility_corrected);
  return a;
}

inline Artifacts sweep_artifacts(const ExperimentConfig& cfg, int threads) {
  const auto s = phase_sweep(cfg, threads);
  json j;
  j["schema_version"] = kSchemaVersion;
  j["experiment"] = "sweep-phase";
  j["visibility"] = sweep_json(s);
  j["budget"] = budget_json(analysis::budget_of(cfg.setup));
  Artifacts a;
  a.files["summary.json"] = j.dump(2) + "\n";
  a.files["sweep.csv"] = sweep_csv(s.fit);
  a.summary = fmt::format("visibility {:.3f} (raw {:.3f} +- {:.3f})  phi0 {:.3f} rad", s.visibility_corrected,
                          s.fit.visibility, s.fit.visibility_stderr, s.fit.phi0);
  return a;
}

// ---------------------------------------------------------------------------
// Arrival-time histogram
// ---------------------------------------------------------------------------

inline photonics::Histogram arrival_histogram(const ExperimentConfig& cfg, const control::SimulationSetup& setup,
                                              std::uint64_t seed, int threads) {
  const auto res = control::run_controlled_experiment(cfg.script(), setup, control::histogram_options(),
                                                      cfg.run.shots, seed, threads);
  std::vector<photonics::ArrivalRecord> recs;
  for (const auto& r : res.records) {
    if (!r.photon_heralded) continue;
    recs.push_back({r.detector, r.arrival_bin, r.herald_origin, r.shot_index, r.arrival_time, 0.0});
  }
  if (recs.empty()) throw NumericalError("histogram run produced no detections");
  return photonics::histogram(recs);
}

inline json histogram_json(const photonics::Histogram& h) {
  return {{"total", h.total()},
          {"bin_fractions", json::array({h.bin_fraction(1), h.bin_fraction(2), h.bin_fraction(3)})},
          {"central_fraction", h.central_fraction()}};
}

inline Artifacts histogram_artifacts(const ExperimentConfig& cfg, int threads) {
  Artifacts a;
  json j;
  j["schema_version"] = kSchemaVersion;
  j["experiment"] = "histogram";
  const auto h = arrival_histogram(cfg, cfg.setup, derive_seed(cfg.run.seed, kZz), threads);
  std::ostringstream os;
  h.write_csv(os);
  a.files["histogram.csv"] = os.str();
  j["configured"] = histogram_json(h);
  j["configured"]["eod_enabled"] = cfg.setup.eod.enabled;
  a.summary = fmt::format("central fraction {:.4f} (eod {})", h.central_fraction(), cfg.setup.eod.enabled ? "on" : "off");
  if (cfg.setup.eod.enabled) {
    auto passive = cfg.setup;
    passive.eod.enabled = false;
    const auto hp = arrival_histogram(cfg, passive, derive_seed(cfg.run.seed, kPassive), threads);
    std::ostringstream ps;
    hp.write_csv(ps);
    a.files["histogram_passive.csv"] = ps.str();
    j["passive"] = histogram_json(hp);
    a.summary += fmt::format("; passive splitter {:.4f}", hp.central_fraction());
  }
  a.files["summary.json"] = j.dump(2) + "\n";
  return a;
}

// ---------------------------------------------------------------------------
// CRC statistics
// ---------------------------------------------------------------------------

struct MomentStats {
  double mean = 0.0;
  double variance = 0.0;
  std::uint64_t n = 0;
  double fano() const { return mean > 0.0 ? variance / mean : 0.0; }
};

inline MomentStats moments(const std::vector<double>& v) {
  MomentStats m;
  m.n = v.size();
  if (v.empty()) return m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  for (double x : v) m.variance += (x - m.mean) * (x - m.mean);
  m.variance /= static_cast<double>(v.size() > 1 ? v.size() - 1 : 1);
  return m;
}

struct CrcReport {
  MomentStats before;           // CRC counts over all cycles
  MomentStats after;            // probe counts of accepted cycles
  double prior_rms_hz = 0.0;    // detuning RMS over all cycles
  double accepted_rms_hz = 0.0; // detuning RMS over accepted cycles
  double pass_rate = 0.0;
  std::vector<control::CrcCycle> cycles;
};

inline CrcReport crc_report(const ExperimentConfig& cfg) {
  CrcReport r;
  r.cycles = control::crc_statistics(cfg.setup.noise, cfg.setup.crc, cfg.run.crc_cycles, cfg.run.seed);
  std::vector<double> before;
  std::vector<double> after;
  double s_all = 0.0;
  double s_acc = 0.0;
  for (const auto& c : r.cycles) {
    before.push_back(c.counts);
    s_all += c.detuning_hz * c.detuning_hz;
    if (c.passed) {
      after.push_back(c.probe_counts);
      s_acc += c.detuning_hz * c.detuning_hz;
    }
  }
  r.before = moments(before);
  r.after = moments(after);
  r.pass_rate = r.cycles.empty() ? 0.0 : static_cast<double>(after.size()) / static_cast<double>(r.cycles.size());
  r.prior_rms_hz = r.cycles.empty() ? 0.0 : std::sqrt(s_all / static_cast<double>(r.cycles.size()));
  r.accepted_rms_hz = after.empty() ? 0.0 : std::sqrt(s_acc / static_cast<double>(after.size()));
  return r;
}

inline Artifacts crc_artifacts(const ExperimentConfig& cfg) {
  const auto r = crc_report(cfg);
  int max_c = 0;
  for (const auto& c : r.cycles) max_c = std::max({max_c, c.counts, c.probe_counts});
  std::vector<std::uint64_t> hb(static_cast<std::size_t>(max_c) + 1, 0);
  std::vector<std::uint64_t> ha(static_cast<std::size_t>(max_c) + 1, 0);
  for (const auto& c : r.cycles) {
    hb[static_cast<std::size_t>(c.counts)]++;
    if (c.passed) ha[static_cast<std::size_t>(c.probe_counts)]++;
  }
  std::string csv = "counts,before_crc,after_crc\n";
  for (std::size_t k = 0; k < hb.size(); ++k) csv += fmt::format("{},{},{}\n", k, hb[k], ha[k]);

  auto mj = [](const MomentStats& m) {
    return json{{"n", m.n}, {"mean", m.mean}, {"variance", m.variance}, {"variance_over_mean", m.fano()}};
  };
  json j;
  j["schema_version"] = kSchemaVersion;
  j["experiment"] = "crc-stats";
  j["before"] = mj(r.before);
  j["after"] = mj(r.after);
  j["pass_rate"] = r.pass_rate;
  j["prior_detuning_rms_hz"] = r.prior_rms_hz;
  j["accepted_detuning_rms_hz"] = r.accepted_rms_hz;
  Artifacts a;
  a.files["crc_counts.csv"] = csv;
  a.files["summary.json"] = j.dump(2) + "\n";
  a.summary = fmt::format("var/mean {:.3f} -> {:.3f}  detuning RMS {:.3g} -> {:.3g} Hz  pass rate {:.3f}",
                          r.before.fano(), r.after.fano(), r.prior_rms_hz, r.accepted_rms_hz, r.pass_rate);
  return a;
}

// ---------------------------------------------------------------------------
// Spectral-diffusion contrast sweep
// ---------------------------------------------------------------------------

struct ContrastPoint {
  double sigma_hz = 0.0;
  double contrast = 0.0;
  double stderr_ = 0.0;
  double analytic = 0.0;
};

// XX correlation at the configured phase for each sigma. CRC is off and every
// shot gets its own detuning draw so shots are independent.
inline std::vector<ContrastPoint> contrast_sweep(const ExperimentConfig& cfg, int threads) {
  auto setup = cfg.setup;
  setup.crc.enabled = false;
  setup.crc.block_length = 1;
  const auto script = cfg.script().with_basis(Basis::XX);
  const auto opts = control::options_for(Basis::XX, setup.eod);
  auto base = setup;
  base.noise.sigma_diffusion_hz = 0.0;
  const double scale = reference::oracle_table(script, base).visibility;
  std::vector<ContrastPoint> out;
  for (std::size_t i = 0; i < cfg.run.sigma_grid.size(); ++i) {
    setup.noise.sigma_diffusion_hz = cfg.run.sigma_grid[i];
    const auto res = control::run_controlled_experiment(script, setup, opts, cfg.run.shots,
                                                        derive_seed(cfg.run.seed, kGridBase + i), threads);
    const auto t = analysis::correlation_table({{res.records, Basis::XX, false}});
    out.push_back({cfg.run.sigma_grid[i], t.xx_aggregate(), t.xx_aggregate_stderr(),
                   scale * noise::analytic_contrast(cfg.run.sigma_grid[i], setup.interferometer.arm_delay)});
  }
  return out;
}

inline Artifacts contrast_artifacts(const ExperimentConfig& cfg, int threads) {
  const auto pts = contrast_sweep(cfg, threads);
  std::string csv = "sigma_hz,contrast,stderr,analytic\n";
  double worst = 0.0;
  for (const auto& p : pts) {
    csv += fmt::format("{:.6e},{:.6f},{:.6f},{:.6f}\n", p.sigma_hz, p.contrast, p.stderr_, p.analytic);
    if (p.stderr_ > 0) worst = std::max(worst, std::abs(p.contrast - p.analytic) / p.stderr_);
  }
  json j;
  j["schema_version"] = kSchemaVersion;
  j["experiment"] = "contrast-sweep";
  j["arm_delay"] = cfg.setup.interferometer.arm_delay;
  j["points"] = pts.size();
  j["max_deviation_sigma"] = worst;
  Artifacts a;
  a.files["contrast_sweep.csv"] = csv;
  a.files["summary.json"] = j.dump(2) + "\n";
  a.summary = fmt::format("{} sigma points, worst deviation from analytic {:.2f} standard errors", pts.size(), worst);
  return a;
}

// ---------------------------------------------------------------------------
// Budget and oracle fidelity
// ---------------------------------------------------------------------------

inline Artifacts budget_artifacts(const ExperimentConfig& cfg) {
  const auto b = analysis::budget_of(cfg.setup);
  json j;
  j["schema_version"] = kSchemaVersion;
  j["experiment"] = "budget";
  j["budget"] = budget_json(b);
  Artifacts a;
  a.files["summary.json"] = j.dump(2) + "\n";
  a.summary = fmt::format("contrast budget {:.4f} x {:.4f} x {:.4f} x {:.4f} = {:.4f}", b.init_readout,
                          b.interferometer_stability, b.mode_overlap, b.spectral, b.product());
  return a;
}

inline Artifacts fidelity_artifacts(const ExperimentConfig& cfg) {
  const auto script = cfg.script();
  const auto t = reference::oracle_table(script, cfg.setup);
  const double f = reference::target_fidelity(script, cfg.setup);
  json j;
  j["schema_version"] = kSchemaVersion;
  j["experiment"] = "fidelity";
  j["zz"] = {{"diagonals", quad_json(t.zz)}, {"aggregate", analysis::zz_aggregate(t.zz)}};
  j["xx"] = {{"diagonals", quad_json(t.xx)}, {"aggregate", analysis::xx_aggregate(t.xx)}};
  j["phi0"] = t.phi0;
  j["visibility"] = t.visibility;
  j["bound"] = t.bound();
  j["emitted_pair_fidelity"] = f;
  j["herald_probability"] = {{"zz", t.zz_herald}, {"xx", t.xx_herald}};
  Artifacts a;
  a.files["summary.json"] = j.dump(2) + "\n";
  a.summary = fmt::format("oracle: ZZ {:.4f}  XX {:.4f}  bound {:.4f}  emitted-pair fidelity {:.4f}",
                          analysis::zz_aggregate(t.zz), analysis::xx_aggregate(t.xx), t.bound(), f);
  return a;
}

// ---------------------------------------------------------------------------
// Nuclear memory coherence and readout statistics
// ---------------------------------------------------------------------------

struct MemoryPoint {
  double wait = 0.0;
  double coherence = 0.0;
  double stderr_ = 0.0;
  double model = 0.0;
};

// Nuclear Ramsey-type check of the stored coherence: pi/2, wait, inverse pi/2,
// then a projective nuclear measurement. Coherence = 2 P(m_I = 0) - 1.
inline std::vector<MemoryPoint> memory_scan(const ExperimentConfig& cfg) {
  cfg.setup.memory.validate();
  auto spec = std::make_shared<const qcore::RegisterSpec>(
      std::vector<qcore::Subsystem>{{nv::kElectron, nv::kSpinDim}, {nv::kNuclear, nv::kSpinDim}});
  const auto start = qcore::basis_state(spec, {nv::kQubit0, nv::kQubit0});
  const auto half = nv::rf_gate(std::numbers::pi / 2, std::numbers::pi / 2, nv::NuclearPair::Memory, 0);
  const auto undo = nv::rf_gate(-std::numbers::pi / 2, std::numbers::pi / 2, nv::NuclearPair::Memory, 0);
  const auto prepared = qcore::apply_unitary(start, half);
  std::vector<MemoryPoint> out;
  for (std::size_t i = 0; i < cfg.run.wait_grid.size(); ++i) {
    const double t = cfg.run.wait_grid[i];
    const double f = nv::memory_decay_factor(t, cfg.setup.memory);
    const auto deph = nv::dephasing_gate(nv::kNuclear, {nv::kQubit0, nv::kQubit1}, f);
    std::uint64_t zeros = 0;
    for (std::uint64_t s = 0; s < cfg.run.shots; ++s) {
      CounterRng rng(derive_seed(cfg.run.seed, kGridBase + i), Stream::kShot, s);
      auto st = qcore::sample_kraus(prepared, deph, rng).state;
      st = qcore::apply_unitary(st, undo);
      if (qcore::measure(st, nv::kNuclear, rng).outcome == nv::kQubit0) ++zeros;
    }
    const double p0 = static_cast<double>(zeros) / static_cast<double>(cfg.run.shots);
    out.push_back({t, 2.0 * p0 - 1.0, 2.0 * std::sqrt(p0 * (1.0 - p0) / static_cast<double>(cfg.run.shots)), f});
  }
  return out;
}

inline Artifacts memory_artifacts(const ExperimentConfig& cfg) {
  const auto pts = memory_scan(cfg);
  std::string csv = "wait_s,coherence,stderr,model\n";
  for (const auto& p : pts) csv += fmt::format("{:.6e},{:.6f},{:.6f},{:.6f}\n", p.wait, p.coherence, p.stderr_, p.model);
  json j;
  j["schema_version"] = kSchemaVersion;
  j["experiment"] = "memory";
  j["t2_hahn"] = cfg.setup.memory.t2_hahn;
  j["decay_exponent"] = cfg.setup.memory.decay_exponent;
  j["coherence_at_100ms"] = nv::memory_decay_factor(0.1, cfg.setup.memory);
  Artifacts a;
  a.files["memory.csv"] = csv;
  a.files["summary.json"] = j.dump(2) + "\n";
  a.summary = fmt::format("memory coherence at 100 ms: {:.3f} (T2 {:.3g} s)",
                          nv::memory_decay_factor(0.1, cfg.setup.memory), cfg.setup.memory.t2_hahn);
  return a;
}

inline Artifacts readout_artifacts(const ExperimentConfig& cfg) {
  const auto& m = cfg.setup.readout;
  std::vector<std::uint64_t> hb;
  std::vector<std::uint64_t> hd;
  std::uint64_t err_b = 0;
  std::uint64_t err_d = 0;
  for (std::uint64_t s = 0; s < cfg.run.shots; ++s) {
    CounterRng rng(cfg.run.seed, Stream::kShot, s, 7);
    const auto b = noise::single_shot_readout(true, m, rng);
    const auto d = noise::single_shot_readout(false, m, rng);
    const auto need = static_cast<std::size_t>(std::max(b.counts, d.counts)) + 1;
    if (hb.size() < need) {
      hb.resize(need, 0);
      hd.resize(need, 0);
    }
    hb[static_cast<std::size_t>(b.counts)]++;
    hd[static_cast<std::size_t>(d.counts)]++;
    err_b += b.inferred != 0;
    err_d += d.inferred != 1;
  }
  const double n = static_cast<double>(cfg.run.shots);
  std::string csv = "counts,p_ms0,p_ms1\n";
  for (std::size_t k = 0; k < hb.size(); ++k) {
    csv += fmt::format("{},{:.6f},{:.6f}\n", k, static_cast<double>(hb[k]) / n, static_cast<double>(hd[k]) / n);
  }
  const auto conf = noise::readout_confusion(m);
  json j;
  j["schema_version"] = kSchemaVersion;
  j["experiment"] = "readout";
  j["lambda_bright"] = m.lambda_bright;
  j["lambda_dark"] = m.lambda_dark;
  j["threshold"] = m.threshold;
  j["fidelity_ms0"] = 1.0 - static_cast<double>(err_b) / n;
  j["fidelity_ms1"] = 1.0 - static_cast<double>(err_d) / n;
  j["fidelity_ms0_model"] = 1.0 - conf.bright_as_dark;
  j["fidelity_ms1_model"] = 1.0 - conf.dark_as_bright;
  j["readout_contrast"] = noise::readout_contrast(m);
  j["init_contrast"] = noise::init_contrast(m);
  Artifacts a;
  a.files["readout_hist.csv"] = csv;
  a.files["summary.json"] = j.dump(2) + "\n";
  a.summary = fmt::format("readout fidelity m_s=0 {:.4f}, m_s=-1 {:.4f}; contrast {:.4f}",
                          1.0 - static_cast<double>(err_b) / n, 1.0 - static_cast<double>(err_d) / n,
                          noise::readout_contrast(m));
  return a;
}

inline Artifacts run_artifacts(const ExperimentConfig& cfg, int threads) {
  if (cfg.run.experiment == "memory") return memory_artifacts(cfg);
  if (cfg.run.experiment == "readout") return readout_artifacts(cfg);
  return correlation_artifacts(cfg, threads);
}

}  // namespace nvlink::runners
