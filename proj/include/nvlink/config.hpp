#pragma once

// Experiment configuration files: INI-style sections of `key = value` lines.
// Unknown sections or keys are rejected; every error carries a line number.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "nvlink/control.hpp"
#include "nvlink/core/error.hpp"
#include "nvlink/protocol.hpp"

namespace nvlink::config {

struct ProtocolConfig {
  std::string kind = "electron";  // electron | nuclear | custom
  std::string script;             // custom only
};

struct RunConfig {
  std::uint64_t shots = 100000;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string experiment = "correlation";  // correlation | memory | readout
  int phase_points = 12;
  // Optional override of the sweep grid (radians).
  std::vector<double> phase_grid;
  std::vector<double> wait_grid{0.0, 0.025, 0.05, 0.1, 0.15, 0.2, 0.3};
  std::vector<double> sigma_grid{0.0, 0.5e6, 1e6, 1.5e6, 2e6, 2.5e6, 3e6, 3.5e6, 4e6, 5e6};
  std::uint64_t crc_cycles = 100000;
  bool herald_log = false;
};

struct ExperimentConfig {
  control::SimulationSetup setup;
  ProtocolConfig protocol;
  RunConfig run;
  // Recompute readout.lambda_bright from the combined figure and its share.
  bool calibrate_readout = false;

  protocol::ProtocolScript script() const {
    if (protocol.kind == "electron") return protocol::electron_script();
    if (protocol.kind == "nuclear") return protocol::nuclear_script();
    return protocol::parse_script(protocol.script);
  }

  std::vector<double> phases() const {
    if (!run.phase_grid.empty()) return run.phase_grid;
    std::vector<double> g;
    for (int i = 0; i < run.phase_points; ++i) g.push_back(2.0 * std::numbers::pi * i / run.phase_points);
    return g;
  }

  void validate() const {
    setup.validate();
    if (protocol.kind != "electron" && protocol.kind != "nuclear" && protocol.kind != "custom") {
      throw ConfigError("protocol.kind must be electron, nuclear or custom");
    }
    if (protocol.kind == "custom") protocol::parse_script(protocol.script);
    if (run.shots < 1) throw ConfigError("run.shots must be >= 1");
    if (run.threads < 1) throw ConfigError("run.threads must be >= 1");
    if (run.phase_points < 6) throw ConfigError("run.phase_points must be >= 6");
    if (!run.phase_grid.empty() && run.phase_grid.size() < 6) throw ConfigError("run.phase_grid needs >= 6 phases");
    if (run.experiment != "correlation" && run.experiment != "memory" && run.experiment != "readout") {
      throw ConfigError("run.experiment must be correlation, memory or readout");
    }
    for (double t : run.wait_grid) {
      if (!(t >= 0.0)) throw ConfigError("run.wait_grid entries must be >= 0");
    }
    for (double s : run.sigma_grid) {
      if (!(s >= 0.0)) throw ConfigError("run.sigma_grid entries must be >= 0");
    }
  }
};

namespace detail {

inline std::string trim(std::string_view s) { return protocol::detail::trim(s); }

inline double to_double(const std::string& v) {
  try {
    return protocol::parse_angle(v);
  } catch (const ConfigError&) {
    throw ConfigError("expected a number, got '" + v + "'");
  }
}

inline std::uint64_t to_u64(const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("expected a non-negative integer, got '" + v + "'");
  return out;
}

inline int to_int(const std::string& v) {
  int out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("expected an integer, got '" + v + "'");
  return out;
}

inline bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("expected true or false, got '" + v + "'");
}

inline std::vector<double> to_list(const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(to_double(item));
  }
  return out;
}

inline std::string fmt_double(double v) { return fmt::format("{:.17g}", v); }

inline std::string fmt_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += fmt_double(v[i]);
  }
  return s;
}

struct Field {
  std::string section;
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <class Ref>
Field dbl(std::string sec, std::string key, Ref ref) {
  return {std::move(sec), std::move(key),
          [ref](ExperimentConfig& c, const std::string& v) { ref(c) = to_double(v); },
          [ref](const ExperimentConfig& c) { return fmt_double(ref(const_cast<ExperimentConfig&>(c))); }};
}
template <class Ref>
Field integer(std::string sec, std::string key, Ref ref) {
  return {std::move(sec), std::move(key), [ref](ExperimentConfig& c, const std::string& v) { ref(c) = to_int(v); },
          [ref](const ExperimentConfig& c) { return std::to_string(ref(const_cast<ExperimentConfig&>(c))); }};
}
template <class Ref>
Field u64(std::string sec, std::string key, Ref ref) {
  return {std::move(sec), std::move(key), [ref](ExperimentConfig& c, const std::string& v) { ref(c) = to_u64(v); },
          [ref](const ExperimentConfig& c) { return std::to_string(ref(const_cast<ExperimentConfig&>(c))); }};
}
template <class Ref>
Field boolean(std::string sec, std::string key, Ref ref) {
  return {std::move(sec), std::move(key), [ref](ExperimentConfig& c, const std::string& v) { ref(c) = to_bool(v); },
          [ref](const ExperimentConfig& c) { return std::string(ref(const_cast<ExperimentConfig&>(c)) ? "true" : "false"); }};
}
template <class Ref>
Field text(std::string sec, std::string key, Ref ref) {
  return {std::move(sec), std::move(key), [ref](ExperimentConfig& c, const std::string& v) { ref(c) = v; },
          [ref](const ExperimentConfig& c) { return ref(const_cast<ExperimentConfig&>(c)); }};
}
template <class Ref>
Field list(std::string sec, std::string key, Ref ref) {
  return {std::move(sec), std::move(key), [ref](ExperimentConfig& c, const std::string& v) { ref(c) = to_list(v); },
          [ref](const ExperimentConfig& c) { return fmt_list(ref(const_cast<ExperimentConfig&>(c))); }};
}

using C = ExperimentConfig;

inline const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      dbl("emitter", "eta_collect", [](C& c) -> double& { return c.setup.emitter.eta_collect; }),
      dbl("emitter", "eta_detect", [](C& c) -> double& { return c.setup.emitter.eta_detect; }),
      dbl("emitter", "excited_lifetime", [](C& c) -> double& { return c.setup.emitter.excited_lifetime; }),
      dbl("emitter", "leakage_counts_per_pulse", [](C& c) -> double& { return c.setup.emitter.leakage_counts_per_pulse; }),
      dbl("emitter", "leakage_width", [](C& c) -> double& { return c.setup.emitter.leakage_width; }),
      dbl("emitter", "time_filter_start", [](C& c) -> double& { return c.setup.emitter.time_filter_start; }),
      dbl("emitter", "time_filter_end", [](C& c) -> double& { return c.setup.emitter.time_filter_end; }),
      dbl("emitter", "optical_pi_fidelity", [](C& c) -> double& { return c.setup.emitter.optical_pi_fidelity; }),

      dbl("interferometer", "phase_phi", [](C& c) -> double& { return c.setup.interferometer.phase_phi; }),
      dbl("interferometer", "arm_delay", [](C& c) -> double& { return c.setup.interferometer.arm_delay; }),
      dbl("interferometer", "mode_overlap", [](C& c) -> double& { return c.setup.interferometer.mode_overlap; }),
      dbl("interferometer", "phase_jitter_rms", [](C& c) -> double& { return c.setup.interferometer.phase_jitter_rms; }),

      boolean("eod", "enabled", [](C& c) -> bool& { return c.setup.eod.enabled; }),
      dbl("eod", "fidelity", [](C& c) -> double& { return c.setup.eod.fidelity; }),
      dbl("eod", "switch_period", [](C& c) -> double& { return c.setup.eod.switch_period; }),
      dbl("eod", "drive_delay", [](C& c) -> double& { return c.setup.eod.drive_delay; }),

      dbl("detector", "dark_rate", [](C& c) -> double& { return c.setup.detector.dark_rate; }),
      dbl("detector", "detection_window", [](C& c) -> double& { return c.setup.detector.detection_window; }),
      dbl("detector", "time_filter_start", [](C& c) -> double& { return c.setup.detector.time_filter_start; }),
      dbl("detector", "time_filter_end", [](C& c) -> double& { return c.setup.detector.time_filter_end; }),

      dbl("noise", "detuning_hz", [](C& c) -> double& { return c.setup.noise.detuning_hz; }),
      dbl("noise", "sigma_diffusion_hz", [](C& c) -> double& { return c.setup.noise.sigma_diffusion_hz; }),
      dbl("noise", "p_ionize", [](C& c) -> double& { return c.setup.noise.p_ionize; }),
      dbl("noise", "spectral_factor", [](C& c) -> double& { return c.setup.spectral_factor; }),

      dbl("readout", "lambda_bright", [](C& c) -> double& { return c.setup.readout.lambda_bright; }),
      dbl("readout", "lambda_dark", [](C& c) -> double& { return c.setup.readout.lambda_dark; }),
      integer("readout", "threshold", [](C& c) -> int& { return c.setup.readout.threshold; }),
      dbl("readout", "combined_init_readout_fidelity",
          [](C& c) -> double& { return c.setup.readout.combined_init_readout_fidelity; }),
      dbl("readout", "readout_share", [](C& c) -> double& { return c.setup.readout.readout_share; }),
      boolean("readout", "calibrate", [](C& c) -> bool& { return c.calibrate_readout; }),

      dbl("memory", "t2_hahn", [](C& c) -> double& { return c.setup.memory.t2_hahn; }),
      dbl("memory", "decay_exponent", [](C& c) -> double& { return c.setup.memory.decay_exponent; }),

      boolean("crc", "enabled", [](C& c) -> bool& { return c.setup.crc.enabled; }),
      dbl("crc", "window", [](C& c) -> double& { return c.setup.crc.window; }),
      integer("crc", "threshold", [](C& c) -> int& { return c.setup.crc.threshold; }),
      dbl("crc", "rate_on_resonance", [](C& c) -> double& { return c.setup.crc.rate_on_resonance; }),
      dbl("crc", "linewidth_hz", [](C& c) -> double& { return c.setup.crc.linewidth_hz; }),
      integer("crc", "block_length", [](C& c) -> int& { return c.setup.crc.block_length; }),
      integer("crc", "max_recharge_attempts", [](C& c) -> int& { return c.setup.crc.max_recharge_attempts; }),
      dbl("crc", "recharge_success", [](C& c) -> double& { return c.setup.crc.recharge_success; }),
      dbl("crc", "drift_correlation", [](C& c) -> double& { return c.setup.crc.drift_correlation; }),

      text("protocol", "kind", [](C& c) -> std::string& { return c.protocol.kind; }),
      text("protocol", "script", [](C& c) -> std::string& { return c.protocol.script; }),
      dbl("protocol", "nuclear_op_failure", [](C& c) -> double& { return c.setup.nuclear_op_failure; }),
      dbl("protocol", "rf_area_error", [](C& c) -> double& { return c.setup.nuclear_init.rf_area_error; }),
      dbl("protocol", "mw_area_error", [](C& c) -> double& { return c.setup.nuclear_init.mw_area_error; }),
      dbl("protocol", "pump_residual", [](C& c) -> double& { return c.setup.nuclear_init.pump_residual; }),

      u64("run", "shots", [](C& c) -> std::uint64_t& { return c.run.shots; }),
      u64("run", "seed", [](C& c) -> std::uint64_t& { return c.run.seed; }),
      integer("run", "threads", [](C& c) -> int& { return c.run.threads; }),
      text("run", "experiment", [](C& c) -> std::string& { return c.run.experiment; }),
      integer("run", "phase_points", [](C& c) -> int& { return c.run.phase_points; }),
      list("run", "phase_grid", [](C& c) -> std::vector<double>& { return c.run.phase_grid; }),
      list("run", "wait_grid", [](C& c) -> std::vector<double>& { return c.run.wait_grid; }),
      list("run", "sigma_grid", [](C& c) -> std::vector<double>& { return c.run.sigma_grid; }),
      u64("run", "crc_cycles", [](C& c) -> std::uint64_t& { return c.run.crc_cycles; }),
      boolean("run", "herald_log", [](C& c) -> bool& { return c.run.herald_log; }),
  };
  return f;
}

inline const Field* find_field(const std::string& section, const std::string& key) {
  for (const auto& f : fields()) {
    if (f.section == section && f.key == key) return &f;
  }
  return nullptr;
}

}  // namespace detail

inline ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  std::map<std::string, int> set_at;  // "section.key" -> line
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    auto fail = [&](const std::string& msg) { throw ConfigError(fmt::format("line {}: {}", line_no, msg)); };
    if (line.front() == '[') {
      if (line.back() != ']') fail("unterminated section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      const bool known = std::any_of(detail::fields().begin(), detail::fields().end(),
                                     [&](const detail::Field& f) { return f.section == section; });
      if (!known) fail("unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected key = value");
    if (section.empty()) fail("key outside of any section");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    const auto* f = detail::find_field(section, key);
    if (!f) fail(fmt::format("unknown key '{}' in [{}]", key, section));
    const std::string name = section + "." + key;
    if (set_at.count(name)) fail("duplicate key " + name);
    set_at[name] = line_no;
    try {
      f->set(cfg, value);
    } catch (const ConfigError& e) {
      fail(name + ": " + e.what());
    }
  }
  try {
    if (cfg.calibrate_readout) cfg.setup.readout = noise::calibrated(cfg.setup.readout);
    cfg.validate();
  } catch (const ConfigError& e) {
    // Point at the line that set the offending field when it can be found.
    const std::string msg = e.what();
    int where = 0;
    std::size_t best = 0;
    for (const auto& [name, ln] : set_at) {
      if (msg.find(name) != std::string::npos && name.size() > best) {
        where = ln;
        best = name.size();
      }
    }
    if (where > 0) throw ConfigError(fmt::format("line {}: {}", where, msg));
    throw;
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

// Writes every field, so parse(serialize(c)) reproduces c exactly.
inline std::string serialize(const ExperimentConfig& cfg) {
  std::string out;
  std::string section;
  for (const auto& f : detail::fields()) {
    if (f.section != section) {
      if (!section.empty()) out += "\n";
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += f.key + " = " + f.get(cfg) + "\n";
  }
  return out;
}

}  // namespace nvlink::config
