// Command-line front end: nvlink <subcommand> [--config PATH | --preset NAME] [...]

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "nvlink/runners.hpp"

#ifndef NVLINK_PRESET_DIR
#define NVLINK_PRESET_DIR "presets"
#endif

namespace {

namespace fs = std::filesystem;
using nvlink::config::ExperimentConfig;

struct Options {
  std::string config_path;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> shots;
  std::optional<int> threads;
  std::string out = "out";
};

ExperimentConfig resolve(const Options& o) {
  if (!o.config_path.empty() && !o.preset.empty()) {
    throw nvlink::ConfigError("--config and --preset are mutually exclusive");
  }
  ExperimentConfig cfg;
  if (!o.config_path.empty()) {
    cfg = nvlink::config::load_config(o.config_path);
  } else if (!o.preset.empty()) {
    cfg = nvlink::config::load_config((fs::path(NVLINK_PRESET_DIR) / (o.preset + ".cfg")).string());
  }
  if (o.seed) cfg.run.seed = *o.seed;
  if (o.shots) cfg.run.shots = *o.shots;
  if (o.threads) cfg.run.threads = *o.threads;
  cfg.validate();
  return cfg;
}

void write_artifacts(const nvlink::runners::Artifacts& a, const std::string& dir) {
  fs::create_directories(dir);
  for (const auto& [name, body] : a.files) {
    std::ofstream f(fs::path(dir) / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (fs::path(dir) / name).string());
    f << body;
  }
}

nvlink::runners::Artifacts dispatch(const std::string& cmd, const ExperimentConfig& cfg) {
  namespace r = nvlink::runners;
  const int th = cfg.run.threads;
  if (cmd == "run") return r::run_artifacts(cfg, th);
  if (cmd == "sweep-phase") return r::sweep_artifacts(cfg, th);
  if (cmd == "histogram") return r::histogram_artifacts(cfg, th);
  if (cmd == "crc-stats") return r::crc_artifacts(cfg);
  if (cmd == "contrast-sweep") return r::contrast_artifacts(cfg, th);
  if (cmd == "budget") return r::budget_artifacts(cfg);
  return r::fidelity_artifacts(cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NV-center time-bin spin-photon entanglement simulator"};
  app.require_subcommand(1);
  Options o;

  const char* const names[][2] = {
      {"run", "run the experiment selected by run.experiment"},
      {"sweep-phase", "XX joint frequencies over the interferometer phase grid"},
      {"histogram", "arrival-time bin histogram (adds a passive reference when the EOD is on)"},
      {"crc-stats", "charge-resonance check count statistics"},
      {"contrast-sweep", "XX contrast versus spectral-diffusion width"},
      {"budget", "analytic contrast budget"},
      {"fidelity", "density-oracle correlation table and fidelity bound"},
  };
  for (const auto& n : names) {
    auto* sub = app.add_subcommand(n[0], n[1]);
    sub->add_option("--config", o.config_path, "config file");
    sub->add_option("--preset", o.preset, "shipped preset name");
    sub->add_option("--seed", o.seed, "root seed");
    sub->add_option("--shots", o.shots, "shots per run");
    sub->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", o.out, "output directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    const auto cfg = resolve(o);
    const auto a = dispatch(cmd, cfg);
    write_artifacts(a, o.out);
    std::cout << cmd << ": " << a.summary << "\n";
    return 0;
  } catch (const nvlink::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const nvlink::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
