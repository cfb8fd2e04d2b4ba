// Minimal use of the library: configure a noisy link, compare the exact
// correlation table with a sampled one, and print the fidelity bounds.
//
//   sample_link [shots]

#include <cstdlib>
#include <iostream>

#include <fmt/format.h>

#include "nvlink/runners.hpp"

int main(int argc, char** argv) {
  using namespace nvlink;

  config::ExperimentConfig cfg;
  cfg.run.shots = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 20000;
  cfg.run.seed = 7;

  auto& s = cfg.setup;
  s.eod.fidelity = 0.97;
  s.interferometer.mode_overlap = 0.95;
  s.interferometer.phase_jitter_rms = noise::jitter_rms_for_factor(0.97);
  s.readout.combined_init_readout_fidelity = 0.8;
  s.readout = noise::calibrated(s.readout);
  cfg.validate();

  const auto exact = reference::oracle_table(cfg.script(), s);
  const auto rep = runners::correlation(cfg, control::default_threads());

  auto row = [](const char* name, const analysis::Quad& q) {
    fmt::print("{:<8} {:.4f} {:.4f} {:.4f} {:.4f}\n", name, q[0], q[1], q[2], q[3]);
  };
  row("ZZ exact", exact.zz);
  row("ZZ run", rep.table.zz());
  row("XX exact", exact.xx);
  row("XX run", rep.table.xx());
  fmt::print("visibility {:.4f} (exact {:.4f}), phi0 {:.3f} rad\n", rep.sweep.fit.visibility, exact.visibility,
             rep.sweep.fit.phi0);
  fmt::print("fidelity bound {:.4f} (exact {:.4f}), budget {:.4f}\n", rep.bound_raw, exact.bound(),
             rep.budget.product());
  return 0;
}
