#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cli.hpp"
#include "dispar/version.hpp"

int main(int argc, char** argv) {
  dispar::cli::Options opt;
  CLI::App app{"Dispersive parity gate modelling for coupled transmons"};
  app.set_version_flag("--version", dispar::kVersion);
  app.require_subcommand(1, 1);

  for (const auto& name : dispar::cli::commands()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", opt.config, "run configuration (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out, "output directory")->capture_default_str();
    sub->add_option("--seed", opt.seed, "RNG seed");
    sub->add_option("--threads", opt.threads, "worker threads")->check(CLI::PositiveNumber);
    if (name == "evolve" || name == "repro-table1" || name == "compare") {
      sub->add_option("--dt-ps", opt.dt_ps, "integrator step in ps")->check(CLI::PositiveNumber);
      sub->add_option("--t-gate-ns", opt.t_gate_ns, "gate duration in ns")->check(CLI::PositiveNumber);
      sub->add_option("--frame", opt.frame, "lab or rotating")->check(CLI::IsMember({"lab", "rotating"}));
      sub->add_option("--t1-us", opt.t1_us, "T1 applied to every qubit mode, microseconds")
          ->check(CLI::PositiveNumber);
      sub->add_option("--trace-stride", opt.trace_stride, "record populations every n steps");
    }
    if (name != "lattice-check") sub->add_option("--levels", opt.levels, "truncation levels per mode");
    if (name == "compare" || name == "repro-table1") {
      sub->add_option("--n-cnots", opt.n_cnots, "CNOT count for the chain")->check(CLI::PositiveNumber);
      sub->add_option("--f-cnot", opt.f_cnot, "single CNOT fidelity")->check(CLI::Range(0.0, 1.0));
    }
    if (name == "compare") sub->add_option("--gate-report", opt.gate_report, "evolve report.json to reuse");
    if (name == "shifts" || name == "repro-table1")
      sub->add_option("--golden", opt.golden, "reference shift CSV")->check(CLI::ExistingFile);
    sub->callback([&opt, name] { opt.command = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : dispar::cli::kExitConfig;
  }
  return dispar::cli::execute(opt, std::cout, std::cerr);
}
