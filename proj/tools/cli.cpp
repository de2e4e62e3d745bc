#include "cli.hpp"

#include <chrono>
#include <cstdlib>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dispar/config.hpp"
#include "dispar/dynamics.hpp"
#include "dispar/errors.hpp"
#include "dispar/regimes.hpp"
#include "dispar/shifts.hpp"
#include "dispar/stabilizers.hpp"
#include "dispar/swreduce.hpp"
#include "dispar/version.hpp"

#ifndef DISPAR_SOURCE_DATA_DIR
#define DISPAR_SOURCE_DATA_DIR ""
#endif
#ifndef DISPAR_INSTALL_DATA_DIR
#define DISPAR_INSTALL_DATA_DIR ""
#endif

namespace dispar::cli {

using nlohmann::json;
namespace fs = std::filesystem;

const std::vector<std::string>& commands() {
  static const std::vector<std::string> names = {"build",   "reduce",        "shifts",  "search",
                                                 "evolve",  "lattice-check", "compare", "repro-table1"};
  return names;
}

fs::path data_dir() {
  if (const char* env = std::getenv("DISPAR_DATA_DIR"); env && *env) return env;
  for (const char* candidate : {DISPAR_SOURCE_DATA_DIR, DISPAR_INSTALL_DATA_DIR}) {
    if (*candidate && fs::exists(fs::path(candidate) / "table1.json")) return candidate;
  }
  return "data";
}

namespace {

std::string label_text(const BasisLabel& label) {
  std::string s;
  for (int n : label) s += std::to_string(n);
  return s;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + file.string() + "'");
  out << text;
}

void write_json(const fs::path& file, const json& j) { write_text(file, j.dump(2) + "\n"); }

class Run {
 public:
  Run(const Options& options, std::ostream& log) : opt_(options), log_(log) {
    fs::path cfg_path;
    if (options.config) {
      cfg_path = *options.config;
    } else if (options.command == "repro-table1") {
      cfg_path = data_dir() / "table1_config.json";
    }
    if (!cfg_path.empty()) cfg_ = load_config(cfg_path);
    apply_overrides();
    std::error_code ec;
    fs::create_directories(options.out, ec);
    if (ec) throw ConfigError("--out: cannot create '" + options.out.string() + "': " + ec.message());
  }

  int dispatch() {
    const auto& c = opt_.command;
    json report;
    if (c == "build") report = build();
    else if (c == "reduce") report = reduce();
    else if (c == "shifts") report = shifts();
    else if (c == "search") report = search();
    else if (c == "evolve") report = evolve();
    else if (c == "lattice-check") report = lattice();
    else if (c == "compare") report = compare();
    else if (c == "repro-table1") report = repro();
    else throw ConfigError("unknown command '" + c + "'");
    finish(report);
    return kExitOk;
  }

 private:
  void apply_overrides() {
    if (opt_.seed) cfg_.seed = *opt_.seed;
    if (opt_.levels) {
      if (*opt_.levels < 2) throw ConfigError("--levels: must be >= 2");
      cfg_.levels = *opt_.levels;
    }
    if (opt_.dt_ps) cfg_.gate.dt_ps = *opt_.dt_ps;
    if (opt_.t_gate_ns) cfg_.gate.t_gate_ns = *opt_.t_gate_ns;
    if (opt_.frame) cfg_.gate.frame = frame_from_string(*opt_.frame);
    if (opt_.t1_us) {
      if (!cfg_.circuit) throw ConfigError("--t1-us: needs a circuit");
      for (std::size_t q : cfg_.circuit->qubit_modes()) cfg_.gate.t1_us[cfg_.circuit->modes()[q].name] = *opt_.t1_us;
    }
    if (cfg_.regime) cfg_.regime->search.threads = opt_.threads;
  }

  json header() const {
    return {{"command", opt_.command}, {"version", kVersion}, {"seed", cfg_.seed}, {"config", cfg_.resolved()}};
  }

  void finish(json body) {
    json report = header();
    for (auto it = body.begin(); it != body.end(); ++it) report[it.key()] = it.value();
    write_json(opt_.out / "report.json", report);
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::ostringstream ts;
    ts << std::put_time(std::gmtime(&tt), "%Y-%m-%dT%H:%M:%SZ");
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    write_json(opt_.out / "metadata.json",
               {{"command", opt_.command}, {"finished_utc", ts.str()}, {"elapsed_s", elapsed}, {"threads", opt_.threads}});
  }

  CircuitSpec circuit() const { return cfg_.resolved_circuit(); }

  // --- build -------------------------------------------------------------
  json build() {
    const CircuitSpec spec = circuit();
    write_json(opt_.out / "circuit.json", circuit_to_json(spec));
    const auto basis = make_basis(spec, cfg_.shifts.assembly);
    json out = {{"dimension", basis.size()}, {"product_dimension", spec.dimension()}, {"warnings", spec.warnings()}};
    const Eigen::MatrixXd h = assemble_hamiltonian(spec, cfg_.shifts.assembly);
    out["hermiticity_error"] = hermiticity_error(h);
    const auto eig = diagonalize(spec, cfg_.shifts.assembly);
    const auto spectrum = labeled_spectrum(eig, computational_labels(spec), cfg_.shifts.overlap_threshold);
    const BasisLabel ground(spec.num_modes(), 0);
    json levels = json::array();
    for (const auto& l : spectrum.labels()) {
      levels.push_back({{"label", label_text(l)},
                        {"energy_ghz", spectrum.energy(l) - spectrum.energy(ground)},
                        {"overlap", spectrum.overlap(l)}});
    }
    out["computational_levels"] = levels;
    out["min_overlap"] = spectrum.min_overlap();
    log_ << "build: dimension " << basis.size() << ", hermiticity error " << out["hermiticity_error"].get<double>()
         << "\n";
    return out;
  }

  // --- reduce ------------------------------------------------------------
  json reduce() {
    const CircuitSpec cell = circuit();
    const auto report = sw_validity_report(cell, cfg_.reduce);
    json out;
    out["lambda_edge"] = report.lambda_edge;
    out["lambda_center"] = report.lambda_center;
    out["commutator_error_mhz"] = report.commutator_error_mhz;
    out["max_counter_rotating_mhz"] = report.max_counter_rotating_mhz;
    out["dispersive_bound"] = report.dispersive_bound;
    out["within_bound"] = report.within_bound;
    out["spectral_budget_mhz"] = report.spectral_budget_mhz;
    out["flags"] = report.flags;
    if (report.spectrum) {
      json rows = json::array();
      for (std::size_t k = 0; k < report.spectrum->labels.size(); ++k) {
        rows.push_back({{"label", label_text(report.spectrum->labels[k])},
                        {"full_mhz", report.spectrum->full_mhz[k]},
                        {"reduced_mhz", report.spectrum->reduced_mhz[k]}});
      }
      out["spectrum"] = {{"max_deviation_mhz", report.spectrum->max_deviation_mhz},
                         {"max_excitations", report.spectrum->max_excitations},
                         {"levels", rows}};
    }
    if (report.within_bound) {
      const DressedSpec dressed = reduce_unit_cell(cell, cfg_.reduce.sw);
      json provenance = json::array();
      for (auto p : dressed.provenance)
        provenance.push_back(p == Elimination::kEdgeCouplers ? "edge-couplers"
                             : p == Elimination::kCentralCoupler ? "central-coupler"
                                                                 : "generic");
      json dropped = json::array();
      for (const auto& d : dressed.dropped)
        dropped.push_back({{"term", d.description}, {"a", d.a}, {"b", d.b}, {"strength_mhz", d.strength * 1e3}});
      json reduced = circuit_to_json(dressed.circuit);
      reduced["provenance"] = provenance;
      reduced["dropped"] = dropped;
      write_json(opt_.out / "reduced.json", reduced);
      write_json(opt_.out / "effective.json", circuit_to_json(dressed.qubit_model()));
      out["provenance"] = provenance;
    }
    log_ << "reduce: lambda_edge " << report.lambda_edge << ", lambda_center " << report.lambda_center << ", eps "
         << report.commutator_error_mhz << " MHz\n";
    return out;
  }

  // --- shifts ------------------------------------------------------------
  json shift_body(const CircuitSpec& spec, const fs::path& dir, const std::optional<fs::path>& golden) {
    const ShiftTable table = shift_table(spec, cfg_.shifts);
    {
      std::ostringstream csv;
      write_shift_csv(csv, table);
      write_text(dir / "shifts.csv", csv.str());
    }
    json rows = json::array();
    for (const auto& e : table.entries())
      rows.push_back({{"subset", table.key(e.subset)}, {"chi_bare_mhz", e.chi_bare_mhz}, {"chi_full_mhz", e.chi_full_mhz}});
    json out = {{"method", table.method()},
                {"modes", table.mode_names()},
                {"table", rows},
                {"recursion_residual_mhz", recursion_residual(table)}};
    if (golden) {
      std::ifstream in(*golden);
      if (!in) throw ConfigError("--golden: cannot open '" + golden->string() + "'");
      const auto gold = read_shift_csv(in);
      double worst = 0.0;
      json cmp = json::array();
      for (const auto& g : gold) {
        const auto& e = table.at(table.parse_key(g.subset));
        const double diff = e.chi_full_mhz - g.chi_full_mhz;
        worst = std::max(worst, std::abs(diff));
        cmp.push_back({{"subset", g.subset}, {"computed_mhz", e.chi_full_mhz}, {"golden_mhz", g.chi_full_mhz}, {"diff_mhz", diff}});
      }
      out["golden"] = {{"rows", cmp}, {"max_abs_diff_mhz", worst}, {"tolerance_mhz", 0.1}, {"pass", worst <= 0.1}};
    }
    return out;
  }

  json shifts() {
    const json out = shift_body(circuit(), opt_.out, opt_.golden);
    log_ << "shifts: " << out["table"].size() << " subsets written to " << (opt_.out / "shifts.csv").string() << "\n";
    return out;
  }

  // --- search ------------------------------------------------------------
  json search() {
    if (!cfg_.regime) throw ConfigError("regime: missing required section");
    auto rc = *cfg_.regime;
    rc.search.shifts = cfg_.shifts;
    const CircuitSpec base = circuit();
    const auto result = regime_search(base, rc.target, cfg_.seed, rc.search);

    std::ostringstream csv;
    csv << "index,stage,feasible,objective";
    for (const auto& b : rc.target.bounds) csv << ',' << b.a << (b.b.empty() ? "" : "-" + b.b);
    csv << '\n';
    for (std::size_t k = 0; k < result.candidates.size(); ++k) {
      const auto& c = result.candidates[k];
      csv << k << ',' << c.stage << ',' << (c.feasible ? 1 : 0) << ',' << fmt(c.objective);
      for (double p : c.params) csv << ',' << fmt(p);
      csv << '\n';
    }
    write_text(opt_.out / "candidates.csv", csv.str());
    write_json(opt_.out / "best_circuit.json", circuit_to_json(result.spec));
    {
      std::ostringstream t;
      write_shift_csv(t, result.table);
      write_text(opt_.out / "shifts.csv", t.str());
    }
    json rows = json::array();
    for (const auto& e : result.table.entries())
      rows.push_back({{"subset", result.table.key(e.subset)}, {"chi_full_mhz", e.chi_full_mhz}});
    json params = json::array();
    for (std::size_t k = 0; k < rc.target.bounds.size(); ++k) {
      const auto& b = rc.target.bounds[k];
      params.push_back({{"a", b.a}, {"b", b.b}, {"value", result.params[k]}, {"lo", b.lo}, {"hi", b.hi}});
    }
    log_ << "search: objective " << result.objective << ", verdict " << (result.verdict.pass ? "pass" : "fail") << "\n";
    return {{"objective", result.objective},
            {"params", params},
            {"table", rows},
            {"verdict",
             {{"pass", result.verdict.pass},
              {"worst_pair_deviation", result.verdict.worst_pair_deviation},
              {"worst_unwanted_mhz", result.verdict.worst_unwanted_mhz},
              {"worst_unwanted_subset", result.verdict.worst_unwanted_subset}}},
            {"evaluated", result.candidates.size()}};
  }

  // --- evolve ------------------------------------------------------------
  GateOptions gate_options() const {
    GateOptions go;
    go.drives = cfg_.gate.drives;
    go.t_gate_ns = cfg_.gate.t_gate_ns;
    go.parity = cfg_.gate.parity;
    go.ideal = cfg_.gate.ideal;
    go.propagation.frame = cfg_.gate.frame;
    go.propagation.dt_ps = cfg_.gate.dt_ps;
    go.propagation.threads = opt_.threads;
    go.propagation.trace_stride = opt_.trace_stride;
    go.assembly = cfg_.shifts.assembly;
    go.seed = cfg_.seed;
    return go;
  }

  json evolve_body(const fs::path& dir) {
    const CircuitSpec spec = circuit();
    const DressedSystem system = dressed_system(spec, cfg_.shifts.assembly);
    const GateOptions go = gate_options();
    const GateResult r = run_gate(system, go);
    const auto labels = computational_labels(spec);

    std::ostringstream mag;
    mag << "row\\col";
    for (const auto& l : labels) mag << ',' << label_text(l);
    mag << '\n';
    for (Eigen::Index i = 0; i < r.projected.rows(); ++i) {
      mag << label_text(labels[static_cast<std::size_t>(i)]);
      for (Eigen::Index j = 0; j < r.projected.cols(); ++j) mag << ',' << fmt(std::abs(r.projected(i, j)));
      mag << '\n';
    }
    write_text(dir / "unitary_abs.csv", mag.str());

    std::ostringstream leak;
    leak << "input,leakage\n";
    for (std::size_t k = 0; k < r.leakage_per_column.size(); ++k)
      leak << label_text(labels[k]) << ',' << fmt(r.leakage_per_column[k]) << '\n';
    write_text(dir / "leakage.csv", leak.str());

    if (!r.traces.empty()) {
      std::ostringstream tr;
      tr << "t_ns,input";
      for (const auto& l : labels) tr << ",p" << label_text(l);
      tr << ",leakage\n";
      for (const auto& s : r.traces) {
        tr << fmt(s.t_ns) << ',' << label_text(labels[s.input]);
        for (double p : s.populations) tr << ',' << fmt(p);
        tr << '\n';
      }
      write_text(dir / "traces.csv", tr.str());
    }

    json out = {{"fidelity_raw", r.fidelity_raw},
                {"fidelity_corrected", r.fidelity_corrected},
                {"fidelity_diagonal_corrected", r.fidelity_diagonal},
                {"leakage", r.leakage},
                {"in_subspace_error", r.in_subspace_error},
                {"phases", {{"local", r.local_phases}, {"global", r.global_phase}}},
                {"t_gate_ns", r.t_gate_ns},
                {"dt_ps", r.dt_ns * 1e3},
                {"steps", r.steps},
                {"frame", to_string(cfg_.gate.frame)},
                {"omega_ref_ghz", r.omega_ref},
                {"unitarity_error", r.unitarity_error},
                {"ideal", cfg_.gate.ideal == IdealKind::kParity ? "parity" : "identity"},
                {"parity", to_string(cfg_.gate.parity)}};

    if (!cfg_.gate.t1_us.empty()) {
      DecoherenceOptions d;
      d.t1_us = cfg_.gate.t1_us;
      d.dt_ps = cfg_.gate.decoherence_dt_ps;
      const auto dr = decohered_fidelity(system, go.drives, go.t_gate_ns, go.parity, d);
      out["decoherence"] = {{"fidelity", dr.fidelity},
                            {"coherent_fidelity", dr.coherent_fidelity},
                            {"deficit", dr.deficit},
                            {"max_trace_error", dr.max_trace_error},
                            {"min_population", dr.min_population},
                            {"dt_ps", dr.dt_ns * 1e3}};
    }
    log_ << "evolve: fidelity_corrected " << r.fidelity_corrected << ", leakage " << r.leakage << "\n";
    return out;
  }

  json evolve() { return evolve_body(opt_.out); }

  // --- lattice -----------------------------------------------------------
  json lattice() {
    if (!cfg_.lattice) throw ConfigError("lattice: missing required section");
    const auto rep = lattice_detuning_check(*cfg_.lattice, cfg_.min_detuning_mhz);
    json cells = json::array();
    for (const auto& c : rep.cell_minimum) cells.push_back({{"a", c.a}, {"b", c.b}, {"detuning_mhz", c.detuning_mhz}});
    log_ << "lattice-check: global minimum " << rep.global_minimum.detuning_mhz << " MHz (" << rep.global_minimum.a
         << ", " << rep.global_minimum.b << "), " << (rep.pass ? "pass" : "fail") << "\n";
    return {{"global_minimum",
             {{"a", rep.global_minimum.a}, {"b", rep.global_minimum.b}, {"detuning_mhz", rep.global_minimum.detuning_mhz}}},
            {"cell_minimum", cells},
            {"threshold_mhz", rep.threshold_mhz},
            {"pass", rep.pass}};
  }

  // --- compare -----------------------------------------------------------
  json compare_body(const fs::path& dir, std::optional<double> single_shot) {
    const double f = opt_.f_cnot.value_or(0.985);
    std::vector<int> counts = opt_.n_cnots ? std::vector<int>{*opt_.n_cnots} : std::vector<int>{2, 4};
    if (!single_shot) {
      if (opt_.gate_report) {
        const json g = read_json_file(*opt_.gate_report);
        if (!g.contains("fidelity_corrected")) throw ConfigError("--gate-report: no fidelity_corrected field");
        single_shot = g["fidelity_corrected"].get<double>();
      } else if (cfg_.circuit && !cfg_.gate.drives.empty()) {
        single_shot = run_gate(circuit(), gate_options()).fidelity_corrected;
      }
    }
    std::ostringstream csv;
    csv << "method,n_cnots,f_cnot,fidelity\n";
    json rows = json::array();
    for (int n : counts) {
      const double v = cnot_chain_fidelity(n, f);
      csv << "cnot-chain," << n << ',' << fmt(f) << ',' << fmt(v) << '\n';
      rows.push_back({{"method", "cnot-chain"}, {"n_cnots", n}, {"f_cnot", f}, {"fidelity", v}});
    }
    if (single_shot) {
      csv << "single-shot,,," << fmt(*single_shot) << '\n';
      rows.push_back({{"method", "single-shot"}, {"fidelity", *single_shot}});
    }
    write_text(dir / "comparison.csv", csv.str());
    for (const auto& r : rows) log_ << "compare: " << r.dump() << "\n";
    return {{"comparison", rows}};
  }

  json compare() { return compare_body(opt_.out, std::nullopt); }

  // --- repro-table1 ------------------------------------------------------
  json repro() {
    if (cfg_.gate.t1_us.empty() && cfg_.circuit) {
      for (std::size_t q : cfg_.circuit->qubit_modes()) cfg_.gate.t1_us[cfg_.circuit->modes()[q].name] = 100.0;
    }
    std::optional<fs::path> golden = opt_.golden;
    if (!golden && fs::exists(data_dir() / "table1_shifts_reference.csv")) golden = data_dir() / "table1_shifts_reference.csv";
    json out;
    out["shifts"] = shift_body(circuit(), opt_.out, golden);
    out["gate"] = evolve_body(opt_.out);
    out["compare"] = compare_body(opt_.out, out["gate"]["fidelity_corrected"].get<double>())["comparison"];
    return out;
  }

  const Options& opt_;
  std::ostream& log_;
  RunConfig cfg_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace

int execute(const Options& options, std::ostream& log, std::ostream& err) {
  try {
    Run run(options, log);
    return run.dispatch();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    switch (e.kind()) {
      case ErrorKind::kConfig: return kExitConfig;
      case ErrorKind::kRegime: return kExitRegime;
      case ErrorKind::kNumerical: return kExitNumerical;
    }
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::out_of_range& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitNumerical;
}

}  // namespace dispar::cli
