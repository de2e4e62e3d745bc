// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "dispar/config.hpp"
#include "dispar/dynamics.hpp"
#include "dispar/regimes.hpp"
#include "dispar/shifts.hpp"
#include "dispar/stabilizers.hpp"
#include "dispar/swreduce.hpp"
#include "support.hpp"

using namespace dispar;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

const std::vector<std::pair<std::string, double>> kReferenceShifts = {
    {"12", -5.005}, {"13", -5.079}, {"14", -5.050}, {"23", 0.030},  {"24", -0.212}, {"34", 0.079},
    {"123", 0.246}, {"124", 0.359}, {"134", 0.072}, {"234", -0.024}, {"1234", 0.002}};

Outcome shift_table_reproduction() {
  const auto t0 = Clock::now();
  const auto table = shift_table(testing::table1());
  const double elapsed = seconds_since(t0);
  double worst = 0.0;
  std::string worst_key, misses;
  for (const auto& [key, reference] : kReferenceShifts) {
    const double diff = std::abs(table.at(table.parse_key(key)).chi_full_mhz - reference);
    if (diff > 0.1) misses += " chi" + key + fmt("=%.3f(reference %.3f)", table.at(table.parse_key(key)).chi_full_mhz, reference);
    if (diff > worst) {
      worst = diff;
      worst_key = key;
    }
  }
  Outcome o;
  o.pass = worst <= 0.1 && elapsed < 10.0;
  o.detail = "max |dchi| " + fmt("%.3f", worst) + " MHz at chi" + worst_key + fmt(", %.2f s", elapsed) + misses;
  return o;
}

GateOptions table1_gate(Frame frame, double dt_ps) {
  const RunConfig cfg = load_config(testing::data_path("table1_config.json"));
  GateOptions g;
  g.drives = cfg.gate.drives;
  g.t_gate_ns = cfg.gate.t_gate_ns;
  g.parity = cfg.gate.parity;
  g.propagation.frame = frame;
  g.propagation.dt_ps = dt_ps;
  return g;
}

Outcome gate_reproduction(const DressedSystem& sys) {
  auto t0 = Clock::now();
  const auto lab = run_gate(sys, table1_gate(Frame::kLab, 1.0));
  const double lab_s = seconds_since(t0);
  t0 = Clock::now();
  const auto rot = run_gate(sys, table1_gate(Frame::kRotating, 500.0));
  const double rot_s = seconds_since(t0);
  const double infidelity = 1.0 - lab.fidelity_corrected;
  Outcome o;
  const bool fid = lab.fidelity_corrected >= 0.995;
  const bool leak = std::abs(lab.leakage - 0.001) <= 0.001;
  const bool total = std::abs(infidelity - 0.002) <= 0.0015;
  const bool frames = std::abs(lab.fidelity_corrected - rot.fidelity_corrected) <= 1e-3;
  const bool time = lab_s < 1800.0 && rot_s < 120.0;
  o.pass = fid && leak && total && frames && time;
  o.detail = fmt("F_corrected %.4f (need >= 0.995), leakage %.4f%% (need 0.1 +- 0.1), infidelity %.2f%% (need 0.2 +- 0.15)",
                 lab.fidelity_corrected, lab.leakage * 100, infidelity * 100) +
             fmt(", F_diag %.4f, F_raw %.4f, rotating F %.4f", lab.fidelity_diagonal, lab.fidelity_raw, rot.fidelity_corrected) +
             fmt(", lab %.1f s, rotating %.1f s", lab_s, rot_s);
  return o;
}

Outcome cnot_baseline() {
  const double f2 = cnot_chain_fidelity(2, 0.985), f4 = cnot_chain_fidelity(4, 0.985);
  Outcome o;
  o.pass = std::abs(f2 - 0.970225) < 1e-12 && std::abs(f4 - 0.941336550625) < 1e-12 && std::round(f2 * 100) == 97 &&
           std::round(f4 * 100) == 94;
  o.detail = fmt("0.985^2 = %.6f, 0.985^4 = %.6f", f2, f4);
  return o;
}

Outcome decoherence(const DressedSystem& sys) {
  const auto t0 = Clock::now();
  DecoherenceOptions opts;
  for (const char* m : {"a", "q2", "q3", "q4"}) opts.t1_us[m] = 100.0;
  const auto r = decohered_fidelity(sys, table1_gate(Frame::kRotating, 500.0).drives, 600.0, Parity::kOdd, opts);
  Outcome o;
  o.pass = std::abs(r.fidelity - 0.992) <= 0.004;
  o.detail = fmt("channel fidelity %.4f (need 0.992 +- 0.004), coherent %.4f, T1 deficit %.4f", r.fidelity,
                 r.coherent_fidelity, r.deficit) +
             fmt(", trace error %.1e, %.1f s", r.max_trace_error, seconds_since(t0));
  return o;
}

Outcome sw_validity() {
  const auto r = sw_validity_report(testing::unit_cell());
  Outcome o;
  const double dev = r.spectrum ? r.spectrum->max_deviation_mhz : INFINITY;
  o.pass = r.within_bound && r.commutator_error_mhz <= 1.0 && dev <= r.spectral_budget_mhz;
  o.detail = fmt("eps %.3f MHz (need <= 1), spectral deviation %.2f MHz within budget %.2f MHz, lambda %.4f",
                 r.commutator_error_mhz, dev, r.spectral_budget_mhz, std::max(r.lambda_edge, r.lambda_center));
  return o;
}

Outcome property_suite(const DressedSystem& sys) {
  std::vector<std::string> failures;
  auto require = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };

  const CircuitSpec t1 = testing::table1();
  require(hermiticity_error(assemble_hamiltonian(t1)) <= 1e-12, "hermiticity four-mode");
  AssemblyOptions cut;
  cut.max_excitations = 3;
  require(hermiticity_error(assemble_hamiltonian(testing::unit_cell(), cut)) <= 1e-12, "hermiticity unit cell");

  const auto coarse = run_gate(sys, table1_gate(Frame::kRotating, 500.0));
  const auto fine = run_gate(sys, table1_gate(Frame::kRotating, 250.0));
  require(coarse.unitarity_error <= 1e-8, "unitarity");
  const double drift = std::abs(coarse.fidelity_corrected - fine.fidelity_corrected);
  require(drift < 1e-4, fmt("dt halving drift %.2e", drift));

  require(recursion_residual(shift_table(t1)) <= 1e-9, "recursion identity four-mode");
  require(recursion_residual(shift_table(reduce_unit_cell(testing::unit_cell()).qubit_model())) <= 1e-9,
          "recursion identity reduced cell");

  const std::vector<BasisLabel> two = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  for (double delta : {0.33, 0.5}) {
    for (double lambda : {0.03, 0.06, 0.1}) {
      const CircuitSpec s = testing::two_mode(5.0, -0.3, 5.0 + delta, -0.2, lambda * delta);
      const auto pt = pt_energies(s, two);
      const double chi_pt = (pt.energy({1, 1}) - pt.energy({1, 0}) - pt.energy({0, 1}) + pt.energy({0, 0})) * 1e3;
      const double closed = pairwise_shift_second_order(s, 0, 1);
      const double exact = testing::oracle_pair_chi(s, 0, 1);
      require(std::abs(chi_pt - closed) <= 1e-6, fmt("PT vs closed form at lambda %.2f", lambda));
      require(std::abs(chi_pt - exact) <= 0.15 * std::abs(exact), fmt("PT vs exact at lambda %.2f", lambda));
      if (2 * lambda <= 0.05) {
        const double doubled = testing::oracle_pair_chi(testing::two_mode(5.0, -0.3, 5.0 + delta, -0.2, 2 * lambda * delta), 0, 1);
        require(std::abs(doubled / exact - 4.0) <= 0.4, fmt("g^2 scaling at lambda %.2f", lambda));
      }
    }
  }

  for (std::size_t n = 1; n <= 5; ++n) {
    std::vector<std::string> reg = {"a"};
    for (std::size_t k = 0; k < n; ++k) reg.push_back("q" + std::to_string(k + 1));
    for (std::size_t split = 0; split <= n; ++split) {
      const std::vector<std::string> a(reg.begin() + 1, reg.begin() + 1 + split), b(reg.begin() + 1 + split, reg.end());
      for (Parity pa : {Parity::kOdd, Parity::kEven})
        for (Parity pb : {Parity::kOdd, Parity::kEven})
          require(concatenated_parity({{a, "a", pa}, {b, "a", pb}}, reg).equal, "XOR concatenation law");
    }
    const Eigen::MatrixXcd u =
        ideal_parity_unitary({std::vector<std::string>(reg.begin() + 1, reg.end()), "a", Parity::kOdd}, reg).cast<std::complex<double>>();
    const std::vector<std::string> h(reg.begin() + 1, reg.end());
    require((x_from_z_transform(x_from_z_transform(u, reg, h), reg, h) - u).cwiseAbs().maxCoeff() < 1e-14,
            "x_from_z involution");
  }

  Outcome o;
  o.pass = failures.empty();
  o.detail = fmt("dt-halving drift %.2e, unitarity %.1e", drift, coarse.unitarity_error);
  for (const auto& f : failures) o.detail += "; failed: " + f;
  return o;
}

Outcome regime_search_recovery() {
  const RunConfig cfg = load_config(testing::data_path("regime_config.json"));
  RegimeSearchOptions opts = cfg.regime->search;
  opts.samples = 512;
  const auto t0 = Clock::now();
  const auto r = regime_search(*cfg.circuit, cfg.regime->target, cfg.seed, opts);
  const double elapsed = seconds_since(t0);
  double lo = 1e9, hi = 0.0;
  for (std::size_t k = 1; k < 4; ++k) {
    const double chi = std::abs(r.table.at({0, k}).chi_full_mhz);
    lo = std::min(lo, chi);
    hi = std::max(hi, chi);
  }
  Outcome o;
  o.pass = r.verdict.pass && lo >= 4.9 && hi <= 5.1 && r.verdict.worst_unwanted_mhz < 0.5 && elapsed < 600.0;
  o.detail = fmt("|chi_pairs| in [%.3f, %.3f] MHz, worst unwanted %.3f MHz, %.1f s", lo, hi, r.verdict.worst_unwanted_mhz,
                 elapsed) +
             " (" + r.verdict.worst_unwanted_subset + ")";
  return o;
}

Outcome lattice() {
  const RunConfig cfg = load_config(testing::data_path("lattice_config.json"));
  const auto r = lattice_detuning_check(*cfg.lattice, 25.0);
  Outcome o;
  o.pass = r.pass && std::abs(r.global_minimum.detuning_mhz - 30.0) < 1e-6;
  o.detail = fmt("global minimum %.1f MHz", r.global_minimum.detuning_mhz) + " (" + r.global_minimum.a + ", " +
             r.global_minimum.b + "), threshold 25 MHz";
  return o;
}

}  // namespace

int main() {
  const DressedSystem sys = dressed_system(testing::table1());
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"shift table reproduction", shift_table_reproduction},
      {"parity gate reproduction", [&] { return gate_reproduction(sys); }},
      {"CNOT baseline", cnot_baseline},
      {"decoherence", [&] { return decoherence(sys); }},
      {"SW validity", sw_validity},
      {"property suite", [&] { return property_suite(sys); }},
      {"regime search", regime_search_recovery},
      {"lattice check", lattice},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << "criterion " << k + 1 << " " << (o.pass ? "PASS" : "FAIL") << " " << criteria[k].first << ": "
              << o.detail << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
