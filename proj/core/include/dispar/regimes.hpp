#pragma once

// Parameter-regime search for equal ancilla-data shifts with suppressed
// higher-order terms, and the frequency-tessellation check for lattices.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dispar/fockspace.hpp"
#include "dispar/shifts.hpp"

namespace dispar {

enum class ParamKind { kFreq, kAnharm, kCoupling };

/// Search box for one parameter. Couplings name both endpoints; mode
/// parameters use `a` only. lo == hi pins the parameter.
struct ParamBound {
  ParamKind kind = ParamKind::kCoupling;
  std::string a;
  std::string b;
  double lo = 0.0;
  double hi = 0.0;
};

struct RegimeTarget {
  /// Mode-name pairs that should sit at target_chi. Empty means every
  /// (ancilla, data) pair of the circuit.
  std::vector<std::vector<std::string>> target_pairs;
  double target_chi_mhz = -5.0;
  double equal_tol = 0.02;  // relative to |target_chi|
  double unwanted_cap_mhz = 0.5;
  double unwanted_weight = 10.0;
  std::vector<ParamBound> bounds;
};

/// Target pairs resolved to subsets of qubit positions; validates that each
/// pair contains the ancilla.
std::vector<Subset> resolve_target_pairs(const CircuitSpec& spec, const RegimeTarget& target);

/// J = sum_pairs (chi - target)^2 + w * sum_unwanted max(0, |chi| - cap)^2.
double regime_objective(const ShiftTable& table, const std::vector<Subset>& pairs, const RegimeTarget& target);
double regime_objective(const CircuitSpec& spec, const RegimeTarget& target, const ShiftOptions& options = {});

struct RegimeVerdict {
  bool pass = false;
  double worst_pair_deviation = 0.0;   // max |chi - target| / |target|
  double worst_unwanted_mhz = 0.0;     // max |chi| over unwanted subsets
  std::string worst_unwanted_subset;
};

RegimeVerdict regime_verdict(const ShiftTable& table, const std::vector<Subset>& pairs, const RegimeTarget& target);

struct Candidate {
  std::vector<double> params;  // physical values, in bounds order
  double objective = 0.0;
  bool feasible = false;
  std::string stage;  // "sample" or "refine"
};

struct RegimeSearchOptions {
  int samples = 512;
  int refine_starts = 4;
  int refine_iterations = 200;
  unsigned threads = 1;
  double dispersive_bound = 0.15;  // |g/Delta| over every edge of a candidate
  ShiftOptions shifts;
};

struct RegimeResult {
  CircuitSpec spec;
  ShiftTable table;
  RegimeVerdict verdict;
  double objective = 0.0;
  std::vector<double> params;
  std::vector<Candidate> candidates;
};

/// Spec with the bounded parameters replaced by `params`.
CircuitSpec apply_params(const CircuitSpec& base, const std::vector<ParamBound>& bounds,
                         const std::vector<double>& params);

/// Halton samples with a seeded Cranley-Patterson shift, then bounded simplex
/// refinement from the best few. Deterministic in (base, target, seed).
/// Throws RegimeError when no sampled candidate is admissible.
RegimeResult regime_search(const CircuitSpec& base, const RegimeTarget& target, std::uint64_t seed,
                           const RegimeSearchOptions& options = {});

/// Radical inverse of `index` in `base`; exposed for testing.
double radical_inverse(std::uint64_t index, unsigned base);

// ---------------------------------------------------------------------------

struct LatticeQubit {
  std::string name;
  Role role = Role::kData;
  double freq = 0.0;    // GHz
  double anharm = 0.0;  // GHz
};

struct LatticeAssignment {
  std::vector<LatticeQubit> qubits;
  std::vector<std::vector<std::string>> cells;  // optional
};

struct PairDetuning {
  std::string a;
  std::string b;
  double detuning_mhz = 0.0;
};

struct LatticeReport {
  std::vector<PairDetuning> cell_minimum;  // one per cell
  PairDetuning global_minimum;
  double threshold_mhz = 25.0;
  bool pass = false;
};

/// Validates names and cells (each cell one ancilla), then scans every pair.
LatticeReport lattice_detuning_check(const LatticeAssignment& lattice, double min_detuning_mhz = 25.0);

}  // namespace dispar
