#pragma once

// n-body dispersive shifts.
//
// For a subset S of qubit modes the bare shift is the alternating sum
//   chi_bare(S) = E(S excited) - sum_{i in S} E(i excited) + (|S| - 1) E(ground)
// and the full shift removes every lower-order contribution:
//   chi_full(S) = chi_bare(S) - sum_{T strict subset of S, |T| >= 2} chi_full(T).
// Energies come either from exact diagonalization or from numeric
// Rayleigh-Schrodinger perturbation theory. Shifts are reported in MHz.

#include <cstddef>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "dispar/fockspace.hpp"

namespace dispar {

/// Energies of a set of bare labels, each tied to one eigenvector.
class LabeledSpectrum {
 public:
  LabeledSpectrum() = default;
  LabeledSpectrum(std::vector<BasisLabel> labels, std::vector<double> energies, std::vector<double> overlaps);

  const std::vector<BasisLabel>& labels() const { return labels_; }
  bool contains(const BasisLabel& label) const { return lookup_.count(label) > 0; }
  /// GHz. Throws ConfigError for a label that was not requested.
  double energy(const BasisLabel& label) const;
  /// |<label|eigenvector>|^2 of the assigned eigenvector.
  double overlap(const BasisLabel& label) const;
  double min_overlap() const;

 private:
  std::size_t slot(const BasisLabel& label) const;

  std::vector<BasisLabel> labels_;
  std::vector<double> energies_;
  std::vector<double> overlaps_;
  std::map<BasisLabel, std::size_t> lookup_;
};

/// Labels with every qubit (data/ancilla) mode in {0,1} and couplers in |0>,
/// in row-major order.
std::vector<BasisLabel> computational_labels(const CircuitSpec& spec);

/// Greedy assignment: candidate (label, eigenvector) pairs are taken in order
/// of descending overlap, each label and eigenvector used once. Throws
/// RegimeError naming the worst label if any overlap falls below threshold.
LabeledSpectrum labeled_spectrum(const Eigensystem& system, const std::vector<BasisLabel>& labels,
                                 double threshold = 0.5);

/// Subset of qubit modes, given as positions into CircuitSpec::qubit_modes().
using Subset = std::vector<std::size_t>;

double bare_shift(const LabeledSpectrum& spectrum, const CircuitSpec& spec, const Subset& subset);

struct ShiftEntry {
  Subset subset;
  double chi_bare_mhz = 0.0;
  double chi_full_mhz = 0.0;
};

class ShiftTable {
 public:
  ShiftTable() = default;
  ShiftTable(std::vector<std::string> mode_names, std::string method);

  const std::string& method() const { return method_; }
  const std::vector<std::string>& mode_names() const { return names_; }
  const std::vector<ShiftEntry>& entries() const { return entries_; }

  bool contains(const Subset& subset) const { return index_.count(subset) > 0; }
  const ShiftEntry& at(const Subset& subset) const;
  /// Inserts or replaces. The subset is sorted first.
  void set(Subset subset, double chi_bare_mhz, double chi_full_mhz);

  /// 1-based digits ("12", "134") for up to nine modes, names joined by '+' otherwise.
  std::string key(const Subset& subset) const;
  Subset parse_key(const std::string& key) const;

 private:
  std::vector<std::string> names_;
  std::string method_;
  std::vector<ShiftEntry> entries_;
  std::map<Subset, std::size_t> index_;
};

/// chi_full(S) from chi_bare(S) and the table's strict subsets. Throws
/// ConfigError when a prerequisite subset is missing.
double full_shift(const ShiftTable& table, const Subset& subset, double chi_bare_mhz);

/// All subsets of size >= 2, ordered by size then lexicographically.
std::vector<Subset> shift_subsets(std::size_t num_qubits);

enum class ShiftMethod { kExact, kPerturbative };

struct ShiftOptions {
  ShiftMethod method = ShiftMethod::kExact;
  int pt_order = 2;
  AssemblyOptions assembly;
  double overlap_threshold = 0.5;
  double pt_guard = 0.010;  // GHz
};

ShiftTable shift_table(const CircuitSpec& spec, const ShiftOptions& options = {});
/// Same table built from an already labeled spectrum.
ShiftTable shift_table(const CircuitSpec& spec, const LabeledSpectrum& spectrum, const std::string& method);

/// Largest |chi_full(S) + sum_{T} chi_full(T) - chi_bare(S)| over the table, MHz.
double recursion_residual(const ShiftTable& table);

struct PtOptions {
  int order = 2;
  double guard = 0.010;  // GHz, smallest admissible energy denominator
  AssemblyOptions assembly;
};

/// Non-degenerate Rayleigh-Schrodinger energies up to options.order with the
/// interaction as perturbation. A denominator below the guard that multiplies a
/// nonzero amplitude raises RegimeError naming both labels.
LabeledSpectrum pt_energies(const CircuitSpec& spec, const std::vector<BasisLabel>& labels,
                            const PtOptions& options = {});

/// Closed-form second-order ZZ between modes i and j, MHz:
///   -4g^2/(a_i+a_j+S) + 2g^2/(a_i+S) - 2g^2/(a_i+D) + 2g^2/(a_j+S) - 2g^2/(a_j-D)
/// with D = w_i - w_j and S = w_i + w_j. The g^2/D and g^2/S terms of the
/// individual energies cancel pairwise and are omitted.
double pairwise_shift_second_order(const CircuitSpec& spec, std::size_t i, std::size_t j);

struct ShiftCsvRow {
  std::string subset;
  double chi_bare_mhz = 0.0;
  double chi_full_mhz = 0.0;
  std::string method;
};

void write_shift_csv(std::ostream& out, const ShiftTable& table);
std::vector<ShiftCsvRow> read_shift_csv(std::istream& in);

}  // namespace dispar
