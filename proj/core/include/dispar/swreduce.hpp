#pragma once

// Schrieffer-Wolff elimination of tunable couplers.
//
// A unit cell is four data qubits on a ring, one edge coupler between each
// neighbouring pair, and a central coupler attached to every data qubit and to
// the ancilla. Elimination happens in two stages: edge couplers first, then the
// central coupler. Each stage maps (frequencies, couplings) to dressed values
// in closed form, to second order in g/Delta.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "dispar/fockspace.hpp"

namespace dispar {

/// Topology of a validated unit cell, as mode indices into the CircuitSpec.
struct UnitCellLayout {
  std::array<std::size_t, 4> qubits{};         // ring order q1..q4
  std::array<std::size_t, 4> edge_couplers{};  // c_i joins q_i and q_{i+1 mod 4}
  std::size_t ancilla = 0;
  std::size_t central = 0;
};

/// Checks the wiring (indices modulo 4) and returns the layout. Throws
/// ConfigError naming the first violated rule.
UnitCellLayout unit_cell_layout(const CircuitSpec& cell);

/// Coupling that was produced by an elimination but is not part of the
/// reduced model (coupler-coupler exchange, counter-rotating c c + c^dag c^dag).
struct DroppedTerm {
  std::string description;
  std::string a;
  std::string b;
  double strength = 0.0;  // GHz
};

enum class Elimination { kEdgeCouplers, kCentralCoupler, kGeneric };

/// Circuit after one or both eliminations. Eliminated couplers stay in the
/// mode list as spectators but have no edges.
struct DressedSpec {
  CircuitSpec circuit;
  std::vector<Elimination> provenance;
  std::vector<DroppedTerm> dropped;
  std::vector<std::string> flags;  // e.g. "unvalidated topology"

  bool first_dressed() const;
  bool second_dressed() const;
  /// Data qubits and ancilla with their couplings; spectator couplers removed.
  CircuitSpec qubit_model() const;
};

struct SwOptions {
  double dispersive_bound = 0.15;   // max |g / Delta|
  double min_detuning = 1e-3;       // GHz; refuse |Delta| below this
};

/// First stage: removes the four edge couplers.
DressedSpec eliminate_edge_couplers(const CircuitSpec& cell, const SwOptions& options = {});

/// Second stage: removes the central coupler. Requires a first-dressed input.
DressedSpec eliminate_central_coupler(const DressedSpec& dressed, const SwOptions& options = {});

/// Both stages back to back.
DressedSpec reduce_unit_cell(const CircuitSpec& cell, const SwOptions& options = {});

/// Same pairwise formulas applied to an arbitrary set of couplers of any graph.
/// The result is flagged "unvalidated topology".
DressedSpec eliminate_couplers(const CircuitSpec& spec, const std::vector<std::string>& couplers,
                               const SwOptions& options = {});

struct SpectralComparison {
  std::vector<BasisLabel> labels;       // qubit-sector labels, couplers in |0>
  std::vector<double> full_mhz;         // E(label) - E(ground), full cell
  std::vector<double> reduced_mhz;      // same for the reduced model
  double max_deviation_mhz = 0.0;
  int max_excitations = 4;
};

struct SwValidityReport {
  double lambda_edge = 0.0;       // max |g_{i,ci} / Delta_{i,ci}|
  double lambda_center = 0.0;     // max |g~_{x,c5} / Delta~_{x,c5}|
  double commutator_error_mhz = 0.0;
  double max_counter_rotating_mhz = 0.0;  // largest g^2/Delta of dropped c c terms
  double dispersive_bound = 0.15;
  bool within_bound = true;
  std::vector<std::string> flags;
  std::optional<SpectralComparison> spectrum;
  /// 5 lambda^2 max|Delta| in MHz, with lambda the larger of the two stages.
  double spectral_budget_mhz = 0.0;
};

struct ValidityOptions {
  SwOptions sw;
  bool spectral_check = true;
  int max_excitations = 4;   // global cutoff for the full-cell diagonalization
  int compare_excitations = 2;
};

/// Report only: regime violations are flagged, never thrown.
SwValidityReport sw_validity_report(const CircuitSpec& cell, const ValidityOptions& options = {});

}  // namespace dispar
