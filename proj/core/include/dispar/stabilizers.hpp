#pragma once

// Ideal parity unitaries on qubit registers and the operations built on them.
//
// Registers are ordered lists of qubit names; basis states are bit strings
// with the first name as the most significant bit.

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dispar {

enum class Parity { kOdd, kEven };

Parity parity_from_string(const std::string& text);
std::string to_string(Parity parity);

struct ParityGateSpec {
  std::vector<std::string> data_modes;
  std::string ancilla;
  Parity parity = Parity::kOdd;
};

/// Permutation flipping the ancilla bit exactly when the data excitation
/// count has the requested parity. Zero data modes are allowed: the empty set
/// is even. Throws ConfigError on unknown or repeated names.
Eigen::MatrixXd ideal_parity_unitary(const ParityGateSpec& spec, const std::vector<std::string>& register_order);

/// (H on each listed mode) U (H on each listed mode).
Eigen::MatrixXcd x_from_z_transform(const Eigen::MatrixXcd& u, const std::vector<std::string>& register_order,
                                    const std::vector<std::string>& hadamard_modes);

/// f_cnot^n_cnots.
double cnot_chain_fidelity(int n_cnots, double f_cnot);

struct ConcatenationResult {
  Eigen::MatrixXd product;
  Eigen::MatrixXd union_gate;   // single gate over all data modes, derived parity
  Parity union_parity = Parity::kOdd;
  double max_deviation = 0.0;   // max |product - union_gate|
  bool equal = false;           // max_deviation <= 1e-12
};

/// Ordered product of the subset gates (first subset applied first). The
/// subsets must share the ancilla and be pairwise disjoint. Flips add mod 2,
/// so the union gate carries odd parity iff an odd number of subsets are even.
ConcatenationResult concatenated_parity(const std::vector<ParityGateSpec>& subsets,
                                        const std::vector<std::string>& register_order);

}  // namespace dispar
