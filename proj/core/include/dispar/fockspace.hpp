#pragma once

// Truncated multi-mode bosonic Fock spaces and Hamiltonian assembly.
//
// Units: frequencies, anharmonicities and couplings are plain GHz (not
// angular). Basis ordering is row-major with the first listed mode as the most
// significant digit, so |1000> of a four-mode, three-level register is 27.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace dispar {

enum class Role { kData, kAncilla, kCoupler };

std::string_view to_string(Role role);
Role role_from_string(std::string_view text);

struct ModeSpec {
  std::string name;
  Role role = Role::kData;
  double freq = 0.0;    // GHz
  double anharm = 0.0;  // GHz, usually negative
  int levels = 3;
};

struct CouplingEdge {
  std::string a;
  std::string b;
  double g = 0.0;  // GHz
};

using BasisLabel = std::vector<int>;

/// Validated mode list plus coupling graph. Immutable after construction.
class CircuitSpec {
 public:
  CircuitSpec() = default;
  CircuitSpec(std::vector<ModeSpec> modes, std::vector<CouplingEdge> edges);

  const std::vector<ModeSpec>& modes() const { return modes_; }
  const std::vector<CouplingEdge>& edges() const { return edges_; }
  std::size_t num_modes() const { return modes_.size(); }

  std::size_t mode_index(std::string_view name) const;
  bool has_mode(std::string_view name) const;
  const ModeSpec& mode(std::string_view name) const { return modes_[mode_index(name)]; }

  /// Coupling between two modes, zero when no edge exists.
  double coupling(std::string_view a, std::string_view b) const;

  std::vector<int> levels() const;
  /// Product of truncation levels. Saturates at SIZE_MAX instead of wrapping.
  std::size_t dimension() const;

  /// Indices of data and ancilla modes, in listing order.
  std::vector<std::size_t> qubit_modes() const;
  /// Index of the unique ancilla; throws ConfigError unless exactly one exists.
  std::size_t ancilla_index() const;

  /// Non-fatal findings, e.g. positive anharmonicity.
  const std::vector<std::string>& warnings() const { return warnings_; }

  /// Copy with different truncation for every mode.
  CircuitSpec with_levels(int levels) const;
  /// Copy with the listed mode frequencies, anharmonicities or couplings replaced.
  CircuitSpec with_mode(std::size_t index, const ModeSpec& mode) const;
  CircuitSpec with_edges(std::vector<CouplingEdge> edges) const;

 private:
  std::vector<ModeSpec> modes_;
  std::vector<CouplingEdge> edges_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::string> warnings_;
};

/// Enumerated Fock basis, either the full product space or the subset with a
/// bounded total excitation number. Labels keep row-major order either way.
class FockBasis {
 public:
  explicit FockBasis(std::vector<int> levels, std::optional<int> max_excitations = std::nullopt,
                     std::size_t max_dimension = kDefaultMaxDimension);

  static constexpr std::size_t kDefaultMaxDimension = 200000;

  std::size_t size() const { return labels_.size(); }
  std::size_t num_modes() const { return levels_.size(); }
  const std::vector<int>& levels() const { return levels_; }
  std::optional<int> max_excitations() const { return cutoff_; }

  const BasisLabel& label(std::size_t index) const { return labels_.at(index); }
  std::optional<std::size_t> find(const BasisLabel& label) const;
  /// Throws std::out_of_range for labels outside the truncation or cutoff.
  std::size_t index(const BasisLabel& label) const;

 private:
  std::size_t encode(const BasisLabel& label) const;

  std::vector<int> levels_;
  std::optional<int> cutoff_;
  std::vector<BasisLabel> labels_;
  std::unordered_map<std::size_t, std::size_t> lookup_;
};

std::size_t basis_index(const CircuitSpec& spec, const BasisLabel& label);
BasisLabel basis_label(const CircuitSpec& spec, std::size_t index);

/// Which parts of g (x - x^dag)(y - y^dag) to keep.
enum class CouplingTerms {
  kAll,               // exactly as written, counter-rotating parts included
  kRotatingOnly,      // -g (x y^dag + x^dag y); conserves total excitations
  kCounterRotatingOnly,
};

struct AssemblyOptions {
  CouplingTerms terms = CouplingTerms::kAll;
  std::optional<int> max_excitations;
  std::size_t max_dimension = FockBasis::kDefaultMaxDimension;
  /// Dense matrices above this size are refused; use an excitation cutoff.
  std::size_t max_dense_dimension = 8000;
};

/// Annihilation operator of one mode embedded in the full product space.
Eigen::MatrixXd annihilation(const CircuitSpec& spec, std::string_view mode);
/// Same operator on an arbitrary (possibly cut-off) basis, as a sparse matrix.
Eigen::SparseMatrix<double> annihilation(const CircuitSpec& spec, const FockBasis& basis,
                                         std::size_t mode);

/// Bare on-site energies sum_k [w_k n_k + (a_k/2) n_k (n_k - 1)] for each basis state.
Eigen::VectorXd bare_energies(const CircuitSpec& spec, const FockBasis& basis);

/// Interaction part only (all edges), on the given basis.
Eigen::SparseMatrix<double> interaction(const CircuitSpec& spec, const FockBasis& basis,
                                        CouplingTerms terms = CouplingTerms::kAll);

Eigen::SparseMatrix<double> assemble_sparse(const CircuitSpec& spec, const FockBasis& basis,
                                            CouplingTerms terms = CouplingTerms::kAll);

/// Dense Hamiltonian in GHz over the full product space (or the cutoff basis
/// when options.max_excitations is set).
Eigen::MatrixXd assemble_hamiltonian(const CircuitSpec& spec, const AssemblyOptions& options = {});

FockBasis make_basis(const CircuitSpec& spec, const AssemblyOptions& options = {});

/// Relative Frobenius asymmetry ||H - H^T|| / ||H||.
double hermiticity_error(const Eigen::MatrixXd& h);

/// Exact eigendecomposition of an assembled Hamiltonian.
struct Eigensystem {
  FockBasis basis;
  Eigen::VectorXd energies;  // ascending, GHz
  Eigen::MatrixXd vectors;   // columns are eigenvectors in the Fock basis
};

Eigensystem diagonalize(const CircuitSpec& spec, const AssemblyOptions& options = {});

/// Greedy max-overlap assignment of every basis label to a distinct
/// eigenvector. Entry k is the eigenvector index assigned to basis label k.
std::vector<std::size_t> assign_labels(const Eigensystem& system);

}  // namespace dispar
