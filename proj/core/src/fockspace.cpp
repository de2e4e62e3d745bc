#include "dispar/fockspace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "dispar/errors.hpp"

namespace dispar {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::kData: return "data";
    case Role::kAncilla: return "ancilla";
    case Role::kCoupler: return "coupler";
  }
  return "data";
}

Role role_from_string(std::string_view text) {
  if (text == "data") return Role::kData;
  if (text == "ancilla") return Role::kAncilla;
  if (text == "coupler") return Role::kCoupler;
  throw ConfigError("unknown mode role '" + std::string(text) + "' (expected data, ancilla or coupler)");
}

CircuitSpec::CircuitSpec(std::vector<ModeSpec> modes, std::vector<CouplingEdge> edges)
    : modes_(std::move(modes)), edges_(std::move(edges)) {
  if (modes_.empty()) throw ConfigError("circuit has no modes");
  for (std::size_t i = 0; i < modes_.size(); ++i) {
    const auto& m = modes_[i];
    const std::string where = "modes[" + std::to_string(i) + "]";
    if (m.name.empty()) throw ConfigError(where + ".name is empty");
    if (!index_.emplace(m.name, i).second) throw ConfigError(where + ".name '" + m.name + "' is not unique");
    if (m.levels < 2) throw ConfigError(where + ".levels must be >= 2");
    if (!(m.freq > 0.0) || !std::isfinite(m.freq)) throw ConfigError(where + ".freq must be positive");
    if (!std::isfinite(m.anharm)) throw ConfigError(where + ".anharm must be finite");
    if (m.anharm > 0.0) warnings_.push_back(m.name + ": positive anharmonicity " + std::to_string(m.anharm));
  }
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const auto& edge = edges_[e];
    const std::string where = "edges[" + std::to_string(e) + "]";
    auto ia = index_.find(edge.a);
    auto ib = index_.find(edge.b);
    if (ia == index_.end()) throw ConfigError(where + ".a references unknown mode '" + edge.a + "'");
    if (ib == index_.end()) throw ConfigError(where + ".b references unknown mode '" + edge.b + "'");
    if (ia->second == ib->second) throw ConfigError(where + " couples '" + edge.a + "' to itself");
    if (!std::isfinite(edge.g)) throw ConfigError(where + ".g must be finite");
    auto key = std::minmax(ia->second, ib->second);
    if (!seen.insert(key).second)
      throw ConfigError(where + " duplicates the coupling " + edge.a + "-" + edge.b);
  }
}

std::size_t CircuitSpec::mode_index(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ConfigError("unknown mode '" + std::string(name) + "'");
  return it->second;
}

bool CircuitSpec::has_mode(std::string_view name) const { return index_.count(std::string(name)) > 0; }

double CircuitSpec::coupling(std::string_view a, std::string_view b) const {
  for (const auto& e : edges_) {
    if ((e.a == a && e.b == b) || (e.a == b && e.b == a)) return e.g;
  }
  return 0.0;
}

std::vector<int> CircuitSpec::levels() const {
  std::vector<int> out;
  out.reserve(modes_.size());
  for (const auto& m : modes_) out.push_back(m.levels);
  return out;
}

std::size_t CircuitSpec::dimension() const {
  std::size_t d = 1;
  for (const auto& m : modes_) {
    const auto l = static_cast<std::size_t>(m.levels);
    if (d > std::numeric_limits<std::size_t>::max() / l) return std::numeric_limits<std::size_t>::max();
    d *= l;
  }
  return d;
}

std::vector<std::size_t> CircuitSpec::qubit_modes() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < modes_.size(); ++i)
    if (modes_[i].role != Role::kCoupler) out.push_back(i);
  return out;
}

std::size_t CircuitSpec::ancilla_index() const {
  std::optional<std::size_t> found;
  for (std::size_t i = 0; i < modes_.size(); ++i) {
    if (modes_[i].role != Role::kAncilla) continue;
    if (found) throw ConfigError("circuit has more than one ancilla");
    found = i;
  }
  if (!found) throw ConfigError("circuit has no ancilla");
  return *found;
}

CircuitSpec CircuitSpec::with_levels(int levels) const {
  auto modes = modes_;
  for (auto& m : modes) m.levels = levels;
  return CircuitSpec(std::move(modes), edges_);
}

CircuitSpec CircuitSpec::with_mode(std::size_t index, const ModeSpec& mode) const {
  auto modes = modes_;
  modes.at(index) = mode;
  return CircuitSpec(std::move(modes), edges_);
}

CircuitSpec CircuitSpec::with_edges(std::vector<CouplingEdge> edges) const {
  return CircuitSpec(modes_, std::move(edges));
}

// ---------------------------------------------------------------------------

FockBasis::FockBasis(std::vector<int> levels, std::optional<int> max_excitations, std::size_t max_dimension)
    : levels_(std::move(levels)), cutoff_(max_excitations) {
  if (levels_.empty()) throw std::invalid_argument("FockBasis needs at least one mode");
  std::size_t full = 1;
  for (int l : levels_) {
    if (l < 2) throw std::invalid_argument("FockBasis levels must be >= 2");
    const auto ul = static_cast<std::size_t>(l);
    full = (full > std::numeric_limits<std::size_t>::max() / ul) ? std::numeric_limits<std::size_t>::max()
                                                                  : full * ul;
  }
  if (!cutoff_ && full > max_dimension) {
    std::ostringstream msg;
    msg << "Hilbert space dimension " << full << " exceeds the cap of " << max_dimension
        << " basis states; lower the truncation or set an excitation cutoff";
    throw NumericalError(msg.str());
  }

  // Odometer enumeration in row-major order (last mode fastest).
  BasisLabel current(levels_.size(), 0);
  int total = 0;
  while (true) {
    if (!cutoff_ || total <= *cutoff_) {
      lookup_.emplace(encode(current), labels_.size());
      labels_.push_back(current);
      if (labels_.size() > max_dimension) {
        throw NumericalError("truncated basis exceeds the cap of " + std::to_string(max_dimension) +
                             " basis states");
      }
    }
    std::size_t k = levels_.size();
    while (k > 0) {
      --k;
      if (current[k] + 1 < levels_[k]) {
        ++current[k];
        ++total;
        break;
      }
      total -= current[k];
      current[k] = 0;
      if (k == 0) return;
    }
  }
}

std::size_t FockBasis::encode(const BasisLabel& label) const {
  std::size_t key = 0;
  for (std::size_t k = 0; k < levels_.size(); ++k) key = key * static_cast<std::size_t>(levels_[k]) + label[k];
  return key;
}

std::optional<std::size_t> FockBasis::find(const BasisLabel& label) const {
  if (label.size() != levels_.size()) return std::nullopt;
  int total = 0;
  for (std::size_t k = 0; k < levels_.size(); ++k) {
    if (label[k] < 0 || label[k] >= levels_[k]) return std::nullopt;
    total += label[k];
  }
  if (cutoff_ && total > *cutoff_) return std::nullopt;
  auto it = lookup_.find(encode(label));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

std::size_t FockBasis::index(const BasisLabel& label) const {
  if (label.size() != levels_.size()) {
    throw std::out_of_range("basis label has " + std::to_string(label.size()) + " occupations, expected " +
                            std::to_string(levels_.size()));
  }
  for (std::size_t k = 0; k < levels_.size(); ++k) {
    if (label[k] < 0 || label[k] >= levels_[k]) {
      throw std::out_of_range("occupation " + std::to_string(label[k]) + " of mode " + std::to_string(k) +
                              " is outside its " + std::to_string(levels_[k]) + " levels");
    }
  }
  auto found = find(label);
  if (!found) throw std::out_of_range("basis label lies above the excitation cutoff");
  return *found;
}

std::size_t basis_index(const CircuitSpec& spec, const BasisLabel& label) {
  const auto levels = spec.levels();
  if (label.size() != levels.size()) throw std::out_of_range("basis label size does not match the mode count");
  std::size_t index = 0;
  for (std::size_t k = 0; k < levels.size(); ++k) {
    if (label[k] < 0 || label[k] >= levels[k]) {
      throw std::out_of_range("occupation " + std::to_string(label[k]) + " of mode '" + spec.modes()[k].name +
                              "' is outside its " + std::to_string(levels[k]) + " levels");
    }
    index = index * static_cast<std::size_t>(levels[k]) + static_cast<std::size_t>(label[k]);
  }
  return index;
}

BasisLabel basis_label(const CircuitSpec& spec, std::size_t index) {
  const auto levels = spec.levels();
  if (index >= spec.dimension()) throw std::out_of_range("basis index beyond the Hilbert dimension");
  BasisLabel label(levels.size(), 0);
  for (std::size_t k = levels.size(); k-- > 0;) {
    label[k] = static_cast<int>(index % static_cast<std::size_t>(levels[k]));
    index /= static_cast<std::size_t>(levels[k]);
  }
  return label;
}

// ---------------------------------------------------------------------------

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

void add_edge_terms(const FockBasis& basis, std::size_t i, std::size_t j, double g, CouplingTerms terms,
                    Triplets& out) {
  const bool rotating = terms != CouplingTerms::kCounterRotatingOnly;
  const bool counter = terms != CouplingTerms::kRotatingOnly;
  BasisLabel target;
  for (std::size_t s = 0; s < basis.size(); ++s) {
    const BasisLabel& n = basis.label(s);
    const double ni = n[i];
    const double nj = n[j];
    auto emit = [&](int di, int dj, double amp) {
      if (amp == 0.0) return;
      target = n;
      target[i] += di;
      target[j] += dj;
      if (auto t = basis.find(target)) out.emplace_back(static_cast<int>(*t), static_cast<int>(s), amp);
    };
    // g (x - x^dag)(y - y^dag) = g [x y - x y^dag - x^dag y + x^dag y^dag]
    if (counter) {
      emit(-1, -1, g * std::sqrt(ni * nj));
      emit(+1, +1, g * std::sqrt((ni + 1.0) * (nj + 1.0)));
    }
    if (rotating) {
      emit(-1, +1, -g * std::sqrt(ni * (nj + 1.0)));
      emit(+1, -1, -g * std::sqrt((ni + 1.0) * nj));
    }
  }
}

}  // namespace

Eigen::SparseMatrix<double> annihilation(const CircuitSpec& spec, const FockBasis& basis, std::size_t mode) {
  if (mode >= basis.num_modes()) throw std::out_of_range("mode index out of range");
  (void)spec;
  Triplets t;
  BasisLabel lowered;
  for (std::size_t s = 0; s < basis.size(); ++s) {
    const BasisLabel& n = basis.label(s);
    if (n[mode] == 0) continue;
    lowered = n;
    --lowered[mode];
    if (auto r = basis.find(lowered)) t.emplace_back(static_cast<int>(*r), static_cast<int>(s), std::sqrt(double(n[mode])));
  }
  Eigen::SparseMatrix<double> a(static_cast<Eigen::Index>(basis.size()), static_cast<Eigen::Index>(basis.size()));
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

Eigen::MatrixXd annihilation(const CircuitSpec& spec, std::string_view mode) {
  const std::size_t k = spec.mode_index(mode);
  FockBasis basis(spec.levels());
  return Eigen::MatrixXd(annihilation(spec, basis, k));
}

Eigen::VectorXd bare_energies(const CircuitSpec& spec, const FockBasis& basis) {
  Eigen::VectorXd e(static_cast<Eigen::Index>(basis.size()));
  const auto& modes = spec.modes();
  for (std::size_t s = 0; s < basis.size(); ++s) {
    const BasisLabel& n = basis.label(s);
    double sum = 0.0;
    for (std::size_t k = 0; k < modes.size(); ++k) {
      const double nk = n[k];
      sum += modes[k].freq * nk + 0.5 * modes[k].anharm * nk * (nk - 1.0);
    }
    e[static_cast<Eigen::Index>(s)] = sum;
  }
  return e;
}

Eigen::SparseMatrix<double> interaction(const CircuitSpec& spec, const FockBasis& basis, CouplingTerms terms) {
  Triplets t;
  for (const auto& edge : spec.edges()) {
    if (edge.g == 0.0) continue;
    add_edge_terms(basis, spec.mode_index(edge.a), spec.mode_index(edge.b), edge.g, terms, t);
  }
  Eigen::SparseMatrix<double> v(static_cast<Eigen::Index>(basis.size()), static_cast<Eigen::Index>(basis.size()));
  v.setFromTriplets(t.begin(), t.end());
  return v;
}

Eigen::SparseMatrix<double> assemble_sparse(const CircuitSpec& spec, const FockBasis& basis, CouplingTerms terms) {
  Eigen::SparseMatrix<double> h = interaction(spec, basis, terms);
  const Eigen::VectorXd diag = bare_energies(spec, basis);
  for (Eigen::Index s = 0; s < diag.size(); ++s) h.coeffRef(s, s) += diag[s];
  h.makeCompressed();
  return h;
}

FockBasis make_basis(const CircuitSpec& spec, const AssemblyOptions& options) {
  return FockBasis(spec.levels(), options.max_excitations, options.max_dimension);
}

Eigen::MatrixXd assemble_hamiltonian(const CircuitSpec& spec, const AssemblyOptions& options) {
  const FockBasis basis = make_basis(spec, options);
  if (basis.size() > options.max_dense_dimension) {
    throw NumericalError("dense Hamiltonian of dimension " + std::to_string(basis.size()) +
                         " refused (limit " + std::to_string(options.max_dense_dimension) +
                         "); set an excitation cutoff");
  }
  return Eigen::MatrixXd(assemble_sparse(spec, basis, options.terms));
}

double hermiticity_error(const Eigen::MatrixXd& h) {
  const double norm = h.norm();
  if (norm == 0.0) return 0.0;
  return (h - h.transpose()).norm() / norm;
}

Eigensystem diagonalize(const CircuitSpec& spec, const AssemblyOptions& options) {
  FockBasis basis = make_basis(spec, options);
  if (basis.size() > options.max_dense_dimension) {
    throw NumericalError("exact diagonalization of dimension " + std::to_string(basis.size()) +
                         " refused (limit " + std::to_string(options.max_dense_dimension) + ")");
  }
  const Eigen::MatrixXd h(assemble_sparse(spec, basis, options.terms));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
  if (solver.info() != Eigen::Success) throw NumericalError("eigensolver did not converge");
  return Eigensystem{std::move(basis), solver.eigenvalues(), solver.eigenvectors()};
}

std::vector<std::size_t> assign_labels(const Eigensystem& system) {
  const auto n = static_cast<std::size_t>(system.vectors.rows());
  struct Candidate {
    double overlap;
    std::size_t label;
    std::size_t vector;
  };
  std::vector<Candidate> candidates;
  candidates.reserve(n * n);
  for (std::size_t v = 0; v < n; ++v) {
    for (std::size_t l = 0; l < n; ++l) {
      const double c = system.vectors(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(v));
      candidates.push_back({c * c, l, v});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& x, const Candidate& y) { return x.overlap > y.overlap; });
  constexpr auto kUnset = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> label_to_vector(n, kUnset);
  std::vector<bool> vector_used(n, false);
  std::size_t assigned = 0;
  for (const auto& c : candidates) {
    if (assigned == n) break;
    if (label_to_vector[c.label] != kUnset || vector_used[c.vector]) continue;
    label_to_vector[c.label] = c.vector;
    vector_used[c.vector] = true;
    ++assigned;
  }
  return label_to_vector;
}

}  // namespace dispar
