#include "dispar/stabilizers.hpp"

#include <algorithm>
#include <bit>
#include <complex>
#include <cmath>
#include <set>

#include "dispar/errors.hpp"

namespace dispar {

Parity parity_from_string(const std::string& text) {
  if (text == "odd") return Parity::kOdd;
  if (text == "even") return Parity::kEven;
  throw ConfigError("parity must be 'odd' or 'even', got '" + text + "'");
}

std::string to_string(Parity parity) { return parity == Parity::kOdd ? "odd" : "even"; }

namespace {

std::size_t position(const std::vector<std::string>& order, const std::string& name) {
  auto it = std::find(order.begin(), order.end(), name);
  if (it == order.end()) throw ConfigError("mode '" + name + "' is not in the register");
  return static_cast<std::size_t>(it - order.begin());
}

void check_register(const std::vector<std::string>& order) {
  if (order.empty() || order.size() > 20) throw ConfigError("register must hold 1..20 qubits");
  std::set<std::string> seen(order.begin(), order.end());
  if (seen.size() != order.size()) throw ConfigError("register names are not unique");
}

// Bit mask (in basis-index convention) of the named mode.
std::size_t bit_of(const std::vector<std::string>& order, const std::string& name) {
  return std::size_t{1} << (order.size() - 1 - position(order, name));
}

}  // namespace

Eigen::MatrixXd ideal_parity_unitary(const ParityGateSpec& spec, const std::vector<std::string>& register_order) {
  check_register(register_order);
  std::set<std::string> data(spec.data_modes.begin(), spec.data_modes.end());
  if (data.size() != spec.data_modes.size()) throw ConfigError("parity gate repeats a data mode");
  if (data.count(spec.ancilla)) throw ConfigError("ancilla '" + spec.ancilla + "' is also listed as data");

  const std::size_t anc = bit_of(register_order, spec.ancilla);
  std::size_t data_mask = 0;
  for (const auto& d : spec.data_modes) data_mask |= bit_of(register_order, d);

  const std::size_t dim = std::size_t{1} << register_order.size();
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  const std::size_t want = spec.parity == Parity::kOdd ? 1 : 0;
  for (std::size_t col = 0; col < dim; ++col) {
    const std::size_t weight = static_cast<std::size_t>(std::popcount(col & data_mask));
    const std::size_t row = (weight % 2 == want) ? (col ^ anc) : col;
    u(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) = 1.0;
  }
  return u;
}

Eigen::MatrixXcd x_from_z_transform(const Eigen::MatrixXcd& u, const std::vector<std::string>& register_order,
                                    const std::vector<std::string>& hadamard_modes) {
  check_register(register_order);
  const Eigen::Index dim = Eigen::Index{1} << register_order.size();
  if (u.rows() != dim || u.cols() != dim) throw ConfigError("operator size does not match the register");

  const double h = 1.0 / std::sqrt(2.0);
  Eigen::Matrix2d had;
  had << h, h, h, -h;
  const Eigen::Matrix2d id = Eigen::Matrix2d::Identity();
  std::set<std::string> targets(hadamard_modes.begin(), hadamard_modes.end());
  for (const auto& t : targets) position(register_order, t);

  Eigen::MatrixXd w = Eigen::MatrixXd::Ones(1, 1);
  for (const auto& name : register_order) {
    const Eigen::Matrix2d& f = targets.count(name) ? had : id;
    Eigen::MatrixXd next(w.rows() * 2, w.cols() * 2);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) next.block(2 * r, 2 * c, 2, 2) = w(r, c) * f;
    w = std::move(next);
  }
  const Eigen::MatrixXcd wc = w.cast<std::complex<double>>();
  return wc * u * wc;
}

double cnot_chain_fidelity(int n_cnots, double f_cnot) {
  if (n_cnots < 0) throw ConfigError("n_cnots must be non-negative");
  if (!(f_cnot >= 0.0 && f_cnot <= 1.0)) throw ConfigError("f_cnot must lie in [0, 1]");
  return std::pow(f_cnot, n_cnots);
}

ConcatenationResult concatenated_parity(const std::vector<ParityGateSpec>& subsets,
                                        const std::vector<std::string>& register_order) {
  if (subsets.empty()) throw ConfigError("concatenation needs at least one parity gate");
  const std::string& ancilla = subsets.front().ancilla;
  std::set<std::string> used;
  ParityGateSpec union_spec{{}, ancilla, Parity::kOdd};
  int even_count = 0;
  for (std::size_t k = 0; k < subsets.size(); ++k) {
    if (subsets[k].ancilla != ancilla) throw ConfigError("parity gates must share one ancilla");
    for (const auto& d : subsets[k].data_modes) {
      if (!used.insert(d).second)
        throw ConfigError("data mode '" + d + "' appears in more than one parity gate (subsets must be disjoint)");
      union_spec.data_modes.push_back(d);
    }
    if (subsets[k].parity == Parity::kEven) ++even_count;
  }

  const auto dim = static_cast<Eigen::Index>(std::size_t{1} << register_order.size());
  ConcatenationResult out;
  out.product = Eigen::MatrixXd::Identity(dim, dim);
  for (const auto& s : subsets) out.product = ideal_parity_unitary(s, register_order) * out.product;

  // Each gate flips on (weight_s + [even_s]) odd; the flips add mod 2, so the
  // union flips on (total weight + even_count) odd.
  out.union_parity = even_count % 2 == 0 ? Parity::kOdd : Parity::kEven;
  union_spec.parity = out.union_parity;
  out.union_gate = ideal_parity_unitary(union_spec, register_order);
  out.max_deviation = (out.product - out.union_gate).cwiseAbs().maxCoeff();
  out.equal = out.max_deviation <= 1e-12;
  return out;
}

}  // namespace dispar
