#pragma once

// Shared helpers for the test suites. The oracles here are written from
// scratch on dense Kronecker products and share no code with the library.

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dispar/config.hpp"
#include "dispar/fockspace.hpp"

#ifndef DISPAR_TEST_DATA_DIR
#define DISPAR_TEST_DATA_DIR "data"
#endif

namespace testing {

inline std::filesystem::path data_path(const std::string& name) {
  return std::filesystem::path(DISPAR_TEST_DATA_DIR) / name;
}

inline dispar::CircuitSpec table1() { return dispar::load_circuit(data_path("table1.json")); }
inline dispar::CircuitSpec unit_cell() { return dispar::load_circuit(data_path("unit_cell.json")); }

inline dispar::ModeSpec mode(const std::string& name, dispar::Role role, double freq, double anharm, int levels = 3) {
  return {name, role, freq, anharm, levels};
}

inline Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline Eigen::MatrixXd lowering(int levels) {
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(levels, levels);
  for (int n = 1; n < levels; ++n) b(n - 1, n) = std::sqrt(static_cast<double>(n));
  return b;
}

/// Operator `op` on mode k, identities elsewhere, first mode most significant.
inline Eigen::MatrixXd embed(const std::vector<int>& levels, std::size_t k, const Eigen::MatrixXd& op) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Identity(1, 1);
  for (std::size_t m = 0; m < levels.size(); ++m)
    out = kron(out, m == k ? op : Eigen::MatrixXd::Identity(levels[m], levels[m]));
  return out;
}

/// H = sum w n + a/2 n(n-1) + sum g (x - x^T)(y - y^T), straight from the model definition.
inline Eigen::MatrixXd oracle_hamiltonian(const dispar::CircuitSpec& spec) {
  const auto levels = spec.levels();
  std::size_t dim = 1;
  for (int l : levels) dim *= static_cast<std::size_t>(l);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
  std::vector<Eigen::MatrixXd> b;
  for (std::size_t k = 0; k < levels.size(); ++k) b.push_back(embed(levels, k, lowering(levels[k])));
  for (std::size_t k = 0; k < levels.size(); ++k) {
    const Eigen::MatrixXd n = b[k].transpose() * b[k];
    const auto& m = spec.modes()[k];
    h += m.freq * n + 0.5 * m.anharm * n * (n - Eigen::MatrixXd::Identity(dim, dim));
  }
  for (const auto& e : spec.edges()) {
    const auto i = spec.mode_index(e.a), j = spec.mode_index(e.b);
    h += e.g * (b[i] - b[i].transpose()) * (b[j] - b[j].transpose());
  }
  return h;
}

inline std::size_t oracle_index(const std::vector<int>& levels, const std::vector<int>& label) {
  std::size_t idx = 0;
  for (std::size_t k = 0; k < levels.size(); ++k) idx = idx * static_cast<std::size_t>(levels[k]) + label[k];
  return idx;
}

/// Energy of the eigenvector with the largest weight on |label>, GHz.
inline double oracle_energy(const dispar::CircuitSpec& spec, const std::vector<int>& label) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(oracle_hamiltonian(spec));
  const auto row = oracle_index(spec.levels(), label);
  Eigen::Index best = 0;
  es.eigenvectors().row(static_cast<Eigen::Index>(row)).cwiseAbs().maxCoeff(&best);
  return es.eigenvalues()(best);
}

/// Pairwise ZZ of modes i, j in MHz by direct alternating sum on the oracle spectrum.
inline double oracle_pair_chi(const dispar::CircuitSpec& spec, std::size_t i, std::size_t j) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(oracle_hamiltonian(spec));
  const auto levels = spec.levels();
  auto energy = [&](int ni, int nj) {
    std::vector<int> label(levels.size(), 0);
    label[i] = ni;
    label[j] = nj;
    Eigen::Index best = 0;
    es.eigenvectors().row(static_cast<Eigen::Index>(oracle_index(levels, label))).cwiseAbs().maxCoeff(&best);
    return es.eigenvalues()(best);
  };
  return (energy(1, 1) - energy(1, 0) - energy(0, 1) + energy(0, 0)) * 1e3;
}

inline dispar::CircuitSpec two_mode(double w1, double a1, double w2, double a2, double g, int levels = 3) {
  using dispar::Role;
  return dispar::CircuitSpec({mode("a", Role::kAncilla, w1, a1, levels), mode("q", Role::kData, w2, a2, levels)},
                             {{"a", "q", g}});
}

}  // namespace testing
