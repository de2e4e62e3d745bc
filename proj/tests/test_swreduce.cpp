#include <doctest.h>

#include <random>

#include "dispar/errors.hpp"
#include "dispar/swreduce.hpp"
#include "support.hpp"

using namespace dispar;
using testing::mode;

namespace {

struct CellParams {
  std::array<double, 4> wq{5.28, 5.4, 5.48, 5.35};
  double wa = 4.95;
  std::array<double, 5> wc{6.4, 6.5, 6.6, 6.3, 7.0};
  std::array<double, 4> g_edge{0.05, 0.045, 0.04, 0.05};
  std::array<double, 5> g_center{0.07, 0.075, 0.08, 0.07, 0.08};  // q1..q4, then a
};

CircuitSpec make_cell(const CellParams& p) {
  std::vector<ModeSpec> modes;
  for (int i = 0; i < 4; ++i) modes.push_back(mode("q" + std::to_string(i + 1), Role::kData, p.wq[i], -0.2));
  modes.push_back(mode("a", Role::kAncilla, p.wa, -0.3));
  for (int i = 0; i < 5; ++i) modes.push_back(mode("c" + std::to_string(i + 1), Role::kCoupler, p.wc[i], -0.1));
  std::vector<CouplingEdge> edges;
  for (int i = 0; i < 4; ++i) {
    const std::string c = "c" + std::to_string(i + 1);
    edges.push_back({"q" + std::to_string(i + 1), c, p.g_edge[i]});
    edges.push_back({"q" + std::to_string((i + 1) % 4 + 1), c, p.g_edge[i]});
  }
  for (int i = 0; i < 4; ++i) edges.push_back({"q" + std::to_string(i + 1), "c5", p.g_center[i]});
  edges.push_back({"a", "c5", p.g_center[4]});
  return CircuitSpec(modes, edges);
}

double dressed_freq(const DressedSpec& d, const std::string& name) { return d.circuit.mode(name).freq; }

// Effective 2x2 Hamiltonian on the qubit single-excitation sector from the
// exact eigenvectors, made unitary by polar decomposition.
Eigen::Matrix2d effective_block(const CircuitSpec& spec, const BasisLabel& l1, const BasisLabel& l2) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(testing::oracle_hamiltonian(spec));
  const auto levels = spec.levels();
  const auto r1 = static_cast<Eigen::Index>(testing::oracle_index(levels, l1));
  const auto r2 = static_cast<Eigen::Index>(testing::oracle_index(levels, l2));
  Eigen::Index c1 = 0, c2 = 0;
  es.eigenvectors().row(r1).cwiseAbs().maxCoeff(&c1);
  es.eigenvectors().row(r2).cwiseAbs().maxCoeff(&c2);
  Eigen::Matrix2d a;
  a << es.eigenvectors()(r1, c1), es.eigenvectors()(r1, c2), es.eigenvectors()(r2, c1), es.eigenvectors()(r2, c2);
  Eigen::JacobiSVD<Eigen::Matrix2d> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix2d u = svd.matrixU() * svd.matrixV().transpose();
  const Eigen::Vector2d e(es.eigenvalues()(c1), es.eigenvalues()(c2));
  return u * e.asDiagonal() * u.transpose();
}

}  // namespace

TEST_CASE("unit cell layout") {
  const auto layout = unit_cell_layout(testing::unit_cell());
  const CircuitSpec cell = testing::unit_cell();
  CHECK(cell.modes()[layout.central].name == "c5");
  CHECK(cell.modes()[layout.ancilla].name == "a");
  CHECK(cell.modes()[layout.edge_couplers[0]].name == "c1");
  CHECK(cell.modes()[layout.edge_couplers[3]].name == "c4");
  CHECK_THROWS_AS(unit_cell_layout(testing::table1()), ConfigError);
}

TEST_CASE("single coupler dressing by direct substitution") {
  const CircuitSpec spec({mode("q", Role::kData, 5.0, -0.2), mode("c", Role::kCoupler, 6.5, -0.1)}, {{"q", "c", 0.08}});
  const auto d = eliminate_couplers(spec, {"c"});
  const double expected = 5.0 + 0.0064 * (1.0 / -1.5 + 1.0 / 11.5);
  CHECK(dressed_freq(d, "q") == doctest::Approx(expected).epsilon(1e-12));
  CHECK(std::abs(dressed_freq(d, "q") - 4.99629) < 1e-5);
  CHECK(std::find(d.flags.begin(), d.flags.end(), "unvalidated topology") != d.flags.end());
  // The exact two-mode line agrees to O(g^2/Delta^2) in units of Delta.
  const double g = 0.08, delta = -1.5, sigma = 11.5, lambda = g / delta;
  const double exact = testing::oracle_energy(spec, {1, 0}) - testing::oracle_energy(spec, {0, 0});
  CHECK(std::abs(exact - dressed_freq(d, "q")) <= lambda * lambda * std::abs(delta));
  // Second-order expansion of the exact line: |10> exchanges with |01> and
  // with |21> through x^dag y^dag, |00> with |11>. What separates it from the
  // substitution is the -2 g^2/(Sigma + a_q) counter-rotating piece.
  const double second_order = 5.0 + g * g / delta - 2.0 * g * g / (sigma - 0.2) + g * g / sigma;
  CHECK(std::abs(exact - second_order) <= 5.0 * std::pow(g, 4) / std::pow(std::abs(delta), 3));
  CHECK(dressed_freq(d, "q") - second_order == doctest::Approx(2.0 * g * g / (sigma - 0.2)).epsilon(1e-9));
}

TEST_CASE("zero edge couplings leave everything but the edge couplers untouched") {
  CellParams p;
  p.g_edge = {0, 0, 0, 0};
  const CircuitSpec cell = make_cell(p);
  const auto d = eliminate_edge_couplers(cell);
  for (std::size_t k = 0; k < cell.num_modes(); ++k) CHECK(d.circuit.modes()[k].freq == cell.modes()[k].freq);
  for (const auto& e : cell.edges()) {
    if (e.b == "c5") CHECK(d.circuit.coupling(e.a, e.b) == e.g);
    else CHECK(d.circuit.coupling(e.a, e.b) == 0.0);
  }
  for (int i = 1; i <= 4; ++i)
    for (int j = i + 1; j <= 4; ++j) CHECK(d.circuit.coupling("q" + std::to_string(i), "q" + std::to_string(j)) == 0.0);
}

TEST_CASE("symmetric ring dresses every qubit equally") {
  CellParams p;
  p.wq = {5.3, 5.3, 5.3, 5.3};
  p.wc = {6.5, 6.5, 6.5, 6.5, 7.0};
  p.g_edge = {0.05, 0.05, 0.05, 0.05};
  const auto d = eliminate_edge_couplers(make_cell(p));
  for (int i = 2; i <= 4; ++i) CHECK(dressed_freq(d, "q" + std::to_string(i)) == doctest::Approx(dressed_freq(d, "q1")).epsilon(1e-14));
  CHECK(dressed_freq(d, "q1") < 5.3);
}

TEST_CASE("ancilla untouched by the edge stage and g sign irrelevant") {
  const CircuitSpec cell = testing::unit_cell();
  const auto d = eliminate_edge_couplers(cell);
  CHECK(dressed_freq(d, "a") == cell.mode("a").freq);
  CHECK(d.first_dressed());
  CHECK_FALSE(d.second_dressed());

  CellParams flipped;
  for (auto& g : flipped.g_edge) g = -g;
  for (auto& g : flipped.g_center) g = -g;
  const auto r0 = reduce_unit_cell(cell), r1 = reduce_unit_cell(make_cell(flipped));
  for (std::size_t k = 0; k < cell.num_modes(); ++k)
    CHECK(r0.circuit.modes()[k].freq == doctest::Approx(r1.circuit.modes()[k].freq).epsilon(1e-15));
}

TEST_CASE("decoupled central coupler leaves the first-stage couplings") {
  CellParams p;
  p.g_center = {0, 0, 0, 0, 0};
  const CircuitSpec cell = make_cell(p);
  const auto first = eliminate_edge_couplers(cell);
  const auto second = eliminate_central_coupler(first);
  for (int i = 1; i <= 4; ++i)
    for (int j = i + 1; j <= 4; ++j) {
      const std::string a = "q" + std::to_string(i), b = "q" + std::to_string(j);
      CHECK(second.circuit.coupling(a, b) == first.circuit.coupling(a, b));
    }
  CHECK(second.second_dressed());
  CHECK_THROWS_AS(eliminate_central_coupler(second), ConfigError);
  DressedSpec raw;
  raw.circuit = cell;
  CHECK_THROWS_AS(eliminate_central_coupler(raw), ConfigError);
}

TEST_CASE("central-coupler exchange against exact diagonalization") {
  const CircuitSpec toy({mode("q1", Role::kData, 5.0, -0.2), mode("q2", Role::kData, 5.3, -0.2),
                         mode("c5", Role::kCoupler, 6.8, -0.1)},
                        {{"q1", "c5", 0.07}, {"q2", "c5", 0.07}});
  const auto d = eliminate_couplers(toy, {"c5"});
  const double g_bar = d.circuit.coupling("q1", "q2");
  const Eigen::Matrix2d h = effective_block(toy, {1, 0, 0}, {0, 1, 0});
  // The reduced model carries g (x - x^dag)(y - y^dag), whose exchange element is -g.
  const double g_exact = -h(0, 1);
  CAPTURE(g_bar);
  CAPTURE(g_exact);
  CHECK(std::abs(g_bar - g_exact) <= 0.1 * std::abs(g_exact));
  const double line = h(0, 0) - testing::oracle_energy(toy, {0, 0, 0});
  const double lambda = 0.07 / 1.8;
  CHECK(std::abs(d.circuit.mode("q1").freq - line) <= lambda * lambda * 1.8);
}

TEST_CASE("dispersive bound refusal carries the offending pair") {
  CellParams p;
  p.wc[0] = 5.33;  // 50 MHz from q1
  p.g_edge[0] = 0.04;
  const CircuitSpec cell = make_cell(p);
  try {
    (void)reduce_unit_cell(cell);
    FAIL("expected a regime error");
  } catch (const RegimeError& e) {
    const std::string what = e.what();
    CHECK(what.find("q1") != std::string::npos);
    CHECK(what.find("c1") != std::string::npos);
  }
  const auto report = sw_validity_report(cell);
  CHECK(report.lambda_edge > report.dispersive_bound);
  CHECK_FALSE(report.within_bound);
  CHECK_FALSE(report.flags.empty());

  p.wc[0] = 5.28 + 5e-4;
  CHECK_THROWS_AS(reduce_unit_cell(make_cell(p)), RegimeError);
}

TEST_CASE("validity report on the shipped unit cell") {
  const auto report = sw_validity_report(testing::unit_cell());
  CHECK(report.within_bound);
  CHECK(report.flags.empty());
  CHECK(report.commutator_error_mhz <= 1.0);
  REQUIRE(report.spectrum.has_value());
  CHECK(report.spectrum->max_deviation_mhz <= report.spectral_budget_mhz);
  CHECK(report.spectrum->labels.size() == 21);  // 1 + 5 + 15 qubit-sector labels up to two excitations
  CHECK(report.max_counter_rotating_mhz > 0.0);
}

TEST_CASE("validity report with every coupling off") {
  CellParams p;
  p.g_edge = {0, 0, 0, 0};
  p.g_center = {0, 0, 0, 0, 0};
  const auto report = sw_validity_report(make_cell(p));
  CHECK(report.commutator_error_mhz == 0.0);
  REQUIRE(report.spectrum.has_value());
  CHECK(report.spectrum->max_deviation_mhz < 1e-9);
}

TEST_CASE("dropped terms are recorded") {
  const auto d = reduce_unit_cell(testing::unit_cell());
  bool counter = false, exchange = false;
  for (const auto& t : d.dropped) {
    counter = counter || t.description.find("counter-rotating") != std::string::npos;
    exchange = exchange || t.description.find("coupler-coupler") != std::string::npos;
  }
  CHECK(counter);
  CHECK(exchange);
  const CircuitSpec model = d.qubit_model();
  CHECK(model.num_modes() == 5);
  CHECK(model.coupling("a", "q1") != 0.0);
}

TEST_CASE("property: reduced spectra stay within the per-instance budget") {
  std::mt19937_64 rng(1234);
  // Data qubits stay on a jittered ladder: drawing them freely from one band
  // lands two-excitation states on top of each other, where no label survives.
  const std::array<double, 4> ladder{5.25, 5.4, 5.55, 5.33};
  std::uniform_real_distribution<double> jitter(-0.01, 0.01), wc(6.3, 6.8), lam(0.02, 0.1);
  for (int trial = 0; trial < 3; ++trial) {
    CellParams p;
    for (int i = 0; i < 4; ++i) p.wq[i] = ladder[i] + jitter(rng);
    for (int i = 0; i < 4; ++i) p.wc[i] = wc(rng);
    p.wc[4] = wc(rng) + 0.4;
    for (int i = 0; i < 4; ++i) p.g_edge[i] = lam(rng) * (p.wc[i] - std::max(p.wq[i], p.wq[(i + 1) % 4]));
    for (int i = 0; i < 4; ++i) p.g_center[i] = lam(rng) * (p.wc[4] - p.wq[i]) * 0.8;
    p.g_center[4] = lam(rng) * (p.wc[4] - p.wa) * 0.8;
    const auto report = sw_validity_report(make_cell(p));
    std::string flags;
    for (const auto& f : report.flags) flags += f + "; ";
    CAPTURE(trial);
    CAPTURE(flags);
    REQUIRE(report.within_bound);
    REQUIRE(report.spectrum.has_value());
    CHECK(report.spectrum->max_deviation_mhz <= report.spectral_budget_mhz);
  }
}
