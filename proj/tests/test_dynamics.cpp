#include <doctest.h>

#include <complex>
#include <numbers>
#include <random>

#include "dispar/dynamics.hpp"
#include "dispar/errors.hpp"
#include "dispar/stabilizers.hpp"
#include "support.hpp"

using namespace dispar;
using testing::mode;
using cd = std::complex<double>;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<DriveSpec> table1_drives() {
  return {{"a", 0.00159, 4.938, 0.0, Envelope::kFlat, 0.0}, {"a", 0.00159, 4.929, 0.0, Envelope::kFlat, 0.0}};
}

GateOptions rotating(double dt_ps) {
  GateOptions g;
  g.drives = table1_drives();
  g.propagation.frame = Frame::kRotating;
  g.propagation.dt_ps = dt_ps;
  return g;
}

// RK4 on i dpsi/dt = 2 pi [w n + f(t) (b + b^dag)/2] psi for a bare two-level mode.
double rk4_excited_population(double w, double amp, double freq, double t_end, double dt) {
  Eigen::Vector2cd psi(1.0, 0.0);
  auto rhs = [&](double t, const Eigen::Vector2cd& y) {
    const double f = amp * std::cos(kTwoPi * freq * t);
    Eigen::Vector2cd out;
    out(0) = -cd(0, kTwoPi) * (0.5 * f * y(1));
    out(1) = -cd(0, kTwoPi) * (w * y(1) + 0.5 * f * y(0));
    return out;
  };
  const long steps = static_cast<long>(std::llround(t_end / dt));
  for (long s = 0; s < steps; ++s) {
    const double t = s * dt;
    const Eigen::Vector2cd k1 = rhs(t, psi), k2 = rhs(t + dt / 2, psi + dt / 2 * k1),
                           k3 = rhs(t + dt / 2, psi + dt / 2 * k2), k4 = rhs(t + dt, psi + dt * k3);
    psi += dt / 6 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return std::norm(psi(1));
}

Eigen::MatrixXcd random_unitary(std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Eigen::MatrixXcd z(d, d);
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    for (Eigen::Index j = 0; j < z.cols(); ++j) z(i, j) = cd(n(rng), n(rng));
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(z);
  return qr.householderQ();
}

Eigen::MatrixXcd local_phases(const std::vector<double>& beta) {
  const std::size_t n = beta.size();
  const std::size_t d = std::size_t{1} << n;
  Eigen::MatrixXcd p = Eigen::MatrixXcd::Zero(d, d);
  for (std::size_t k = 0; k < d; ++k) {
    double phase = 0.0;
    for (std::size_t q = 0; q < n; ++q)
      if ((k >> (n - 1 - q)) & 1U) phase += beta[q];
    p(k, k) = std::exp(cd(0, phase));
  }
  return p;
}

double wrap(double x) {
  x = std::remainder(x, kTwoPi);
  return x <= -std::numbers::pi ? x + kTwoPi : x;
}

}  // namespace

TEST_CASE("envelopes and frames") {
  DriveSpec d{"a", 1.0, 5.0, 0.0, Envelope::kCosineRamp, 10.0};
  CHECK(d.envelope_at(0.0, 100.0) == doctest::Approx(0.0));
  CHECK(d.envelope_at(5.0, 100.0) == doctest::Approx(0.5));
  CHECK(d.envelope_at(50.0, 100.0) == doctest::Approx(1.0));
  CHECK(d.envelope_at(100.0, 100.0) == doctest::Approx(0.0));
  CHECK(envelope_from_string("flat") == Envelope::kFlat);
  CHECK_THROWS_AS(envelope_from_string("gauss"), ConfigError);
  CHECK(frame_from_string("rotating") == Frame::kRotating);
  CHECK(to_string(Frame::kLab) == "lab");
  CHECK_THROWS_AS(frame_from_string("interaction"), ConfigError);
}

TEST_CASE("dressed system") {
  const auto sys = dressed_system(testing::table1());
  CHECK(sys.computational.size() == 16);
  CHECK((sys.vectors.transpose() * sys.vectors - Eigen::MatrixXd::Identity(81, 81)).cwiseAbs().maxCoeff() < 1e-12);
  const Eigen::MatrixXd x = sys.drive_operator("a");
  CHECK((x - x.transpose()).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(ideal_gate(testing::table1(), Parity::kOdd) ==
        ideal_parity_unitary({{"q2", "q3", "q4"}, "a", Parity::kOdd}, {"a", "q2", "q3", "q4"}));
}

TEST_CASE("undriven evolution is diagonal with the labeled phases") {
  const CircuitSpec spec = testing::table1();
  GateOptions g;
  g.ideal = IdealKind::kIdentity;
  g.t_gate_ns = 100.0;
  g.propagation.dt_ps = 5.0;
  const auto r = run_gate(spec, g);
  for (Eigen::Index k = 0; k < 16; ++k) CHECK(std::abs(std::abs(r.projected(k, k)) - 1.0) < 1e-9);
  CHECK(r.leakage < 1e-12);

  // Raw fidelity against the identity from the oracle spectrum.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(testing::oracle_hamiltonian(spec));
  cd sum = 0.0;
  for (const auto& label : computational_labels(spec)) {
    Eigen::Index best = 0;
    es.eigenvectors().row(static_cast<Eigen::Index>(testing::oracle_index(spec.levels(), label))).cwiseAbs().maxCoeff(&best);
    sum += std::exp(cd(0, -kTwoPi * es.eigenvalues()(best) * g.t_gate_ns));
  }
  CHECK(std::abs(r.fidelity_raw - std::abs(sum) / 16.0) < 1e-3);
  CHECK(r.fidelity_diagonal == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("two-level resonant drive against an RK4 oracle") {
  const CircuitSpec spec({mode("a", Role::kAncilla, 5.0, -0.3, 2)}, {});
  const double amp = 0.02, t_pi = 1.0 / amp;  // Rabi rate amp/2 in the rotating frame
  double best_t = t_pi, best_p = 0.0;
  for (double t = 0.9 * t_pi; t <= 1.1 * t_pi; t += 0.5) {
    const double p = rk4_excited_population(5.0, amp, 5.0, t, 2e-4);
    if (p > best_p) {
      best_p = p;
      best_t = t;
    }
  }
  REQUIRE(best_p > 0.99);
  GateOptions g;
  g.drives = {{"a", amp, 5.0, 0.0, Envelope::kFlat, 0.0}};
  g.t_gate_ns = best_t;
  g.propagation.dt_ps = 1.0;
  g.ideal = IdealKind::kIdentity;
  const auto lab = run_gate(spec, g);
  const double p_lab = std::norm(lab.projected(1, 0));
  CHECK(p_lab >= 0.99);
  CHECK(std::abs(p_lab - rk4_excited_population(5.0, amp, 5.0, best_t, 2e-4)) < 1e-4);
  g.propagation.frame = Frame::kRotating;
  g.propagation.dt_ps = 100.0;
  const auto rot = run_gate(spec, g);
  CHECK(std::abs(std::norm(rot.projected(1, 0)) - p_lab) < 1e-3);
}

TEST_CASE("projection and leakage") {
  const CircuitSpec spec = testing::table1();
  const auto sys = dressed_system(spec);
  const auto id = project_and_leak(Eigen::MatrixXcd::Identity(81, 81), sys.computational);
  CHECK(id.leakage_mean == 0.0);
  CHECK((id.projected - Eigen::MatrixXcd::Identity(16, 16)).cwiseAbs().maxCoeff() == 0.0);

  Eigen::MatrixXcd u = Eigen::MatrixXcd::Identity(81, 81);
  const std::size_t from = basis_index(spec, {0, 0, 0, 1}), to = basis_index(spec, {0, 0, 0, 2});
  u.col(static_cast<Eigen::Index>(from)).setZero();
  u(static_cast<Eigen::Index>(to), static_cast<Eigen::Index>(from)) = 1.0;
  u.col(static_cast<Eigen::Index>(to)).setZero();
  u(static_cast<Eigen::Index>(from), static_cast<Eigen::Index>(to)) = 1.0;
  const auto p = project_and_leak(u, sys.computational);
  CHECK(p.leakage_per_column[1] == 1.0);
  CHECK(p.leakage_per_column[0] == 0.0);
  CHECK(p.leakage_mean == doctest::Approx(1.0 / 16.0));
}

TEST_CASE("process fidelity") {
  std::mt19937_64 rng(4);
  for (int k = 0; k < 5; ++k) {
    const Eigen::MatrixXcd u = random_unitary(8, rng);
    CHECK(process_fidelity(u, u) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(process_fidelity(u, cd(0, 1) * u) == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(process_fidelity(Eigen::MatrixXcd::Identity(2, 2), Eigen::MatrixXcd::Identity(4, 4)), ConfigError);
}

TEST_CASE("phase correction recovers known local phases") {
  const Eigen::MatrixXcd ideal = ideal_gate(testing::table1(), Parity::kOdd).cast<cd>();
  const auto exact = phase_correct(ideal, ideal, 4);
  CHECK(exact.fidelity == doctest::Approx(1.0).epsilon(1e-12));
  for (double a : exact.local) CHECK(std::abs(wrap(a)) < 1e-6);

  const std::vector<double> beta = {0.3, -0.7, 1.1, 0.2};
  const Eigen::MatrixXcd projected = local_phases(beta) * ideal * std::exp(cd(0, 0.4));
  const auto r = phase_correct(projected, ideal, 4);
  CHECK(r.fidelity >= 1.0 - 1e-6);
  for (std::size_t q = 0; q < 4; ++q) CHECK(std::abs(wrap(r.local[q] + beta[q])) < 1e-4);
  const Eigen::MatrixXcd fixed = std::exp(cd(0, r.global)) * local_phases(r.local) * projected;
  CHECK((fixed - ideal).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("phase correction cannot rescue a wrong permutation") {
  // Two qubits, ideal CNOT-like parity check, actual gate identity. Oracle:
  // exhaustive grid over both angles.
  const Eigen::MatrixXcd ideal = ideal_parity_unitary({{"q"}, "a", Parity::kOdd}, {"a", "q"}).cast<cd>();
  const Eigen::MatrixXcd projected = Eigen::MatrixXcd::Identity(4, 4);
  double grid_best = 0.0;
  const int n = 128;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const Eigen::MatrixXcd phi = local_phases({kTwoPi * i / n, kTwoPi * j / n});
      grid_best = std::max(grid_best, std::abs((ideal.adjoint() * phi * projected).trace()) / 4.0);
    }
  const auto r = phase_correct(projected, ideal, 2);
  CHECK(r.fidelity <= grid_best + 1e-3);
  CHECK(r.fidelity >= grid_best - 1e-3);
  CHECK(r.fidelity < 0.75);
}

TEST_CASE("four-mode gate in the rotating frame: unitarity, leakage bookkeeping, step convergence") {
  const auto sys = dressed_system(testing::table1());
  GateOptions g = rotating(500.0);
  g.propagation.trace_stride = 200;
  const auto coarse = run_gate(sys, g);
  CHECK(coarse.unitarity_error <= 1e-8);
  for (const auto& s : coarse.traces) {
    double total = 0.0;
    for (double p : s.populations) total += p;
    CHECK(std::abs(total - 1.0) <= 1e-8);
  }
  CHECK_FALSE(coarse.traces.empty());
  for (std::size_t k = 0; k < 16; ++k) {
    const double inside = coarse.projected.col(static_cast<Eigen::Index>(k)).squaredNorm();
    CHECK(std::abs(inside + coarse.leakage_per_column[k] - 1.0) <= 1e-8);
  }
  const auto fine = run_gate(sys, rotating(250.0));
  CHECK(std::abs(fine.fidelity_corrected - coarse.fidelity_corrected) < 1e-4);
  CHECK(coarse.fidelity_diagonal >= coarse.fidelity_corrected - 1e-9);
}

TEST_CASE("drive phase shifts do not change the diagonal-corrected fidelity") {
  const auto sys = dressed_system(testing::table1());
  const auto base = run_gate(sys, rotating(500.0));
  GateOptions shifted = rotating(500.0);
  for (auto& d : shifted.drives) d.phase = 0.9;
  const auto r = run_gate(sys, shifted);
  CHECK(std::abs(r.fidelity_diagonal - base.fidelity_diagonal) < 1e-6);
  CHECK(std::abs(r.leakage - base.leakage) < 1e-9);
}

TEST_CASE("step size and gate time validation") {
  const auto sys = dressed_system(testing::table1());
  GateOptions g = rotating(500.0);
  g.propagation.frame = Frame::kLab;
  CHECK_THROWS_AS(run_gate(sys, g), NumericalError);
  g = rotating(500.0);
  g.t_gate_ns = -1.0;
  CHECK_THROWS_AS(run_gate(sys, g), ConfigError);
  g = rotating(500.0);
  g.drives[0].target = "nope";
  CHECK_THROWS_AS(run_gate(sys, g), ConfigError);
  CHECK(max_step_ns(sys, table1_drives(), Frame::kLab, 0.0) < 0.01);
}

TEST_CASE("phase closure time") {
  CHECK(phase_closure_time(7.5, 600.0) == doctest::Approx(2000.0 / 3.0).epsilon(1e-12));
  CHECK(phase_closure_time(5.0, 0.0) == doctest::Approx(200.0));
  CHECK(phase_closure_time(5.0, 200.0) == doctest::Approx(200.0));
  CHECK(phase_closure_time(-5.0, 201.0) == doctest::Approx(400.0));
  CHECK_THROWS_AS(phase_closure_time(0.0, 100.0), ConfigError);
}

TEST_CASE("amplitude damping of an idle mode against the exponential law") {
  const CircuitSpec spec({mode("a", Role::kAncilla, 5.0, -0.3, 2)}, {});
  const auto sys = dressed_system(spec);
  DecoherenceOptions o;
  o.t1_us = {{"a", 1.0}};
  const double t = 400.0;
  const auto r = decohered_fidelity(sys, {}, t, Parity::kOdd, o);
  CHECK(std::abs(r.fidelity - 0.5 * (1.0 + std::exp(-t / 1000.0))) < 1e-6);
  CHECK(r.coherent_fidelity == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.max_trace_error < 1e-6);
  CHECK(r.min_population >= 0.0);
}

TEST_CASE("decoherence on a driven two-mode system") {
  const CircuitSpec spec = testing::two_mode(4.95, -0.3, 5.28, -0.2, 0.02165);
  const auto sys = dressed_system(spec);
  const std::vector<DriveSpec> drives = {{"a", 0.00159, 4.938, 0.0, Envelope::kFlat, 0.0}};
  DecoherenceOptions off;
  off.t1_us = {{"a", std::numeric_limits<double>::infinity()}};
  const auto coherent = decohered_fidelity(sys, drives, 600.0, Parity::kOdd, off);
  CHECK(std::abs(coherent.fidelity - coherent.coherent_fidelity) < 1e-6);
  DecoherenceOptions on;
  on.t1_us = {{"a", 100.0}, {"q", 100.0}};
  const auto damped = decohered_fidelity(sys, drives, 600.0, Parity::kOdd, on);
  CHECK(damped.fidelity < damped.coherent_fidelity);
  CHECK(damped.max_trace_error < 1e-6);
  CHECK(damped.min_population >= 0.0);
}
