#include "dispar/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <thread>

#include "dispar/errors.hpp"
#include "dispar/nelder_mead.hpp"
#include "dispar/shifts.hpp"

namespace dispar {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
using cd = std::complex<double>;

double wrap_angle(double x) {
  x = std::remainder(x, kTwoPi);
  return x <= -std::numbers::pi ? x + kTwoPi : x;
}

}  // namespace

Envelope envelope_from_string(const std::string& text) {
  if (text == "flat") return Envelope::kFlat;
  if (text == "cosine-ramp") return Envelope::kCosineRamp;
  throw ConfigError("envelope must be 'flat' or 'cosine-ramp', got '" + text + "'");
}

std::string to_string(Envelope envelope) { return envelope == Envelope::kFlat ? "flat" : "cosine-ramp"; }

Frame frame_from_string(const std::string& text) {
  if (text == "lab") return Frame::kLab;
  if (text == "rotating") return Frame::kRotating;
  throw ConfigError("frame must be 'lab' or 'rotating', got '" + text + "'");
}

std::string to_string(Frame frame) { return frame == Frame::kLab ? "lab" : "rotating"; }

double DriveSpec::envelope_at(double t_ns, double t_gate_ns) const {
  if (t_ns < 0.0 || t_ns > t_gate_ns) return 0.0;
  if (envelope == Envelope::kFlat || ramp_ns <= 0.0) return 1.0;
  const double ramp = std::min(ramp_ns, 0.5 * t_gate_ns);
  const double edge = std::min(t_ns, t_gate_ns - t_ns);
  if (edge >= ramp) return 1.0;
  return 0.5 * (1.0 - std::cos(std::numbers::pi * edge / ramp));
}

// ---------------------------------------------------------------------------

DressedSystem dressed_system(const CircuitSpec& spec, const AssemblyOptions& options) {
  Eigensystem eig = diagonalize(spec, options);
  const auto assign = assign_labels(eig);
  const auto dim = static_cast<Eigen::Index>(eig.basis.size());

  DressedSystem out{spec, eig.basis, Eigen::VectorXd(dim), Eigen::MatrixXd(dim, dim), {}, {}};
  for (Eigen::Index k = 0; k < dim; ++k) {
    const auto col = static_cast<Eigen::Index>(assign[static_cast<std::size_t>(k)]);
    out.energies(k) = eig.energies(col);
    // Sign fixed so that every dressed state overlaps its label positively.
    const double sign = eig.vectors(k, col) < 0.0 ? -1.0 : 1.0;
    out.vectors.col(k) = sign * eig.vectors.col(col);
  }
  for (std::size_t k = 0; k < out.basis.size(); ++k) {
    int n = 0;
    for (int occ : out.basis.label(k)) n += occ;
    out.excitations.push_back(n);
  }
  for (const auto& label : computational_labels(spec)) out.computational.push_back(out.basis.index(label));
  return out;
}

Eigen::MatrixXd DressedSystem::drive_operator(const std::string& mode) const {
  const Eigen::SparseMatrix<double> a = annihilation(spec, basis, spec.mode_index(mode));
  const Eigen::SparseMatrix<double> x = 0.5 * (a + Eigen::SparseMatrix<double>(a.transpose()));
  return vectors.transpose() * (x * vectors);
}

// ---------------------------------------------------------------------------

namespace {

struct DriveGroup {
  std::string target;
  std::vector<const DriveSpec*> drives;
};

std::vector<DriveGroup> group_drives(const DressedSystem& system, const std::vector<DriveSpec>& drives) {
  std::vector<DriveGroup> groups;
  for (std::size_t k = 0; k < drives.size(); ++k) {
    const auto& d = drives[k];
    const std::string path = "drives[" + std::to_string(k) + "]";
    if (!system.spec.has_mode(d.target)) throw ConfigError(path + ".target references unknown mode '" + d.target + "'");
    if (!(d.amp >= 0.0) || !std::isfinite(d.amp)) throw ConfigError(path + ".amp must be >= 0");
    if (!(d.freq > 0.0) || !std::isfinite(d.freq)) throw ConfigError(path + ".freq must be > 0");
    if (!std::isfinite(d.phase)) throw ConfigError(path + ".phase must be finite");
    auto it = std::find_if(groups.begin(), groups.end(), [&](const DriveGroup& g) { return g.target == d.target; });
    if (it == groups.end()) {
      groups.push_back({d.target, {&d}});
    } else {
      it->drives.push_back(&d);
    }
  }
  return groups;
}

double default_omega_ref(const DressedSystem& system) {
  const std::size_t anc = system.spec.ancilla_index();
  BasisLabel one(system.spec.num_modes(), 0);
  one[anc] = 1;
  const BasisLabel ground(system.spec.num_modes(), 0);
  return system.energies(static_cast<Eigen::Index>(system.basis.index(one))) -
         system.energies(static_cast<Eigen::Index>(system.basis.index(ground)));
}

struct StepGrid {
  double dt = 0.0;
  long steps = 0;
};

StepGrid make_grid(double t_gate_ns, double dt_ns, double max_dt) {
  if (!(t_gate_ns > 0.0) || !std::isfinite(t_gate_ns)) throw ConfigError("t_gate must be > 0");
  if (!(dt_ns > 0.0) || !std::isfinite(dt_ns)) throw ConfigError("dt must be > 0");
  if (dt_ns > max_dt * (1.0 + 1e-9)) {
    throw NumericalError("time step " + std::to_string(dt_ns * 1e3) + " ps is too coarse; limit is " +
                         std::to_string(max_dt * 1e3) + " ps");
  }
  StepGrid g;
  g.steps = static_cast<long>(std::ceil(t_gate_ns / dt_ns - 1e-9));
  g.steps = std::max(g.steps, 1L);
  g.dt = t_gate_ns / static_cast<double>(g.steps);
  return g;
}

// Raising part (label excitation +1) of a dressed drive operator.
Eigen::MatrixXd raising_part(const Eigen::MatrixXd& x, const std::vector<int>& excitations) {
  Eigen::MatrixXd up = Eigen::MatrixXd::Zero(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      if (excitations[static_cast<std::size_t>(i)] == excitations[static_cast<std::size_t>(j)] + 1) up(i, j) = x(i, j);
  return up;
}

// Builds the rotating-frame Hamiltonian (angular, rad/ns) at time t.
class RotatingHamiltonian {
 public:
  RotatingHamiltonian(const DressedSystem& system, const std::vector<DriveGroup>& groups, double omega_ref,
                      double t_gate)
      : groups_(groups), omega_ref_(omega_ref), t_gate_(t_gate) {
    const auto dim = system.energies.size();
    diag_.resize(dim);
    for (Eigen::Index k = 0; k < dim; ++k)
      diag_(k) = kTwoPi * (system.energies(k) - omega_ref * system.excitations[static_cast<std::size_t>(k)]);
    for (const auto& g : groups) raising_.push_back(raising_part(system.drive_operator(g.target), system.excitations));
  }

  bool driven(double t) const {
    for (std::size_t k = 0; k < groups_.size(); ++k)
      if (coefficient(k, t) != cd(0.0, 0.0)) return true;
    return false;
  }

  Eigen::MatrixXcd operator()(double t) const {
    Eigen::MatrixXcd h = diag_.cast<cd>().asDiagonal();
    for (std::size_t k = 0; k < groups_.size(); ++k) {
      const cd c = kTwoPi * coefficient(k, t);
      if (c == cd(0.0, 0.0)) continue;
      h += c * raising_[k].cast<cd>();
      h += std::conj(c) * raising_[k].transpose().cast<cd>();
    }
    return h;
  }

  const Eigen::VectorXd& diagonal() const { return diag_; }

 private:
  cd coefficient(std::size_t group, double t) const {
    cd c(0.0, 0.0);
    for (const DriveSpec* d : groups_[group].drives) {
      const double env = d->envelope_at(t, t_gate_);
      if (d->amp == 0.0 || env == 0.0) continue;
      const double delta = d->freq - omega_ref_;
      c += 0.5 * d->amp * env * std::exp(cd(0.0, -(kTwoPi * delta * t + d->phase)));
    }
    return c;
  }

  const std::vector<DriveGroup>& groups_;
  double omega_ref_;
  double t_gate_;
  Eigen::VectorXd diag_;
  std::vector<Eigen::MatrixXd> raising_;
};

Eigen::MatrixXcd exp_hermitian(const Eigen::MatrixXcd& h, double dt) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  if (es.info() != Eigen::Success) throw NumericalError("eigensolver failed in step exponential");
  Eigen::VectorXcd phases(es.eigenvalues().size());
  for (Eigen::Index k = 0; k < phases.size(); ++k) phases(k) = std::exp(cd(0.0, -es.eigenvalues()(k) * dt));
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

void record(std::vector<PopulationSample>& traces, double t, const Eigen::MatrixXcd& psi,
            const std::vector<std::size_t>& columns, const std::vector<std::size_t>& comp, std::size_t col_offset) {
  for (Eigen::Index j = 0; j < psi.cols(); ++j) {
    const std::size_t basis_col = columns[col_offset + static_cast<std::size_t>(j)];
    auto it = std::find(comp.begin(), comp.end(), basis_col);
    if (it == comp.end()) continue;
    PopulationSample s;
    s.t_ns = t;
    s.input = static_cast<std::size_t>(it - comp.begin());
    double inside = 0.0;
    for (std::size_t r : comp) {
      const double p = std::norm(psi(static_cast<Eigen::Index>(r), j));
      s.populations.push_back(p);
      inside += p;
    }
    s.populations.push_back(std::max(0.0, psi.col(j).squaredNorm() - inside));
    traces.push_back(std::move(s));
  }
}

double unitarity_error(const Eigen::MatrixXcd& u) {
  const Eigen::MatrixXcd g = u.adjoint() * u;
  return (g - Eigen::MatrixXcd::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
}

}  // namespace

double max_step_ns(const DressedSystem& system, const std::vector<DriveSpec>& drives, Frame frame, double omega_ref) {
  double fmax = 0.0;
  if (frame == Frame::kLab) {
    for (const auto& m : system.spec.modes()) fmax = std::max(fmax, m.freq);
    for (const auto& d : drives) fmax = std::max(fmax, d.freq);
  } else {
    for (const auto& d : drives) fmax = std::max(fmax, std::abs(d.freq - omega_ref));
  }
  double limit = fmax > 0.0 ? 1.0 / (20.0 * fmax) : std::numeric_limits<double>::infinity();
  for (const auto& d : drives)
    if (d.envelope == Envelope::kCosineRamp && d.ramp_ns > 0.0) limit = std::min(limit, d.ramp_ns / 20.0);
  return limit;
}

Propagation propagate(const DressedSystem& system, const std::vector<DriveSpec>& drives, double t_gate_ns,
                      const PropagationOptions& options) {
  const auto groups = group_drives(system, drives);
  const auto dim = static_cast<Eigen::Index>(system.basis.size());
  const double omega_ref = options.omega_ref.value_or(default_omega_ref(system));
  const double default_dt = options.frame == Frame::kLab ? 1e-3 : 0.5;
  const double dt_req = options.dt_ps ? *options.dt_ps * 1e-3 : default_dt;
  const StepGrid grid =
      make_grid(t_gate_ns, dt_req, std::min(max_step_ns(system, drives, options.frame, omega_ref), t_gate_ns));

  Propagation out;
  out.dt_ns = grid.dt;
  out.steps = grid.steps;
  if (options.full_unitary) {
    for (std::size_t k = 0; k < system.basis.size(); ++k) out.columns.push_back(k);
  } else {
    out.columns = system.computational;
  }
  const auto m = static_cast<Eigen::Index>(out.columns.size());
  out.u = Eigen::MatrixXcd::Zero(dim, m);
  for (Eigen::Index j = 0; j < m; ++j) out.u(static_cast<Eigen::Index>(out.columns[static_cast<std::size_t>(j)]), j) = 1.0;

  const int stride = options.trace_stride;

  if (options.frame == Frame::kRotating) {
    const RotatingHamiltonian ham(system, groups, omega_ref, t_gate_ns);
    if (stride > 0) record(out.traces, 0.0, out.u, out.columns, system.computational, 0);
    for (long s = 0; s < grid.steps; ++s) {
      const double t_mid = (static_cast<double>(s) + 0.5) * grid.dt;
      if (ham.driven(t_mid)) {
        out.u = exp_hermitian(ham(t_mid), grid.dt) * out.u;
      } else {
        for (Eigen::Index k = 0; k < dim; ++k) out.u.row(k) *= std::exp(cd(0.0, -ham.diagonal()(k) * grid.dt));
      }
      if (stride > 0 && (s + 1) % stride == 0)
        record(out.traces, (static_cast<double>(s) + 1.0) * grid.dt, out.u, out.columns, system.computational, 0);
    }
    // Back to the lab frame.
    for (Eigen::Index k = 0; k < dim; ++k)
      out.u.row(k) *= std::exp(cd(0.0, -kTwoPi * omega_ref * system.excitations[static_cast<std::size_t>(k)] * t_gate_ns));
  } else {
    struct Kick {
      Eigen::MatrixXd w;   // eigenvectors of the dressed drive operator
      Eigen::VectorXd x;   // its eigenvalues
      const DriveGroup* group;
    };
    std::vector<Kick> kicks;
    for (const auto& g : groups) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(system.drive_operator(g.target));
      if (es.info() != Eigen::Success) throw NumericalError("eigensolver failed for drive operator");
      kicks.push_back({es.eigenvectors(), es.eigenvalues(), &g});
    }
    Eigen::VectorXd half_c(dim), half_s(dim);
    for (Eigen::Index k = 0; k < dim; ++k) {
      const double phi = -kTwoPi * system.energies(k) * grid.dt / 2.0;
      half_c(k) = std::cos(phi);
      half_s(k) = std::sin(phi);
    }

    auto rotate = [](Eigen::MatrixXd& re, Eigen::MatrixXd& im, const Eigen::VectorXd& c, const Eigen::VectorXd& s) {
      for (Eigen::Index j = 0; j < re.cols(); ++j) {
        const Eigen::VectorXd r = re.col(j);
        re.col(j) = c.cwiseProduct(r) - s.cwiseProduct(im.col(j));
        im.col(j) = s.cwiseProduct(r) + c.cwiseProduct(im.col(j));
      }
    };

    const unsigned threads = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(m)));
    std::vector<std::vector<PopulationSample>> thread_traces(threads);
    auto worker = [&](unsigned t) {
      const Eigen::Index begin = m * t / threads, end = m * (t + 1) / threads;
      if (begin == end) return;
      Eigen::MatrixXd re = out.u.middleCols(begin, end - begin).real();
      Eigen::MatrixXd im = out.u.middleCols(begin, end - begin).imag();
      Eigen::VectorXd kc(dim), ks(dim);
      auto snapshot = [&](double t_now) {
        Eigen::MatrixXcd psi(dim, end - begin);
        psi.real() = re;
        psi.imag() = im;
        record(thread_traces[t], t_now, psi, out.columns, system.computational, static_cast<std::size_t>(begin));
      };
      if (stride > 0) snapshot(0.0);
      for (long s = 0; s < grid.steps; ++s) {
        const double t_mid = (static_cast<double>(s) + 0.5) * grid.dt;
        rotate(re, im, half_c, half_s);
        for (const auto& kick : kicks) {
          double f = 0.0;
          for (const DriveSpec* d : kick.group->drives)
            f += d->amp * d->envelope_at(t_mid, t_gate_ns) * std::cos(kTwoPi * d->freq * t_mid + d->phase);
          if (f == 0.0) continue;
          for (Eigen::Index k = 0; k < dim; ++k) {
            const double phi = -kTwoPi * f * kick.x(k) * grid.dt;
            kc(k) = std::cos(phi);
            ks(k) = std::sin(phi);
          }
          Eigen::MatrixXd a = kick.w.transpose() * re;
          Eigen::MatrixXd b = kick.w.transpose() * im;
          rotate(a, b, kc, ks);
          re.noalias() = kick.w * a;
          im.noalias() = kick.w * b;
        }
        rotate(re, im, half_c, half_s);
        if (stride > 0 && (s + 1) % stride == 0) snapshot((static_cast<double>(s) + 1.0) * grid.dt);
      }
      out.u.middleCols(begin, end - begin).real() = re;
      out.u.middleCols(begin, end - begin).imag() = im;
    };
    if (threads == 1) {
      worker(0);
    } else {
      std::vector<std::thread> pool;
      for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker, t);
      for (auto& th : pool) th.join();
    }
    for (auto& tt : thread_traces) out.traces.insert(out.traces.end(), tt.begin(), tt.end());
    std::stable_sort(out.traces.begin(), out.traces.end(), [](const PopulationSample& a, const PopulationSample& b) {
      return a.t_ns < b.t_ns || (a.t_ns == b.t_ns && a.input < b.input);
    });
  }

  if (!out.u.allFinite()) throw NumericalError("propagator has non-finite entries");
  out.unitarity_error = unitarity_error(out.u);
  return out;
}

// ---------------------------------------------------------------------------

Projection project_and_leak(const Eigen::MatrixXcd& u, const std::vector<std::size_t>& computational) {
  const auto n = static_cast<Eigen::Index>(computational.size());
  const bool full = u.cols() == u.rows() && u.cols() != n;
  if (!full && u.cols() != n) throw ConfigError("operator has neither D nor computational-many columns");
  Projection p;
  p.projected.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::Index col = full ? static_cast<Eigen::Index>(computational[static_cast<std::size_t>(j)]) : j;
    double inside = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      p.projected(i, j) = u(static_cast<Eigen::Index>(computational[static_cast<std::size_t>(i)]), col);
      inside += std::norm(p.projected(i, j));
    }
    const double leak = std::clamp(u.col(col).squaredNorm() - inside, 0.0, 1.0);
    p.leakage_per_column.push_back(leak);
    p.leakage_mean += leak / static_cast<double>(n);
  }
  return p;
}

double process_fidelity(const Eigen::MatrixXcd& u1, const Eigen::MatrixXcd& u2) {
  if (u1.rows() != u2.rows() || u1.cols() != u2.cols() || u1.rows() != u1.cols())
    throw ConfigError("process fidelity needs two square operators of equal size");
  return std::abs((u1.adjoint() * u2).trace()) / static_cast<double>(u1.rows());
}

double diagonal_corrected_fidelity(const Eigen::MatrixXcd& projected, const Eigen::MatrixXcd& ideal) {
  const Eigen::MatrixXcd m = projected * ideal.adjoint();
  return m.diagonal().cwiseAbs().sum() / static_cast<double>(m.rows());
}

PhaseCorrection phase_correct(const Eigen::MatrixXcd& projected, const Eigen::MatrixXcd& ideal, std::size_t num_qubits,
                              std::uint64_t seed) {
  const auto d = projected.rows();
  if (projected.cols() != d || ideal.rows() != d || ideal.cols() != d)
    throw ConfigError("phase correction needs square operators of equal size");
  if (d != (Eigen::Index{1} << num_qubits)) throw ConfigError("operator size is not 2^num_qubits");

  // Tr(ideal^dag Phi U) = sum_k Phi_k (U ideal^dag)_kk.
  const Eigen::VectorXcd m = (projected * ideal.adjoint()).diagonal();
  auto overlap = [&](const std::vector<double>& theta) {
    cd sum(0.0, 0.0);
    for (Eigen::Index k = 0; k < d; ++k) {
      double phase = 0.0;
      for (std::size_t q = 0; q < num_qubits; ++q)
        if ((k >> (num_qubits - 1 - q)) & 1) phase += theta[q];
      sum += std::exp(cd(0.0, phase)) * m(k);
    }
    return sum;
  };

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(-std::numbers::pi, std::numbers::pi);
  NelderMeadOptions nm;
  nm.max_iterations = 4000;
  nm.initial_step = 0.5;
  nm.f_tolerance = 1e-15;

  NelderMeadResult best;
  best.value = std::numeric_limits<double>::infinity();
  for (int start = 0; start < 8; ++start) {
    std::vector<double> x0(num_qubits, 0.0);
    if (start > 0)
      for (auto& x : x0) x = uniform(rng);
    auto r = nelder_mead([&](const std::vector<double>& th) { return -std::abs(overlap(th)); }, x0, nm);
    // Restart once from the optimum with a small simplex to polish.
    NelderMeadOptions polish = nm;
    polish.initial_step = 1e-3;
    r = nelder_mead([&](const std::vector<double>& th) { return -std::abs(overlap(th)); }, r.x, polish);
    if (r.value < best.value) best = r;
  }

  PhaseCorrection out;
  const cd tr = overlap(best.x);
  out.fidelity = std::min(1.0, std::abs(tr) / static_cast<double>(d));
  for (double x : best.x) out.local.push_back(wrap_angle(x));
  out.global = std::abs(tr) > 0.0 ? wrap_angle(-std::arg(tr)) : 0.0;
  return out;
}

Eigen::MatrixXd ideal_gate(const CircuitSpec& spec, Parity parity) {
  std::vector<std::string> reg;
  ParityGateSpec gate;
  gate.parity = parity;
  gate.ancilla = spec.modes()[spec.ancilla_index()].name;
  for (std::size_t q : spec.qubit_modes()) {
    reg.push_back(spec.modes()[q].name);
    if (spec.modes()[q].role == Role::kData) gate.data_modes.push_back(spec.modes()[q].name);
  }
  return ideal_parity_unitary(gate, reg);
}

GateResult run_gate(const CircuitSpec& spec, const GateOptions& options) {
  return run_gate(dressed_system(spec, options.assembly), options);
}

GateResult run_gate(const DressedSystem& system, const GateOptions& options) {
  const Propagation prop = propagate(system, options.drives, options.t_gate_ns, options.propagation);
  const Projection proj = project_and_leak(prop.u, system.computational);
  const std::size_t n_qubits = system.spec.qubit_modes().size();

  GateResult r;
  r.unitary = prop.u;
  r.projected = proj.projected;
  r.ideal = options.ideal == IdealKind::kParity ? ideal_gate(system.spec, options.parity)
                                                : Eigen::MatrixXd::Identity(proj.projected.rows(), proj.projected.cols());
  r.leakage_per_column = proj.leakage_per_column;
  r.leakage = proj.leakage_mean;
  const Eigen::MatrixXcd ideal = r.ideal.cast<cd>();
  r.fidelity_raw = process_fidelity(ideal, r.projected);
  const auto pc = phase_correct(r.projected, ideal, n_qubits, options.seed);
  r.fidelity_corrected = pc.fidelity;
  r.local_phases = pc.local;
  r.global_phase = pc.global;
  r.fidelity_diagonal = diagonal_corrected_fidelity(r.projected, ideal);
  r.in_subspace_error = 1.0 - r.fidelity_corrected - r.leakage;
  r.t_gate_ns = options.t_gate_ns;
  r.dt_ns = prop.dt_ns;
  r.steps = prop.steps;
  r.unitarity_error = prop.unitarity_error;
  r.omega_ref = options.propagation.omega_ref.value_or(default_omega_ref(system));
  r.traces = prop.traces;
  return r;
}

double phase_closure_time(double chi_mhz, double t_min_ns) {
  if (chi_mhz == 0.0 || !std::isfinite(chi_mhz)) throw ConfigError("phase closure needs a finite nonzero chi");
  if (!(t_min_ns >= 0.0)) throw ConfigError("t_min must be >= 0");
  const double period = 1000.0 / std::abs(chi_mhz);
  const double k = std::max(1.0, std::ceil(t_min_ns / period - 1e-9));
  return k * period;
}

// ---------------------------------------------------------------------------

DecoherenceResult decohered_fidelity(const DressedSystem& system, const std::vector<DriveSpec>& drives,
                                     double t_gate_ns, Parity parity, const DecoherenceOptions& options) {
  const auto groups = group_drives(system, drives);
  const auto dim = static_cast<Eigen::Index>(system.basis.size());
  const double omega_ref = options.omega_ref.value_or(default_omega_ref(system));
  const StepGrid grid = make_grid(t_gate_ns, options.dt_ps * 1e-3,
                                  std::min(max_step_ns(system, drives, Frame::kRotating, omega_ref), t_gate_ns));

  struct Channel {
    Eigen::SparseMatrix<cd> a;
    Eigen::VectorXd n;
    double gamma;  // 1/ns
  };
  std::vector<Channel> channels;
  for (const auto& [name, t1] : options.t1_us) {
    if (!(t1 > 0.0)) throw ConfigError("T1 for '" + name + "' must be > 0");
    if (std::isinf(t1)) continue;
    const std::size_t mode = system.spec.mode_index(name);
    Channel c;
    c.a = annihilation(system.spec, system.basis, mode).cast<cd>();
    c.n.resize(dim);
    for (Eigen::Index k = 0; k < dim; ++k) c.n(k) = system.basis.label(static_cast<std::size_t>(k))[mode];
    c.gamma = 1.0 / (t1 * 1e3);
    channels.push_back(std::move(c));
  }

  const RotatingHamiltonian ham(system, groups, omega_ref, t_gate_ns);
  const Eigen::MatrixXcd v = system.vectors.cast<cd>();
  const auto& comp = system.computational;
  const auto n_in = static_cast<Eigen::Index>(comp.size());

  std::vector<Eigen::MatrixXcd> rho(static_cast<std::size_t>(n_in));
  Eigen::MatrixXcd psi = Eigen::MatrixXcd::Zero(dim, n_in);  // coherent reference, dressed basis
  for (Eigen::Index j = 0; j < n_in; ++j) {
    const Eigen::VectorXcd s = v.col(static_cast<Eigen::Index>(comp[static_cast<std::size_t>(j)]));
    rho[static_cast<std::size_t>(j)] = s * s.adjoint();
    psi(static_cast<Eigen::Index>(comp[static_cast<std::size_t>(j)]), j) = 1.0;
  }

  // D(r) = sum gamma (a r a^dag - {n, r}/2), n diagonal in the bare basis.
  auto dissipator = [&](const Eigen::MatrixXcd& r) {
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(dim, dim);
    for (const auto& c : channels) {
      Eigen::MatrixXcd jump = c.a * r;
      jump = (jump * c.a.adjoint()).eval();
      for (Eigen::Index col = 0; col < dim; ++col)
        for (Eigen::Index row = 0; row < dim; ++row) jump(row, col) -= 0.5 * (c.n(row) + c.n(col)) * r(row, col);
      out += c.gamma * jump;
    }
    return out;
  };
  // exp(h D) to fourth order; D is linear so RK4 is the Taylor series.
  auto dissipate = [&](Eigen::MatrixXcd& r, double h) {
    if (channels.empty()) return;
    Eigen::MatrixXcd term = r;
    for (int k = 1; k <= 4; ++k) {
      term = (h / k) * dissipator(term);
      r += term;
    }
  };

  // Strang splitting: half dissipation, unitary step, half dissipation.
  for (long s = 0; s < grid.steps; ++s) {
    const double t_mid = (static_cast<double>(s) + 0.5) * grid.dt;
    const Eigen::MatrixXcd ud = exp_hermitian(ham(t_mid), grid.dt);
    const Eigen::MatrixXcd ub = v * ud * v.adjoint();
    psi = ud * psi;
    for (auto& r : rho) {
      dissipate(r, 0.5 * grid.dt);
      r = ub * r * ub.adjoint();
      dissipate(r, 0.5 * grid.dt);
    }
  }

  const Eigen::MatrixXd ideal = ideal_gate(system.spec, parity);
  DecoherenceResult out;
  out.dt_ns = grid.dt;
  out.steps = grid.steps;
  out.min_population = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < n_in; ++j) {
    Eigen::Index target = 0;
    ideal.col(j).maxCoeff(&target);
    const auto row = static_cast<Eigen::Index>(comp[static_cast<std::size_t>(target)]);
    const Eigen::VectorXcd phi = v.col(row);
    const auto& r = rho[static_cast<std::size_t>(j)];
    out.fidelity += std::real(phi.dot(r * phi)) / static_cast<double>(n_in);
    out.coherent_fidelity += std::norm(psi(row, j)) / static_cast<double>(n_in);
    out.max_trace_error = std::max(out.max_trace_error, std::abs(r.trace() - 1.0));
    out.min_population = std::min(out.min_population, r.diagonal().real().minCoeff());
  }
  out.deficit = out.coherent_fidelity - out.fidelity;
  return out;
}

}  // namespace dispar
