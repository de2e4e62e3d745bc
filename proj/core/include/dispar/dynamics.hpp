#pragma once

// Driven evolution of an effective qubit model and gate scoring.
//
// Propagation happens in the dressed eigenbasis of the static Hamiltonian,
// with eigenvectors ordered like the bare labels they overlap most. Without a
// drive the propagator is therefore exactly diagonal, and "computational
// subspace" means the dressed states whose labels have every qubit mode in
// {0,1}. All frequencies are GHz, times ns; 2 pi is applied here only.

#include <complex>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dispar/fockspace.hpp"
#include "dispar/stabilizers.hpp"

namespace dispar {

enum class Envelope { kFlat, kCosineRamp };

Envelope envelope_from_string(const std::string& text);
std::string to_string(Envelope envelope);

/// H_drive = 2 pi amp env(t) cos(2 pi freq t + phase) (b + b^dag) / 2 on the
/// target mode b.
struct DriveSpec {
  std::string target;
  double amp = 0.0;    // GHz
  double freq = 0.0;   // GHz
  double phase = 0.0;  // rad
  Envelope envelope = Envelope::kFlat;
  double ramp_ns = 0.0;

  /// Envelope value in [0,1] at time t of a gate lasting t_gate.
  double envelope_at(double t_ns, double t_gate_ns) const;
};

/// Static Hamiltonian diagonalized once and reordered by label.
struct DressedSystem {
  CircuitSpec spec;
  FockBasis basis;
  Eigen::VectorXd energies;  // GHz, entry k belongs to basis label k
  Eigen::MatrixXd vectors;   // column k is the dressed state of label k
  std::vector<int> excitations;          // total occupation of label k
  std::vector<std::size_t> computational;  // basis indices, in computational_labels order

  /// <dressed i| (b + b^dag)/2 |dressed j> for the named mode.
  Eigen::MatrixXd drive_operator(const std::string& mode) const;
};

DressedSystem dressed_system(const CircuitSpec& spec, const AssemblyOptions& options = {});

enum class Frame { kLab, kRotating };

Frame frame_from_string(const std::string& text);
std::string to_string(Frame frame);

struct PropagationOptions {
  Frame frame = Frame::kLab;
  std::optional<double> dt_ps;          // default: 1 ps lab, 500 ps rotating
  std::optional<double> omega_ref;      // rotating frame, default dressed ancilla frequency
  bool full_unitary = false;            // propagate every basis column, not only computational ones
  unsigned threads = 1;
  int trace_stride = 0;                 // record populations every n steps (0 = off)
};

struct PopulationSample {
  double t_ns = 0.0;
  std::size_t input = 0;          // computational column
  std::vector<double> populations;  // over computational labels, then leakage last
};

struct Propagation {
  /// Columns of the propagator in the dressed basis, lab frame. Column j
  /// evolves basis label `columns[j]`.
  Eigen::MatrixXcd u;
  std::vector<std::size_t> columns;
  double dt_ns = 0.0;
  long steps = 0;
  double unitarity_error = 0.0;  // max |U^dag U - I| over propagated columns
  std::vector<PopulationSample> traces;
};

/// Largest admissible step for the given frame, in ns.
double max_step_ns(const DressedSystem& system, const std::vector<DriveSpec>& drives, Frame frame,
                   double omega_ref);

/// Lab frame: symmetric split of the exactly diagonal static part and the
/// drive kick, sampled at step midpoints. Rotating frame: RWA on the drive,
/// exact exponential of the midpoint Hamiltonian each step.
Propagation propagate(const DressedSystem& system, const std::vector<DriveSpec>& drives, double t_gate_ns,
                      const PropagationOptions& options = {});

struct Projection {
  Eigen::MatrixXcd projected;             // computational rows x computational columns
  std::vector<double> leakage_per_column;
  double leakage_mean = 0.0;
};

/// `u` holds either every column (D x D) or only the computational ones
/// (D x computational.size()).
Projection project_and_leak(const Eigen::MatrixXcd& u, const std::vector<std::size_t>& computational);

/// |Tr(U1^dag U2)| / d.
double process_fidelity(const Eigen::MatrixXcd& u1, const Eigen::MatrixXcd& u2);

struct PhaseCorrection {
  double fidelity = 0.0;
  std::vector<double> local;  // one angle per qubit, wrapped to (-pi, pi]
  double global = 0.0;
};

/// Maximizes |Tr(ideal^dag Phi U)| / d with Phi = e^{i global} prod_k Z_k(theta_k),
/// Z_k(theta) = diag(1, e^{i theta}) on qubit k. Eight deterministic starts of
/// a simplex search over the local angles; the global angle follows from the
/// trace. `num_qubits` fixes the bit layout of the d = 2^n basis.
PhaseCorrection phase_correct(const Eigen::MatrixXcd& projected, const Eigen::MatrixXcd& ideal, std::size_t num_qubits,
                              std::uint64_t seed = 0);

/// Upper bound reachable with an arbitrary diagonal phase on every
/// computational state: sum_k |(U ideal^dag)_kk| / d.
double diagonal_corrected_fidelity(const Eigen::MatrixXcd& projected, const Eigen::MatrixXcd& ideal);

enum class IdealKind { kParity, kIdentity };

/// Parity permutation over the qubit modes of the circuit (data roles as data,
/// the ancilla as target), in computational_labels order.
Eigen::MatrixXd ideal_gate(const CircuitSpec& spec, Parity parity);

struct GateOptions {
  std::vector<DriveSpec> drives;
  double t_gate_ns = 600.0;
  Parity parity = Parity::kOdd;
  IdealKind ideal = IdealKind::kParity;
  PropagationOptions propagation;
  AssemblyOptions assembly;
  std::uint64_t seed = 0;
};

struct GateResult {
  Eigen::MatrixXcd unitary;      // propagated columns, dressed basis
  Eigen::MatrixXcd projected;    // 2^n x 2^n
  Eigen::MatrixXd ideal;
  std::vector<double> leakage_per_column;
  double leakage = 0.0;          // mean over columns
  double fidelity_raw = 0.0;
  double fidelity_corrected = 0.0;
  double fidelity_diagonal = 0.0;
  /// 1 - fidelity_corrected - leakage: error left inside the subspace.
  double in_subspace_error = 0.0;
  std::vector<double> local_phases;
  double global_phase = 0.0;
  double t_gate_ns = 0.0;
  double dt_ns = 0.0;
  long steps = 0;
  double unitarity_error = 0.0;
  double omega_ref = 0.0;
  std::vector<PopulationSample> traces;
};

GateResult run_gate(const CircuitSpec& spec, const GateOptions& options);
GateResult run_gate(const DressedSystem& system, const GateOptions& options);

/// Smallest integer multiple of 1/|chi| that is >= t_min. chi in MHz, result ns.
double phase_closure_time(double chi_mhz, double t_min_ns);

// ---------------------------------------------------------------------------

struct DecoherenceOptions {
  /// T1 per qubit mode name, microseconds. Missing or infinite means no decay.
  std::map<std::string, double> t1_us;
  double dt_ps = 500.0;
  std::optional<double> omega_ref;
};

struct DecoherenceResult {
  /// Mean over computational inputs of <ideal output| rho |ideal output>.
  double fidelity = 0.0;
  /// Same metric from the same propagator with decay switched off.
  double coherent_fidelity = 0.0;
  double deficit = 0.0;
  double max_trace_error = 0.0;
  double min_population = 0.0;  // smallest diagonal entry seen at the end
  double dt_ns = 0.0;
  long steps = 0;
};

/// Density-matrix propagation in the rotating frame: the coherent step is
/// followed by an explicit amplitude-damping step with rate 1/T1 per mode
/// (first-order splitting). Phase corrections drop out for basis inputs.
DecoherenceResult decohered_fidelity(const DressedSystem& system, const std::vector<DriveSpec>& drives,
                                     double t_gate_ns, Parity parity, const DecoherenceOptions& options);

}  // namespace dispar
