#include "dispar/swreduce.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "dispar/errors.hpp"
#include "dispar/shifts.hpp"

namespace dispar {

namespace {

struct EdgeView {
  std::size_t a;
  std::size_t b;
  double g;
};

std::vector<EdgeView> edge_views(const CircuitSpec& spec) {
  std::vector<EdgeView> out;
  for (const auto& e : spec.edges()) out.push_back({spec.mode_index(e.a), spec.mode_index(e.b), e.g});
  return out;
}

// Edge existence, independent of the coupling value: a listed edge with g = 0
// still fixes the topology.
bool connected(const std::vector<EdgeView>& edges, std::size_t x, std::size_t y) {
  for (const auto& e : edges)
    if ((e.a == x && e.b == y) || (e.a == y && e.b == x)) return true;
  return false;
}

std::vector<std::pair<std::size_t, double>> neighbours(const std::vector<EdgeView>& edges, std::size_t c) {
  std::vector<std::pair<std::size_t, double>> out;
  for (const auto& e : edges) {
    if (e.a == c) out.emplace_back(e.b, e.g);
    if (e.b == c) out.emplace_back(e.a, e.g);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void check_dispersive(const CircuitSpec& spec, std::size_t x, std::size_t c, double g, const SwOptions& options) {
  const double delta = spec.modes()[x].freq - spec.modes()[c].freq;
  std::ostringstream msg;
  if (std::abs(delta) < options.min_detuning) {
    msg << "near-resonant coupler: Delta(" << spec.modes()[x].name << ", " << spec.modes()[c].name
        << ") = " << delta * 1e3 << " MHz";
    throw RegimeError(msg.str());
  }
  if (std::abs(g / delta) > options.dispersive_bound) {
    msg << "dispersive bound violated: g(" << spec.modes()[x].name << ", " << spec.modes()[c].name
        << ") = " << g * 1e3 << " MHz, Delta = " << delta * 1e3 << " MHz, |g/Delta| = " << std::abs(g / delta)
        << " > " << options.dispersive_bound;
    throw RegimeError(msg.str());
  }
}

// Single elimination stage over a set of couplers. Dressing for a mode x next
// to an eliminated coupler c:
//   w~_x   = w_x + g^2 (1/Delta_{x,c} + 1/Sigma_{x,c})
//   w~_c   = w_c + sum_x g^2 (1/Delta_{c,x} + 1/Sigma_{x,c})
//   g~_xy  = g_xy - (g_x g_y / 2)(1/Delta_x + 1/Delta_y - 1/Sigma_x - 1/Sigma_y)
// where Delta_x = w_x - w_c, Sigma_x = w_x + w_c, all taken from the input.
// The exchange term carries the sign and factor 1/2 of the rotating-part
// matrix element of g (x - x^dag)(y - y^dag).
DressedSpec eliminate(const CircuitSpec& spec, const std::set<std::size_t>& eliminated, const SwOptions& options) {
  const auto& modes = spec.modes();
  const auto edges = edge_views(spec);

  for (std::size_t c : eliminated) {
    for (auto [x, g] : neighbours(edges, c)) {
      if (eliminated.count(x)) throw ConfigError("eliminated couplers '" + modes[c].name + "' and '" +
                                                 modes[x].name + "' are directly coupled");
      check_dispersive(spec, x, c, g, options);
    }
  }

  std::vector<ModeSpec> out_modes = modes;
  std::map<std::pair<std::size_t, std::size_t>, double> out_couplings;
  for (const auto& e : edges) {
    if (eliminated.count(e.a) || eliminated.count(e.b)) continue;
    out_couplings[std::minmax(e.a, e.b)] += e.g;
  }

  DressedSpec result;
  for (std::size_t c : eliminated) {
    const double wc = modes[c].freq;
    const auto adj = neighbours(edges, c);
    double coupler_shift = 0.0;
    for (auto [x, g] : adj) {
      const double delta = modes[x].freq - wc;
      const double sigma = modes[x].freq + wc;
      out_modes[x].freq += g * g * (1.0 / delta + 1.0 / sigma);
      coupler_shift += g * g * (-1.0 / delta + 1.0 / sigma);
      result.dropped.push_back({"counter-rotating c c + c^dag c^dag", modes[c].name, modes[c].name, g * g / delta});
    }
    out_modes[c].freq += coupler_shift;

    for (std::size_t p = 0; p < adj.size(); ++p) {
      for (std::size_t q = p + 1; q < adj.size(); ++q) {
        const auto [x, gx] = adj[p];
        const auto [y, gy] = adj[q];
        const double dx = modes[x].freq - wc, sx = modes[x].freq + wc;
        const double dy = modes[y].freq - wc, sy = modes[y].freq + wc;
        const double mediated = -0.5 * gx * gy * (1.0 / dx + 1.0 / dy - 1.0 / sx - 1.0 / sy);
        out_couplings[std::minmax(x, y)] += mediated;
      }
    }

    // Residual coupling between c and any other coupler y reached through a
    // shared neighbour x: g_{x,c} g_{x,y} (1/Delta_{x,c} + 1/Sigma_{x,c}).
    for (auto [x, gxc] : adj) {
      for (auto [y, gxy] : neighbours(edges, x)) {
        if (y == c || modes[y].role != Role::kCoupler) continue;
        const double delta = modes[x].freq - wc, sigma = modes[x].freq + wc;
        result.dropped.push_back({"coupler-coupler exchange", modes[c].name, modes[y].name,
                                  gxc * gxy * (1.0 / delta + 1.0 / sigma)});
      }
    }
  }

  std::vector<CouplingEdge> out_edges;
  for (const auto& [key, g] : out_couplings) {
    if (!std::isfinite(g)) throw NumericalError("non-finite dressed coupling");
    out_edges.push_back({modes[key.first].name, modes[key.second].name, g});
  }
  for (const auto& m : out_modes)
    if (!std::isfinite(m.freq)) throw NumericalError("non-finite dressed frequency for '" + m.name + "'");
  result.circuit = CircuitSpec(std::move(out_modes), std::move(out_edges));
  return result;
}

}  // namespace

UnitCellLayout unit_cell_layout(const CircuitSpec& cell) {
  const auto& modes = cell.modes();
  std::vector<std::size_t> data, couplers, ancillas;
  for (std::size_t i = 0; i < modes.size(); ++i) {
    switch (modes[i].role) {
      case Role::kData: data.push_back(i); break;
      case Role::kAncilla: ancillas.push_back(i); break;
      case Role::kCoupler: couplers.push_back(i); break;
    }
  }
  if (data.size() != 4) throw ConfigError("unit cell needs exactly 4 data qubits, found " + std::to_string(data.size()));
  if (ancillas.size() != 1) throw ConfigError("unit cell needs exactly 1 ancilla");
  if (couplers.size() != 5) throw ConfigError("unit cell needs exactly 5 couplers, found " + std::to_string(couplers.size()));

  const auto edges = edge_views(cell);
  UnitCellLayout layout;
  layout.ancilla = ancillas[0];
  std::copy(data.begin(), data.end(), layout.qubits.begin());

  std::optional<std::size_t> central;
  for (std::size_t c : couplers) {
    if (connected(edges, c, layout.ancilla)) {
      if (central) throw ConfigError("more than one coupler touches the ancilla");
      central = c;
    }
  }
  if (!central) throw ConfigError("no coupler is attached to the ancilla");
  layout.central = *central;

  for (const auto& e : edges) {
    const bool a_anc = e.a == layout.ancilla, b_anc = e.b == layout.ancilla;
    if ((a_anc || b_anc) && e.a != layout.central && e.b != layout.central)
      throw ConfigError("ancilla may only couple to the central coupler");
  }

  for (std::size_t i = 0; i < 4; ++i) {
    const std::size_t qi = layout.qubits[i];
    const std::size_t qn = layout.qubits[(i + 1) % 4];
    std::optional<std::size_t> found;
    for (std::size_t c : couplers) {
      if (c == layout.central) continue;
      auto adj = neighbours(edges, c);
      std::set<std::size_t> ends;
      for (auto [x, g] : adj) {
        (void)g;
        ends.insert(x);
      }
      if (ends == std::set<std::size_t>{qi, qn}) found = c;
    }
    if (!found) {
      throw ConfigError("no edge coupler joins '" + modes[qi].name + "' and '" + modes[qn].name +
                        "' (data qubits must be listed in ring order)");
    }
    layout.edge_couplers[i] = *found;
  }
  std::set<std::size_t> distinct(layout.edge_couplers.begin(), layout.edge_couplers.end());
  if (distinct.size() != 4) throw ConfigError("edge couplers are not distinct");
  for (const auto& e : edges) {
    for (std::size_t c : layout.edge_couplers) {
      if (e.a == c || e.b == c) {
        const std::size_t other = e.a == c ? e.b : e.a;
        if (modes[other].role != Role::kData) throw ConfigError("edge coupler '" + modes[c].name + "' touches a non-data mode");
      }
    }
  }
  return layout;
}

bool DressedSpec::first_dressed() const {
  return std::find(provenance.begin(), provenance.end(), Elimination::kEdgeCouplers) != provenance.end();
}

bool DressedSpec::second_dressed() const {
  return std::find(provenance.begin(), provenance.end(), Elimination::kCentralCoupler) != provenance.end();
}

CircuitSpec DressedSpec::qubit_model() const {
  std::vector<ModeSpec> modes;
  for (const auto& m : circuit.modes())
    if (m.role != Role::kCoupler) modes.push_back(m);
  std::vector<CouplingEdge> edges;
  for (const auto& e : circuit.edges()) {
    if (circuit.mode(e.a).role == Role::kCoupler || circuit.mode(e.b).role == Role::kCoupler) continue;
    edges.push_back(e);
  }
  return CircuitSpec(std::move(modes), std::move(edges));
}

DressedSpec eliminate_edge_couplers(const CircuitSpec& cell, const SwOptions& options) {
  const auto layout = unit_cell_layout(cell);
  DressedSpec out = eliminate(cell, {layout.edge_couplers.begin(), layout.edge_couplers.end()}, options);
  out.provenance.push_back(Elimination::kEdgeCouplers);
  return out;
}

DressedSpec eliminate_central_coupler(const DressedSpec& dressed, const SwOptions& options) {
  if (dressed.second_dressed()) throw ConfigError("central coupler has already been eliminated");
  if (!dressed.first_dressed()) throw ConfigError("central elimination expects a first-dressed (edge-eliminated) spec");
  // Locate the central coupler: the only coupler that still has edges.
  std::optional<std::size_t> central;
  const auto& modes = dressed.circuit.modes();
  for (const auto& e : dressed.circuit.edges()) {
    for (const auto& name : {e.a, e.b}) {
      const std::size_t idx = dressed.circuit.mode_index(name);
      if (modes[idx].role != Role::kCoupler) continue;
      if (central && *central != idx) throw ConfigError("more than one coupler still has edges");
      central = idx;
    }
  }
  if (!central) throw ConfigError("no central coupler left to eliminate");
  DressedSpec out = eliminate(dressed.circuit, {*central}, options);
  out.provenance = dressed.provenance;
  out.provenance.push_back(Elimination::kCentralCoupler);
  out.dropped.insert(out.dropped.begin(), dressed.dropped.begin(), dressed.dropped.end());
  out.flags = dressed.flags;
  return out;
}

DressedSpec reduce_unit_cell(const CircuitSpec& cell, const SwOptions& options) {
  return eliminate_central_coupler(eliminate_edge_couplers(cell, options), options);
}

DressedSpec eliminate_couplers(const CircuitSpec& spec, const std::vector<std::string>& couplers,
                               const SwOptions& options) {
  std::set<std::size_t> targets;
  for (const auto& name : couplers) {
    const std::size_t idx = spec.mode_index(name);
    if (spec.modes()[idx].role != Role::kCoupler) throw ConfigError("'" + name + "' is not a coupler");
    targets.insert(idx);
  }
  DressedSpec out = eliminate(spec, targets, options);
  out.provenance.push_back(Elimination::kGeneric);
  out.flags.push_back("unvalidated topology");
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<BasisLabel> qubit_sector_labels(const CircuitSpec& spec, int max_total) {
  const auto qubits = spec.qubit_modes();
  std::vector<BasisLabel> out;
  BasisLabel label(spec.num_modes(), 0);
  // Enumerate occupations of the qubit modes only; couplers stay at 0.
  std::function<void(std::size_t, int)> rec = [&](std::size_t k, int remaining) {
    if (k == qubits.size()) {
      out.push_back(label);
      return;
    }
    const int cap = std::min(remaining, spec.modes()[qubits[k]].levels - 1);
    for (int n = 0; n <= cap; ++n) {
      label[qubits[k]] = n;
      rec(k + 1, remaining - n);
    }
    label[qubits[k]] = 0;
  };
  rec(0, max_total);
  return out;
}

}  // namespace

SwValidityReport sw_validity_report(const CircuitSpec& cell, const ValidityOptions& options) {
  SwValidityReport report;
  report.dispersive_bound = options.sw.dispersive_bound;
  const auto layout = unit_cell_layout(cell);
  const auto& modes = cell.modes();
  const auto edges = edge_views(cell);

  double max_g = 0.0;
  for (const auto& e : edges) max_g = std::max(max_g, std::abs(e.g));

  double max_delta = 0.0;
  std::map<std::size_t, double> lambda_edge_of;
  for (std::size_t c : layout.edge_couplers) {
    for (auto [x, g] : neighbours(edges, c)) {
      const double delta = modes[x].freq - modes[c].freq;
      const double lambda = std::abs(delta) > 0.0 ? std::abs(g / delta) : INFINITY;
      lambda_edge_of[x] = std::max(lambda_edge_of[x], lambda);
      report.lambda_edge = std::max(report.lambda_edge, lambda);
      if (g != 0.0) {
        max_delta = std::max(max_delta, std::abs(delta));
        report.max_counter_rotating_mhz = std::max(report.max_counter_rotating_mhz, std::abs(g * g / delta) * 1e3);
      }
      if (lambda > options.sw.dispersive_bound) {
        report.flags.push_back("edge stage: |g/Delta| = " + std::to_string(lambda) + " for " + modes[x].name + "-" +
                               modes[c].name + " exceeds the bound");
      }
    }
  }

  // Central-stage lambdas use first-dressed frequencies when the edge stage is
  // admissible, bare ones otherwise.
  CircuitSpec tilde = cell;
  try {
    SwOptions loose = options.sw;
    loose.dispersive_bound = INFINITY;
    tilde = eliminate_edge_couplers(cell, loose).circuit;
  } catch (const RegimeError& e) {
    report.flags.push_back(std::string("edge stage refused: ") + e.what());
  }
  const auto tilde_edges = edge_views(tilde);
  double worst_product = 0.0;
  for (auto [x, g] : neighbours(tilde_edges, layout.central)) {
    const double delta = tilde.modes()[x].freq - tilde.modes()[layout.central].freq;
    const double lambda = std::abs(delta) > 0.0 ? std::abs(g / delta) : INFINITY;
    report.lambda_center = std::max(report.lambda_center, lambda);
    if (g != 0.0) {
      max_delta = std::max(max_delta, std::abs(delta));
      report.max_counter_rotating_mhz = std::max(report.max_counter_rotating_mhz, std::abs(g * g / delta) * 1e3);
    }
    worst_product = std::max(worst_product, lambda_edge_of[x] * lambda);
    if (lambda > options.sw.dispersive_bound) {
      report.flags.push_back("central stage: |g/Delta| = " + std::to_string(lambda) + " for " +
                             tilde.modes()[x].name + " exceeds the bound");
    }
  }
  report.commutator_error_mhz = 0.5 * worst_product * max_g * 1e3;
  report.within_bound = report.lambda_edge <= options.sw.dispersive_bound &&
                        report.lambda_center <= options.sw.dispersive_bound;
  const double lambda = std::max(report.lambda_edge, report.lambda_center);
  report.spectral_budget_mhz = 5.0 * lambda * lambda * max_delta * 1e3;

  if (!options.spectral_check || !report.within_bound) return report;

  DressedSpec reduced;
  try {
    reduced = reduce_unit_cell(cell, options.sw);
  } catch (const Error& e) {
    report.flags.push_back(std::string("reduction refused: ") + e.what());
    return report;
  }

  AssemblyOptions assembly;
  assembly.max_excitations = options.max_excitations;
  const auto labels = qubit_sector_labels(cell, options.compare_excitations);

  SpectralComparison cmp;
  cmp.max_excitations = options.max_excitations;
  try {
    const auto full = labeled_spectrum(diagonalize(cell, assembly), labels);
    const auto red = labeled_spectrum(diagonalize(reduced.circuit, assembly), labels);
    const BasisLabel ground(cell.num_modes(), 0);
    const double e0_full = full.energy(ground);
    const double e0_red = red.energy(ground);
    for (const auto& l : labels) {
      const double ef = (full.energy(l) - e0_full) * 1e3;
      const double er = (red.energy(l) - e0_red) * 1e3;
      cmp.labels.push_back(l);
      cmp.full_mhz.push_back(ef);
      cmp.reduced_mhz.push_back(er);
      cmp.max_deviation_mhz = std::max(cmp.max_deviation_mhz, std::abs(ef - er));
    }
    report.spectrum = std::move(cmp);
  } catch (const Error& e) {
    report.flags.push_back(std::string("spectral check failed: ") + e.what());
  }
  return report;
}

}  // namespace dispar
