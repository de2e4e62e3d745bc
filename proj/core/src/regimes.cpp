#include "dispar/regimes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <thread>

#include "dispar/errors.hpp"
#include "dispar/nelder_mead.hpp"

namespace dispar {

namespace {

constexpr double kInfeasible = 1e12;

std::size_t qubit_position(const CircuitSpec& spec, const std::string& name) {
  const auto qubits = spec.qubit_modes();
  const std::size_t idx = spec.mode_index(name);
  auto it = std::find(qubits.begin(), qubits.end(), idx);
  if (it == qubits.end()) throw ConfigError("'" + name + "' is a coupler, not a qubit mode");
  return static_cast<std::size_t>(it - qubits.begin());
}

bool is_target(const std::vector<Subset>& pairs, const Subset& s) {
  return std::find(pairs.begin(), pairs.end(), s) != pairs.end();
}

double max_dispersive_ratio(const CircuitSpec& spec) {
  double worst = 0.0;
  for (const auto& e : spec.edges()) {
    const double delta = std::abs(spec.mode(e.a).freq - spec.mode(e.b).freq);
    worst = std::max(worst, delta > 0.0 ? std::abs(e.g) / delta : std::numeric_limits<double>::infinity());
  }
  return worst;
}

}  // namespace

std::vector<Subset> resolve_target_pairs(const CircuitSpec& spec, const RegimeTarget& target) {
  const std::size_t anc = spec.ancilla_index();
  std::vector<Subset> out;
  if (target.target_pairs.empty()) {
    const auto qubits = spec.qubit_modes();
    const std::size_t anc_pos = qubit_position(spec, spec.modes()[anc].name);
    for (std::size_t p = 0; p < qubits.size(); ++p) {
      if (p == anc_pos) continue;
      Subset s{anc_pos, p};
      std::sort(s.begin(), s.end());
      out.push_back(s);
    }
    return out;
  }
  for (std::size_t k = 0; k < target.target_pairs.size(); ++k) {
    const auto& names = target.target_pairs[k];
    const std::string path = "regime.target_pairs[" + std::to_string(k) + "]";
    if (names.size() != 2) throw ConfigError(path + " must name exactly two modes");
    if (std::find(names.begin(), names.end(), spec.modes()[anc].name) == names.end())
      throw ConfigError(path + " does not include the ancilla");
    Subset s{qubit_position(spec, names[0]), qubit_position(spec, names[1])};
    if (s[0] == s[1]) throw ConfigError(path + " repeats a mode");
    std::sort(s.begin(), s.end());
    out.push_back(s);
  }
  return out;
}

double regime_objective(const ShiftTable& table, const std::vector<Subset>& pairs, const RegimeTarget& target) {
  double pair_term = 0.0, unwanted_term = 0.0;
  for (const auto& e : table.entries()) {
    if (is_target(pairs, e.subset)) {
      const double d = e.chi_full_mhz - target.target_chi_mhz;
      pair_term += d * d;
    } else {
      const double excess = std::max(0.0, std::abs(e.chi_full_mhz) - target.unwanted_cap_mhz);
      unwanted_term += excess * excess;
    }
  }
  return pair_term + target.unwanted_weight * unwanted_term;
}

double regime_objective(const CircuitSpec& spec, const RegimeTarget& target, const ShiftOptions& options) {
  return regime_objective(shift_table(spec, options), resolve_target_pairs(spec, target), target);
}

RegimeVerdict regime_verdict(const ShiftTable& table, const std::vector<Subset>& pairs, const RegimeTarget& target) {
  RegimeVerdict v;
  const double scale = std::abs(target.target_chi_mhz);
  bool pairs_ok = true, unwanted_ok = true;
  for (const auto& e : table.entries()) {
    if (is_target(pairs, e.subset)) {
      const double d = std::abs(e.chi_full_mhz - target.target_chi_mhz);
      v.worst_pair_deviation = std::max(v.worst_pair_deviation, scale > 0.0 ? d / scale : d);
      if (d > target.equal_tol * scale) pairs_ok = false;
    } else {
      const double a = std::abs(e.chi_full_mhz);
      if (a >= v.worst_unwanted_mhz) {
        v.worst_unwanted_mhz = a;
        v.worst_unwanted_subset = table.key(e.subset);
      }
      if (a > target.unwanted_cap_mhz) unwanted_ok = false;
    }
  }
  v.pass = pairs_ok && unwanted_ok;
  return v;
}

CircuitSpec apply_params(const CircuitSpec& base, const std::vector<ParamBound>& bounds,
                         const std::vector<double>& params) {
  if (params.size() != bounds.size()) throw ConfigError("parameter vector does not match bounds");
  std::vector<ModeSpec> modes = base.modes();
  std::vector<CouplingEdge> edges = base.edges();
  for (std::size_t k = 0; k < bounds.size(); ++k) {
    const auto& b = bounds[k];
    switch (b.kind) {
      case ParamKind::kFreq: modes[base.mode_index(b.a)].freq = params[k]; break;
      case ParamKind::kAnharm: modes[base.mode_index(b.a)].anharm = params[k]; break;
      case ParamKind::kCoupling: {
        bool found = false;
        for (auto& e : edges) {
          if ((e.a == b.a && e.b == b.b) || (e.a == b.b && e.b == b.a)) {
            e.g = params[k];
            found = true;
          }
        }
        if (!found) edges.push_back({b.a, b.b, params[k]});
        break;
      }
    }
  }
  return CircuitSpec(std::move(modes), std::move(edges));
}

double radical_inverse(std::uint64_t index, unsigned base) {
  double result = 0.0, f = 1.0 / base;
  while (index > 0) {
    result += f * static_cast<double>(index % base);
    index /= base;
    f /= base;
  }
  return result;
}

namespace {

unsigned nth_prime(std::size_t n) {
  static const unsigned primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71,
                                    73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131};
  if (n >= std::size(primes)) throw ConfigError("too many search dimensions (max 32)");
  return primes[n];
}

struct Evaluation {
  double objective = kInfeasible;
  bool feasible = false;
};

class Evaluator {
 public:
  Evaluator(const CircuitSpec& base, const RegimeTarget& target, const RegimeSearchOptions& options)
      : base_(base), target_(target), options_(options), pairs_(resolve_target_pairs(base, target)) {}

  Evaluation operator()(const std::vector<double>& params) const {
    Evaluation out;
    try {
      const CircuitSpec spec = apply_params(base_, target_.bounds, params);
      if (max_dispersive_ratio(spec) > options_.dispersive_bound) return out;
      out.objective = regime_objective(shift_table(spec, options_.shifts), pairs_, target_);
      out.feasible = std::isfinite(out.objective);
      if (!out.feasible) out.objective = kInfeasible;
    } catch (const RegimeError&) {
    } catch (const NumericalError&) {
    }
    return out;
  }

  const std::vector<Subset>& pairs() const { return pairs_; }

 private:
  const CircuitSpec& base_;
  const RegimeTarget& target_;
  const RegimeSearchOptions& options_;
  std::vector<Subset> pairs_;
};

}  // namespace

RegimeResult regime_search(const CircuitSpec& base, const RegimeTarget& target, std::uint64_t seed,
                           const RegimeSearchOptions& options) {
  const auto& bounds = target.bounds;
  for (std::size_t k = 0; k < bounds.size(); ++k) {
    if (!(bounds[k].lo <= bounds[k].hi) || !std::isfinite(bounds[k].lo) || !std::isfinite(bounds[k].hi))
      throw ConfigError("regime.bounds[" + std::to_string(k) + "] is empty or non-finite");
  }
  if (options.samples < 1) throw ConfigError("regime search needs at least one sample");

  const Evaluator evaluate(base, target, options);
  RegimeResult result;

  std::vector<std::size_t> free;
  for (std::size_t k = 0; k < bounds.size(); ++k)
    if (bounds[k].hi > bounds[k].lo) free.push_back(k);

  if (free.empty()) {
    // Zero-width box: nothing to search, the base spec comes back untouched.
    result.spec = base;
    result.table = shift_table(base, options.shifts);
    result.objective = regime_objective(result.table, evaluate.pairs(), target);
    result.verdict = regime_verdict(result.table, evaluate.pairs(), target);
    for (const auto& b : bounds) result.params.push_back(b.lo);
    result.candidates.push_back({result.params, result.objective, true, "sample"});
    return result;
  }

  auto to_physical = [&](const std::vector<double>& unit) {
    std::vector<double> p(bounds.size());
    for (std::size_t k = 0; k < bounds.size(); ++k) p[k] = bounds[k].lo;
    for (std::size_t d = 0; d < free.size(); ++d) {
      const auto& b = bounds[free[d]];
      p[free[d]] = b.lo + std::clamp(unit[d], 0.0, 1.0) * (b.hi - b.lo);
    }
    return p;
  };

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<double> shift(free.size());
  for (auto& s : shift) s = uniform(rng);

  const auto n_samples = static_cast<std::size_t>(options.samples);
  std::vector<std::vector<double>> units(n_samples, std::vector<double>(free.size()));
  for (std::size_t i = 0; i < n_samples; ++i) {
    for (std::size_t d = 0; d < free.size(); ++d) {
      const double h = radical_inverse(i + 1, nth_prime(d)) + shift[d];
      units[i][d] = h - std::floor(h);
    }
  }

  std::vector<Evaluation> evals(n_samples);
  const unsigned threads = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(n_samples)));
  {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < n_samples; i += threads) evals[i] = evaluate(to_physical(units[i]));
      });
    }
    for (auto& th : pool) th.join();
  }

  std::vector<std::size_t> order(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    order[i] = i;
    result.candidates.push_back({to_physical(units[i]), evals[i].objective, evals[i].feasible, "sample"});
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return evals[a].objective < evals[b].objective; });
  if (!evals[order.front()].feasible)
    throw RegimeError("regime search: no sampled candidate lies within the dispersive bound");

  NelderMeadOptions nm;
  nm.max_iterations = options.refine_iterations;
  nm.initial_step = 0.1;
  nm.lower.assign(free.size(), 0.0);
  nm.upper.assign(free.size(), 1.0);

  std::vector<double> best_unit = units[order.front()];
  double best_value = evals[order.front()].objective;
  const std::size_t starts = std::min<std::size_t>(static_cast<std::size_t>(std::max(0, options.refine_starts)), n_samples);
  std::vector<NelderMeadResult> refined(starts);
  {
    std::vector<std::thread> pool;
    const unsigned t_count = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(starts, 1))));
    for (unsigned t = 0; t < t_count; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t s = t; s < starts; s += t_count) {
          if (!evals[order[s]].feasible) continue;
          refined[s] = nelder_mead([&](const std::vector<double>& u) { return evaluate(to_physical(u)).objective; },
                                   units[order[s]], nm);
        }
      });
    }
    for (auto& th : pool) th.join();
  }
  for (std::size_t s = 0; s < starts; ++s) {
    if (refined[s].x.empty()) continue;
    result.candidates.push_back({to_physical(refined[s].x), refined[s].value, refined[s].value < kInfeasible, "refine"});
    if (refined[s].value < best_value) {
      best_value = refined[s].value;
      best_unit = refined[s].x;
    }
  }

  result.params = to_physical(best_unit);
  result.spec = apply_params(base, bounds, result.params);
  result.table = shift_table(result.spec, options.shifts);
  result.objective = regime_objective(result.table, evaluate.pairs(), target);
  result.verdict = regime_verdict(result.table, evaluate.pairs(), target);
  return result;
}

// ---------------------------------------------------------------------------

LatticeReport lattice_detuning_check(const LatticeAssignment& lattice, double min_detuning_mhz) {
  LatticeReport report;
  report.threshold_mhz = min_detuning_mhz;
  std::map<std::string, const LatticeQubit*> by_name;
  for (std::size_t k = 0; k < lattice.qubits.size(); ++k) {
    const auto& q = lattice.qubits[k];
    if (!by_name.emplace(q.name, &q).second) throw ConfigError("lattice.qubits[" + std::to_string(k) + "].name duplicated");
  }

  auto scan = [](const std::vector<const LatticeQubit*>& pool) {
    PairDetuning best{"", "", std::numeric_limits<double>::infinity()};
    for (std::size_t i = 0; i < pool.size(); ++i) {
      for (std::size_t j = i + 1; j < pool.size(); ++j) {
        // Rounded to 1e-6 MHz so that table entries like 5.43 and 5.40 read as 30.
        const double d = std::round(std::abs(pool[i]->freq - pool[j]->freq) * 1e9) / 1e6;
        if (d < best.detuning_mhz) best = {pool[i]->name, pool[j]->name, d};
      }
    }
    return best;
  };

  for (std::size_t c = 0; c < lattice.cells.size(); ++c) {
    std::vector<const LatticeQubit*> pool;
    int ancillas = 0;
    std::set<std::string> seen;
    for (const auto& name : lattice.cells[c]) {
      auto it = by_name.find(name);
      if (it == by_name.end())
        throw ConfigError("lattice.cells[" + std::to_string(c) + "] references unknown qubit '" + name + "'");
      if (!seen.insert(name).second)
        throw ConfigError("lattice.cells[" + std::to_string(c) + "] repeats '" + name + "'");
      if (it->second->role == Role::kAncilla) ++ancillas;
      pool.push_back(it->second);
    }
    if (ancillas != 1) throw ConfigError("lattice.cells[" + std::to_string(c) + "] must contain exactly one ancilla");
    report.cell_minimum.push_back(scan(pool));
  }

  std::vector<const LatticeQubit*> all;
  for (const auto& q : lattice.qubits) all.push_back(&q);
  report.global_minimum = scan(all);
  report.pass = report.global_minimum.detuning_mhz >= min_detuning_mhz;
  for (const auto& c : report.cell_minimum) report.pass = report.pass && c.detuning_mhz >= min_detuning_mhz;
  return report;
}

}  // namespace dispar
