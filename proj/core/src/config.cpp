#include "dispar/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>

#include "dispar/errors.hpp"

namespace dispar {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) { throw ConfigError(path + ": " + what); }

void check_object(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(path, "expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key())) fail(path + "." + it.key(), "unknown field");
}

const json& required(const json& j, const std::string& key, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) fail(path + "." + key, "missing required field");
  return *it;
}

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(path, "must be finite");
  return v;
}

std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

long long as_integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<long long>();
}

bool as_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) fail(path, "expected true or false");
  return j.get<bool>();
}

template <typename T, typename F>
std::optional<T> optional_field(const json& j, const std::string& key, const std::string& path, F&& convert) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return convert(*it, path + "." + key);
}

std::optional<double> opt_number(const json& j, const std::string& key, const std::string& path) {
  return optional_field<double>(j, key, path, as_number);
}

std::optional<long long> opt_integer(const json& j, const std::string& key, const std::string& path) {
  return optional_field<long long>(j, key, path, as_integer);
}

std::optional<std::string> opt_string(const json& j, const std::string& key, const std::string& path) {
  return optional_field<std::string>(j, key, path, as_string);
}

std::vector<std::string> string_list(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of strings");
  std::vector<std::string> out;
  for (std::size_t k = 0; k < j.size(); ++k) out.push_back(as_string(j[k], path + "[" + std::to_string(k) + "]"));
  return out;
}

Role parse_role(const json& j, const std::string& path) {
  try {
    return role_from_string(as_string(j, path));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    fail(path, "role must be data, ancilla or coupler");
  }
}

// Re-raises validation errors from the domain constructors under a path.
template <typename F>
auto with_path(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

json load_or_inline(const json& j, const std::filesystem::path& base_dir, const std::string& path) {
  if (!j.is_string()) return j;
  std::filesystem::path file = j.get<std::string>();
  if (file.is_relative()) file = base_dir / file;
  try {
    return read_json_file(file);
  } catch (const ConfigError& e) {
    fail(path, e.what());
  }
}

ParamKind parse_kind(const json& j, const std::string& path) {
  const auto s = as_string(j, path);
  if (s == "coupling") return ParamKind::kCoupling;
  if (s == "freq") return ParamKind::kFreq;
  if (s == "anharm") return ParamKind::kAnharm;
  fail(path, "kind must be coupling, freq or anharm");
}

std::string kind_name(ParamKind k) {
  switch (k) {
    case ParamKind::kCoupling: return "coupling";
    case ParamKind::kFreq: return "freq";
    case ParamKind::kAnharm: return "anharm";
  }
  return "";
}

}  // namespace

json read_json_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open '" + file.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + file.string() + "' is not valid JSON: " + e.what());
  }
}

CircuitSpec circuit_from_json(const json& j, const std::string& path) {
  check_object(j, path, {"modes", "edges", "name", "description"});
  const json& modes_j = required(j, "modes", path);
  if (!modes_j.is_array()) fail(path + ".modes", "expected an array");
  std::vector<ModeSpec> modes;
  for (std::size_t k = 0; k < modes_j.size(); ++k) {
    const std::string p = path + ".modes[" + std::to_string(k) + "]";
    const json& m = modes_j[k];
    check_object(m, p, {"name", "role", "freq", "anharm", "levels"});
    ModeSpec spec;
    spec.name = as_string(required(m, "name", p), p + ".name");
    spec.role = parse_role(required(m, "role", p), p + ".role");
    spec.freq = as_number(required(m, "freq", p), p + ".freq");
    spec.anharm = as_number(required(m, "anharm", p), p + ".anharm");
    if (auto lv = opt_integer(m, "levels", p)) spec.levels = static_cast<int>(*lv);
    modes.push_back(std::move(spec));
  }
  std::vector<CouplingEdge> edges;
  if (auto it = j.find("edges"); it != j.end()) {
    if (!it->is_array()) fail(path + ".edges", "expected an array");
    for (std::size_t k = 0; k < it->size(); ++k) {
      const std::string p = path + ".edges[" + std::to_string(k) + "]";
      const json& e = (*it)[k];
      check_object(e, p, {"a", "b", "g"});
      edges.push_back({as_string(required(e, "a", p), p + ".a"), as_string(required(e, "b", p), p + ".b"),
                       as_number(required(e, "g", p), p + ".g")});
    }
  }
  return with_path(path, [&] { return CircuitSpec(std::move(modes), std::move(edges)); });
}

json circuit_to_json(const CircuitSpec& spec) {
  json modes = json::array();
  for (const auto& m : spec.modes()) {
    modes.push_back({{"name", m.name},
                     {"role", std::string(to_string(m.role))},
                     {"freq", m.freq},
                     {"anharm", m.anharm},
                     {"levels", m.levels}});
  }
  json edges = json::array();
  for (const auto& e : spec.edges()) edges.push_back({{"a", e.a}, {"b", e.b}, {"g", e.g}});
  return {{"modes", modes}, {"edges", edges}};
}

CircuitSpec load_circuit(const std::filesystem::path& file) { return circuit_from_json(read_json_file(file)); }

LatticeAssignment lattice_from_json(const json& j, const std::string& path) {
  check_object(j, path, {"qubits", "cells", "min_detuning_mhz", "description"});
  LatticeAssignment out;
  const json& qs = required(j, "qubits", path);
  if (!qs.is_array()) fail(path + ".qubits", "expected an array");
  for (std::size_t k = 0; k < qs.size(); ++k) {
    const std::string p = path + ".qubits[" + std::to_string(k) + "]";
    check_object(qs[k], p, {"name", "role", "freq", "anharm"});
    LatticeQubit q;
    q.name = as_string(required(qs[k], "name", p), p + ".name");
    q.role = parse_role(required(qs[k], "role", p), p + ".role");
    q.freq = as_number(required(qs[k], "freq", p), p + ".freq");
    q.anharm = opt_number(qs[k], "anharm", p).value_or(0.0);
    out.qubits.push_back(std::move(q));
  }
  if (auto it = j.find("cells"); it != j.end()) {
    if (!it->is_array()) fail(path + ".cells", "expected an array");
    for (std::size_t k = 0; k < it->size(); ++k)
      out.cells.push_back(string_list((*it)[k], path + ".cells[" + std::to_string(k) + "]"));
  }
  return out;
}

json lattice_to_json(const LatticeAssignment& lattice) {
  json qs = json::array();
  for (const auto& q : lattice.qubits)
    qs.push_back({{"name", q.name}, {"role", std::string(to_string(q.role))}, {"freq", q.freq}, {"anharm", q.anharm}});
  return {{"qubits", qs}, {"cells", lattice.cells}};
}

CircuitSpec RunConfig::resolved_circuit() const {
  if (!circuit) throw ConfigError("circuit: missing required field");
  return levels ? circuit->with_levels(*levels) : *circuit;
}

RunConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
  check_object(j, "config", {"circuit", "levels", "shifts", "reduce", "gate", "regime", "lattice", "seed", "description"});
  RunConfig cfg;

  if (auto it = j.find("circuit"); it != j.end())
    cfg.circuit = circuit_from_json(load_or_inline(*it, base_dir, "circuit"), "circuit");
  if (auto lv = opt_integer(j, "levels", "config")) {
    if (*lv < 2) fail("levels", "must be >= 2");
    cfg.levels = static_cast<int>(*lv);
  }
  if (auto s = opt_integer(j, "seed", "config")) {
    if (*s < 0) fail("seed", "must be >= 0");
    cfg.seed = static_cast<std::uint64_t>(*s);
  }

  if (auto it = j.find("shifts"); it != j.end()) {
    const std::string p = "shifts";
    check_object(*it, p, {"method", "order", "max_excitations", "overlap_threshold"});
    const auto method = opt_string(*it, "method", p).value_or("exact");
    if (method == "exact") {
      cfg.shifts.method = ShiftMethod::kExact;
    } else if (method == "pt") {
      cfg.shifts.method = ShiftMethod::kPerturbative;
    } else {
      fail(p + ".method", "must be exact or pt");
    }
    cfg.shifts.pt_order = static_cast<int>(opt_integer(*it, "order", p).value_or(2));
    if (cfg.shifts.pt_order < 2 || cfg.shifts.pt_order > 4) fail(p + ".order", "must be 2, 3 or 4");
    if (auto mx = opt_integer(*it, "max_excitations", p)) cfg.shifts.assembly.max_excitations = static_cast<int>(*mx);
    cfg.shifts.overlap_threshold = opt_number(*it, "overlap_threshold", p).value_or(0.5);
  }

  if (auto it = j.find("reduce"); it != j.end()) {
    const std::string p = "reduce";
    check_object(*it, p, {"dispersive_bound", "max_excitations", "spectral_check"});
    cfg.reduce.sw.dispersive_bound = opt_number(*it, "dispersive_bound", p).value_or(0.15);
    cfg.reduce.max_excitations = static_cast<int>(opt_integer(*it, "max_excitations", p).value_or(4));
    if (auto sc = it->find("spectral_check"); sc != it->end()) cfg.reduce.spectral_check = as_bool(*sc, p + ".spectral_check");
  }

  if (auto it = j.find("gate"); it != j.end()) {
    const std::string p = "gate";
    check_object(*it, p, {"drives", "t_gate_ns", "dt_ps", "frame", "parity", "ideal", "t1_us", "decoherence_dt_ps"});
    if (auto d = it->find("drives"); d != it->end()) {
      if (!d->is_array()) fail(p + ".drives", "expected an array");
      for (std::size_t k = 0; k < d->size(); ++k) {
        const std::string dp = p + ".drives[" + std::to_string(k) + "]";
        const json& dj = (*d)[k];
        check_object(dj, dp, {"target", "amp", "freq", "phase", "envelope", "ramp_ns"});
        DriveSpec drive;
        drive.target = as_string(required(dj, "target", dp), dp + ".target");
        drive.amp = as_number(required(dj, "amp", dp), dp + ".amp");
        drive.freq = as_number(required(dj, "freq", dp), dp + ".freq");
        drive.phase = opt_number(dj, "phase", dp).value_or(0.0);
        if (auto env = opt_string(dj, "envelope", dp)) drive.envelope = with_path(dp + ".envelope", [&] { return envelope_from_string(*env); });
        drive.ramp_ns = opt_number(dj, "ramp_ns", dp).value_or(0.0);
        if (drive.amp < 0.0) fail(dp + ".amp", "must be >= 0");
        if (drive.freq <= 0.0) fail(dp + ".freq", "must be > 0");
        if (drive.ramp_ns < 0.0) fail(dp + ".ramp_ns", "must be >= 0");
        if (cfg.circuit && !cfg.circuit->has_mode(drive.target)) fail(dp + ".target", "unknown mode '" + drive.target + "'");
        cfg.gate.drives.push_back(std::move(drive));
      }
    }
    cfg.gate.t_gate_ns = opt_number(*it, "t_gate_ns", p).value_or(600.0);
    if (cfg.gate.t_gate_ns <= 0.0) fail(p + ".t_gate_ns", "must be > 0");
    cfg.gate.dt_ps = opt_number(*it, "dt_ps", p);
    if (cfg.gate.dt_ps && *cfg.gate.dt_ps <= 0.0) fail(p + ".dt_ps", "must be > 0");
    if (auto f = opt_string(*it, "frame", p)) cfg.gate.frame = with_path(p + ".frame", [&] { return frame_from_string(*f); });
    if (auto par = opt_string(*it, "parity", p)) cfg.gate.parity = with_path(p + ".parity", [&] { return parity_from_string(*par); });
    if (auto ideal = opt_string(*it, "ideal", p)) {
      if (*ideal == "parity") {
        cfg.gate.ideal = IdealKind::kParity;
      } else if (*ideal == "identity") {
        cfg.gate.ideal = IdealKind::kIdentity;
      } else {
        fail(p + ".ideal", "must be parity or identity");
      }
    }
    if (auto t1 = it->find("t1_us"); t1 != it->end()) {
      if (!t1->is_object()) fail(p + ".t1_us", "expected an object of mode name to microseconds");
      for (auto e = t1->begin(); e != t1->end(); ++e) {
        const std::string tp = p + ".t1_us." + e.key();
        double v = std::numeric_limits<double>::infinity();
        if (e->is_string() && e->get<std::string>() == "inf") {
        } else {
          v = as_number(*e, tp);
          if (v <= 0.0) fail(tp, "must be > 0");
        }
        if (cfg.circuit && !cfg.circuit->has_mode(e.key())) fail(tp, "unknown mode");
        cfg.gate.t1_us[e.key()] = v;
      }
    }
    cfg.gate.decoherence_dt_ps = opt_number(*it, "decoherence_dt_ps", p).value_or(500.0);
  }

  if (auto it = j.find("regime"); it != j.end()) {
    const std::string p = "regime";
    check_object(*it, p, {"target_pairs", "target_chi_mhz", "equal_tol", "unwanted_cap_mhz", "unwanted_weight", "bounds",
                          "samples", "refine_starts", "refine_iterations", "dispersive_bound"});
    RegimeConfig rc;
    if (auto tp = it->find("target_pairs"); tp != it->end()) {
      if (!tp->is_array()) fail(p + ".target_pairs", "expected an array of name pairs");
      for (std::size_t k = 0; k < tp->size(); ++k)
        rc.target.target_pairs.push_back(string_list((*tp)[k], p + ".target_pairs[" + std::to_string(k) + "]"));
    }
    rc.target.target_chi_mhz = opt_number(*it, "target_chi_mhz", p).value_or(-5.0);
    rc.target.equal_tol = opt_number(*it, "equal_tol", p).value_or(0.02);
    rc.target.unwanted_cap_mhz = opt_number(*it, "unwanted_cap_mhz", p).value_or(0.5);
    rc.target.unwanted_weight = opt_number(*it, "unwanted_weight", p).value_or(10.0);
    if (rc.target.equal_tol < 0.0) fail(p + ".equal_tol", "must be >= 0");
    if (rc.target.unwanted_cap_mhz < 0.0) fail(p + ".unwanted_cap_mhz", "must be >= 0");
    rc.search.samples = static_cast<int>(opt_integer(*it, "samples", p).value_or(512));
    rc.search.refine_starts = static_cast<int>(opt_integer(*it, "refine_starts", p).value_or(4));
    rc.search.refine_iterations = static_cast<int>(opt_integer(*it, "refine_iterations", p).value_or(200));
    rc.search.dispersive_bound = opt_number(*it, "dispersive_bound", p).value_or(0.15);
    if (rc.search.samples < 1) fail(p + ".samples", "must be >= 1");
    if (auto b = it->find("bounds"); b != it->end()) {
      if (!b->is_array()) fail(p + ".bounds", "expected an array");
      for (std::size_t k = 0; k < b->size(); ++k) {
        const std::string bp = p + ".bounds[" + std::to_string(k) + "]";
        const json& bj = (*b)[k];
        check_object(bj, bp, {"kind", "a", "b", "lo", "hi", "relative"});
        ParamBound bound;
        bound.kind = parse_kind(required(bj, "kind", bp), bp + ".kind");
        bound.a = as_string(required(bj, "a", bp), bp + ".a");
        if (bound.kind == ParamKind::kCoupling) bound.b = as_string(required(bj, "b", bp), bp + ".b");
        if (auto rel = opt_number(bj, "relative", bp)) {
          if (!cfg.circuit) fail(bp + ".relative", "needs a circuit to resolve against");
          if (*rel < 0.0) fail(bp + ".relative", "must be >= 0");
          double base = 0.0;
          with_path(bp, [&] {
            switch (bound.kind) {
              case ParamKind::kCoupling: base = cfg.circuit->coupling(bound.a, bound.b); break;
              case ParamKind::kFreq: base = cfg.circuit->mode(bound.a).freq; break;
              case ParamKind::kAnharm: base = cfg.circuit->mode(bound.a).anharm; break;
            }
            return 0;
          });
          bound.lo = std::min(base * (1.0 - *rel), base * (1.0 + *rel));
          bound.hi = std::max(base * (1.0 - *rel), base * (1.0 + *rel));
        } else {
          bound.lo = as_number(required(bj, "lo", bp), bp + ".lo");
          bound.hi = as_number(required(bj, "hi", bp), bp + ".hi");
        }
        if (bound.lo > bound.hi) fail(bp, "lo must not exceed hi");
        if (cfg.circuit) {
          with_path(bp, [&] {
            (void)cfg.circuit->mode_index(bound.a);
            if (bound.kind == ParamKind::kCoupling) (void)cfg.circuit->mode_index(bound.b);
            return 0;
          });
        }
        rc.target.bounds.push_back(std::move(bound));
      }
    }
    cfg.regime = std::move(rc);
  }

  if (auto it = j.find("lattice"); it != j.end()) {
    const json lj = load_or_inline(*it, base_dir, "lattice");
    cfg.lattice = lattice_from_json(lj, "lattice");
    cfg.min_detuning_mhz = opt_number(lj, "min_detuning_mhz", "lattice").value_or(25.0);
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& file) {
  return parse_config(read_json_file(file), file.parent_path().empty() ? "." : file.parent_path());
}

json RunConfig::resolved() const {
  json j;
  j["seed"] = seed;
  if (circuit) j["circuit"] = circuit_to_json(resolved_circuit());
  if (levels) j["levels"] = *levels;
  j["shifts"] = {{"method", shifts.method == ShiftMethod::kExact ? "exact" : "pt"},
                 {"order", shifts.pt_order},
                 {"max_excitations", shifts.assembly.max_excitations ? json(*shifts.assembly.max_excitations) : json()},
                 {"overlap_threshold", shifts.overlap_threshold}};
  j["reduce"] = {{"dispersive_bound", reduce.sw.dispersive_bound},
                 {"max_excitations", reduce.max_excitations},
                 {"spectral_check", reduce.spectral_check}};
  json drives = json::array();
  for (const auto& d : gate.drives) {
    drives.push_back({{"target", d.target},
                      {"amp", d.amp},
                      {"freq", d.freq},
                      {"phase", d.phase},
                      {"envelope", to_string(d.envelope)},
                      {"ramp_ns", d.ramp_ns}});
  }
  json t1 = json::object();
  for (const auto& [name, v] : gate.t1_us) t1[name] = std::isinf(v) ? json("inf") : json(v);
  j["gate"] = {{"drives", drives},
               {"t_gate_ns", gate.t_gate_ns},
               {"dt_ps", gate.dt_ps ? json(*gate.dt_ps) : json()},
               {"frame", to_string(gate.frame)},
               {"parity", to_string(gate.parity)},
               {"ideal", gate.ideal == IdealKind::kParity ? "parity" : "identity"},
               {"t1_us", t1},
               {"decoherence_dt_ps", gate.decoherence_dt_ps}};
  if (regime) {
    json bounds = json::array();
    for (const auto& b : regime->target.bounds) {
      json bj = {{"kind", kind_name(b.kind)}, {"a", b.a}, {"lo", b.lo}, {"hi", b.hi}};
      if (b.kind == ParamKind::kCoupling) bj["b"] = b.b;
      bounds.push_back(bj);
    }
    j["regime"] = {{"target_pairs", regime->target.target_pairs},
                   {"target_chi_mhz", regime->target.target_chi_mhz},
                   {"equal_tol", regime->target.equal_tol},
                   {"unwanted_cap_mhz", regime->target.unwanted_cap_mhz},
                   {"unwanted_weight", regime->target.unwanted_weight},
                   {"bounds", bounds},
                   {"samples", regime->search.samples},
                   {"refine_starts", regime->search.refine_starts},
                   {"refine_iterations", regime->search.refine_iterations},
                   {"dispersive_bound", regime->search.dispersive_bound}};
  }
  if (lattice) {
    j["lattice"] = lattice_to_json(*lattice);
    j["lattice"]["min_detuning_mhz"] = min_detuning_mhz;
  }
  return j;
}

}  // namespace dispar
