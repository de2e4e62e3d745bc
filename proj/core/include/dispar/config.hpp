#pragma once

// JSON run configuration. Every parse error is a ConfigError whose message
// starts with the offending field path, e.g. "gate.drives[1].freq: expected a number".
//
//   {
//     "circuit": {modes: [...], edges: [...]} or "relative/path.json",
//     "levels": 3,
//     "shifts":  {"method": "exact" | "pt", "order": 2, "max_excitations": 4},
//     "reduce":  {"dispersive_bound": 0.15, "max_excitations": 4},
//     "gate":    {"drives": [...], "t_gate_ns": 600, "dt_ps": 1, "frame": "lab",
//                 "parity": "odd", "ideal": "parity", "t1_us": {"a": 100},
//                 "decoherence_dt_ps": 500},
//     "regime":  {"target_chi_mhz": -5, "equal_tol": 0.02, "unwanted_cap_mhz": 0.5,
//                 "bounds": [{"kind": "coupling", "a": "a", "b": "q2", "relative": 0.1}], ...},
//     "lattice": {"qubits": [...], "cells": [[...]], "min_detuning_mhz": 25} or a path,
//     "seed": 0
//   }

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "dispar/dynamics.hpp"
#include "dispar/fockspace.hpp"
#include "dispar/regimes.hpp"
#include "dispar/shifts.hpp"
#include "dispar/swreduce.hpp"

namespace dispar {

CircuitSpec circuit_from_json(const nlohmann::json& j, const std::string& path = "circuit");
nlohmann::json circuit_to_json(const CircuitSpec& spec);
CircuitSpec load_circuit(const std::filesystem::path& file);

LatticeAssignment lattice_from_json(const nlohmann::json& j, const std::string& path = "lattice");
nlohmann::json lattice_to_json(const LatticeAssignment& lattice);

struct GateConfig {
  std::vector<DriveSpec> drives;
  double t_gate_ns = 600.0;
  std::optional<double> dt_ps;
  Frame frame = Frame::kLab;
  Parity parity = Parity::kOdd;
  IdealKind ideal = IdealKind::kParity;
  std::map<std::string, double> t1_us;
  double decoherence_dt_ps = 500.0;
};

struct RegimeConfig {
  RegimeTarget target;
  RegimeSearchOptions search;
};

struct RunConfig {
  std::optional<CircuitSpec> circuit;
  std::optional<int> levels;
  ShiftOptions shifts;
  ValidityOptions reduce;
  GateConfig gate;
  std::optional<RegimeConfig> regime;
  std::optional<LatticeAssignment> lattice;
  double min_detuning_mhz = 25.0;
  std::uint64_t seed = 0;

  /// Circuit with the levels override applied. Throws ConfigError when absent.
  CircuitSpec resolved_circuit() const;
  /// Canonical JSON of the fully resolved configuration (files inlined).
  nlohmann::json resolved() const;
};

/// Relative paths inside `j` are resolved against base_dir.
RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");
RunConfig load_config(const std::filesystem::path& file);

nlohmann::json read_json_file(const std::filesystem::path& file);

}  // namespace dispar
