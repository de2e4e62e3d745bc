#include "dispar/shifts.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <tuple>

#include "dispar/errors.hpp"

namespace dispar {

namespace {

std::string label_text(const BasisLabel& label) {
  std::string s = "|";
  for (int n : label) s += std::to_string(n);
  return s + ">";
}

}  // namespace

LabeledSpectrum::LabeledSpectrum(std::vector<BasisLabel> labels, std::vector<double> energies,
                                 std::vector<double> overlaps)
    : labels_(std::move(labels)), energies_(std::move(energies)), overlaps_(std::move(overlaps)) {
  if (labels_.size() != energies_.size() || labels_.size() != overlaps_.size())
    throw ConfigError("labeled spectrum: size mismatch");
  for (std::size_t k = 0; k < labels_.size(); ++k) {
    if (!lookup_.emplace(labels_[k], k).second) throw ConfigError("duplicate label " + label_text(labels_[k]));
  }
}

std::size_t LabeledSpectrum::slot(const BasisLabel& label) const {
  auto it = lookup_.find(label);
  if (it == lookup_.end()) throw ConfigError("label " + label_text(label) + " missing from spectrum");
  return it->second;
}

double LabeledSpectrum::energy(const BasisLabel& label) const { return energies_[slot(label)]; }
double LabeledSpectrum::overlap(const BasisLabel& label) const { return overlaps_[slot(label)]; }

double LabeledSpectrum::min_overlap() const {
  double m = 1.0;
  for (double o : overlaps_) m = std::min(m, o);
  return m;
}

std::vector<BasisLabel> computational_labels(const CircuitSpec& spec) {
  const auto qubits = spec.qubit_modes();
  const std::size_t n = qubits.size();
  if (n >= 8 * sizeof(std::size_t)) throw ConfigError("too many qubit modes");
  std::vector<BasisLabel> out;
  out.reserve(std::size_t{1} << n);
  for (std::size_t bits = 0; bits < (std::size_t{1} << n); ++bits) {
    BasisLabel label(spec.num_modes(), 0);
    for (std::size_t k = 0; k < n; ++k) label[qubits[k]] = static_cast<int>((bits >> (n - 1 - k)) & 1u);
    out.push_back(std::move(label));
  }
  return out;
}

LabeledSpectrum labeled_spectrum(const Eigensystem& system, const std::vector<BasisLabel>& labels, double threshold) {
  const Eigen::Index dim = system.vectors.cols();
  std::vector<std::size_t> rows;
  rows.reserve(labels.size());
  for (const auto& l : labels) rows.push_back(system.basis.index(l));

  std::vector<std::tuple<double, std::size_t, Eigen::Index>> candidates;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (Eigen::Index k = 0; k < dim; ++k) {
      const double v = system.vectors(static_cast<Eigen::Index>(rows[r]), k);
      const double p = v * v;
      if (p > 1e-6) candidates.emplace_back(p, r, k);
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const auto& x, const auto& y) { return std::get<0>(x) > std::get<0>(y); });

  std::vector<double> energies(labels.size(), 0.0), overlaps(labels.size(), 0.0);
  std::vector<bool> label_done(labels.size(), false), vec_used(static_cast<std::size_t>(dim), false);
  std::size_t assigned = 0;
  for (const auto& [p, r, k] : candidates) {
    if (label_done[r] || vec_used[static_cast<std::size_t>(k)]) continue;
    label_done[r] = true;
    vec_used[static_cast<std::size_t>(k)] = true;
    energies[r] = system.energies(k);
    overlaps[r] = p;
    if (++assigned == labels.size()) break;
  }

  std::size_t worst = 0;
  for (std::size_t r = 0; r < labels.size(); ++r)
    if (overlaps[r] < overlaps[worst]) worst = r;
  if (!labels.empty() && overlaps[worst] < threshold) {
    std::ostringstream msg;
    msg << "non-dispersive spectrum: label " << label_text(labels[worst]) << " has overlap " << overlaps[worst]
        << " < " << threshold;
    throw RegimeError(msg.str());
  }
  return LabeledSpectrum(labels, std::move(energies), std::move(overlaps));
}

double bare_shift(const LabeledSpectrum& spectrum, const CircuitSpec& spec, const Subset& subset) {
  const auto qubits = spec.qubit_modes();
  BasisLabel ground(spec.num_modes(), 0);
  BasisLabel all = ground;
  double single_sum = 0.0;
  for (std::size_t pos : subset) {
    if (pos >= qubits.size()) throw ConfigError("subset position out of range");
    all[qubits[pos]] = 1;
    BasisLabel one = ground;
    one[qubits[pos]] = 1;
    single_sum += spectrum.energy(one);
  }
  const double e0 = spectrum.energy(ground);
  const double chi = spectrum.energy(all) - single_sum + static_cast<double>(subset.size() - 1) * e0;
  return chi * 1e3;
}

// ---------------------------------------------------------------------------

ShiftTable::ShiftTable(std::vector<std::string> mode_names, std::string method)
    : names_(std::move(mode_names)), method_(std::move(method)) {}

const ShiftEntry& ShiftTable::at(const Subset& subset) const {
  Subset s = subset;
  std::sort(s.begin(), s.end());
  auto it = index_.find(s);
  if (it == index_.end()) throw ConfigError("shift table has no entry for subset " + key(s));
  return entries_[it->second];
}

void ShiftTable::set(Subset subset, double chi_bare_mhz, double chi_full_mhz) {
  std::sort(subset.begin(), subset.end());
  auto it = index_.find(subset);
  if (it != index_.end()) {
    entries_[it->second].chi_bare_mhz = chi_bare_mhz;
    entries_[it->second].chi_full_mhz = chi_full_mhz;
    return;
  }
  index_.emplace(subset, entries_.size());
  entries_.push_back({std::move(subset), chi_bare_mhz, chi_full_mhz});
}

std::string ShiftTable::key(const Subset& subset) const {
  std::string out;
  if (names_.size() <= 9) {
    for (std::size_t p : subset) out += std::to_string(p + 1);
    return out;
  }
  for (std::size_t k = 0; k < subset.size(); ++k) {
    if (k) out += '+';
    out += subset[k] < names_.size() ? names_[subset[k]] : std::to_string(subset[k] + 1);
  }
  return out;
}

Subset ShiftTable::parse_key(const std::string& text) const {
  Subset out;
  if (names_.size() <= 9) {
    for (char c : text) {
      if (c < '1' || c > '9' || static_cast<std::size_t>(c - '1') >= names_.size())
        throw ConfigError("bad subset key '" + text + "'");
      out.push_back(static_cast<std::size_t>(c - '1'));
    }
  } else {
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, '+')) {
      auto it = std::find(names_.begin(), names_.end(), part);
      if (it == names_.end()) throw ConfigError("bad subset key '" + text + "'");
      out.push_back(static_cast<std::size_t>(it - names_.begin()));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Subset> shift_subsets(std::size_t n) {
  std::vector<Subset> out;
  for (std::size_t size = 2; size <= n; ++size) {
    std::vector<bool> mask(n, false);
    std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(size), true);
    do {
      Subset s;
      for (std::size_t k = 0; k < n; ++k)
        if (mask[k]) s.push_back(k);
      out.push_back(std::move(s));
    } while (std::prev_permutation(mask.begin(), mask.end()));
  }
  return out;
}

namespace {

// Strict subsets of size >= 2, via bitmask over the positions of `subset`.
template <typename F>
void for_each_strict_subset(const Subset& subset, F&& f) {
  const std::size_t n = subset.size();
  for (std::size_t mask = 1; mask + 1 < (std::size_t{1} << n); ++mask) {
    if (std::popcount(mask) < 2) continue;
    Subset t;
    for (std::size_t k = 0; k < n; ++k)
      if (mask & (std::size_t{1} << k)) t.push_back(subset[k]);
    f(t);
  }
}

}  // namespace

double full_shift(const ShiftTable& table, const Subset& subset, double chi_bare_mhz) {
  double lower = 0.0;
  for_each_strict_subset(subset, [&](const Subset& t) {
    if (!table.contains(t)) throw ConfigError("full shift of " + table.key(subset) + " needs subset " + table.key(t));
    lower += table.at(t).chi_full_mhz;
  });
  return chi_bare_mhz - lower;
}

double recursion_residual(const ShiftTable& table) {
  double worst = 0.0;
  for (const auto& e : table.entries()) {
    double sum = e.chi_full_mhz;
    for_each_strict_subset(e.subset, [&](const Subset& t) { sum += table.at(t).chi_full_mhz; });
    worst = std::max(worst, std::abs(sum - e.chi_bare_mhz));
  }
  return worst;
}

ShiftTable shift_table(const CircuitSpec& spec, const LabeledSpectrum& spectrum, const std::string& method) {
  const auto qubits = spec.qubit_modes();
  if (qubits.size() < 2) throw ConfigError("shift table needs at least two non-coupler modes");
  std::vector<std::string> names;
  for (std::size_t q : qubits) names.push_back(spec.modes()[q].name);
  ShiftTable table(std::move(names), method);
  for (const auto& s : shift_subsets(qubits.size())) {
    const double bare = bare_shift(spectrum, spec, s);
    table.set(s, bare, full_shift(table, s, bare));
  }
  return table;
}

ShiftTable shift_table(const CircuitSpec& spec, const ShiftOptions& options) {
  const auto labels = computational_labels(spec);
  if (options.method == ShiftMethod::kExact) {
    const auto system = diagonalize(spec, options.assembly);
    return shift_table(spec, labeled_spectrum(system, labels, options.overlap_threshold), "exact");
  }
  PtOptions pt;
  pt.order = options.pt_order;
  pt.guard = options.pt_guard;
  pt.assembly = options.assembly;
  return shift_table(spec, pt_energies(spec, labels, pt), "pt" + std::to_string(options.pt_order));
}

// ---------------------------------------------------------------------------

LabeledSpectrum pt_energies(const CircuitSpec& spec, const std::vector<BasisLabel>& labels, const PtOptions& options) {
  if (options.order < 1 || options.order > 8) throw ConfigError("perturbation order must be in 1..8");
  const FockBasis basis = make_basis(spec, options.assembly);
  const Eigen::VectorXd h0 = bare_energies(spec, basis);
  const Eigen::SparseMatrix<double> v = interaction(spec, basis, options.assembly.terms);
  const Eigen::Index dim = h0.size();

  std::vector<double> energies;
  energies.reserve(labels.size());
  for (const auto& label : labels) {
    const auto n = static_cast<Eigen::Index>(basis.index(label));
    const double e0 = h0(n);

    std::vector<Eigen::VectorXd> psi{Eigen::VectorXd::Unit(dim, n)};
    std::vector<double> corrections{e0};
    for (int k = 1; k <= options.order; ++k) {
      const Eigen::VectorXd v_prev = v * psi[static_cast<std::size_t>(k - 1)];
      corrections.push_back(v_prev(n));
      if (k == options.order) break;

      Eigen::VectorXd rhs = v_prev;
      for (int j = 1; j < k; ++j) rhs -= corrections[static_cast<std::size_t>(j)] * psi[static_cast<std::size_t>(k - j)];
      rhs(n) = 0.0;
      const double scale = std::max(rhs.cwiseAbs().maxCoeff(), 1e-300);
      Eigen::VectorXd next = Eigen::VectorXd::Zero(dim);
      for (Eigen::Index m = 0; m < dim; ++m) {
        if (m == n || std::abs(rhs(m)) <= 1e-14 * scale) continue;
        const double denom = e0 - h0(m);
        if (std::abs(denom) < options.guard) {
          std::ostringstream msg;
          msg << "perturbation theory order " << k + 1 << ": near-degenerate pair " << label_text(label) << " and "
              << label_text(basis.label(static_cast<std::size_t>(m))) << " (denominator " << denom * 1e3
              << " MHz below guard " << options.guard * 1e3 << " MHz)";
          throw RegimeError(msg.str());
        }
        next(m) = rhs(m) / denom;
      }
      psi.push_back(std::move(next));
    }
    double e = 0.0;
    for (double c : corrections) e += c;
    energies.push_back(e);
  }
  return LabeledSpectrum(labels, std::move(energies), std::vector<double>(labels.size(), 1.0));
}

double pairwise_shift_second_order(const CircuitSpec& spec, std::size_t i, std::size_t j) {
  if (i >= spec.num_modes() || j >= spec.num_modes() || i == j) throw ConfigError("invalid mode pair");
  const auto& mi = spec.modes()[i];
  const auto& mj = spec.modes()[j];
  const double g = spec.coupling(mi.name, mj.name);
  if (g == 0.0) return 0.0;
  const double ai = mi.anharm, aj = mj.anharm;
  const double d = mi.freq - mj.freq, s = mi.freq + mj.freq;
  const double denoms[] = {ai + aj + s, ai + s, ai + d, aj + s, aj - d};
  for (double x : denoms) {
    if (std::abs(x) < 1e-3) throw RegimeError("vanishing second-order denominator for " + mi.name + "-" + mj.name);
  }
  const double g2 = g * g;
  const double chi = -4.0 * g2 / (ai + aj + s) + 2.0 * g2 / (ai + s) - 2.0 * g2 / (ai + d) + 2.0 * g2 / (aj + s) -
                     2.0 * g2 / (aj - d);
  return chi * 1e3;
}

// ---------------------------------------------------------------------------

void write_shift_csv(std::ostream& out, const ShiftTable& table) {
  out << "subset,chi_bare_mhz,chi_full_mhz,method\n";
  out.setf(std::ios::fixed);
  out.precision(6);
  for (const auto& e : table.entries())
    out << table.key(e.subset) << ',' << e.chi_bare_mhz << ',' << e.chi_full_mhz << ',' << table.method() << '\n';
}

std::vector<ShiftCsvRow> read_shift_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("shift csv: empty input");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  auto column = [&](const std::string& name) -> int {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  };
  const int c_subset = column("subset"), c_bare = column("chi_bare_mhz"), c_full = column("chi_full_mhz"),
            c_method = column("method");
  if (c_subset < 0 || c_full < 0) throw ConfigError("shift csv: needs columns subset and chi_full_mhz");

  std::vector<ShiftCsvRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    auto get = [&](int c) -> std::string { return c >= 0 && c < static_cast<int>(cells.size()) ? cells[c] : ""; };
    ShiftCsvRow row;
    row.subset = get(c_subset);
    try {
      row.chi_full_mhz = std::stod(get(c_full));
      const auto bare = get(c_bare);
      row.chi_bare_mhz = bare.empty() ? row.chi_full_mhz : std::stod(bare);
    } catch (const std::exception&) {
      throw ConfigError("shift csv: bad number on line " + std::to_string(line_no));
    }
    row.method = get(c_method);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace dispar
