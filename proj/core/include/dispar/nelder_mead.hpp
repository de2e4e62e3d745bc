#pragma once

// Bounded Nelder-Mead simplex minimizer. Trial points are clamped into the
// box before evaluation, so the objective never sees out-of-range arguments.

#include <algorithm>
#include <cstddef>
#include <functional>
#include <numeric>
#include <vector>

namespace dispar {

struct NelderMeadOptions {
  int max_iterations = 200;
  double initial_step = 0.1;   // absolute step per coordinate for the first simplex
  double f_tolerance = 1e-12;  // stop when the simplex function spread falls below this
  std::vector<double> lower;   // optional box; empty means unbounded
  std::vector<double> upper;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
};

inline NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                    std::vector<double> x0, const NelderMeadOptions& opt = {}) {
  const std::size_t n = x0.size();
  NelderMeadResult res;
  auto clamp = [&](std::vector<double>& x) {
    for (std::size_t k = 0; k < n; ++k) {
      if (!opt.lower.empty()) x[k] = std::max(x[k], opt.lower[k]);
      if (!opt.upper.empty()) x[k] = std::min(x[k], opt.upper[k]);
    }
  };
  auto eval = [&](std::vector<double>& x) {
    clamp(x);
    ++res.evaluations;
    return f(x);
  };

  if (n == 0) {
    res.x = x0;
    res.value = eval(res.x);
    return res;
  }

  std::vector<std::vector<double>> s(n + 1, x0);
  for (std::size_t k = 0; k < n; ++k) {
    double step = opt.initial_step;
    // Step inward when the start sits on the upper edge of the box.
    if (!opt.upper.empty() && x0[k] + step > opt.upper[k]) step = -step;
    s[k + 1][k] += step;
  }
  std::vector<double> fs(n + 1);
  for (std::size_t i = 0; i <= n; ++i) fs[i] = eval(s[i]);

  std::vector<std::size_t> order(n + 1);
  for (res.iterations = 0; res.iterations < opt.max_iterations; ++res.iterations) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];
    if (fs[worst] - fs[best] <= opt.f_tolerance) break;

    std::vector<double> centroid(n, 0.0);
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == worst) continue;
      for (std::size_t k = 0; k < n; ++k) centroid[k] += s[i][k] / static_cast<double>(n);
    }
    auto along = [&](double t) {
      std::vector<double> x(n);
      for (std::size_t k = 0; k < n; ++k) x[k] = centroid[k] + t * (s[worst][k] - centroid[k]);
      return x;
    };

    auto xr = along(-1.0);
    const double fr = eval(xr);
    if (fr < fs[best]) {
      auto xe = along(-2.0);
      const double fe = eval(xe);
      if (fe < fr) {
        s[worst] = xe;
        fs[worst] = fe;
      } else {
        s[worst] = xr;
        fs[worst] = fr;
      }
      continue;
    }
    if (fr < fs[second]) {
      s[worst] = xr;
      fs[worst] = fr;
      continue;
    }
    const bool outside = fr < fs[worst];
    auto xc = along(outside ? -0.5 : 0.5);
    const double fc = eval(xc);
    if (fc < (outside ? fr : fs[worst])) {
      s[worst] = xc;
      fs[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == best) continue;
      for (std::size_t k = 0; k < n; ++k) s[i][k] = s[best][k] + 0.5 * (s[i][k] - s[best][k]);
      fs[i] = eval(s[i]);
    }
  }

  const auto it = std::min_element(fs.begin(), fs.end());
  res.x = s[static_cast<std::size_t>(it - fs.begin())];
  res.value = *it;
  return res;
}

}  // namespace dispar
