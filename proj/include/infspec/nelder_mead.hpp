#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace infspec {

struct NelderMeadOptions {
  double tol_x = 1e-10;     ///< stop when the simplex diameter drops below this
  double tol_f = 0.0;       ///< and the value spread drops below this
  int max_evals = 20000;
  int max_restarts = 30;    ///< restarts from the best vertex while it keeps improving
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int evals = 0;
  double diameter = 0.0;
  bool converged = false;
};

namespace detail {

inline double simplex_diameter(const std::vector<Eigen::VectorXd>& s) {
  double d = 0.0;
  for (std::size_t i = 1; i < s.size(); ++i) d = std::max(d, (s[i] - s[0]).lpNorm<Eigen::Infinity>());
  return d;
}

}  // namespace detail

/// Minimizes f from x0 with an axis-aligned initial simplex of edge `step`.
/// Adaptive coefficients (Gao & Han) keep the method usable in 4+ dimensions.
template <typename F>
NelderMeadResult nelder_mead_once(F&& f, const Eigen::VectorXd& x0, double step,
                                  const NelderMeadOptions& opts, int eval_budget) {
  const int n = static_cast<int>(x0.size());
  const double alpha = 1.0;
  const double gamma = 1.0 + 2.0 / n;
  const double rho = 0.75 - 1.0 / (2.0 * n);
  const double sigma = 1.0 - 1.0 / n;

  std::vector<Eigen::VectorXd> s(n + 1, x0);
  std::vector<double> fs(n + 1);
  for (int i = 0; i < n; ++i) s[i + 1][i] += step;
  int evals = 0;
  for (int i = 0; i <= n; ++i) {
    fs[i] = f(s[i]);
    ++evals;
  }
  std::vector<int> idx(n + 1);
  Eigen::VectorXd centroid(n);

  bool converged = false;
  while (evals < eval_budget) {
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fs[a] < fs[b]; });
    {
      std::vector<Eigen::VectorXd> s2(n + 1);
      std::vector<double> f2(n + 1);
      for (int i = 0; i <= n; ++i) {
        s2[i] = s[idx[i]];
        f2[i] = fs[idx[i]];
      }
      s.swap(s2);
      fs.swap(f2);
    }
    if (detail::simplex_diameter(s) < opts.tol_x) {
      converged = true;
      break;
    }
    centroid.setZero();
    for (int i = 0; i < n; ++i) centroid += s[i];
    centroid /= n;

    Eigen::VectorXd xr = centroid + alpha * (centroid - s[n]);
    const double fr = f(xr);
    ++evals;
    if (fr < fs[0]) {
      Eigen::VectorXd xe = centroid + gamma * (xr - centroid);
      const double fe = f(xe);
      ++evals;
      if (fe < fr) {
        s[n] = xe;
        fs[n] = fe;
      } else {
        s[n] = xr;
        fs[n] = fr;
      }
      continue;
    }
    if (fr < fs[n - 1]) {
      s[n] = xr;
      fs[n] = fr;
      continue;
    }
    const bool outside = fr < fs[n];
    Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + rho * (xr - centroid))
                                 : Eigen::VectorXd(centroid + rho * (s[n] - centroid));
    const double fc = f(xc);
    ++evals;
    if (fc < (outside ? fr : fs[n])) {
      s[n] = xc;
      fs[n] = fc;
      continue;
    }
    for (int i = 1; i <= n; ++i) {
      s[i] = s[0] + sigma * (s[i] - s[0]);
      fs[i] = f(s[i]);
      ++evals;
    }
  }
  const int best = static_cast<int>(std::min_element(fs.begin(), fs.end()) - fs.begin());
  return {s[best], fs[best], evals, detail::simplex_diameter(s), converged};
}

/// Restarted Nelder-Mead: after each collapse, re-expand around the best point and
/// continue while the value improves. Restarts break the stalls typical on kinks.
template <typename F>
NelderMeadResult nelder_mead(F&& f, const Eigen::VectorXd& x0, double step,
                             const NelderMeadOptions& opts = {}) {
  NelderMeadResult best = nelder_mead_once(f, x0, step, opts, opts.max_evals);
  int total = best.evals;
  for (int r = 0; r < opts.max_restarts && total < opts.max_evals; ++r) {
    const double restart_step = std::max(step * std::pow(0.5, r + 1), 100.0 * opts.tol_x);
    NelderMeadResult next = nelder_mead_once(f, best.x, restart_step, opts, opts.max_evals - total);
    total += next.evals;
    const double gain = best.value - next.value;
    if (gain > 0.0) best = next;
    if (gain <= opts.tol_f) break;
  }
  best.evals = total;
  return best;
}

}  // namespace infspec
