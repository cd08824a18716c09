#pragma once

#include <Eigen/Dense>

#include "corrdict/model_core.hpp"
#include "corrdict/rng.hpp"

namespace corrdict::test {

inline Eigen::MatrixXd gaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
  }
  return m;
}

inline Dictionary random_dictionary(Rng& rng, Eigen::Index n, Eigen::Index k) {
  return normalize_columns(gaussian(rng, n, k));
}

// K x L codes with exactly t nonzero Gaussian entries per column.
inline Eigen::MatrixXd sparse_codes(Rng& rng, Eigen::Index k, Eigen::Index l, int t) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(k, l);
  for (Eigen::Index i = 0; i < l; ++i) {
    for (auto r : rng.sample_without_replacement(static_cast<std::size_t>(k),
                                                 static_cast<std::size_t>(t))) {
      double v = rng.normal();
      v += v < 0 ? -0.5 : 0.5;  // keep magnitudes away from zero
      x(static_cast<Eigen::Index>(r), i) = v;
    }
  }
  return x;
}

// Minimizer of a convex scalar function over [lo, hi]: a 1001-point grid,
// then repeated refinement around the best grid point.
template <typename F>
double grid_minimize(F f, double lo, double hi, int levels = 6) {
  double best = lo;
  for (int level = 0; level < levels; ++level) {
    const double step = (hi - lo) / 1000.0;
    double best_val = f(lo);
    best = lo;
    for (int i = 1; i <= 1000; ++i) {
      const double u = lo + step * i;
      const double v = f(u);
      if (v < best_val) {
        best_val = v;
        best = u;
      }
    }
    lo = best - step;
    hi = best + step;
  }
  return best;
}

}  // namespace corrdict::test
