#pragma once

#include <vector>

#include <Eigen/Dense>

#include "corrdict/model_core.hpp"

namespace corrdict {

struct OmpConfig {
  int max_sparsity = 1;        // T
  double residual_tol = 0.0;   // stop once ||r||_2 <= residual_tol
};

using SupportSet = std::vector<Eigen::Index>;

struct SolveTrace {
  double initial_objective = 0.0;
  std::vector<double> objective_per_iter;
  std::vector<double> rel_change_per_iter;
  std::vector<double> residual_norm_per_iter;
  int iterations = 0;
};

struct OmpResult {
  Eigen::VectorXd x;
  SupportSet support;  // selection order
  SolveTrace trace;    // residual_norm_per_iter only
};

/// Orthogonal matching pursuit on a single signal.
///
/// Greedily adds the atom with the largest |<r, d_j>| (lowest index on ties),
/// refits the selected atoms by least squares and stops when the residual
/// drops to `residual_tol` or `max_sparsity` atoms are in use. The returned
/// code is zero outside the support and D x is the orthogonal projection of y
/// onto the selected atoms.
OmpResult omp(const Eigen::Ref<const Eigen::VectorXd>& y, const Dictionary& d,
              const OmpConfig& cfg);

/// Column-wise omp(). Columns are independent, so the result does not depend
/// on `threads`.
CoefficientMatrix omp_batch(const SignalMatrix& y, const Dictionary& d,
                            const OmpConfig& cfg, int threads = 1);

double soft_threshold(double x, double lambda);
double hard_threshold(double x, double lambda);
double en_prox(double x, double lambda, double gamma);

Eigen::MatrixXd soft_threshold(const Eigen::MatrixXd& x, double lambda);
// Keeps entries with |x| > lambda, zeroes the rest.
Eigen::MatrixXd hard_threshold(const Eigen::MatrixXd& x, double lambda);
// Proximal map of lambda * (|u| + gamma/2 u^2): Soft(x, lambda) / (1 + lambda gamma).
Eigen::MatrixXd en_prox(const Eigen::MatrixXd& x, double lambda, double gamma);

struct EnConfig {
  double lambda = 0.1;
  double gamma = 1.0;
  double rel_change_tol = 1e-6;
  int max_iters = 500;
};

/// 1/2 ||Y - D X||_F^2 + lambda (||X||_1 + gamma/2 ||X||_F^2), entrywise l1.
double en_objective(const SignalMatrix& y, const Dictionary& d,
                    const CoefficientMatrix& x, double lambda, double gamma);

struct EnResult {
  CoefficientMatrix x;
  SolveTrace trace;
  double step = 0.0;  // mu = 1 / ||D^T D||_2
};

/// Proximal-gradient elastic-net coding of all columns at once, started from
/// `x_init`. Iterates
///   X <- en_prox(X - mu D^T (D X - Y), mu lambda, gamma)
/// until ||X - X_prev||_F / ||X_prev||_F <= rel_change_tol or max_iters.
///
/// Throws NonFinite if any iterate entry exceeds 1e12 in magnitude.
EnResult en_sparse_code(const SignalMatrix& y, const Dictionary& d,
                        const EnConfig& cfg, const CoefficientMatrix& x_init);
EnResult en_sparse_code(const SignalMatrix& y, const Dictionary& d,
                        const EnConfig& cfg);

void validate(const OmpConfig& cfg, const Dictionary& d);
void validate(const EnConfig& cfg);

}  // namespace corrdict
