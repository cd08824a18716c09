#pragma once

#include <optional>
#include <vector>

#include "corrdict/model_core.hpp"

namespace corrdict {

// Elastic-net weights for the penalized row refit (see AtomUpdateOptions).
struct RowPenalty {
  double lambda = 0.0;
  double gamma = 0.0;
};

struct AtomUpdateOptions {
  // Refit row k of X on its support together with atom k. Off updates the
  // atom only, which can increase the residual.
  bool update_coefficients = true;
  // When set (and update_coefficients is on) the atom/row pair minimizes
  //   1/2 ||E_k^R - d x^T||^2 + lambda (||x||_1 + gamma/2 ||x||^2),  ||d|| = 1
  // by alternating d <- E x / ||E x|| and x <- en_prox(E^T d), started from the
  // current pair. Without a penalty this is the rank-1 SVD refit.
  std::optional<RowPenalty> penalty;
  double power_tol = 1e-10;
  int power_max_iters = 5000;
};

struct DictionaryUpdate {
  Dictionary dictionary;
  CoefficientMatrix coefficients;
  std::vector<Eigen::Index> reinitialized_atoms;
};

/// One sweep of atom-by-atom dictionary updates, k = 0..K-1 in order, each
/// update seeing the atoms already replaced.
///
/// For atom k the signals using it, S_k = {i : X(k,i) != 0}, define the
/// reduced error E_k^R = (Y - sum_{j != k} d_j x_j)[:, S_k]. The atom becomes
/// the dominant left singular vector of E_k^R and, with update_coefficients,
/// X(k, S_k) becomes sigma_1 v_1^T. Entries of X outside S_k are never touched,
/// so the support can only shrink. An atom used by no signal is replaced by
/// the normalized signal with the largest current residual.
///
/// Every updated atom is unit norm with its largest-magnitude entry >= 0.
DictionaryUpdate ksvd_update(const SignalMatrix& y, const Dictionary& d,
                             const CoefficientMatrix& x, bool update_coefficients);
DictionaryUpdate ksvd_update(const SignalMatrix& y, const Dictionary& d,
                             const CoefficientMatrix& x,
                             const AtomUpdateOptions& opts);

struct ClearingOptions {
  bool enabled = true;
  double max_coherence = 0.99;  // |d_j^T d_k| above this, j < k, replaces d_k
  Eigen::Index min_usage = 4;   // fewer nonzeros in row k replaces d_k
};

struct ClearedDictionary {
  Dictionary dictionary;
  std::vector<Eigen::Index> replaced;
};

/// Replaces atoms that nearly duplicate an earlier atom or that too few
/// signals use. Each replacement is the normalized signal with the largest
/// residual under (d, x), skipping zero signals and signals already taken.
ClearedDictionary clear_dictionary(const SignalMatrix& y, const Dictionary& d,
                                   const CoefficientMatrix& x,
                                   const ClearingOptions& opts);

struct SingularPair {
  Eigen::VectorXd u;  // unit norm
  double sigma = 0.0;
};

// Dominant left singular pair of e. Power iteration on e e^T started from
// `start`, stopping when the iterate moves by at most `tol`; a full SVD is used
// for three or fewer columns.
SingularPair dominant_singular_pair(const Eigen::MatrixXd& e,
                                    const Eigen::VectorXd& start, double tol,
                                    int max_iters);

}  // namespace corrdict
