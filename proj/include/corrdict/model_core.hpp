#pragma once

#include <Eigen/Dense>

#include "corrdict/errors.hpp"

namespace corrdict {

// Signals are the columns of an N x L matrix, codes the columns of a K x L
// matrix. Both are plain dense matrices; only the dictionary carries an
// invariant worth a dedicated type.
using SignalMatrix = Eigen::MatrixXd;
using CoefficientMatrix = Eigen::MatrixXd;
using GramMatrix = Eigen::MatrixXd;

inline constexpr double kUnitNormTolerance = 1e-9;
inline constexpr double kZeroColumnNorm = 1e-14;

/// N x K matrix of unit-norm atoms. Construction validates the invariant;
/// use normalize_columns() to build one from arbitrary nonzero columns.
class Dictionary {
 public:
  Dictionary() = default;
  explicit Dictionary(Eigen::MatrixXd atoms);

  const Eigen::MatrixXd& atoms() const { return atoms_; }
  Eigen::Index n_dim() const { return atoms_.rows(); }
  Eigen::Index n_atoms() const { return atoms_.cols(); }
  auto atom(Eigen::Index k) const { return atoms_.col(k); }

  // Replaces one atom; the new column is normalized and must be nonzero.
  void set_atom(Eigen::Index k, const Eigen::Ref<const Eigen::VectorXd>& v);

 private:
  Eigen::MatrixXd atoms_;
};

Dictionary normalize_columns(const Eigen::MatrixXd& m);

GramMatrix gram(const Dictionary& d);

/// Centers each column to zero mean and scales it to unit population
/// variance. Constant columns become zero.
SignalMatrix standardize_columns(const SignalMatrix& y);

/// ||Y - D X||_F
double reconstruction_error(const SignalMatrix& y, const Dictionary& d,
                            const CoefficientMatrix& x);

struct PowerIterationOptions {
  double tol = 1e-8;
  int max_iters = 1000;
};

/// Largest eigenvalue of a symmetric PSD matrix by power iteration. Used as
/// the Lipschitz constant of the least-squares gradient, ||D^T D||_2.
double spectral_norm(const GramMatrix& g, PowerIterationOptions opts = {});

bool all_finite(const Eigen::MatrixXd& m);

void require_finite(const Eigen::MatrixXd& m, const char* what);

// Throws DimensionMismatch unless Y is N x L, D is N x K and X is K x L.
void check_model_dims(const SignalMatrix& y, const Dictionary& d,
                      const CoefficientMatrix& x);

}  // namespace corrdict
