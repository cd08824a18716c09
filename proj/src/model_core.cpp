#include "corrdict/model_core.hpp"

#include <cmath>
#include <string>

#include "corrdict/rng.hpp"

namespace corrdict {

Dictionary::Dictionary(Eigen::MatrixXd atoms) : atoms_(std::move(atoms)) {
  require_finite(atoms_, "dictionary");
  for (Eigen::Index k = 0; k < atoms_.cols(); ++k) {
    const double n = atoms_.col(k).norm();
    if (std::abs(n - 1.0) > kUnitNormTolerance) {
      throw InvalidConfig("dictionary atom " + std::to_string(k) +
                          " is not unit norm (norm " + std::to_string(n) + ")");
    }
  }
}

void Dictionary::set_atom(Eigen::Index k,
                          const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (v.size() != atoms_.rows()) {
    throw DimensionMismatch("set_atom: atom length differs from dictionary");
  }
  const double n = v.norm();
  if (!(n >= kZeroColumnNorm)) {
    throw ZeroColumn("set_atom: zero atom");
  }
  atoms_.col(k) = v / n;
}

Dictionary normalize_columns(const Eigen::MatrixXd& m) {
  require_finite(m, "normalize_columns input");
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (Eigen::Index k = 0; k < m.cols(); ++k) {
    const double n = m.col(k).norm();
    if (n < kZeroColumnNorm) {
      throw ZeroColumn("column " + std::to_string(k) + " has zero norm");
    }
    out.col(k) = m.col(k) / n;
  }
  return Dictionary(std::move(out));
}

SignalMatrix standardize_columns(const SignalMatrix& y) {
  require_finite(y, "standardize_columns input");
  SignalMatrix out = y.rowwise() - y.colwise().mean();
  if (y.rows() == 0) return out;
  for (Eigen::Index i = 0; i < out.cols(); ++i) {
    const double sd = std::sqrt(out.col(i).squaredNorm() / static_cast<double>(out.rows()));
    if (sd > kZeroColumnNorm) {
      out.col(i) /= sd;
    } else {
      out.col(i).setZero();
    }
  }
  return out;
}

GramMatrix gram(const Dictionary& d) {
  GramMatrix g = d.atoms().transpose() * d.atoms();
  // Symmetrize explicitly so downstream thresholding sees g(i,j) == g(j,i).
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < g.cols(); ++j) {
      g(j, i) = g(i, j);
    }
  }
  return g;
}

void check_model_dims(const SignalMatrix& y, const Dictionary& d,
                      const CoefficientMatrix& x) {
  if (y.rows() != d.n_dim() || x.rows() != d.n_atoms() || y.cols() != x.cols()) {
    throw DimensionMismatch(
        "expected Y (N x L), D (N x K), X (K x L); got Y " +
        std::to_string(y.rows()) + "x" + std::to_string(y.cols()) + ", D " +
        std::to_string(d.n_dim()) + "x" + std::to_string(d.n_atoms()) + ", X " +
        std::to_string(x.rows()) + "x" + std::to_string(x.cols()));
  }
}

double reconstruction_error(const SignalMatrix& y, const Dictionary& d,
                            const CoefficientMatrix& x) {
  check_model_dims(y, d, x);
  return (y - d.atoms() * x).norm();
}

double spectral_norm(const GramMatrix& g, PowerIterationOptions opts) {
  if (g.rows() != g.cols()) {
    throw DimensionMismatch("spectral_norm: matrix is not square");
  }
  if (g.rows() == 0) return 0.0;

  // A fixed pseudo-random start avoids being orthogonal to the dominant
  // eigenvector for structured inputs (e.g. the ones vector for [1 -1; -1 1]).
  Rng rng(0x5eed5eedULL);
  Eigen::VectorXd v(g.rows());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.normal();
  v.normalize();

  double estimate = v.dot(g * v);
  for (int it = 0; it < opts.max_iters; ++it) {
    Eigen::VectorXd w = g * v;
    const double wn = w.norm();
    if (wn == 0.0) return 0.0;
    v = w / wn;
    const double next = v.dot(g * v);
    if (std::abs(next - estimate) <= opts.tol * std::abs(next)) {
      return next;
    }
    estimate = next;
  }
  throw NonConvergence("spectral_norm: power iteration did not converge in " +
                       std::to_string(opts.max_iters) + " iterations");
}

bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

void require_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) {
    throw NonFinite(std::string(what) + " contains non-finite entries");
  }
}

}  // namespace corrdict
