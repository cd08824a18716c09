#include "corrdict/dictionary_update.hpp"

#include <cmath>

#include <Eigen/SVD>

#include "corrdict/sparse_coding.hpp"

namespace corrdict {
namespace {

// Flip so the entry of largest magnitude (first on ties) is nonnegative.
bool needs_flip(const Eigen::VectorXd& u) {
  Eigen::Index idx = 0;
  double best = -1.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double a = std::abs(u(i));
    if (a > best) {
      best = a;
      idx = i;
    }
  }
  return u.size() > 0 && u(idx) < 0.0;
}

double penalized_rank_one_objective(const Eigen::MatrixXd& e,
                                    const Eigen::VectorXd& d,
                                    const Eigen::RowVectorXd& row,
                                    const RowPenalty& p) {
  return 0.5 * (e - d * row).squaredNorm() +
         p.lambda * (row.cwiseAbs().sum() + 0.5 * p.gamma * row.squaredNorm());
}

}  // namespace

SingularPair dominant_singular_pair(const Eigen::MatrixXd& e,
                                    const Eigen::VectorXd& start, double tol,
                                    int max_iters) {
  SingularPair out;
  if (e.cols() <= 3) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(e, Eigen::ComputeThinU);
    out.sigma = svd.singularValues()(0);
    out.u = svd.matrixU().col(0);
    if (out.sigma == 0.0) out.u = start.normalized();
    return out;
  }

  // Power iteration on the N x N matrix e e^T; stops once the unit vector
  // itself moves by at most tol.
  const Eigen::MatrixXd c = e * e.transpose();
  Eigen::VectorXd u = start.normalized();
  Eigen::VectorXd cu = c * u;
  if (cu.norm() == 0.0) {
    // Start orthogonal to the range of e; restart from its largest column.
    Eigen::Index best = 0;
    e.colwise().squaredNorm().maxCoeff(&best);
    if (e.col(best).norm() == 0.0) {
      out.u = u;
      out.sigma = 0.0;
      return out;
    }
    u = e.col(best).normalized();
    cu = c * u;
  }
  for (int it = 0; it < max_iters; ++it) {
    const double nn = cu.norm();
    if (nn == 0.0) break;
    const Eigen::VectorXd next = cu / nn;
    const double moved = (next - u).norm();
    u = next;
    cu = c * u;
    if (moved <= tol) break;
  }
  out.u = u;
  out.sigma = (e.transpose() * u).norm();
  return out;
}

DictionaryUpdate ksvd_update(const SignalMatrix& y, const Dictionary& d,
                             const CoefficientMatrix& x, bool update_coefficients) {
  AtomUpdateOptions opts;
  opts.update_coefficients = update_coefficients;
  return ksvd_update(y, d, x, opts);
}

DictionaryUpdate ksvd_update(const SignalMatrix& y, const Dictionary& d,
                             const CoefficientMatrix& x,
                             const AtomUpdateOptions& opts) {
  check_model_dims(y, d, x);
  const Eigen::Index n = d.n_dim();
  const Eigen::Index k_atoms = d.n_atoms();
  const Eigen::Index l = y.cols();

  DictionaryUpdate out{d, x, {}};
  Eigen::MatrixXd atoms = d.atoms();
  CoefficientMatrix& coef = out.coefficients;
  Eigen::MatrixXd residual = y - atoms * coef;
  std::vector<bool> used_for_reinit(static_cast<std::size_t>(l), false);

  std::vector<Eigen::Index> usage;
  usage.reserve(static_cast<std::size_t>(l));

  for (Eigen::Index k = 0; k < k_atoms; ++k) {
    usage.clear();
    for (Eigen::Index i = 0; i < l; ++i) {
      if (coef(k, i) != 0.0) usage.push_back(i);
    }

    if (usage.empty()) {
      // Dead atom: take the worst-represented signal not already used this sweep.
      Eigen::Index best = -1;
      double best_err = -1.0;
      for (Eigen::Index i = 0; i < l; ++i) {
        if (used_for_reinit[static_cast<std::size_t>(i)]) continue;
        if (y.col(i).norm() < kZeroColumnNorm) continue;
        const double err = residual.col(i).squaredNorm();
        if (err > best_err) {
          best_err = err;
          best = i;
        }
      }
      if (best >= 0) {
        used_for_reinit[static_cast<std::size_t>(best)] = true;
        atoms.col(k) = y.col(best).normalized();
        out.reinitialized_atoms.push_back(k);
      }
      continue;
    }

    const auto m = static_cast<Eigen::Index>(usage.size());
    Eigen::MatrixXd reduced(n, m);
    Eigen::RowVectorXd row(m);
    for (Eigen::Index s = 0; s < m; ++s) {
      const Eigen::Index i = usage[static_cast<std::size_t>(s)];
      row(s) = coef(k, i);
      reduced.col(s) = residual.col(i) + atoms.col(k) * row(s);
    }

    Eigen::VectorXd atom;
    Eigen::RowVectorXd new_row = row;
    if (opts.update_coefficients && opts.penalty) {
      const RowPenalty& p = *opts.penalty;
      atom = atoms.col(k);
      double obj = penalized_rank_one_objective(reduced, atom, row, p);
      for (int it = 0; it < opts.power_max_iters; ++it) {
        const Eigen::VectorXd ex = reduced * new_row.transpose();
        const double exn = ex.norm();
        if (exn == 0.0) break;
        atom = ex / exn;
        new_row = (reduced.transpose() * atom).transpose().unaryExpr(
            [&p](double v) { return en_prox(v, p.lambda, p.gamma); });
        const double next = penalized_rank_one_objective(reduced, atom, new_row, p);
        const bool done = std::abs(obj - next) <= opts.power_tol * std::abs(next);
        obj = next;
        if (done) break;
      }
    } else {
      const SingularPair sp =
          dominant_singular_pair(reduced, atoms.col(k), opts.power_tol,
                                 opts.power_max_iters);
      atom = sp.u;
      if (opts.update_coefficients) new_row = atom.transpose() * reduced;
    }

    if (needs_flip(atom)) {
      atom = -atom;
      if (opts.update_coefficients) new_row = -new_row;
    }
    atom.normalize();
    atoms.col(k) = atom;
    for (Eigen::Index s = 0; s < m; ++s) {
      const Eigen::Index i = usage[static_cast<std::size_t>(s)];
      coef(k, i) = new_row(s);
      residual.col(i) = reduced.col(s) - atom * new_row(s);
    }
  }

  out.dictionary = Dictionary(std::move(atoms));
  return out;
}

ClearedDictionary clear_dictionary(const SignalMatrix& y, const Dictionary& d,
                                   const CoefficientMatrix& x,
                                   const ClearingOptions& opts) {
  check_model_dims(y, d, x);
  ClearedDictionary out{d, {}};
  if (!opts.enabled) return out;

  Eigen::MatrixXd atoms = d.atoms();
  Eigen::VectorXd err = (y - atoms * x).colwise().squaredNorm().transpose();
  for (Eigen::Index i = 0; i < y.cols(); ++i) {
    if (y.col(i).norm() < kZeroColumnNorm) err(i) = -1.0;
  }
  for (Eigen::Index k = 0; k < atoms.cols(); ++k) {
    bool replace = (x.row(k).array() != 0.0).count() < opts.min_usage;
    for (Eigen::Index j = 0; j < k && !replace; ++j) {
      replace = std::abs(atoms.col(j).dot(atoms.col(k))) > opts.max_coherence;
    }
    if (!replace) continue;
    Eigen::Index worst = 0;
    if (err.maxCoeff(&worst) < 0.0) break;
    atoms.col(k) = y.col(worst).normalized();
    err(worst) = -1.0;
    out.replaced.push_back(k);
  }
  if (!out.replaced.empty()) out.dictionary = Dictionary(std::move(atoms));
  return out;
}

}  // namespace corrdict
