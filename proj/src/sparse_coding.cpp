#include "corrdict/sparse_coding.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "corrdict/parallel.hpp"

namespace corrdict {
namespace {

constexpr double kDivergenceBound = 1e12;

}  // namespace

void validate(const OmpConfig& cfg, const Dictionary& d) {
  const auto cap = std::min(d.n_dim(), d.n_atoms());
  if (cfg.max_sparsity < 1 || cfg.max_sparsity > cap) {
    throw InvalidConfig("omp: sparsity " + std::to_string(cfg.max_sparsity) +
                        " must lie in [1, min(N, K)] = [1, " + std::to_string(cap) +
                        "]");
  }
  if (!(cfg.residual_tol >= 0.0)) {
    throw InvalidConfig("omp: residual tolerance must be >= 0");
  }
}

void validate(const EnConfig& cfg) {
  if (!(cfg.lambda > 0.0)) throw InvalidConfig("elastic net: lambda must be > 0");
  if (!(cfg.gamma >= 0.0)) throw InvalidConfig("elastic net: gamma must be >= 0");
  if (!(cfg.rel_change_tol > 0.0)) {
    throw InvalidConfig("elastic net: relative-change tolerance must be > 0");
  }
  if (cfg.max_iters < 1) throw InvalidConfig("elastic net: max_iters must be >= 1");
}

OmpResult omp(const Eigen::Ref<const Eigen::VectorXd>& y, const Dictionary& d,
              const OmpConfig& cfg) {
  validate(cfg, d);
  if (y.size() != d.n_dim()) {
    throw DimensionMismatch("omp: signal length " + std::to_string(y.size()) +
                            " differs from atom length " + std::to_string(d.n_dim()));
  }
  if (!y.allFinite()) throw NonFinite("omp: signal contains non-finite entries");

  const Eigen::MatrixXd& atoms = d.atoms();
  OmpResult out;
  out.x = Eigen::VectorXd::Zero(d.n_atoms());

  Eigen::VectorXd residual = y;
  double rnorm = residual.norm();
  std::vector<bool> selected(static_cast<std::size_t>(d.n_atoms()), false);
  Eigen::VectorXd coef;

  while (static_cast<int>(out.support.size()) < cfg.max_sparsity &&
         rnorm > cfg.residual_tol) {
    const Eigen::VectorXd corr = atoms.transpose() * residual;
    Eigen::Index best = -1;
    double best_abs = 0.0;
    for (Eigen::Index j = 0; j < corr.size(); ++j) {
      if (selected[static_cast<std::size_t>(j)]) continue;
      const double a = std::abs(corr(j));
      if (a > best_abs) {
        best_abs = a;
        best = j;
      }
    }
    // Residual orthogonal to every remaining atom: no atom can reduce it.
    if (best < 0 || best_abs <= 1e-14 * rnorm) break;

    selected[static_cast<std::size_t>(best)] = true;
    out.support.push_back(best);

    Eigen::MatrixXd sub(d.n_dim(), static_cast<Eigen::Index>(out.support.size()));
    for (std::size_t s = 0; s < out.support.size(); ++s) {
      sub.col(static_cast<Eigen::Index>(s)) = atoms.col(out.support[s]);
    }
    coef = sub.colPivHouseholderQr().solve(y);
    residual = y - sub * coef;
    rnorm = residual.norm();
    out.trace.residual_norm_per_iter.push_back(rnorm);
  }

  for (std::size_t s = 0; s < out.support.size(); ++s) {
    out.x(out.support[s]) = coef(static_cast<Eigen::Index>(s));
  }
  out.trace.iterations = static_cast<int>(out.support.size());
  return out;
}

CoefficientMatrix omp_batch(const SignalMatrix& y, const Dictionary& d,
                            const OmpConfig& cfg, int threads) {
  validate(cfg, d);
  if (y.rows() != d.n_dim()) {
    throw DimensionMismatch("omp_batch: signal rows differ from atom length");
  }
  CoefficientMatrix x(d.n_atoms(), y.cols());
  parallel_for(static_cast<std::size_t>(y.cols()), threads, [&](std::size_t i) {
    const auto col = static_cast<Eigen::Index>(i);
    x.col(col) = omp(y.col(col), d, cfg).x;
  });
  return x;
}

double soft_threshold(double x, double lambda) {
  const double mag = std::abs(x) - lambda;
  if (mag <= 0.0) return 0.0;
  return std::copysign(mag, x);
}

double hard_threshold(double x, double lambda) {
  return std::abs(x) > lambda ? x : 0.0;
}

double en_prox(double x, double lambda, double gamma) {
  return soft_threshold(x, lambda) / (1.0 + lambda * gamma);
}

Eigen::MatrixXd soft_threshold(const Eigen::MatrixXd& x, double lambda) {
  return x.unaryExpr([lambda](double v) { return soft_threshold(v, lambda); });
}

Eigen::MatrixXd hard_threshold(const Eigen::MatrixXd& x, double lambda) {
  return x.unaryExpr([lambda](double v) { return hard_threshold(v, lambda); });
}

Eigen::MatrixXd en_prox(const Eigen::MatrixXd& x, double lambda, double gamma) {
  return x.unaryExpr([lambda, gamma](double v) { return en_prox(v, lambda, gamma); });
}

double en_objective(const SignalMatrix& y, const Dictionary& d,
                    const CoefficientMatrix& x, double lambda, double gamma) {
  check_model_dims(y, d, x);
  const double fit = 0.5 * (y - d.atoms() * x).squaredNorm();
  const double l1 = x.cwiseAbs().sum();
  const double l2 = x.squaredNorm();
  return fit + lambda * (l1 + 0.5 * gamma * l2);
}

EnResult en_sparse_code(const SignalMatrix& y, const Dictionary& d,
                        const EnConfig& cfg) {
  return en_sparse_code(y, d, cfg, CoefficientMatrix::Zero(d.n_atoms(), y.cols()));
}

EnResult en_sparse_code(const SignalMatrix& y, const Dictionary& d,
                        const EnConfig& cfg, const CoefficientMatrix& x_init) {
  validate(cfg);
  check_model_dims(y, d, x_init);
  require_finite(y, "signals");
  require_finite(x_init, "warm start");

  const Eigen::MatrixXd dtd = gram(d);
  const Eigen::MatrixXd dty = d.atoms().transpose() * y;
  EnResult out;
  out.step = 1.0 / spectral_norm(dtd);
  const double threshold = out.step * cfg.lambda;

  out.x = x_init;
  out.trace.initial_objective = en_objective(y, d, out.x, cfg.lambda, cfg.gamma);

  for (int it = 0; it < cfg.max_iters; ++it) {
    const CoefficientMatrix prev = out.x;
    out.x = en_prox(prev - out.step * (dtd * prev - dty), threshold, cfg.gamma);
    if (!out.x.allFinite() || out.x.cwiseAbs().maxCoeff() > kDivergenceBound) {
      throw NonFinite("elastic-net coding diverged at iteration " +
                      std::to_string(it + 1));
    }

    const double prev_norm = prev.norm();
    const double delta = (out.x - prev).norm();
    double xi;
    if (prev_norm > 0.0) {
      xi = delta / prev_norm;
    } else {
      xi = delta == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    }

    const Eigen::MatrixXd residual = y - d.atoms() * out.x;
    const double rsq = residual.squaredNorm();
    out.trace.residual_norm_per_iter.push_back(std::sqrt(rsq));
    out.trace.objective_per_iter.push_back(
        0.5 * rsq +
        cfg.lambda * (out.x.cwiseAbs().sum() + 0.5 * cfg.gamma * out.x.squaredNorm()));
    out.trace.rel_change_per_iter.push_back(xi);
    out.trace.iterations = it + 1;
    if (xi <= cfg.rel_change_tol) break;
  }
  return out;
}

}  // namespace corrdict
