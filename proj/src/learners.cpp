#include "corrdict/learners.hpp"

#include <cmath>
#include <string>

#include "corrdict/metrics.hpp"
#include "corrdict/rng.hpp"

namespace corrdict {

std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::kKsvd: return "ksvd";
    case Algorithm::kEnDl: return "en_dl";
    case Algorithm::kGroupedKsvd: return "grouped_ksvd";
  }
  return "unknown";
}

Algorithm parse_algorithm(std::string_view name) {
  if (name == "ksvd") return Algorithm::kKsvd;
  if (name == "en_dl") return Algorithm::kEnDl;
  if (name == "grouped_ksvd") return Algorithm::kGroupedKsvd;
  throw InvalidConfig("unknown algorithm '" + std::string(name) +
                      "' (expected ksvd, en_dl or grouped_ksvd)");
}

void validate(const LearnerConfig& cfg, const SignalMatrix& y) {
  if (cfg.n_atoms < 1) throw InvalidConfig("number of atoms must be >= 1");
  if (y.rows() < 1 || y.cols() < 1) throw InvalidConfig("signal matrix is empty");
  const auto cap = std::min<Eigen::Index>(y.rows(), cfg.n_atoms);
  if (cfg.omp.max_sparsity < 1 || cfg.omp.max_sparsity > cap) {
    throw InvalidConfig("sparsity " + std::to_string(cfg.omp.max_sparsity) +
                        " must lie in [1, min(N, K)] = [1, " + std::to_string(cap) + "]");
  }
  if (!(cfg.omp.residual_tol >= 0.0)) {
    throw InvalidConfig("omp residual tolerance must be >= 0");
  }
  if (cfg.algorithm == Algorithm::kEnDl) validate(cfg.en);
  if (cfg.algorithm == Algorithm::kGroupedKsvd &&
      !(cfg.group_threshold > 0.0 && cfg.group_threshold < 1.0)) {
    throw InvalidConfig("group threshold must lie in (0, 1)");
  }
  if (cfg.max_outer_iters < 0) throw InvalidConfig("max outer iterations must be >= 0");
  if (!(cfg.outer_rel_tol > 0.0)) throw InvalidConfig("outer tolerance must be > 0");
}

Dictionary init_dictionary(const SignalMatrix& y, Eigen::Index k, std::uint64_t seed) {
  if (k > y.cols()) {
    throw NotEnoughSignals("cannot draw " + std::to_string(k) + " atoms from " +
                           std::to_string(y.cols()) + " signals");
  }
  std::vector<Eigen::Index> candidates;
  for (Eigen::Index i = 0; i < y.cols(); ++i) {
    if (y.col(i).norm() >= kZeroColumnNorm) candidates.push_back(i);
  }
  if (static_cast<Eigen::Index>(candidates.size()) < k) {
    throw NotEnoughSignals("only " + std::to_string(candidates.size()) +
                           " nonzero signals for " + std::to_string(k) + " atoms");
  }
  Rng rng = Rng::substream(seed, "init");
  const auto picks = rng.sample_without_replacement(candidates.size(),
                                                    static_cast<std::size_t>(k));
  Eigen::MatrixXd atoms(y.rows(), k);
  for (Eigen::Index j = 0; j < k; ++j) {
    atoms.col(j) = y.col(candidates[picks[static_cast<std::size_t>(j)]]);
  }
  return normalize_columns(atoms);
}

Eigen::MatrixXd build_group_matrix(const Dictionary& d, double lambda_g) {
  if (!(lambda_g > 0.0 && lambda_g < 1.0)) {
    throw InvalidConfig("group threshold must lie in (0, 1)");
  }
  Eigen::MatrixXd g = hard_threshold(gram(d), lambda_g);
  g.diagonal().setOnes();
  return g;
}

Rescaled rescale_coefficients(const SignalMatrix& y, const Dictionary& d,
                              const CoefficientMatrix& x_star) {
  return rescale_coefficients(y, d, x_star,
                              std::vector<bool>(static_cast<std::size_t>(y.cols()), true));
}

Rescaled rescale_coefficients(const SignalMatrix& y, const Dictionary& d,
                              const CoefficientMatrix& x_star,
                              const std::vector<bool>& mask) {
  check_model_dims(y, d, x_star);
  if (mask.size() != static_cast<std::size_t>(y.cols())) {
    throw DimensionMismatch("rescale_coefficients: mask length differs from signal count");
  }
  Rescaled out{x_star, Eigen::VectorXd::Ones(y.cols())};
  for (Eigen::Index i = 0; i < y.cols(); ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    const Eigen::VectorXd dx = d.atoms() * x_star.col(i);
    const double denom = dx.squaredNorm();
    if (denom == 0.0) continue;
    const double s = y.col(i).dot(dx) / denom;
    out.scales(i) = s;
    out.coefficients.col(i) = s * x_star.col(i);
  }
  return out;
}

namespace {

class IterationLog {
 public:
  IterationLog(const SignalMatrix& y, const LearnerConfig& cfg, const LearnOptions& opts,
               LearnResult& result)
      : y_(y), cfg_(cfg), opts_(opts), result_(result) {}

  // Records one outer iteration; returns true when the outer loop should stop.
  bool record(int iter, std::optional<double> objective) {
    IterationRecord rec;
    rec.iter = iter;
    rec.recon_error = reconstruction_error(y_, result_.dictionary, result_.coefficients);
    rec.objective = objective;
    rec.max_coherence = coherence(result_.dictionary).max_offdiag;
    if (opts_.reference) {
      rec.dict_distance = dictionary_distance(*opts_.reference, result_.dictionary,
                                              opts_.recovery_threshold)
                              .total_distance;
    }
    result_.history.push_back(rec);
    if (opts_.observer) opts_.observer(rec, result_.dictionary, result_.coefficients);

    if (!std::isfinite(rec.recon_error)) {
      throw NonFinite("reconstruction error became non-finite at iteration " +
                      std::to_string(iter));
    }
    if (rec.recon_error == 0.0) return true;
    const bool converged =
        has_prev_ && std::abs(prev_ - rec.recon_error) < cfg_.outer_rel_tol * prev_;
    prev_ = rec.recon_error;
    has_prev_ = true;
    return converged;
  }

 private:
  const SignalMatrix& y_;
  const LearnerConfig& cfg_;
  const LearnOptions& opts_;
  LearnResult& result_;
  bool has_prev_ = false;
  double prev_ = 0.0;
};

LearnResult start(const SignalMatrix& y, const LearnerConfig& cfg, const LearnOptions& opts) {
  validate(cfg, y);
  require_finite(y, "signals");
  LearnResult r;
  if (opts.initial_dictionary) {
    const Dictionary& d0 = *opts.initial_dictionary;
    if (d0.n_dim() != y.rows() || d0.n_atoms() != cfg.n_atoms) {
      throw DimensionMismatch("initial dictionary is " + std::to_string(d0.n_dim()) + " x " +
                              std::to_string(d0.n_atoms()) + ", expected " +
                              std::to_string(y.rows()) + " x " + std::to_string(cfg.n_atoms));
    }
    r.dictionary = d0;
  } else {
    r.dictionary = init_dictionary(y, cfg.n_atoms, cfg.rng_seed);
  }
  r.coefficients = CoefficientMatrix::Zero(cfg.n_atoms, y.cols());
  return r;
}

}  // namespace

LearnResult learn_ksvd(const SignalMatrix& y, const LearnerConfig& cfg,
                       const LearnOptions& opts) {
  LearnResult r = start(y, cfg, opts);
  IterationLog log(y, cfg, opts, r);
  for (int it = 1; it <= cfg.max_outer_iters; ++it) {
    if (it > 1) {
      r.dictionary =
          clear_dictionary(y, r.dictionary, r.coefficients, cfg.clearing).dictionary;
    }
    const CoefficientMatrix x = omp_batch(y, r.dictionary, cfg.omp, cfg.threads);
    DictionaryUpdate upd = ksvd_update(y, r.dictionary, x, true);
    r.dictionary = std::move(upd.dictionary);
    r.coefficients = std::move(upd.coefficients);
    if (log.record(it, std::nullopt)) break;
  }
  return r;
}

LearnResult learn_en_dl(const SignalMatrix& y, const LearnerConfig& cfg,
                        const LearnOptions& opts) {
  LearnResult r = start(y, cfg, opts);
  IterationLog log(y, cfg, opts, r);
  AtomUpdateOptions upd_opts;
  upd_opts.penalty = RowPenalty{cfg.en.lambda, cfg.en.gamma};
  for (int it = 1; it <= cfg.max_outer_iters; ++it) {
    // OMP seeds the first pass; afterwards the previous codes are the warm start.
    const CoefficientMatrix warm =
        it == 1 ? omp_batch(y, r.dictionary, cfg.omp, cfg.threads) : r.coefficients;
    EnResult coded = en_sparse_code(y, r.dictionary, cfg.en, warm);
    DictionaryUpdate upd = ksvd_update(y, r.dictionary, coded.x, upd_opts);
    r.dictionary = std::move(upd.dictionary);
    r.coefficients = std::move(upd.coefficients);
    const double obj =
        en_objective(y, r.dictionary, r.coefficients, cfg.en.lambda, cfg.en.gamma);
    if (log.record(it, obj)) break;
  }
  return r;
}

LearnResult learn_grouped_ksvd(const SignalMatrix& y, const LearnerConfig& cfg,
                               const LearnOptions& opts) {
  LearnResult r = start(y, cfg, opts);
  IterationLog log(y, cfg, opts, r);
  for (int it = 1; it <= cfg.max_outer_iters; ++it) {
    if (it > 1) {
      r.dictionary =
          clear_dictionary(y, r.dictionary, r.coefficients, cfg.clearing).dictionary;
    }
    const Eigen::MatrixXd g = build_group_matrix(r.dictionary, cfg.group_threshold);
    const CoefficientMatrix x = omp_batch(y, r.dictionary, cfg.omp, cfg.threads);
    const CoefficientMatrix grouped = g * x;

    // OMP codes are least-squares optimal on their support, so their scale is
    // already 1; only columns the grouping actually changed are rescaled.
    std::vector<bool> changed(static_cast<std::size_t>(x.cols()), false);
    for (Eigen::Index i = 0; i < x.cols(); ++i) {
      changed[static_cast<std::size_t>(i)] = grouped.col(i) != x.col(i);
    }
    const Rescaled scaled = rescale_coefficients(y, r.dictionary, grouped, changed);

    DictionaryUpdate upd = ksvd_update(y, r.dictionary, scaled.coefficients, true);
    r.dictionary = std::move(upd.dictionary);
    r.coefficients = std::move(upd.coefficients);
    if (log.record(it, std::nullopt)) break;
  }
  return r;
}

LearnResult learn(const SignalMatrix& y, const LearnerConfig& cfg,
                  const LearnOptions& opts) {
  switch (cfg.algorithm) {
    case Algorithm::kKsvd: return learn_ksvd(y, cfg, opts);
    case Algorithm::kEnDl: return learn_en_dl(y, cfg, opts);
    case Algorithm::kGroupedKsvd: return learn_grouped_ksvd(y, cfg, opts);
  }
  throw InvalidConfig("unknown algorithm");
}

}  // namespace corrdict
