#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "corrdict/dictionary_update.hpp"
#include "corrdict/model_core.hpp"
#include "corrdict/sparse_coding.hpp"

namespace corrdict {

enum class Algorithm { kKsvd, kEnDl, kGroupedKsvd };

std::string_view to_string(Algorithm a);
Algorithm parse_algorithm(std::string_view name);  // "ksvd" | "en_dl" | "grouped_ksvd"

struct LearnerConfig {
  Eigen::Index n_atoms = 10;
  Algorithm algorithm = Algorithm::kKsvd;
  OmpConfig omp{3, 1e-9};
  EnConfig en;                   // en_dl only
  double group_threshold = 0.7;  // grouped_ksvd only: hard threshold on |D^T D|
  ClearingOptions clearing;      // ksvd and grouped_ksvd, before each coding pass
  int max_outer_iters = 100;
  double outer_rel_tol = 1e-4;
  std::uint64_t rng_seed = 0;
  int threads = 1;
};

void validate(const LearnerConfig& cfg, const SignalMatrix& y);

struct IterationRecord {
  int iter = 0;  // 1-based
  double recon_error = 0.0;
  std::optional<double> objective;      // en_dl
  std::optional<double> dict_distance;  // when a reference dictionary is given
  double max_coherence = 0.0;           // of the dictionary after this iteration
};

struct LearnResult {
  Dictionary dictionary;
  CoefficientMatrix coefficients;
  std::vector<IterationRecord> history;
};

// Observer called after every outer iteration with the current state.
using IterationObserver =
    std::function<void(const IterationRecord&, const Dictionary&, const CoefficientMatrix&)>;

struct LearnOptions {
  const Dictionary* reference = nullptr;  // ground truth for history distances
  // Starting dictionary instead of init_dictionary(); must be N x n_atoms.
  const Dictionary* initial_dictionary = nullptr;
  double recovery_threshold = 0.01;
  IterationObserver observer;
};

/// K distinct nonzero columns of Y, sampled with the "init" sub-stream of
/// `seed` and normalized. All-zero columns are never picked.
Dictionary init_dictionary(const SignalMatrix& y, Eigen::Index k, std::uint64_t seed);

/// Hard-thresholded Gram matrix: G = HT(D^T D, lambda_g). Unit diagonal.
Eigen::MatrixXd build_group_matrix(const Dictionary& d, double lambda_g);

struct Rescaled {
  CoefficientMatrix coefficients;
  Eigen::VectorXd scales;  // diagonal of Sigma, one entry per signal
};

/// Per-signal least-squares scale of a fixed code direction:
///   s_i = y_i^T D x_i / ||D x_i||^2,  column i of the output = s_i x_i.
/// Columns with D x_i == 0 keep s_i = 1.
Rescaled rescale_coefficients(const SignalMatrix& y, const Dictionary& d,
                              const CoefficientMatrix& x_star);
// Only columns with mask[i] set are rescaled; the others get s_i = 1.
Rescaled rescale_coefficients(const SignalMatrix& y, const Dictionary& d,
                              const CoefficientMatrix& x_star,
                              const std::vector<bool>& mask);

LearnResult learn_ksvd(const SignalMatrix& y, const LearnerConfig& cfg,
                       const LearnOptions& opts = {});
LearnResult learn_en_dl(const SignalMatrix& y, const LearnerConfig& cfg,
                        const LearnOptions& opts = {});
LearnResult learn_grouped_ksvd(const SignalMatrix& y, const LearnerConfig& cfg,
                               const LearnOptions& opts = {});

// Dispatches on cfg.algorithm.
LearnResult learn(const SignalMatrix& y, const LearnerConfig& cfg,
                  const LearnOptions& opts = {});

}  // namespace corrdict
