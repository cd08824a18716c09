#pragma once

#include <vector>

#include "corrdict/model_core.hpp"

namespace corrdict {

struct AtomMatch {
  Eigen::Index true_atom = 0;
  Eigen::Index learned_atom = 0;
  double distance = 0.0;  // 1 - |<learned, true>|
};

struct DictionaryDistanceReport {
  double total_distance = 0.0;
  std::vector<AtomMatch> per_atom_best_match;
  double recovery_rate = 0.0;
  double recovery_threshold = 0.01;
};

/// For every true atom k, the learned atom j minimizing 1 - |d_j^T d0_k|
/// (lowest j on ties); the total sums these minima. Matching is per true atom,
/// so two true atoms may share a learned atom. The distance is evaluated as
/// min(||a - b||^2, ||a + b||^2) / 2, equal for unit atoms and exactly zero for
/// identical or sign-flipped copies. An atom counts as recovered when
/// its distance is below `recovery_threshold`.
DictionaryDistanceReport dictionary_distance(const Dictionary& d_true,
                                             const Dictionary& d_learned,
                                             double recovery_threshold = 0.01);

struct CoherenceSummary {
  double max_offdiag = 0.0;
  double mean_offdiag = 0.0;
};

CoherenceSummary coherence(const Dictionary& d);

struct Consistency {
  double value = 0.0;
  bool degenerate = false;  // one side has constant pairwise distances
};

/// Pearson correlation between the pairwise l2 distances of the signals and
/// those of their codes, over all column pairs.
Consistency representation_consistency(const Eigen::MatrixXd& y,
                                       const Eigen::MatrixXd& x);

}  // namespace corrdict
