#include "corrdict/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace corrdict {

DictionaryDistanceReport dictionary_distance(const Dictionary& d_true,
                                             const Dictionary& d_learned,
                                             double recovery_threshold) {
  if (d_true.n_dim() != d_learned.n_dim()) {
    throw DimensionMismatch("dictionary_distance: atom lengths differ (" +
                            std::to_string(d_true.n_dim()) + " vs " +
                            std::to_string(d_learned.n_dim()) + ")");
  }
  if (d_learned.n_atoms() == 0) {
    throw DimensionMismatch("dictionary_distance: learned dictionary has no atoms");
  }
  DictionaryDistanceReport report;
  report.recovery_threshold = recovery_threshold;
  // For unit atoms 1 - |<a, b>| = min(||a - b||^2, ||a + b||^2) / 2; the
  // latter is exactly zero for identical or negated copies.
  auto atom_distance = [&](Eigen::Index j, Eigen::Index k) {
    const auto a = d_learned.atom(j);
    const auto b = d_true.atom(k);
    return 0.5 * std::min((a - b).squaredNorm(), (a + b).squaredNorm());
  };

  Eigen::Index recovered = 0;
  for (Eigen::Index k = 0; k < d_true.n_atoms(); ++k) {
    AtomMatch m{k, 0, atom_distance(0, k)};
    for (Eigen::Index j = 1; j < d_learned.n_atoms(); ++j) {
      const double dist = atom_distance(j, k);
      if (dist < m.distance) {
        m.distance = dist;
        m.learned_atom = j;
      }
    }
    if (m.distance < recovery_threshold) ++recovered;
    report.total_distance += m.distance;
    report.per_atom_best_match.push_back(m);
  }
  report.recovery_rate =
      d_true.n_atoms() ? static_cast<double>(recovered) / static_cast<double>(d_true.n_atoms())
                       : 0.0;
  return report;
}

CoherenceSummary coherence(const Dictionary& d) {
  CoherenceSummary s;
  const Eigen::Index k = d.n_atoms();
  if (k < 2) return s;
  const Eigen::MatrixXd g = d.atoms().transpose() * d.atoms();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = i + 1; j < k; ++j) {
      const double a = std::min(1.0, std::abs(g(i, j)));
      s.max_offdiag = std::max(s.max_offdiag, a);
      sum += a;
    }
  }
  s.mean_offdiag = sum / (0.5 * static_cast<double>(k) * static_cast<double>(k - 1));
  return s;
}

namespace {

std::vector<double> pairwise_distances(const Eigen::MatrixXd& m) {
  std::vector<double> out;
  const Eigen::Index l = m.cols();
  out.reserve(static_cast<std::size_t>(l * (l - 1) / 2));
  for (Eigen::Index i = 0; i < l; ++i) {
    for (Eigen::Index j = i + 1; j < l; ++j) {
      out.push_back((m.col(i) - m.col(j)).norm());
    }
  }
  return out;
}

}  // namespace

Consistency representation_consistency(const Eigen::MatrixXd& y,
                                       const Eigen::MatrixXd& x) {
  if (y.cols() != x.cols()) {
    throw DimensionMismatch("representation_consistency: signal and code counts differ");
  }
  const std::vector<double> a = pairwise_distances(y);
  const std::vector<double> b = pairwise_distances(x);
  Consistency out;
  if (a.size() < 2) {
    out.degenerate = true;
    return out;
  }
  const auto n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  // Constant distances up to rounding count as constant.
  const double eps_a = 1e-24 * n * std::max(1.0, ma * ma);
  const double eps_b = 1e-24 * n * std::max(1.0, mb * mb);
  if (saa <= eps_a || sbb <= eps_b) {
    out.degenerate = true;
    return out;
  }
  out.value = std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
  return out;
}

}  // namespace corrdict
