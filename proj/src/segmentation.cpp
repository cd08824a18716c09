#include "corrdict/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <string>

#include "corrdict/parallel.hpp"
#include "corrdict/rng.hpp"

namespace corrdict {

void validate(const KMeansL1Config& cfg) {
  if (cfg.n_clusters < 2) throw InvalidConfig("k-means needs at least 2 clusters");
  if (cfg.n_restarts < 1) throw InvalidConfig("k-means needs at least 1 restart");
  if (cfg.max_iters < 1) throw InvalidConfig("k-means max_iters must be >= 1");
  if (!(cfg.tol >= 0.0)) throw InvalidConfig("k-means tolerance must be >= 0");
}

namespace {

double l1(const Eigen::Ref<const Eigen::VectorXd>& a,
          const Eigen::Ref<const Eigen::VectorXd>& b) {
  return (a - b).cwiseAbs().sum();
}

double median_of(std::vector<double>& v) {
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

Eigen::MatrixXd medians(const Eigen::MatrixXd& pts, const std::vector<std::int32_t>& labels,
                        int c, int threads) {
  Eigen::MatrixXd centers = Eigen::MatrixXd::Zero(pts.rows(), c);
  std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(c));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    members[static_cast<std::size_t>(labels[i])].push_back(static_cast<Eigen::Index>(i));
  }
  parallel_for(static_cast<std::size_t>(pts.rows()), threads, [&](std::size_t r) {
    const auto row = static_cast<Eigen::Index>(r);
    std::vector<double> buf;
    for (int k = 0; k < c; ++k) {
      const auto& m = members[static_cast<std::size_t>(k)];
      if (m.empty()) continue;
      buf.clear();
      for (auto i : m) buf.push_back(pts(row, i));
      centers(row, k) = median_of(buf);
    }
  });
  return centers;
}

struct RestartOutcome {
  std::vector<std::int32_t> labels;
  Eigen::MatrixXd centroids;
  double inertia = 0.0;
  std::vector<double> history;
  int reseeded = 0;
};

// Assigns each point to its nearest centroid (lowest index on ties); returns
// per-point distances.
std::vector<double> assign(const Eigen::MatrixXd& pts, const Eigen::MatrixXd& centers,
                           std::vector<std::int32_t>& labels, int threads) {
  std::vector<double> dist(static_cast<std::size_t>(pts.cols()));
  parallel_for(static_cast<std::size_t>(pts.cols()), threads, [&](std::size_t i) {
    const auto col = static_cast<Eigen::Index>(i);
    double best = l1(pts.col(col), centers.col(0));
    std::int32_t arg = 0;
    for (Eigen::Index k = 1; k < centers.cols(); ++k) {
      const double d = l1(pts.col(col), centers.col(k));
      if (d < best) {
        best = d;
        arg = static_cast<std::int32_t>(k);
      }
    }
    labels[i] = arg;
    dist[i] = best;
  });
  return dist;
}

// Moves the farthest point of a multi-member cluster into each empty cluster.
int reseed_empty(const Eigen::MatrixXd& pts, Eigen::MatrixXd& centers,
                 std::vector<std::int32_t>& labels, std::vector<double>& dist) {
  const int c = static_cast<int>(centers.cols());
  int reseeded = 0;
  for (int k = 0; k < c; ++k) {
    std::vector<std::int64_t> counts(static_cast<std::size_t>(c), 0);
    for (auto l : labels) ++counts[static_cast<std::size_t>(l)];
    if (counts[static_cast<std::size_t>(k)] > 0) continue;
    std::size_t far = labels.size();
    double far_d = -1.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (counts[static_cast<std::size_t>(labels[i])] < 2) continue;
      if (dist[i] > far_d) {
        far_d = dist[i];
        far = i;
      }
    }
    if (far == labels.size()) continue;
    labels[far] = k;
    dist[far] = 0.0;
    centers.col(k) = pts.col(static_cast<Eigen::Index>(far));
    ++reseeded;
  }
  return reseeded;
}

// Sorted values of one coordinate within one cluster, with prefix sums, so
// the l1 cost about the median of the cluster with one point added or removed
// is available in O(log m).
class SortedColumn {
 public:
  void assign(std::vector<double> v) {
    values_ = std::move(v);
    std::sort(values_.begin(), values_.end());
    rebuild();
  }
  void insert(double v) {
    values_.insert(std::upper_bound(values_.begin(), values_.end(), v), v);
    rebuild();
  }
  void erase(double v) {
    values_.erase(std::lower_bound(values_.begin(), values_.end(), v));
    rebuild();
  }
  double cost() const { return cost_with(values_.size(), [&](std::size_t k) { return prefix_[k]; }); }
  double cost_without(double v) const {
    const auto t = static_cast<std::size_t>(
        std::lower_bound(values_.begin(), values_.end(), v) - values_.begin());
    return cost_with(values_.size() - 1, [&](std::size_t k) {
      return k <= t ? prefix_[k] : prefix_[k + 1] - v;
    });
  }
  double cost_with_added(double v) const {
    const auto p = static_cast<std::size_t>(
        std::lower_bound(values_.begin(), values_.end(), v) - values_.begin());
    return cost_with(values_.size() + 1, [&](std::size_t k) {
      return k <= p ? prefix_[k] : prefix_[k - 1] + v;
    });
  }

 private:
  // Sum of the upper half minus the lower half of a sorted multiset of size
  // m, given the sum of its k smallest elements.
  template <typename SumSmallest>
  static double cost_with(std::size_t m, SumSmallest smallest) {
    const std::size_t h = m / 2;
    return (smallest(m) - smallest(m - h)) - smallest(h);
  }
  void rebuild() {
    prefix_.assign(values_.size() + 1, 0.0);
    for (std::size_t i = 0; i < values_.size(); ++i) prefix_[i + 1] = prefix_[i] + values_[i];
  }
  std::vector<double> values_;
  std::vector<double> prefix_;
};

// Moves single points between clusters while that lowers the total l1 cost
// about the cluster medians. Lloyd iterations stop at partitions where every
// point is nearest its own median, which need not be the best partition;
// exact transfers escape some of those. Returns the number of moves.
int refine_by_transfers(const Eigen::MatrixXd& pts, int c, std::vector<std::int32_t>& labels,
                        std::vector<double>& history) {
  const Eigen::Index dim = pts.rows();
  const auto n = static_cast<std::size_t>(pts.cols());
  std::vector<std::vector<SortedColumn>> cols(static_cast<std::size_t>(c),
                                              std::vector<SortedColumn>(static_cast<std::size_t>(dim)));
  std::vector<std::size_t> sizes(static_cast<std::size_t>(c), 0);
  for (int k = 0; k < c; ++k) {
    for (Eigen::Index r = 0; r < dim; ++r) {
      std::vector<double> v;
      for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] == k) v.push_back(pts(r, static_cast<Eigen::Index>(i)));
      }
      cols[static_cast<std::size_t>(k)][static_cast<std::size_t>(r)].assign(std::move(v));
    }
  }
  for (auto l : labels) ++sizes[static_cast<std::size_t>(l)];
  auto cluster_cost = [&](int k) {
    double total = 0.0;
    for (const auto& col : cols[static_cast<std::size_t>(k)]) total += col.cost();
    return total;
  };
  std::vector<double> cost(static_cast<std::size_t>(c));
  for (int k = 0; k < c; ++k) cost[static_cast<std::size_t>(k)] = cluster_cost(k);

  int moves = 0;
  bool improved = true;
  while (improved) {
    improved = false;
    for (std::size_t i = 0; i < n; ++i) {
      const int a = labels[i];
      if (sizes[static_cast<std::size_t>(a)] < 2) continue;
      const auto x = pts.col(static_cast<Eigen::Index>(i));
      double without = 0.0;
      for (Eigen::Index r = 0; r < dim; ++r) {
        without += cols[static_cast<std::size_t>(a)][static_cast<std::size_t>(r)].cost_without(x(r));
      }
      const double gain_a = cost[static_cast<std::size_t>(a)] - without;
      int best = -1;
      double best_delta = 0.0;
      for (int b = 0; b < c; ++b) {
        if (b == a) continue;
        double with = 0.0;
        for (Eigen::Index r = 0; r < dim; ++r) {
          with += cols[static_cast<std::size_t>(b)][static_cast<std::size_t>(r)].cost_with_added(x(r));
        }
        const double delta = with - cost[static_cast<std::size_t>(b)] - gain_a;
        // Relative margin so rounding never cycles a point back and forth.
        if (delta < best_delta - 1e-12 * (1.0 + cost[static_cast<std::size_t>(a)] +
                                          cost[static_cast<std::size_t>(b)])) {
          best_delta = delta;
          best = b;
        }
      }
      if (best < 0) continue;
      for (Eigen::Index r = 0; r < dim; ++r) {
        cols[static_cast<std::size_t>(a)][static_cast<std::size_t>(r)].erase(x(r));
        cols[static_cast<std::size_t>(best)][static_cast<std::size_t>(r)].insert(x(r));
      }
      --sizes[static_cast<std::size_t>(a)];
      ++sizes[static_cast<std::size_t>(best)];
      labels[i] = best;
      cost[static_cast<std::size_t>(a)] = cluster_cost(a);
      cost[static_cast<std::size_t>(best)] = cluster_cost(best);
      ++moves;
      improved = true;
    }
    if (improved) history.push_back(std::accumulate(cost.begin(), cost.end(), 0.0));
  }
  return moves;
}

RestartOutcome run_restart(const Eigen::MatrixXd& pts, const KMeansL1Config& cfg,
                           int restart) {
  const Eigen::Index n = pts.cols();
  const int c = cfg.n_clusters;
  Rng rng = Rng::substream(cfg.rng_seed, "kmeans/" + std::to_string(restart));

  // Seeding: a uniform first point, then each further center drawn with
  // probability proportional to its l1 distance from the nearest center so far.
  Eigen::MatrixXd centers(pts.rows(), c);
  const auto first = static_cast<Eigen::Index>(rng.uniform_int(static_cast<std::uint64_t>(n)));
  centers.col(0) = pts.col(first);
  std::vector<double> nearest(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    nearest[static_cast<std::size_t>(i)] = l1(pts.col(i), centers.col(0));
  }
  for (int k = 1; k < c; ++k) {
    const double total = std::accumulate(nearest.begin(), nearest.end(), 0.0);
    Eigen::Index pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform01() * total;
      double acc = 0.0;
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += nearest[static_cast<std::size_t>(i)];
        if (acc > target && nearest[static_cast<std::size_t>(i)] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.uniform_int(static_cast<std::uint64_t>(n)));
    }
    centers.col(k) = pts.col(pick);
    for (Eigen::Index i = 0; i < n; ++i) {
      auto& d = nearest[static_cast<std::size_t>(i)];
      d = std::min(d, l1(pts.col(i), centers.col(k)));
    }
  }

  auto partition_cost = [&](const std::vector<std::int32_t>& labels, const Eigen::MatrixXd& m) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      total += l1(pts.col(i), m.col(labels[static_cast<std::size_t>(i)]));
    }
    return total;
  };

  // Each history entry is the cost of a partition about its own medians. A
  // new partition is kept only when that cost strictly drops, so ties that
  // merely reshuffle points end the alternation.
  RestartOutcome out;
  out.labels.assign(static_cast<std::size_t>(n), 0);
  std::vector<std::int32_t> labels = out.labels;
  for (int it = 0; it < cfg.max_iters; ++it) {
    Eigen::MatrixXd trial = centers;
    std::vector<double> dist = assign(pts, trial, labels, cfg.threads);
    const int reseeded = reseed_empty(pts, trial, labels, dist);
    const Eigen::MatrixXd next = medians(pts, labels, c, cfg.threads);
    const double cost = partition_cost(labels, next);
    if (!out.history.empty() && !(cost < out.history.back())) break;
    out.labels = labels;
    out.reseeded += reseeded;
    out.history.push_back(cost);
    const double movement = (next - centers).cwiseAbs().sum();
    centers = next;
    if (movement <= cfg.tol) break;
  }

  out.inertia = out.history.back();
  if (refine_by_transfers(pts, c, out.labels, out.history) > 0) {
    centers = medians(pts, out.labels, c, cfg.threads);
    out.inertia = partition_cost(out.labels, centers);
    // Same quantity as the last transfer pass, summed directly.
    out.history.back() = out.inertia;
  }
  out.centroids = centers;
  return out;
}

}  // namespace

KMeansL1Result kmeans_l1(const Eigen::MatrixXd& points, const KMeansL1Config& cfg) {
  validate(cfg);
  const Eigen::Index n = points.cols();
  if (n < cfg.n_clusters) {
    throw InvalidConfig("k-means needs at least as many points (" + std::to_string(n) +
                        ") as clusters (" + std::to_string(cfg.n_clusters) + ")");
  }
  require_finite(points, "k-means points");

  // Canonical order: lexicographic on coordinates, input index on ties.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index r = 0; r < points.rows(); ++r) {
      if (points(r, a) != points(r, b)) return points(r, a) < points(r, b);
    }
    return false;
  });
  Eigen::MatrixXd pts(points.rows(), n);
  for (Eigen::Index i = 0; i < n; ++i) pts.col(i) = points.col(order[static_cast<std::size_t>(i)]);

  RestartOutcome best;
  for (int r = 0; r < cfg.n_restarts; ++r) {
    RestartOutcome o = run_restart(pts, cfg, r);
    if (r == 0 || o.inertia < best.inertia) best = std::move(o);
  }

  KMeansL1Result res;
  res.labels.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    res.labels[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] =
        best.labels[static_cast<std::size_t>(i)];
  }
  res.centroids = std::move(best.centroids);
  res.inertia = best.inertia;
  res.inertia_history = std::move(best.history);
  res.reseeded_clusters = best.reseeded;
  return res;
}

double l1_partition_cost(const Eigen::MatrixXd& points,
                         const std::vector<std::int32_t>& labels, int n_clusters) {
  if (labels.size() != static_cast<std::size_t>(points.cols())) {
    throw DimensionMismatch("l1_partition_cost: label count differs from point count");
  }
  const Eigen::MatrixXd centers = medians(points, labels, n_clusters, 1);
  double cost = 0.0;
  for (Eigen::Index i = 0; i < points.cols(); ++i) {
    cost += l1(points.col(i), centers.col(labels[static_cast<std::size_t>(i)]));
  }
  return cost;
}

SegmentationScore score_segmentation(const LabelVolume& pred, const LabelVolume& truth) {
  if (!(pred.grid == truth.grid) || pred.labels.size() != truth.labels.size()) {
    throw DimensionMismatch("segmentations cover different grids (" + to_string(pred.grid) +
                            " vs " + to_string(truth.grid) + ")");
  }
  const std::size_t n = pred.labels.size();
  SegmentationScore s;
  if (n == 0) return s;

  std::map<std::pair<std::int32_t, std::int32_t>, std::int64_t> table;
  std::map<std::int32_t, std::int64_t> pred_counts, truth_counts;
  for (std::size_t i = 0; i < n; ++i) {
    ++table[{pred.labels[i], truth.labels[i]}];
    ++pred_counts[pred.labels[i]];
    ++truth_counts[truth.labels[i]];
  }

  std::map<std::int32_t, std::int64_t> majority;
  for (const auto& [key, count] : table) {
    auto& m = majority[key.first];
    m = std::max(m, count);
  }
  std::int64_t matched = 0;
  for (const auto& [label, count] : majority) matched += count;
  s.purity = static_cast<double>(matched) / static_cast<double>(n);

  auto pairs = [](std::int64_t k) { return 0.5 * static_cast<double>(k) * static_cast<double>(k - 1); };
  double index = 0.0, sum_pred = 0.0, sum_truth = 0.0;
  for (const auto& [key, count] : table) index += pairs(count);
  for (const auto& [label, count] : pred_counts) sum_pred += pairs(count);
  for (const auto& [label, count] : truth_counts) sum_truth += pairs(count);
  const double total = pairs(static_cast<std::int64_t>(n));
  const double expected = total > 0 ? sum_pred * sum_truth / total : 0.0;
  const double max_index = 0.5 * (sum_pred + sum_truth);
  if (max_index == expected) {
    // Both partitions trivial (all singletons or one block): agree iff equal.
    s.agreement = (sum_pred == sum_truth) ? 1.0 : 0.0;
  } else {
    s.agreement = (index - expected) / (max_index - expected);
  }
  return s;
}

Segmentation segment_volume(const CoefficientMatrix& codes, const Grid3& grid,
                            const SegmentOptions& opts) {
  if (codes.cols() != grid.voxels()) {
    throw DimensionMismatch("coefficient matrix has " + std::to_string(codes.cols()) +
                            " columns but grid " + to_string(grid) + " has " +
                            std::to_string(grid.voxels()) + " voxels");
  }
  if (opts.mask && static_cast<Eigen::Index>(opts.mask->size()) != grid.voxels()) {
    throw DimensionMismatch("mask size differs from grid volume");
  }
  require_finite(codes, "coefficients");

  std::vector<Eigen::Index> active;
  for (Eigen::Index i = 0; i < codes.cols(); ++i) {
    if (opts.mask && (*opts.mask)[static_cast<std::size_t>(i)] == 0) continue;
    if ((codes.col(i).array() != 0.0).any()) active.push_back(i);
  }

  Eigen::MatrixXd features(codes.rows(), static_cast<Eigen::Index>(active.size()));
  for (std::size_t j = 0; j < active.size(); ++j) {
    Eigen::VectorXd f = codes.col(active[j]).cwiseAbs();
    if (opts.normalize_columns_l1) f /= f.sum();
    features.col(static_cast<Eigen::Index>(j)) = f;
  }

  Segmentation seg;
  seg.kmeans = kmeans_l1(features, opts.kmeans);
  seg.volume.grid = grid;
  seg.volume.n_clusters = opts.kmeans.n_clusters + 1;
  seg.volume.labels.assign(static_cast<std::size_t>(grid.voxels()), 0);
  for (std::size_t j = 0; j < active.size(); ++j) {
    seg.volume.labels[static_cast<std::size_t>(active[j])] = seg.kmeans.labels[j] + 1;
  }
  return seg;
}

std::vector<std::int64_t> cluster_sizes(const LabelVolume& v) {
  validate(v);
  std::vector<std::int64_t> sizes(static_cast<std::size_t>(v.n_clusters), 0);
  for (auto l : v.labels) ++sizes[static_cast<std::size_t>(l)];
  return sizes;
}

void write_pgm_slice(const std::filesystem::path& path, const LabelVolume& v,
                     Eigen::Index z) {
  validate(v);
  if (z < 0 || z >= v.grid.nz) {
    throw InvalidConfig("slice " + std::to_string(z) + " outside volume depth " +
                        std::to_string(v.grid.nz));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f << "P5\n" << v.grid.nx << ' ' << v.grid.ny << "\n255\n";
  const int top = std::max(1, v.n_clusters - 1);
  for (Eigen::Index y = 0; y < v.grid.ny; ++y) {
    for (Eigen::Index x = 0; x < v.grid.nx; ++x) {
      const auto label = v.labels[static_cast<std::size_t>(v.grid.index(x, y, z))];
      const auto gray = static_cast<unsigned char>(
          std::lround(255.0 * static_cast<double>(label) / static_cast<double>(top)));
      f.put(static_cast<char>(gray));
    }
  }
  if (!f) throw IoError("PGM write failed: " + path.string());
}

}  // namespace corrdict
