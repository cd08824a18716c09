#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "corrdict/model_core.hpp"
#include "corrdict/volume.hpp"

namespace corrdict {

struct KMeansL1Config {
  int n_clusters = 2;
  int max_iters = 100;
  int n_restarts = 5;
  std::uint64_t rng_seed = 0;
  double tol = 1e-9;  // stop when total l1 centroid movement <= tol
  int threads = 1;
};

void validate(const KMeansL1Config& cfg);

struct KMeansL1Result {
  std::vector<std::int32_t> labels;       // per point, in input order
  Eigen::MatrixXd centroids;              // dim x C
  double inertia = 0.0;                   // sum of l1 distances to assigned centroid
  std::vector<double> inertia_history;    // best restart: per accepted partition, strictly decreasing
  int reseeded_clusters = 0;              // best restart
};

/// K-medians: l1 assignment and coordinatewise-median update, best of
/// n_restarts by inertia. Points are the columns of `points`.
///
/// Points are first put in a canonical (lexicographic) order, so the result is
/// invariant to column reordering up to label renaming. Each restart seeds
/// from a random first point, drawing every further center with probability
/// proportional to its l1 distance from the nearest center already chosen. A
/// cluster left empty by an assignment is re-seeded at the point farthest from
/// its current centroid. Once the alternation settles, single points are moved
/// between clusters while that lowers the exact cost about the medians.
KMeansL1Result kmeans_l1(const Eigen::MatrixXd& points, const KMeansL1Config& cfg);

// Total l1 distance of each point to the coordinatewise median of its cluster.
double l1_partition_cost(const Eigen::MatrixXd& points,
                         const std::vector<std::int32_t>& labels, int n_clusters);

struct SegmentationScore {
  double purity = 0.0;
  double agreement = 0.0;  // adjusted Rand index
};

SegmentationScore score_segmentation(const LabelVolume& pred, const LabelVolume& truth);

struct SegmentOptions {
  KMeansL1Config kmeans;
  bool normalize_columns_l1 = false;
  // Optional voxel mask (nonzero = inside). Outside voxels go to background.
  const std::vector<std::int32_t>* mask = nullptr;
};

struct Segmentation {
  LabelVolume volume;  // 0 = background, 1..C = clusters; n_clusters = C + 1
  KMeansL1Result kmeans;
};

/// Clusters per-voxel code magnitudes |x_i| (optionally l1-normalized). Voxels
/// whose code is all zero, or outside the mask, form the background label 0.
Segmentation segment_volume(const CoefficientMatrix& codes, const Grid3& grid,
                            const SegmentOptions& opts);

std::vector<std::int64_t> cluster_sizes(const LabelVolume& v);

// Binary PGM (P5) of z-slice `z`, nx wide and ny tall; gray level scales the
// label onto 0..255.
void write_pgm_slice(const std::filesystem::path& path, const LabelVolume& v,
                     Eigen::Index z);

}  // namespace corrdict
