#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "corrdict/model_core.hpp"
#include "corrdict/volume.hpp"

namespace corrdict {

enum class TimeSeriesModel { kSinusoidRandomPhase, kSmoothedGaussianWalk };

std::string_view to_string(TimeSeriesModel m);
TimeSeriesModel parse_time_series_model(std::string_view name);

// Spatial networks (sums of truncated Gaussian blobs) modulated by unit-norm
// time series, plus i.i.d. Gaussian noise.
struct SyntheticSpec {
  Grid3 grid{24, 24, 12};
  int n_networks = 10;
  int blobs_per_network = 4;
  // Blob support radius in voxels; the Gaussian's sigma is radius / 3, so the
  // blob is truncated at 3 sigma.
  double blob_radius_min = 4.0;
  double blob_radius_max = 6.0;
  int n_timepoints = 50;
  // Sinusoids use distinct whole numbers of cycles over the series, which
  // makes independent networks exactly orthogonal.
  TimeSeriesModel time_series_model = TimeSeriesModel::kSinusoidRandomPhase;
  double noise_sigma = 0.05;
  int sparsity_per_voxel = 3;
  std::uint64_t rng_seed = 0;
  // When set, networks 0 and 1 get time series with exactly this inner
  // product and overlapping spatial maps (see correlated_pair_spec).
  std::optional<double> pair_correlation;
};

// Throws InvalidSpec listing every violated bound.
void validate(const SyntheticSpec& spec);

struct SyntheticDataset {
  SignalMatrix signals;                   // N_t x L
  Dictionary true_dictionary;             // N_t x K_true
  CoefficientMatrix true_coefficients;    // K_true x L
  std::vector<Eigen::VectorXd> network_maps;  // K_true flattened volumes
  Eigen::MatrixXd noise_realization;      // N_t x L
};

/// Deterministic given the spec (including its seed). Maps, time series and
/// noise each draw from their own named sub-stream of the seed.
SyntheticDataset generate(const SyntheticSpec& spec);

/// Spec whose first two networks have time-series correlation `target_corr`
/// (constructed by mixing an orthonormal pair) and overlapping maps.
/// target_corr must lie in [0, 1); n_networks must be >= 2.
SyntheticSpec correlated_pair_spec(const SyntheticSpec& base, double target_corr);

/// Truth labeling: 0 for voxels with an all-zero code, else 1 + the index of
/// the network with the largest coefficient.
LabelVolume dominant_network_labels(const CoefficientMatrix& codes, const Grid3& grid);

}  // namespace corrdict
