#include "corrdict/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "corrdict/rng.hpp"

namespace corrdict {

std::string_view to_string(TimeSeriesModel m) {
  switch (m) {
    case TimeSeriesModel::kSinusoidRandomPhase: return "sinusoid_random_phase";
    case TimeSeriesModel::kSmoothedGaussianWalk: return "smoothed_gaussian_walk";
  }
  return "unknown";
}

TimeSeriesModel parse_time_series_model(std::string_view name) {
  if (name == "sinusoid_random_phase") return TimeSeriesModel::kSinusoidRandomPhase;
  if (name == "smoothed_gaussian_walk") return TimeSeriesModel::kSmoothedGaussianWalk;
  throw InvalidSpec("unknown time series model '" + std::string(name) +
                    "' (expected sinusoid_random_phase or smoothed_gaussian_walk)");
}

void validate(const SyntheticSpec& s) {
  std::string problems;
  auto fail = [&](const std::string& msg) {
    if (!problems.empty()) problems += "; ";
    problems += msg;
  };
  if (s.grid.nx < 1 || s.grid.ny < 1 || s.grid.nz < 1) fail("grid dimensions must be >= 1");
  if (s.n_networks < 1) fail("n_networks must be >= 1");
  if (s.sparsity_per_voxel < 1) fail("sparsity_per_voxel must be >= 1");
  if (s.sparsity_per_voxel > s.n_networks) fail("sparsity_per_voxel must be <= n_networks");
  if (s.blobs_per_network < 1) fail("blobs_per_network must be >= 1");
  if (!(s.blob_radius_min > 0.0)) fail("blob_radius_min must be > 0");
  if (!(s.blob_radius_max >= s.blob_radius_min)) {
    fail("blob_radius_max must be >= blob_radius_min");
  }
  if (s.n_timepoints < 2) fail("n_timepoints must be >= 2");
  if (!(s.noise_sigma >= 0.0) || !std::isfinite(s.noise_sigma)) {
    fail("noise_sigma must be finite and >= 0");
  }
  if (s.pair_correlation) {
    if (s.n_networks < 2) fail("a correlated pair needs n_networks >= 2");
    if (!(*s.pair_correlation >= 0.0 && *s.pair_correlation < 1.0)) {
      fail("pair correlation must lie in [0, 1)");
    }
  }
  if (!problems.empty()) throw InvalidSpec(problems);
}

SyntheticSpec correlated_pair_spec(const SyntheticSpec& base, double target_corr) {
  SyntheticSpec s = base;
  s.pair_correlation = target_corr;
  validate(s);
  return s;
}

namespace {

struct Blob {
  double cx, cy, cz;
  double radius;
  double amplitude;
};

Blob draw_blob(Rng& rng, const SyntheticSpec& s) {
  Blob b;
  b.cx = rng.uniform(0.0, static_cast<double>(s.grid.nx - 1));
  b.cy = rng.uniform(0.0, static_cast<double>(s.grid.ny - 1));
  b.cz = rng.uniform(0.0, static_cast<double>(s.grid.nz - 1));
  b.radius = rng.uniform(s.blob_radius_min, s.blob_radius_max);
  b.amplitude = rng.uniform(0.5, 1.5);
  return b;
}

void splat(const Blob& b, const Grid3& g, Eigen::VectorXd& map) {
  const double sigma = b.radius / 3.0;
  const double r2max = b.radius * b.radius;
  auto lo = [](double c, double r) { return std::max<Eigen::Index>(0, static_cast<Eigen::Index>(std::ceil(c - r))); };
  auto hi = [](double c, double r, Eigen::Index n) {
    return std::min<Eigen::Index>(n - 1, static_cast<Eigen::Index>(std::floor(c + r)));
  };
  for (Eigen::Index z = lo(b.cz, b.radius); z <= hi(b.cz, b.radius, g.nz); ++z) {
    for (Eigen::Index y = lo(b.cy, b.radius); y <= hi(b.cy, b.radius, g.ny); ++y) {
      for (Eigen::Index x = lo(b.cx, b.radius); x <= hi(b.cx, b.radius, g.nx); ++x) {
        const double dx = static_cast<double>(x) - b.cx;
        const double dy = static_cast<double>(y) - b.cy;
        const double dz = static_cast<double>(z) - b.cz;
        const double r2 = dx * dx + dy * dy + dz * dz;
        if (r2 > r2max) continue;
        map(g.index(x, y, z)) += b.amplitude * std::exp(-r2 / (2.0 * sigma * sigma));
      }
    }
  }
}

std::vector<Eigen::VectorXd> build_maps(const SyntheticSpec& s) {
  Rng rng = Rng::substream(s.rng_seed, "maps");
  std::vector<std::vector<Blob>> blobs(static_cast<std::size_t>(s.n_networks));
  for (int k = 0; k < s.n_networks; ++k) {
    for (int b = 0; b < s.blobs_per_network; ++b) {
      Blob blob = draw_blob(rng, s);
      if (s.pair_correlation && k == 1) {
        // Shadow network 0: same blob, shifted by half its radius or so, so the
        // two maps overlap without coinciding.
        const Blob& twin = blobs[0][static_cast<std::size_t>(b)];
        double ux = rng.normal(), uy = rng.normal(), uz = rng.normal();
        const double un = std::sqrt(ux * ux + uy * uy + uz * uz);
        const double shift = twin.radius * rng.uniform(0.3, 0.7) / (un > 0 ? un : 1.0);
        blob.cx = std::clamp(twin.cx + shift * ux, 0.0, static_cast<double>(s.grid.nx - 1));
        blob.cy = std::clamp(twin.cy + shift * uy, 0.0, static_cast<double>(s.grid.ny - 1));
        blob.cz = std::clamp(twin.cz + shift * uz, 0.0, static_cast<double>(s.grid.nz - 1));
      }
      blobs[static_cast<std::size_t>(k)].push_back(blob);
    }
  }
  std::vector<Eigen::VectorXd> maps;
  for (const auto& net : blobs) {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(s.grid.voxels());
    for (const Blob& b : net) splat(b, s.grid, m);
    maps.push_back(std::move(m));
  }
  return maps;
}

Eigen::MatrixXd build_time_series(const SyntheticSpec& s) {
  Rng rng = Rng::substream(s.rng_seed, "timeseries");
  const int n = s.n_timepoints;
  Eigen::MatrixXd ts(n, s.n_networks);
  // Whole cycle counts below the Nyquist limit, distinct while they last.
  std::vector<int> cycle_pool;
  if (s.time_series_model == TimeSeriesModel::kSinusoidRandomPhase) {
    const int max_cycles = std::max(1, (n - 1) / 2);
    const auto picks = rng.sample_without_replacement(
        static_cast<std::size_t>(max_cycles),
        static_cast<std::size_t>(std::min(max_cycles, s.n_networks)));
    for (auto p : picks) cycle_pool.push_back(static_cast<int>(p) + 1);
  }
  for (int k = 0; k < s.n_networks; ++k) {
    Eigen::VectorXd v(n);
    if (s.time_series_model == TimeSeriesModel::kSinusoidRandomPhase) {
      const double cycles =
          cycle_pool[static_cast<std::size_t>(k) % cycle_pool.size()];
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      for (int t = 0; t < n; ++t) {
        v(t) = std::sin(2.0 * std::numbers::pi * cycles * t / n + phase);
      }
    } else {
      Eigen::VectorXd walk(n);
      double acc = 0.0;
      for (int t = 0; t < n; ++t) {
        acc += rng.normal();
        walk(t) = acc;
      }
      walk.array() -= walk.mean();
      for (int t = 0; t < n; ++t) {
        const int a = std::max(0, t - 1);
        const int b = std::min(n - 1, t + 1);
        v(t) = walk.segment(a, b - a + 1).mean();
      }
    }
    ts.col(k) = v;
  }

  if (s.pair_correlation) {
    const double c = *s.pair_correlation;
    const Eigen::VectorXd e1 = ts.col(0).normalized();
    Eigen::VectorXd e2 = ts.col(1) - e1.dot(ts.col(1)) * e1;
    e2.normalize();
    ts.col(0) = e1;
    ts.col(1) = c * e1 + std::sqrt(1.0 - c * c) * e2;
  }
  return ts;
}

}  // namespace

SyntheticDataset generate(const SyntheticSpec& spec) {
  validate(spec);
  const Eigen::Index l = spec.grid.voxels();
  const int k_true = spec.n_networks;

  SyntheticDataset ds;
  ds.network_maps = build_maps(spec);
  ds.true_dictionary = normalize_columns(build_time_series(spec));

  // Keep the T_true strongest networks per voxel.
  ds.true_coefficients = CoefficientMatrix::Zero(k_true, l);
  std::vector<int> order(static_cast<std::size_t>(k_true));
  for (Eigen::Index i = 0; i < l; ++i) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return ds.network_maps[static_cast<std::size_t>(a)](i) >
             ds.network_maps[static_cast<std::size_t>(b)](i);
    });
    for (int r = 0; r < spec.sparsity_per_voxel; ++r) {
      const int k = order[static_cast<std::size_t>(r)];
      const double v = ds.network_maps[static_cast<std::size_t>(k)](i);
      if (v > 0.0) ds.true_coefficients(k, i) = v;
    }
  }

  ds.noise_realization = Eigen::MatrixXd::Zero(spec.n_timepoints, l);
  if (spec.noise_sigma > 0.0) {
    Rng rng = Rng::substream(spec.rng_seed, "noise");
    for (Eigen::Index i = 0; i < l; ++i) {
      for (Eigen::Index t = 0; t < spec.n_timepoints; ++t) {
        ds.noise_realization(t, i) = spec.noise_sigma * rng.normal();
      }
    }
  }
  ds.signals = ds.true_dictionary.atoms() * ds.true_coefficients + ds.noise_realization;
  return ds;
}

LabelVolume dominant_network_labels(const CoefficientMatrix& codes, const Grid3& grid) {
  if (codes.cols() != grid.voxels()) {
    throw DimensionMismatch("code count " + std::to_string(codes.cols()) +
                            " differs from grid volume " + std::to_string(grid.voxels()));
  }
  LabelVolume v;
  v.grid = grid;
  v.n_clusters = static_cast<int>(codes.rows()) + 1;
  v.labels.resize(static_cast<std::size_t>(codes.cols()));
  for (Eigen::Index i = 0; i < codes.cols(); ++i) {
    Eigen::Index best = -1;
    double best_abs = 0.0;
    for (Eigen::Index k = 0; k < codes.rows(); ++k) {
      const double a = std::abs(codes(k, i));
      if (a > best_abs) {
        best_abs = a;
        best = k;
      }
    }
    v.labels[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(best + 1);
  }
  return v;
}

}  // namespace corrdict
