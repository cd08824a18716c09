#include "corrdict/volume.hpp"

#include <algorithm>
#include <charconv>

namespace corrdict {

Grid3 parse_grid(std::string_view text) {
  Eigen::Index dims[3];
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    const std::size_t end = i < 2 ? text.find('x', pos) : text.size();
    if (end == std::string_view::npos) {
      throw InvalidConfig("grid must look like NXxNYxNZ, got '" + std::string(text) + "'");
    }
    long long v = 0;
    auto res = std::from_chars(text.data() + pos, text.data() + end, v);
    if (res.ec != std::errc() || res.ptr != text.data() + end || v < 1) {
      throw InvalidConfig("grid must look like NXxNYxNZ with positive sizes, got '" +
                          std::string(text) + "'");
    }
    dims[i] = static_cast<Eigen::Index>(v);
    pos = end + 1;
  }
  return {dims[0], dims[1], dims[2]};
}

std::string to_string(const Grid3& g) {
  return std::to_string(g.nx) + "x" + std::to_string(g.ny) + "x" + std::to_string(g.nz);
}

Eigen::MatrixXd volume_to_matrix(const Eigen::VectorXd& flat, const Grid3& g) {
  if (flat.size() != g.voxels()) {
    throw DimensionMismatch("volume has " + std::to_string(flat.size()) +
                            " voxels, grid " + to_string(g) + " needs " +
                            std::to_string(g.voxels()));
  }
  Eigen::MatrixXd m(g.ny * g.nz, g.nx);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index x = 0; x < g.nx; ++x) m(r, x) = flat(x + g.nx * r);
  }
  return m;
}

Eigen::VectorXd matrix_to_volume(const Eigen::MatrixXd& m, const Grid3& g) {
  if (m.rows() != g.ny * g.nz || m.cols() != g.nx) {
    throw DimensionMismatch("volume matrix shape does not match grid " + to_string(g));
  }
  Eigen::VectorXd flat(g.voxels());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index x = 0; x < g.nx; ++x) flat(x + g.nx * r) = m(r, x);
  }
  return flat;
}

void validate(const LabelVolume& v) {
  if (static_cast<Eigen::Index>(v.labels.size()) != v.grid.voxels()) {
    throw DimensionMismatch("label count " + std::to_string(v.labels.size()) +
                            " differs from grid volume " + std::to_string(v.grid.voxels()));
  }
  for (auto l : v.labels) {
    if (l < 0 || l >= v.n_clusters) {
      throw InvalidConfig("label " + std::to_string(l) + " outside [0, " +
                          std::to_string(v.n_clusters) + ")");
    }
  }
}

IntMatrix labels_to_matrix(const LabelVolume& v) {
  validate(v);
  const Grid3& g = v.grid;
  IntMatrix m(g.ny * g.nz, g.nx);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index x = 0; x < g.nx; ++x) {
      m(r, x) = v.labels[static_cast<std::size_t>(x + g.nx * r)];
    }
  }
  return m;
}

LabelVolume matrix_to_labels(const IntMatrix& m, const Grid3& g) {
  if (m.rows() != g.ny * g.nz || m.cols() != g.nx) {
    throw DimensionMismatch("label matrix shape does not match grid " + to_string(g));
  }
  LabelVolume v;
  v.grid = g;
  v.labels.resize(static_cast<std::size_t>(g.voxels()));
  std::int32_t max_label = -1;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index x = 0; x < g.nx; ++x) {
      const std::int32_t l = m(r, x);
      if (l < 0) throw InvalidConfig("negative label in label volume");
      v.labels[static_cast<std::size_t>(x + g.nx * r)] = l;
      max_label = std::max(max_label, l);
    }
  }
  v.n_clusters = max_label + 1;
  return v;
}

}  // namespace corrdict
