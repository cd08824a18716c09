#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "corrdict/errors.hpp"
#include "corrdict/matrix_io.hpp"

namespace corrdict {

// 3-D voxel grid. Voxels are flattened with x fastest, then y, then z:
//   index = x + nx * (y + ny * z)
struct Grid3 {
  Eigen::Index nx = 1;
  Eigen::Index ny = 1;
  Eigen::Index nz = 1;

  Eigen::Index voxels() const { return nx * ny * nz; }
  Eigen::Index index(Eigen::Index x, Eigen::Index y, Eigen::Index z) const {
    return x + nx * (y + ny * z);
  }
  bool operator==(const Grid3&) const = default;
};

// "24x24x12" -> {24, 24, 12}.
Grid3 parse_grid(std::string_view text);
std::string to_string(const Grid3& g);

// Volumes are stored in CDMX as (ny*nz) x nx matrices so that the row-major
// payload is exactly the flattened voxel order.
Eigen::MatrixXd volume_to_matrix(const Eigen::VectorXd& flat, const Grid3& g);
Eigen::VectorXd matrix_to_volume(const Eigen::MatrixXd& m, const Grid3& g);

struct LabelVolume {
  Grid3 grid;
  std::vector<std::int32_t> labels;  // flattened voxel order
  int n_clusters = 0;
};

void validate(const LabelVolume& v);
IntMatrix labels_to_matrix(const LabelVolume& v);
LabelVolume matrix_to_labels(const IntMatrix& m, const Grid3& g);

}  // namespace corrdict
