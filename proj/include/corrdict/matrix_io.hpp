#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "corrdict/errors.hpp"

namespace corrdict {

// CDMX binary matrix file:
//   bytes 0..3   "CDMX"
//   bytes 4..27  rows, cols, element size (uint64, little endian)
//   payload      rows*cols elements, row-major, little endian
// Element size 8 means IEEE-754 double, 4 means signed 32-bit integer.
inline constexpr char kCdmxMagic[4] = {'C', 'D', 'M', 'X'};

using IntMatrix = Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic>;

void write_cdmx(std::ostream& out, const Eigen::MatrixXd& m);
void write_cdmx(std::ostream& out, const IntMatrix& m);
Eigen::MatrixXd read_cdmx(std::istream& in);
IntMatrix read_cdmx_int(std::istream& in);

void write_cdmx(const std::filesystem::path& path, const Eigen::MatrixXd& m);
void write_cdmx(const std::filesystem::path& path, const IntMatrix& m);
Eigen::MatrixXd read_cdmx(const std::filesystem::path& path);
IntMatrix read_cdmx_int(const std::filesystem::path& path);

// Plain CSV: one matrix row per line, comma separated, no header.
void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_csv(std::istream& in);
void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);

// Dispatches on extension: ".csv" is CSV, anything else CDMX.
Eigen::MatrixXd read_matrix(const std::filesystem::path& path);
void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m);

// Shortest decimal text that round-trips a double, '.' separator.
std::string format_double(double v);

}  // namespace corrdict
