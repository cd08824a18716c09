#include "corrdict/matrix_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace corrdict {
namespace {

static_assert(std::endian::native == std::endian::little,
              "CDMX I/O assumes a little-endian host");

void write_header(std::ostream& out, std::uint64_t rows, std::uint64_t cols,
                  std::uint64_t elem) {
  out.write(kCdmxMagic, 4);
  const std::uint64_t hdr[3] = {rows, cols, elem};
  out.write(reinterpret_cast<const char*>(hdr), sizeof(hdr));
}

struct Header {
  std::uint64_t rows;
  std::uint64_t cols;
  std::uint64_t elem;
};

Header read_header(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kCdmxMagic, 4) != 0) {
    throw IoError("not a CDMX file (bad magic)");
  }
  std::uint64_t hdr[3];
  if (!in.read(reinterpret_cast<char*>(hdr), sizeof(hdr))) {
    throw IoError("truncated CDMX header");
  }
  return {hdr[0], hdr[1], hdr[2]};
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> read_payload(
    std::istream& in, const Header& h) {
  using RowMajor =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMajor m(static_cast<Eigen::Index>(h.rows), static_cast<Eigen::Index>(h.cols));
  const auto bytes = static_cast<std::streamsize>(h.rows * h.cols * sizeof(Scalar));
  if (bytes > 0 && !in.read(reinterpret_cast<char*>(m.data()), bytes)) {
    throw IoError("truncated CDMX payload");
  }
  return m;
}

template <typename Scalar>
void write_payload(std::ostream& out,
                   const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& m) {
  using RowMajor =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const RowMajor rm = m;
  out.write(reinterpret_cast<const char*>(rm.data()),
            static_cast<std::streamsize>(rm.size() * sizeof(Scalar)));
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode) {
  std::ofstream f(path, mode | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  return f;
}

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode) {
  std::ifstream f(path, mode);
  if (!f) throw IoError("cannot open for reading: " + path.string());
  return f;
}

}  // namespace

void write_cdmx(std::ostream& out, const Eigen::MatrixXd& m) {
  write_header(out, m.rows(), m.cols(), 8);
  write_payload(out, m);
  if (!out) throw IoError("CDMX write failed");
}

void write_cdmx(std::ostream& out, const IntMatrix& m) {
  write_header(out, m.rows(), m.cols(), 4);
  write_payload(out, m);
  if (!out) throw IoError("CDMX write failed");
}

Eigen::MatrixXd read_cdmx(std::istream& in) {
  const Header h = read_header(in);
  if (h.elem != 8) {
    throw IoError("expected a real CDMX file (element size 8), found element size " +
                  std::to_string(h.elem));
  }
  return read_payload<double>(in, h);
}

IntMatrix read_cdmx_int(std::istream& in) {
  const Header h = read_header(in);
  if (h.elem != 4) {
    throw IoError("expected an integer CDMX file (element size 4), found element size " +
                  std::to_string(h.elem));
  }
  return read_payload<std::int32_t>(in, h);
}

void write_cdmx(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  auto f = open_out(path, std::ios::binary);
  write_cdmx(f, m);
}

void write_cdmx(const std::filesystem::path& path, const IntMatrix& m) {
  auto f = open_out(path, std::ios::binary);
  write_cdmx(f, m);
}

Eigen::MatrixXd read_cdmx(const std::filesystem::path& path) {
  auto f = open_in(path, std::ios::binary);
  return read_cdmx(f);
}

IntMatrix read_cdmx_int(const std::filesystem::path& path) {
  auto f = open_in(path, std::ios::binary);
  return read_cdmx_int(f);
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
  if (!out) throw IoError("CSV write failed");
}

Eigen::MatrixXd read_matrix_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    const char* p = line.data();
    const char* end = p + line.size();
    for (;;) {
      const char* comma = std::find(p, end, ',');
      while (p < comma && *p == ' ') ++p;
      double v = 0.0;
      auto res = std::from_chars(p, comma, v);
      const char* q = res.ptr;
      while (q < comma && *q == ' ') ++q;
      if (res.ec != std::errc() || q != comma) {
        throw IoError("CSV: cannot parse number in line: " + line);
      }
      row.push_back(v);
      if (comma == end) break;
      p = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw IoError("CSV: ragged rows");
    }
    rows.push_back(std::move(row));
  }
  const auto r = static_cast<Eigen::Index>(rows.size());
  const auto c = r ? static_cast<Eigen::Index>(rows.front().size()) : 0;
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rows[i][j];
  }
  return m;
}

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  auto f = open_out(path, std::ios::out);
  write_matrix_csv(f, m);
}

Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path) {
  auto f = open_in(path, std::ios::in);
  return read_matrix_csv(f);
}

Eigen::MatrixXd read_matrix(const std::filesystem::path& path) {
  if (path.extension() == ".csv") return read_matrix_csv(path);
  return read_cdmx(path);
}

void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  if (path.extension() == ".csv") {
    write_matrix_csv(path, m);
  } else {
    write_cdmx(path, m);
  }
}

}  // namespace corrdict
