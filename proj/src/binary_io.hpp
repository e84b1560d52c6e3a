#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

// Little-endian host layout; files are only exchanged between builds on the
// same platform (checkpoints and caches).
namespace coegan::bin {

inline void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw std::runtime_error("truncated file");
  return v;
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is) {
  const std::uint32_t n = read_u32(is);
  std::string s(n, '\0');
  if (n && !is.read(s.data(), n)) throw std::runtime_error("truncated file");
  return s;
}

inline void write_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
  write_u32(os, static_cast<std::uint32_t>(m.rows()));
  write_u32(os, static_cast<std::uint32_t>(m.cols()));
  os.write(reinterpret_cast<const char*>(m.data()),
           static_cast<std::streamsize>(m.size() * sizeof(double)));
}

inline Eigen::MatrixXd read_matrix(std::istream& is) {
  const std::uint32_t rows = read_u32(is);
  const std::uint32_t cols = read_u32(is);
  Eigen::MatrixXd m(rows, cols);
  if (m.size() && !is.read(reinterpret_cast<char*>(m.data()),
                           static_cast<std::streamsize>(m.size() * sizeof(double))))
    throw std::runtime_error("truncated file");
  return m;
}

}  // namespace coegan::bin
