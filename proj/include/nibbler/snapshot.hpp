#pragma once

// Flat binary snapshot streams used by checkpoints.
//
// Layout rules shared by every serialized object:
//   * integers are little-endian u64, doubles are IEEE-754 binary64 little-endian;
//   * a vector is its u64 length followed by the elements;
//   * a matrix is u64 rows, u64 cols, then the entries in row-major order;
//   * a string is its u64 byte length followed by the bytes;
//   * every object begins with a u64 tag (an FNV-1a hash of its type name) so a
//     misaligned read fails loudly instead of silently loading garbage.

#include <Eigen/Core>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace nibbler {

static_assert(std::endian::native == std::endian::little,
              "snapshot streams assume a little-endian host");

class SnapshotWriter {
 public:
  explicit SnapshotWriter(std::ostream& out) : out_(out) {}

  void tag(std::string_view name);
  void u64(std::uint64_t v);
  void f64(double v);
  void str(const std::string& s);
  void vec(const Eigen::VectorXd& v);
  void mat(const Eigen::MatrixXd& m);
  void indices(const std::vector<std::uint32_t>& v);
  void bytes(const std::vector<std::uint8_t>& v);

 private:
  std::ostream& out_;
};

class SnapshotReader {
 public:
  explicit SnapshotReader(std::istream& in) : in_(in) {}

  void expect_tag(std::string_view name);
  std::uint64_t u64();
  double f64();
  std::string str();
  Eigen::VectorXd vec();
  Eigen::MatrixXd mat();
  std::vector<std::uint32_t> indices();
  std::vector<std::uint8_t> bytes();

 private:
  void read_raw(void* dst, std::size_t n);
  std::istream& in_;
};

}  // namespace nibbler
