#include "nibbler/snapshot.hpp"

#include <stdexcept>

#include "nibbler/rng.hpp"

namespace nibbler {

namespace {
constexpr std::uint64_t kMaxLength = std::uint64_t{1} << 40;
}

void SnapshotWriter::tag(std::string_view name) { u64(fnv1a64(name)); }

void SnapshotWriter::u64(std::uint64_t v) {
  out_.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void SnapshotWriter::f64(double v) { out_.write(reinterpret_cast<const char*>(&v), sizeof v); }

void SnapshotWriter::str(const std::string& s) {
  u64(s.size());
  out_.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void SnapshotWriter::vec(const Eigen::VectorXd& v) {
  u64(static_cast<std::uint64_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) f64(v[i]);
}

void SnapshotWriter::mat(const Eigen::MatrixXd& m) {
  u64(static_cast<std::uint64_t>(m.rows()));
  u64(static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
}

void SnapshotWriter::indices(const std::vector<std::uint32_t>& v) {
  u64(v.size());
  for (auto x : v) u64(x);
}

void SnapshotWriter::bytes(const std::vector<std::uint8_t>& v) {
  u64(v.size());
  out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size()));
}

void SnapshotReader::read_raw(void* dst, std::size_t n) {
  in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (!in_) throw std::runtime_error("snapshot: unexpected end of stream");
}

void SnapshotReader::expect_tag(std::string_view name) {
  if (u64() != fnv1a64(name))
    throw std::runtime_error("snapshot: expected section '" + std::string(name) + "'");
}

std::uint64_t SnapshotReader::u64() {
  std::uint64_t v;
  read_raw(&v, sizeof v);
  return v;
}

double SnapshotReader::f64() {
  double v;
  read_raw(&v, sizeof v);
  return v;
}

std::string SnapshotReader::str() {
  auto n = u64();
  if (n > kMaxLength) throw std::runtime_error("snapshot: string length out of range");
  std::string s(n, '\0');
  read_raw(s.data(), n);
  return s;
}

Eigen::VectorXd SnapshotReader::vec() {
  auto n = u64();
  if (n > kMaxLength) throw std::runtime_error("snapshot: vector length out of range");
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = f64();
  return v;
}

Eigen::MatrixXd SnapshotReader::mat() {
  auto rows = u64();
  auto cols = u64();
  if (rows > kMaxLength || cols > kMaxLength || rows * cols > kMaxLength)
    throw std::runtime_error("snapshot: matrix shape out of range");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = f64();
  return m;
}

std::vector<std::uint32_t> SnapshotReader::indices() {
  auto n = u64();
  if (n > kMaxLength) throw std::runtime_error("snapshot: index list length out of range");
  std::vector<std::uint32_t> v(n);
  for (auto& x : v) x = static_cast<std::uint32_t>(u64());
  return v;
}

std::vector<std::uint8_t> SnapshotReader::bytes() {
  auto n = u64();
  if (n > kMaxLength) throw std::runtime_error("snapshot: byte list length out of range");
  std::vector<std::uint8_t> v(n);
  read_raw(v.data(), n);
  return v;
}

}  // namespace nibbler
