#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>
#include <string_view>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "hyperreg/errors.hpp"

// Length-prefixed JSON header followed by raw little-endian f64 blocks.
namespace hyperreg::detail {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

class BinaryWriter {
 public:
  explicit BinaryWriter(const nlohmann::json& header) {
    const std::string h = header.dump();
    put_u64(h.size());
    out_ += h;
  }
  void put(const double* p, std::size_t n) {
    out_.append(reinterpret_cast<const char*>(p), n * sizeof(double));
  }
  void put(const Eigen::VectorXd& v) { put(v.data(), v.size()); }
  void put(double x) { put(&x, 1); }
  std::string take() { return std::move(out_); }

 private:
  void put_u64(std::uint64_t v) { out_.append(reinterpret_cast<const char*>(&v), 8); }
  std::string out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::string_view bytes) : bytes_(bytes) {
    if (bytes_.size() < 8) throw ParseError("truncated file (no header length)", 0);
    std::uint64_t n;
    std::memcpy(&n, bytes_.data(), 8);
    if (n > bytes_.size() - 8) throw ParseError("truncated file (header)", 0);
    try {
      header_ = nlohmann::json::parse(bytes_.substr(8, n));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad header: ") + e.what(), 0);
    }
    pos_ = 8 + n;
  }
  const nlohmann::json& header() const { return header_; }
  void get(double* p, std::size_t n) {
    if (n * sizeof(double) > bytes_.size() - pos_) throw ParseError("truncated file (data)", 0);
    std::memcpy(p, bytes_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
  }
  void get(Eigen::VectorXd& v) { get(v.data(), v.size()); }
  double get() {
    double x;
    get(&x, 1);
    return x;
  }
  void expect_end() const {
    if (pos_ != bytes_.size()) throw ParseError("trailing bytes after data", 0);
  }

 private:
  std::string_view bytes_;
  nlohmann::json header_;
  std::size_t pos_ = 0;
};

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::uint64_t parse_hex64(const std::string& s) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used, 16);
    if (used != s.size()) throw ParseError("bad hash '" + s + "'", 0);
    return v;
  } catch (const std::logic_error&) {
    throw ParseError("bad hash '" + s + "'", 0);
  }
}

}  // namespace hyperreg::detail
