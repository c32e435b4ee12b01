#pragma once

// FeatureSet and the FVEC binary file format.
//
// FVEC layout (all integers little-endian):
//   bytes  0..3   ASCII "FVEC"
//   bytes  4..7   u32 version (= 1)
//   bytes  8..11  u32 count
//   bytes 12..15  u32 dim
//   then count*dim IEEE-754 binary32 little-endian values, row-major.

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "clinrel/error.hpp"

namespace clinrel {

class FeatureSet {
 public:
  FeatureSet(std::size_t count, std::size_t dim, std::vector<float> data, std::string id = {})
      : count_(count), dim_(dim), data_(std::move(data)), id_(std::move(id)) {
    if (count_ < 1 || dim_ < 1) throw Error("feature set must have count >= 1 and dim >= 1");
    if (data_.size() != count_ * dim_) {
      throw Error("feature set data has " + std::to_string(data_.size()) + " entries, expected " +
                  std::to_string(count_ * dim_));
    }
    for (std::size_t i = 0; i < data_.size(); ++i) {
      if (!std::isfinite(data_[i])) {
        throw Error("non-finite value at (" + std::to_string(i / dim_) + "," +
                    std::to_string(i % dim_) + ")");
      }
    }
  }

  std::size_t count() const noexcept { return count_; }
  std::size_t dim() const noexcept { return dim_; }
  const std::string& id() const noexcept { return id_; }
  std::span<const float> data() const noexcept { return data_; }
  std::span<const float> row(std::size_t i) const noexcept {
    return std::span<const float>(data_).subspan(i * dim_, dim_);
  }

  // Rows `indices` in the given order.
  FeatureSet subset(std::span<const std::size_t> indices) const {
    std::vector<float> out;
    out.reserve(indices.size() * dim_);
    for (std::size_t i : indices) {
      const auto r = row(i);
      out.insert(out.end(), r.begin(), r.end());
    }
    return FeatureSet(indices.size(), dim_, std::move(out), id_);
  }

  friend bool operator==(const FeatureSet& a, const FeatureSet& b) {
    // Ids are labels, not content: a file read back under another name is still equal.
    if (a.count_ != b.count_ || a.dim_ != b.dim_) return false;
    return std::memcmp(a.data_.data(), b.data_.data(), a.data_.size() * sizeof(float)) == 0;
  }

 private:
  std::size_t count_;
  std::size_t dim_;
  std::vector<float> data_;
  std::string id_;
};

// Row-wise concatenation; all parts must share a dimension.
inline FeatureSet concat(std::span<const FeatureSet> parts, std::string id) {
  if (parts.empty()) throw Error("cannot concatenate zero feature sets");
  const std::size_t dim = parts.front().dim();
  std::size_t count = 0;
  std::vector<float> data;
  for (const auto& p : parts) {
    if (p.dim() != dim) {
      throw Error("dim mismatch " + std::to_string(p.dim()) + " \xE2\x89\xA0 " + std::to_string(dim));
    }
    count += p.count();
    data.insert(data.end(), p.data().begin(), p.data().end());
  }
  return FeatureSet(count, dim, std::move(data), std::move(id));
}

namespace fvec {

inline constexpr char kMagic[4] = {'F', 'V', 'E', 'C'};
inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::size_t kHeaderBytes = 16;

namespace detail {

inline void put_u32(std::vector<char>& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<char>((v >> s) & 0xFFu));
}

inline std::uint32_t get_u32(const char* p) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[b])) << (8 * b);
  return v;
}

}  // namespace detail

inline std::vector<char> encode(const FeatureSet& set) {
  if (set.count() > std::numeric_limits<std::uint32_t>::max() ||
      set.dim() > std::numeric_limits<std::uint32_t>::max()) {
    throw Error("feature set too large for FVEC header");
  }
  std::vector<char> out(std::begin(kMagic), std::end(kMagic));
  out.reserve(kHeaderBytes + set.data().size() * 4);
  detail::put_u32(out, kVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(set.count()));
  detail::put_u32(out, static_cast<std::uint32_t>(set.dim()));
  for (float f : set.data()) detail::put_u32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

inline FeatureSet decode(std::span<const char> bytes, std::string id = {}) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw Error("bad magic");
  if (bytes.size() < kHeaderBytes) throw Error("truncated header");
  const std::uint32_t version = detail::get_u32(bytes.data() + 4);
  if (version != kVersion) throw Error("unsupported FVEC version " + std::to_string(version));
  const std::size_t count = detail::get_u32(bytes.data() + 8);
  const std::size_t dim = detail::get_u32(bytes.data() + 12);
  if (dim != 0 && count > (std::numeric_limits<std::size_t>::max() / 4) / dim) {
    throw Error("FVEC header declares an impossible size");
  }
  const std::size_t expected = count * dim * 4;
  if (bytes.size() - kHeaderBytes < expected) {
    throw Error("truncated: expected " + std::to_string(expected) + " bytes");
  }
  std::vector<float> data(count * dim);
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = std::bit_cast<float>(detail::get_u32(bytes.data() + kHeaderBytes + 4 * i));
  }
  return FeatureSet(count, dim, std::move(data), std::move(id));
}

}  // namespace fvec

inline void write_feature_file(const FeatureSet& set, const std::filesystem::path& path) {
  const auto bytes = fvec::encode(set);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

inline FeatureSet load_feature_file(const std::filesystem::path& path, std::string id = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("file not found: " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return fvec::decode(bytes, id.empty() ? path.stem().string() : std::move(id));
}

}  // namespace clinrel
