#pragma once

// Shared fixtures for the unit and acceptance suites.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "clinrel/feature_set.hpp"
#include "clinrel/random.hpp"

namespace clinrel::testing {

// count x dim samples of N(mean, sigma^2 I) from a seeded Pcg32.
inline FeatureSet gaussian_set(std::size_t count, std::size_t dim, std::uint64_t seed, double mean = 0.0,
                               double sigma = 1.0, std::string id = "gauss") {
  Pcg32 rng(seed);
  std::vector<float> data(count * dim);
  for (auto& v : data) v = static_cast<float>(mean + sigma * rng.normal());
  return FeatureSet(count, dim, std::move(data), std::move(id));
}

inline FeatureSet gaussian_set(std::size_t count, const std::vector<double>& center, std::uint64_t seed,
                               double sigma = 1.0, std::string id = "gauss") {
  Pcg32 rng(seed);
  std::vector<float> data;
  data.reserve(count * center.size());
  for (std::size_t i = 0; i < count; ++i) {
    for (double c : center) data.push_back(static_cast<float>(c + sigma * rng.normal()));
  }
  return FeatureSet(count, center.size(), std::move(data), std::move(id));
}

inline FeatureSet from_rows(const std::vector<std::vector<float>>& rows, std::string id = "rows") {
  std::vector<float> data;
  for (const auto& r : rows) data.insert(data.end(), r.begin(), r.end());
  return FeatureSet(rows.size(), rows.front().size(), std::move(data), std::move(id));
}

// Fresh, empty directory under the system temp dir.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("clinrel_" + tag + "_" + std::to_string(rd()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_json(const std::filesystem::path& p, const nlohmann::json& j) {
  std::ofstream(p) << j.dump(2);
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Writes a two-class sweep registry: real AD/NonAD reference sets plus
// synthetic AD/NonAD sets per iteration. Synthetic class c at iteration k is
// drawn around the real class c centre shifted by drift[k] in every coordinate.
inline std::filesystem::path write_sweep_registry(const std::filesystem::path& dir, std::size_t per_set,
                                                  std::size_t dim, const std::vector<std::int64_t>& iterations,
                                                  const std::vector<double>& drift, std::uint64_t seed) {
  nlohmann::json manifest = nlohmann::json::array();
  std::uint64_t s = seed;
  auto add = [&](const std::string& id, const FeatureSet& set, nlohmann::json extra) {
    write_feature_file(set, dir / (id + ".fvec"));
    extra["id"] = id;
    extra["path"] = id + ".fvec";
    manifest.push_back(extra);
  };
  const std::vector<double> ad(dim, 0.0);
  std::vector<double> nonad(dim, 0.0);
  for (std::size_t k = 0; k < dim; k += 2) nonad[k] = 1.0;
  add("real_ad", gaussian_set(per_set, ad, ++s), {{"source", "real"}, {"class", "AD"}});
  add("real_nonad", gaussian_set(per_set, nonad, ++s), {{"source", "real"}, {"class", "NonAD"}});
  for (std::size_t i = 0; i < iterations.size(); ++i) {
    auto shifted = [&](std::vector<double> c) {
      for (auto& v : c) v += drift[i];
      return c;
    };
    const auto it = std::to_string(iterations[i]);
    add("syn_ad_" + it, gaussian_set(per_set, shifted(ad), ++s),
        {{"source", "synthetic"}, {"class", "AD"}, {"iteration", iterations[i]}});
    add("syn_nonad_" + it, gaussian_set(per_set, shifted(nonad), ++s),
        {{"source", "synthetic"}, {"class", "NonAD"}, {"iteration", iterations[i]}});
  }
  const auto path = dir / "manifest.json";
  write_json(path, manifest);
  return path;
}

}  // namespace clinrel::testing
