// Writes the imbalanced two-class augmentation fixture and its golden reports.
//
//   make_aug_fixture <out_dir>
//
// Real train: 120 AD, 20 NonAD. Real test: 77 AD, 36 NonAD.
// Iteration 1: 100 synthetic NonAD from the real NonAD distribution.
// Iteration 2: class-swapped synthetic sets (100 AD drawn like NonAD, 100
// NonAD drawn like AD).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "clinrel/augmentation.hpp"
#include "clinrel/feature_set.hpp"
#include "clinrel/random.hpp"
#include "clinrel/registry.hpp"

namespace {

constexpr std::size_t kDim = 8;
constexpr double kShift = 0.45;  // per-coordinate NonAD mean offset

clinrel::FeatureSet draw(std::size_t count, double mean, std::uint64_t seed, const std::string& id) {
  clinrel::Pcg32 rng(seed);
  std::vector<float> data(count * kDim);
  for (auto& v : data) v = static_cast<float>(mean + rng.normal());
  return clinrel::FeatureSet(count, kDim, std::move(data), id);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: make_aug_fixture <out_dir>\n");
    return 2;
  }
  namespace fs = std::filesystem;
  using nlohmann::json;
  const fs::path out = argv[1];
  fs::create_directories(out);

  struct Spec {
    std::string id, source, cls;
    std::size_t count;
    double mean;
    std::uint64_t seed;
    int iteration;  // 0: none
    std::string split;
  };
  const std::vector<Spec> specs{
      {"real_ad_train", "real", "AD", 120, 0.0, 101, 0, "train"},
      {"real_nonad_train", "real", "NonAD", 20, kShift, 102, 0, "train"},
      {"real_ad_test", "real", "AD", 77, 0.0, 103, 0, "test"},
      {"real_nonad_test", "real", "NonAD", 36, kShift, 104, 0, "test"},
      {"syn_nonad_1", "synthetic", "NonAD", 100, kShift, 201, 1, ""},
      {"syn_ad_2", "synthetic", "AD", 100, kShift, 301, 2, ""},
      {"syn_nonad_2", "synthetic", "NonAD", 100, 0.0, 302, 2, ""},
  };

  json manifest = json::array();
  for (const auto& s : specs) {
    const std::string file = s.id + ".fvec";
    clinrel::write_feature_file(draw(s.count, s.mean, s.seed, s.id), out / file);
    json e{{"id", s.id}, {"path", file}, {"source", s.source}, {"class", s.cls}};
    if (s.iteration) e["iteration"] = s.iteration;
    if (!s.split.empty()) e["split"] = s.split;
    manifest.push_back(e);
  }
  std::ofstream(out / "manifest.json") << manifest.dump(2) << "\n";

  const auto reg = clinrel::load_manifest(out / "manifest.json");
  json golden;
  for (int it : {1, 2}) {
    clinrel::AugmentationConfig cfg;
    cfg.iteration = it;
    const auto rep = clinrel::augmentation_experiment(reg, cfg);
    golden[std::to_string(it)] = json::parse(clinrel::render_aug_report(rep, clinrel::ReportFormat::Json));
  }
  std::ofstream(out / "golden.json") << golden.dump(2) << "\n";
  std::printf("%s\n", golden.dump(2).c_str());
  return 0;
}
