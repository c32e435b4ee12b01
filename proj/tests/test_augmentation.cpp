#include <cstdlib>
#include <filesystem>

#include <gtest/gtest.h>
#include <json.hpp>

#include "clinrel/augmentation.hpp"
#include "test_support.hpp"

namespace clinrel {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const fs::path kFixture = fs::path(CLINREL_TEST_DATA_DIR) / "aug";

json golden() { return json::parse(testing::read_file(kFixture / "golden.json")); }

AugReport run_fixture(std::optional<std::int64_t> iteration) {
  AugmentationConfig cfg;
  cfg.iteration = iteration;
  return augmentation_experiment(load_manifest(kFixture / "manifest.json"), cfg);
}

AugmentationData small_data(std::uint64_t seed) {
  return {testing::gaussian_set(40, 3, seed, 0.0),
          testing::gaussian_set(10, 3, seed + 1, 1.0),
          testing::gaussian_set(30, 3, seed + 2, 0.0),
          testing::gaussian_set(30, 3, seed + 3, 1.0),
          std::nullopt,
          std::nullopt};
}

TEST(Augmentation, WithoutSyntheticBothRunsAgree) {
  const auto rep = augmentation_experiment(small_data(5), LogRegConfig{});
  EXPECT_EQ(rep.real_only, rep.real_plus_synth);
  EXPECT_EQ(rep.real_counts, rep.augmented_counts);
  EXPECT_EQ(rep.real_counts, (SampleCounts{40, 10, 30, 30}));
}

TEST(Augmentation, SyntheticCountsAreAddedToTraining) {
  auto data = small_data(6);
  data.synth_negative = testing::gaussian_set(30, 3, 60, 1.0);
  const auto rep = augmentation_experiment(data, LogRegConfig{});
  EXPECT_EQ(rep.augmented_counts, (SampleCounts{40, 40, 30, 30}));
  EXPECT_EQ(rep.real_plus_synth.counts.total(), 60u);
}

TEST(AugmentationFixture, ReproducesGoldenReports) {
  const auto g = golden();
  for (int it : {1, 2}) {
    const auto rep = run_fixture(it);
    EXPECT_EQ(json::parse(render_aug_report(rep, ReportFormat::Json)), g[std::to_string(it)]) << "iteration " << it;
  }
}

TEST(AugmentationFixture, MinorityAugmentationDoesNotReduceMinorityRecall) {
  const auto rep = run_fixture(1);
  EXPECT_EQ(rep.real_counts.train_negative, 20u);
  EXPECT_EQ(rep.augmented_counts.train_negative, 120u);
  EXPECT_GE(rep.real_plus_synth.negative.recall, rep.real_only.negative.recall);
}

TEST(AugmentationFixture, SwappedAugmentationDoesNotIncreaseBalancedAccuracy) {
  const auto rep = run_fixture(2);
  EXPECT_EQ(rep.augmented_counts.train_positive, 220u);
  EXPECT_EQ(rep.augmented_counts.train_negative, 120u);
  EXPECT_LE(rep.real_plus_synth.balanced_accuracy, rep.real_only.balanced_accuracy);
}

TEST(AugmentationFixture, UnsetIterationPoolsAllSyntheticSets) {
  const auto data = load_augmentation_data(load_manifest(kFixture / "manifest.json"), {});
  ASSERT_TRUE(data.synth_positive && data.synth_negative);
  EXPECT_EQ(data.synth_positive->count(), 100u);
  EXPECT_EQ(data.synth_negative->count(), 200u);
  EXPECT_EQ(data.test_positive.count(), 77u);
  EXPECT_EQ(data.test_negative.count(), 36u);
}

TEST(AugmentationFixture, GeneratorReproducesCommittedFiles) {
  testing::TempDir tmp("augfx");
  const std::string cmd = std::string(CLINREL_FIXTURE_GEN_PATH) + " " + tmp.path().string() + " > /dev/null";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  for (const auto& e : fs::directory_iterator(kFixture)) {
    EXPECT_EQ(testing::read_file(e.path()), testing::read_file(tmp / e.path().filename().string()))
        << e.path().filename();
  }
}

TEST(AugmentationFixture, MarkdownTableLayout) {
  const auto md = render_aug_report(run_fixture(1), ReportFormat::Markdown);
  EXPECT_NE(md.find("| Training images | AD Precision | AD Recall | AD F1-score | NonAD Precision"), std::string::npos);
  EXPECT_NE(md.find("| Real | "), std::string::npos);
  EXPECT_NE(md.find("| Real+Synthetic | "), std::string::npos);
  EXPECT_NE(md.find("real 120 AD / 20 NonAD; real+synthetic 120 AD / 120 NonAD. Test samples: 77 AD / 36 NonAD."),
            std::string::npos);
}

TEST(AugmentationRegistry, MissingTestSplitIsReported) {
  testing::TempDir tmp("aug_missing");
  write_feature_file(testing::gaussian_set(5, 2, 1), tmp / "a.fvec");
  testing::write_json(tmp / "m.json", json::array({
                                          {{"id", "a"}, {"path", "a.fvec"}, {"source", "real"}, {"class", "AD"}, {"split", "train"}},
                                          {{"id", "b"}, {"path", "a.fvec"}, {"source", "real"}, {"class", "NonAD"}, {"split", "train"}},
                                      }));
  try {
    load_augmentation_data(load_manifest(tmp / "m.json"), {});
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "no real/AD/test");
  }
}

}  // namespace
}  // namespace clinrel
