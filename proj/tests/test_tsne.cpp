#include <cmath>

#include <gtest/gtest.h>

#include "clinrel/scatter.hpp"
#include "clinrel/tsne.hpp"
#include "test_support.hpp"

namespace clinrel {
namespace {

// Independent oracles -------------------------------------------------------

double naive_sq_dist(const FeatureSet& x, std::size_t i, std::size_t j) {
  double s = 0;
  for (std::size_t k = 0; k < x.dim(); ++k) s += std::pow(double(x.row(i)[k]) - double(x.row(j)[k]), 2);
  return s;
}

double naive_kl(const SquareMatrix& p, const Embedding& y) {
  const std::size_t n = p.size();
  double z = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) z += 1.0 / (1.0 + std::pow(y.x(i) - y.x(j), 2) + std::pow(y.y(i) - y.y(j), 2));
  double kl = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double q = std::max(1.0 / (1.0 + std::pow(y.x(i) - y.x(j), 2) + std::pow(y.y(i) - y.y(j), 2)) / z, 1e-12);
      const double pij = std::max(p(i, j), 1e-12);
      kl += pij * std::log(pij / q);
    }
  return kl;
}

SquareMatrix random_joint(std::size_t n, Pcg32& rng) {
  SquareMatrix p(n);
  double total = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      p(i, j) = p(j, i) = 0.05 + rng.uniform();
      total += 2 * p(i, j);
    }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) p(i, j) /= total;
  return p;
}

Embedding random_embedding(std::size_t n, Pcg32& rng, double scale = 2.0) {
  Embedding y{std::vector<double>(2 * n)};
  for (auto& v : y.xy) v = scale * rng.normal();
  return y;
}

// pairwise_sq_dists -----------------------------------------------------------

TEST(PairwiseDists, ThreeFourFive) {
  const auto d = pairwise_sq_dists(testing::from_rows({{0, 0}, {3, 4}}));
  EXPECT_EQ(d(0, 0), 0.0);
  EXPECT_EQ(d(0, 1), 25.0);
  EXPECT_EQ(d(1, 0), 25.0);
}

TEST(PairwiseDists, IdenticalRowsAllZero) {
  const auto d = pairwise_sq_dists(testing::from_rows({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}}));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(d(i, j), 0.0);
}

TEST(PairwiseDists, MatchesNaiveLoop) {
  const auto x = testing::gaussian_set(5, 3, 77);
  const auto d = pairwise_sq_dists(x, 2);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      EXPECT_NEAR(d(i, j), naive_sq_dist(x, i, j), 1e-12);
      EXPECT_EQ(d(i, j), d(j, i));
    }
}

// perplexity_calibration --------------------------------------------------------

TEST(Calibration, EquidistantPointsAreUniform) {
  SquareMatrix d(3, 1.0);
  for (std::size_t i = 0; i < 3; ++i) d(i, i) = 0.0;
  const auto aff = perplexity_calibration(d, {.perplexity = 2.0});
  EXPECT_EQ(aff.target_perplexity, 2.0);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_TRUE(aff.calibration[i].converged);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(aff.p(i, j), i == j ? 0.0 : 1.0 / 6.0, 1e-15);
  }
}

TEST(Calibration, JointIsSymmetricAndNormalised) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto x = testing::gaussian_set(8 + seed * 3, 4, seed);
    const auto aff = perplexity_calibration(pairwise_sq_dists(x), {.perplexity = 5.0});
    double total = 0;
    for (std::size_t i = 0; i < aff.p.size(); ++i)
      for (std::size_t j = 0; j < aff.p.size(); ++j) {
        total += aff.p(i, j);
        EXPECT_EQ(aff.p(i, j), aff.p(j, i));
        EXPECT_GE(aff.p(i, j), 0.0);
      }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Calibration, AchievesTargetPerplexityPerRow) {
  const auto x = testing::gaussian_set(20, 5, 4242);
  const auto d = pairwise_sq_dists(x);
  const auto aff = perplexity_calibration(d, {.perplexity = 5.0});
  ASSERT_EQ(aff.target_perplexity, 5.0);
  for (std::size_t i = 0; i < 20; ++i) {
    const auto& c = aff.calibration[i];
    EXPECT_TRUE(c.converged);
    EXPECT_NEAR(c.perplexity, 5.0, 1e-4);
    // recompute entropy from the reported precision alone
    double z = 0, h = 0;
    std::vector<double> w(20, 0.0);
    for (std::size_t j = 0; j < 20; ++j)
      if (j != i) z += (w[j] = std::exp(-c.beta * d(i, j)));
    for (std::size_t j = 0; j < 20; ++j)
      if (j != i && w[j] > 0) h -= (w[j] / z) * std::log2(w[j] / z);
    EXPECT_NEAR(std::exp2(h), 5.0, 1e-4);
  }
}

TEST(Calibration, PerplexityIsCappedForSmallSets) {
  EXPECT_EQ(effective_perplexity(30.0, 31), 10.0);
  EXPECT_EQ(effective_perplexity(30.0, 10), 3.0);
  EXPECT_EQ(effective_perplexity(30.0, 4), 2.0);
  EXPECT_EQ(effective_perplexity(30.0, 2), 1.0);
  EXPECT_EQ(effective_perplexity(5.0, 1000), 5.0);
}

// kl_objective / kl_gradient ----------------------------------------------------

TEST(KlObjective, TwoPointsAreDegenerate) {
  SquareMatrix p(2);
  p(0, 1) = p(1, 0) = 0.5;
  Pcg32 rng(1);
  for (int t = 0; t < 5; ++t) {
    const auto y = random_embedding(2, rng);
    EXPECT_NEAR(kl_objective(p, y), 0.0, 1e-15);
    const auto g = kl_gradient(p, y);
    for (double v : g.xy) EXPECT_NEAR(v, 0.0, 1e-15);
  }
}

TEST(KlObjective, ZeroWhenPEqualsQ) {
  Pcg32 rng(2);
  const auto y = random_embedding(6, rng);
  SquareMatrix p(6);
  double z = 0;
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j)
      if (i != j) z += (p(i, j) = 1.0 / (1.0 + std::pow(y.x(i) - y.x(j), 2) + std::pow(y.y(i) - y.y(j), 2)));
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) p(i, j) /= z;
  EXPECT_NEAR(kl_objective(p, y), 0.0, 1e-14);
}

TEST(KlObjective, MatchesNaiveOracleAndIsTranslationInvariant) {
  Pcg32 rng(3);
  for (int t = 0; t < 20; ++t) {
    const auto p = random_joint(6, rng);
    auto y = random_embedding(6, rng);
    const double kl = kl_objective(p, y);
    EXPECT_NEAR(kl, naive_kl(p, y), 1e-12);
    EXPECT_GE(kl, -1e-9);
    for (std::size_t i = 0; i < 6; ++i) {
      y.xy[2 * i] += 3.5;
      y.xy[2 * i + 1] -= 1.25;
    }
    EXPECT_NEAR(kl_objective(p, y), kl, 1e-12);
  }
}

TEST(KlGradient, CoincidentPointsGiveZero) {
  SquareMatrix p(4, 1.0 / 12.0);
  for (std::size_t i = 0; i < 4; ++i) p(i, i) = 0.0;
  const Embedding y{std::vector<double>(8, 0.0)};
  for (double v : kl_gradient(p, y).xy) EXPECT_EQ(v, 0.0);
}

TEST(KlGradient, MatchesCentralFiniteDifferences) {
  Pcg32 rng(4);
  for (std::size_t n = 5; n <= 12; ++n) {
    const auto p = random_joint(n, rng);
    auto y = random_embedding(n, rng);
    const auto g = kl_gradient(p, y);
    const double h = 1e-5;
    for (std::size_t k = 0; k < y.xy.size(); ++k) {
      const double orig = y.xy[k];
      y.xy[k] = orig + h;
      const double up = naive_kl(p, y);
      y.xy[k] = orig - h;
      const double down = naive_kl(p, y);
      y.xy[k] = orig;
      const double fd = (up - down) / (2 * h);
      EXPECT_LT(std::abs(g.xy[k] - fd), 1e-4 * std::max(std::abs(fd), 1e-3)) << "n=" << n << " k=" << k;
    }
  }
}

// tsne_embed -------------------------------------------------------------------

FeatureSet three_clusters(std::vector<int>& labels, std::uint64_t seed) {
  std::vector<FeatureSet> parts;
  labels.clear();
  for (int c = 0; c < 3; ++c) {
    std::vector<double> center(10, 0.0);
    center[static_cast<std::size_t>(c)] = 10.0;  // pairwise separation 10*sqrt(2) sigma
    parts.push_back(testing::gaussian_set(50, center, seed + static_cast<std::uint64_t>(c)));
    labels.insert(labels.end(), 50, c);
  }
  return concat(parts, "clusters");
}

double nearest_centroid_accuracy(const Embedding& y, const std::vector<int>& labels) {
  double cx[3] = {}, cy[3] = {}, cnt[3] = {};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    cx[labels[i]] += y.x(i);
    cy[labels[i]] += y.y(i);
    cnt[labels[i]] += 1;
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    int best = 0;
    double best_d = 1e300;
    for (int c = 0; c < 3; ++c) {
      const double d = std::pow(y.x(i) - cx[c] / cnt[c], 2) + std::pow(y.y(i) - cy[c] / cnt[c], 2);
      if (d < best_d) best_d = d, best = c;
    }
    correct += best == labels[i];
  }
  return double(correct) / double(labels.size());
}

TEST(TsneEmbed, RecoversSeparatedClusters) {
  std::vector<int> labels;
  const auto x = three_clusters(labels, 1000);
  const auto r = tsne_embed(x, {.seed = 11});
  EXPECT_GE(nearest_centroid_accuracy(r.coords, labels), 0.95);
  EXPECT_GE(r.final_kl, 0.0);
  ASSERT_EQ(r.kl_trace.size(), 1000u);
  EXPECT_LE(r.final_kl, r.kl_trace[250]);
  for (double v : r.coords.xy) EXPECT_TRUE(std::isfinite(v));
}

TEST(TsneEmbed, BitIdenticalAcrossRunsAndThreads) {
  const auto x = testing::gaussian_set(40, 6, 5);
  TsneConfig cfg{.perplexity = 10.0, .max_iter = 300, .seed = 99};
  const auto a = tsne_embed(x, cfg);
  const auto b = tsne_embed(x, cfg);
  cfg.threads = 4;
  const auto c = tsne_embed(x, cfg);
  EXPECT_EQ(a.coords, b.coords);
  EXPECT_EQ(a.coords, c.coords);
  EXPECT_EQ(a.kl_trace, c.kl_trace);
}

TEST(TsneEmbed, TwoPointsReturnInitialisation) {
  const auto x = testing::from_rows({{0, 0}, {1, 1}});
  const TsneConfig cfg{.seed = 3};
  const auto r = tsne_embed(x, cfg);
  EXPECT_EQ(r.coords, initial_embedding(2, cfg));
  EXPECT_TRUE(r.kl_trace.empty());
}

// render_scatter ----------------------------------------------------------------

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
  return n;
}

TEST(Scatter, OneCirclePerPointAndFourLegendEntries) {
  TsneResult r;
  r.coords = Embedding{{0, 0, 1, 2, -3, 4, 5, -1, 2, 2}};
  const std::vector<PointLabel> labels{{Source::Real, "AD"},
                                       {Source::Real, "NonAD"},
                                       {Source::Synthetic, "AD"},
                                       {Source::Synthetic, "NonAD"},
                                       {Source::Real, "AD"}};
  const auto svg = render_scatter(r, labels);
  EXPECT_EQ(count(svg, "<circle"), 5u);
  EXPECT_EQ(count(svg, "class=\"legend-entry\""), 4u);
  // data spans x in [-3, 5], y in [-1, 4]: 5% margins
  EXPECT_NE(svg.find("viewBox=\"-3.4000 -1.2500 8.8000 5.5000\""), std::string::npos);
  EXPECT_NE(svg.find("Synthetic NonAD"), std::string::npos);
}

TEST(Scatter, Errors) {
  TsneResult empty;
  EXPECT_THROW(render_scatter(empty, {}), Error);
  TsneResult r;
  r.coords = Embedding{{0, 0, 1, 1}};
  EXPECT_THROW(render_scatter(r, {{Source::Real, "AD"}}), Error);
}

TEST(Scatter, CsvDumps) {
  TsneResult r;
  r.coords = Embedding{{0.5, -1, 2, 3}};
  r.kl_trace = {1.5, 1.25};
  const auto csv = coords_csv(r, {{Source::Real, "AD"}, {Source::Synthetic, "NonAD"}});
  EXPECT_EQ(csv, "index,x,y,source,class\n0,0.5,-1,real,AD\n1,2,3,synthetic,NonAD\n");
  EXPECT_EQ(kl_trace_csv(r), "iter,kl\n1,1.5\n2,1.25\n");
}

}  // namespace
}  // namespace clinrel
