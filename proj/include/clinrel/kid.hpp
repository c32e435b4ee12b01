#pragma once

// Kernel Inception Distance: the unbiased MMD^2 U-statistic under the cubic
// polynomial kernel k(x, y) = (gamma * <x, y> + coef)^degree, averaged over
// random subsets and reported as mean (std).
//
// Reproducibility rules:
//  * both sets are put in canonical (lexicographic) row order and the pair of
//    sets in canonical order before any summation, so the estimator is exactly
//    symmetric and exactly invariant to row permutations;
//  * per-row kernel sums run in ascending column order; row sums are combined
//    by pairwise summation, all in double precision;
//  * repetition r of kid_estimate seeds Pcg32 with splitmix64(seed) ^ r and
//    draws its X subset, then its Y subset, by partial Fisher-Yates.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clinrel/error.hpp"
#include "clinrel/feature_set.hpp"
#include "clinrel/parallel.hpp"
#include "clinrel/random.hpp"

namespace clinrel {

struct KernelConfig {
  unsigned degree = 3;
  std::optional<double> gamma;  // unset: 1 / dim
  double coef = 1.0;

  double gamma_for(std::size_t dim) const { return gamma.value_or(1.0 / static_cast<double>(dim)); }

  void validate() const {
    if (degree < 1) throw Error("kernel degree must be >= 1");
    if (gamma && !(*gamma > 0.0)) throw Error("kernel gamma must be > 0");
    if (!(coef >= 0.0)) throw Error("kernel coef must be >= 0");
  }
};

struct KidConfig {
  std::size_t subset_size = 100;
  std::size_t n_subsets = 100;
  std::uint64_t seed = 0;
  KernelConfig kernel;
  std::size_t threads = 1;

  void validate() const {
    if (subset_size < 2) throw Error("KID subset_size must be >= 2");
    if (n_subsets < 1) throw Error("KID n_subsets must be >= 1");
    kernel.validate();
  }
};

struct KidEstimate {
  double mean = 0.0;
  double std = 0.0;  // population std over subsets
  std::size_t n_subsets = 0;
  std::size_t subset_size = 0;  // smaller of the two per-set subset sizes
  friend bool operator==(const KidEstimate&, const KidEstimate&) = default;
};

namespace detail {

inline double ipow(double base, unsigned exp) {
  double result = 1.0;
  while (exp) {
    if (exp & 1u) result *= base;
    base *= base;
    exp >>= 1u;
  }
  return result;
}

inline double dot(std::span<const float> x, std::span<const float> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += static_cast<double>(x[i]) * static_cast<double>(y[i]);
  return s;
}

// Lexicographic order on rows.
inline std::vector<std::size_t> canonical_row_order(const FeatureSet& s) {
  std::vector<std::size_t> order(s.count());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ra = s.row(a), rb = s.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  });
  return order;
}

inline bool canonical_less(const FeatureSet& a, const FeatureSet& b) {
  if (a.count() != b.count()) return a.count() < b.count();
  return std::lexicographical_compare(a.data().begin(), a.data().end(), b.data().begin(), b.data().end());
}

// Sum of k(a_i, b_j) over all i, j (or i != j when `skip_diagonal`).
inline double kernel_block_sum(const FeatureSet& a, const FeatureSet& b, double gamma, double coef,
                               unsigned degree, bool skip_diagonal) {
  std::vector<double> row_sums(a.count());
  for (std::size_t i = 0; i < a.count(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < b.count(); ++j) {
      if (skip_diagonal && i == j) continue;
      s += ipow(gamma * dot(a.row(i), b.row(j)) + coef, degree);
    }
    row_sums[i] = s;
  }
  return pairwise_sum(row_sums);
}

}  // namespace detail

inline double poly_kernel(std::span<const float> x, std::span<const float> y, const KernelConfig& cfg) {
  if (x.size() != y.size()) {
    throw Error("kernel length mismatch " + std::to_string(x.size()) + " vs " + std::to_string(y.size()));
  }
  cfg.validate();
  return detail::ipow(cfg.gamma_for(x.size()) * detail::dot(x, y) + cfg.coef, cfg.degree);
}

inline double mmd2_unbiased(const FeatureSet& x_in, const FeatureSet& y_in, const KernelConfig& kernel) {
  if (x_in.dim() != y_in.dim()) {
    throw Error("dim mismatch " + std::to_string(x_in.dim()) + " vs " + std::to_string(y_in.dim()));
  }
  if (x_in.count() < 2 || y_in.count() < 2) throw Error("MMD needs at least 2 samples per set");
  kernel.validate();

  auto x = x_in.subset(detail::canonical_row_order(x_in));
  auto y = y_in.subset(detail::canonical_row_order(y_in));
  if (detail::canonical_less(y, x)) std::swap(x, y);

  const double gamma = kernel.gamma_for(x.dim());
  const double m = static_cast<double>(x.count());
  const double n = static_cast<double>(y.count());
  const double kxx = detail::kernel_block_sum(x, x, gamma, kernel.coef, kernel.degree, true);
  const double kyy = detail::kernel_block_sum(y, y, gamma, kernel.coef, kernel.degree, true);
  const double kxy = detail::kernel_block_sum(x, y, gamma, kernel.coef, kernel.degree, false);
  return kxx / (m * (m - 1.0)) + kyy / (n * (n - 1.0)) - 2.0 * kxy / (m * n);
}

inline KidEstimate kid_estimate(const FeatureSet& x, const FeatureSet& y, const KidConfig& cfg) {
  cfg.validate();
  if (x.count() < 2 || y.count() < 2) throw Error("KID needs at least 2 samples per set");
  if (x.dim() != y.dim()) {
    throw Error("dim mismatch " + std::to_string(x.dim()) + " vs " + std::to_string(y.dim()));
  }
  // Each side is clamped to its own size, so a subset_size covering both sets
  // reproduces the full-sample estimate.
  const std::size_t mx = std::min(cfg.subset_size, x.count());
  const std::size_t my = std::min(cfg.subset_size, y.count());

  std::vector<double> values(cfg.n_subsets);
  const std::uint64_t base_seed = splitmix64(cfg.seed);
  parallel_for(cfg.n_subsets, cfg.threads, [&](std::size_t r) {
    Pcg32 rng(base_seed ^ static_cast<std::uint64_t>(r));
    const auto xi = sample_without_replacement(rng, x.count(), mx);
    const auto yi = sample_without_replacement(rng, y.count(), my);
    values[r] = mmd2_unbiased(x.subset(xi), y.subset(yi), cfg.kernel);
  });

  KidEstimate est;
  est.n_subsets = cfg.n_subsets;
  est.subset_size = std::min(mx, my);
  double sum = 0.0;
  for (double v : values) sum += v;
  est.mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - est.mean) * (v - est.mean);
  est.std = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size())) : 0.0;
  return est;
}

}  // namespace clinrel
