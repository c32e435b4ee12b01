#pragma once

// Exact O(n^2) t-SNE.
//
// Conditional Gaussian affinities are calibrated per point by bisection on the
// precision until the entropy matches log(perplexity), symmetrised to a joint
// distribution P, and matched by a Student-t distribution Q over 2-D
// coordinates using gradient descent with momentum and early exaggeration.
//
// Every row-wise computation writes into its own slot and is reduced in index
// order, so coordinates are bit-identical for any thread count.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "clinrel/error.hpp"
#include "clinrel/feature_set.hpp"
#include "clinrel/parallel.hpp"
#include "clinrel/random.hpp"

namespace clinrel {

// Dense row-major square matrix.
class SquareMatrix {
 public:
  SquareMatrix() = default;
  explicit SquareMatrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}

  std::size_t size() const noexcept { return n_; }
  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * n_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * n_ + j]; }
  std::span<const double> row(std::size_t i) const noexcept { return std::span<const double>(data_).subspan(i * n_, n_); }
  std::span<double> row(std::size_t i) noexcept { return std::span<double>(data_).subspan(i * n_, n_); }

  friend bool operator==(const SquareMatrix&, const SquareMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

// n x 2 coordinates, row-major (x0, y0, x1, y1, ...).
struct Embedding {
  std::vector<double> xy;
  std::size_t size() const noexcept { return xy.size() / 2; }
  double x(std::size_t i) const noexcept { return xy[2 * i]; }
  double y(std::size_t i) const noexcept { return xy[2 * i + 1]; }
  friend bool operator==(const Embedding&, const Embedding&) = default;
};

struct TsneConfig {
  double perplexity = 30.0;
  std::size_t max_iter = 1000;
  double exaggeration = 12.0;
  std::size_t exagg_iters = 250;
  double learning_rate = 200.0;
  double momentum_early = 0.5;
  double momentum_late = 0.8;
  std::size_t momentum_switch = 250;
  std::uint64_t seed = 0;
  double calib_tol = 1e-5;
  std::size_t calib_max_steps = 64;
  double init_sigma = 1e-4;
  std::size_t threads = 1;

  void validate() const {
    if (!(perplexity > 0.0)) throw Error("perplexity must be > 0");
    if (max_iter < 1) throw Error("max_iter must be >= 1");
    if (!(learning_rate > 0.0)) throw Error("learning_rate must be > 0");
    if (!(exaggeration >= 1.0)) throw Error("exaggeration must be >= 1");
    if (!(calib_tol > 0.0)) throw Error("calib_tol must be > 0");
  }
};

inline constexpr double kProbabilityFloor = 1e-12;

// Perplexity actually targeted for n points: capped at (n-1)/3 but never
// below 2, and never above n-1 (the most a row can have).
inline double effective_perplexity(double requested, std::size_t n) {
  const double nn = static_cast<double>(n);
  double p = std::min(requested, std::max(2.0, (nn - 1.0) / 3.0));
  return std::min(p, std::max(1.0, nn - 1.0));
}

struct CalibrationPoint {
  double beta = 1.0;
  double entropy_bits = 0.0;  // Shannon entropy of p(.|i) in bits
  double perplexity = 0.0;    // 2^entropy_bits
  std::size_t steps = 0;
  bool converged = false;
};

struct Affinities {
  SquareMatrix p;  // symmetric joint distribution, zero diagonal, sums to 1
  double target_perplexity = 0.0;
  std::vector<CalibrationPoint> calibration;
};

struct TsneResult {
  Embedding coords;
  double final_kl = 0.0;
  std::vector<double> kl_trace;  // kl_trace[t] is KL(P||Q) after t+1 updates, unexaggerated P
  double target_perplexity = 0.0;
  std::vector<CalibrationPoint> calibration;
};

inline SquareMatrix pairwise_sq_dists(const FeatureSet& x, std::size_t threads = 1) {
  const std::size_t n = x.count();
  SquareMatrix d(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const auto ri = x.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto rj = x.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < ri.size(); ++k) {
        const double diff = static_cast<double>(ri[k]) - static_cast<double>(rj[k]);
        s += diff * diff;
      }
      d(i, j) = s;
    }
  });
  return d;
}

namespace detail {

// Fills cond with p(j|i) for precision beta; returns entropy in nats.
inline double conditional_row(std::span<const double> dist, std::size_t i, double beta, double min_dist,
                              std::span<double> cond) {
  double sum = 0.0;
  for (std::size_t j = 0; j < dist.size(); ++j) {
    cond[j] = j == i ? 0.0 : std::exp(-beta * (dist[j] - min_dist));
    sum += cond[j];
  }
  double entropy = 0.0;
  for (std::size_t j = 0; j < dist.size(); ++j) {
    if (j == i) continue;
    cond[j] /= sum;
    if (cond[j] > 0.0) entropy -= cond[j] * std::log(cond[j]);
  }
  return entropy;
}

}  // namespace detail

inline Affinities perplexity_calibration(const SquareMatrix& dist, const TsneConfig& cfg) {
  const std::size_t n = dist.size();
  Affinities out;
  out.target_perplexity = effective_perplexity(cfg.perplexity, n);
  out.calibration.resize(n);
  out.p = SquareMatrix(n);
  if (n < 2) return out;
  const double target = std::log(out.target_perplexity);

  SquareMatrix cond(n);
  parallel_for(n, cfg.threads, [&](std::size_t i) {
    const auto d = dist.row(i);
    double min_dist = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) min_dist = std::min(min_dist, d[j]);
    }
    auto& cal = out.calibration[i];
    double beta = 1.0;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    double entropy = 0.0;
    for (cal.steps = 1; cal.steps <= cfg.calib_max_steps; ++cal.steps) {
      entropy = detail::conditional_row(d, i, beta, min_dist, cond.row(i));
      const double diff = entropy - target;
      if (std::abs(diff) < cfg.calib_tol) {
        cal.converged = true;
        break;
      }
      if (diff > 0.0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = 0.5 * (beta + lo);
      }
    }
    if (!cal.converged) {
      cal.steps = cfg.calib_max_steps;
      entropy = detail::conditional_row(d, i, beta, min_dist, cond.row(i));
      // A row whose entropy is pinned (e.g. equidistant neighbours) can still hit the target.
      cal.converged = std::abs(entropy - target) < cfg.calib_tol;
    }
    cal.beta = beta;
    cal.entropy_bits = entropy / std::log(2.0);
    cal.perplexity = std::exp2(cal.entropy_bits);
  });

  const double denom = 2.0 * static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out.p(i, j) = i == j ? 0.0 : (cond(i, j) + cond(j, i)) / denom;
    }
  }
  return out;
}

namespace detail {

// Student-t kernel w_ij = 1 / (1 + |y_i - y_j|^2) and its off-diagonal total.
inline double student_kernel(const Embedding& y, SquareMatrix& w, std::size_t threads) {
  const std::size_t n = y.size();
  std::vector<double> row_sums(n, 0.0);
  parallel_for(n, threads, [&](std::size_t i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) {
        w(i, j) = 0.0;
        continue;
      }
      const double dx = y.x(i) - y.x(j);
      const double dy = y.y(i) - y.y(j);
      w(i, j) = 1.0 / (1.0 + dx * dx + dy * dy);
      s += w(i, j);
    }
    row_sums[i] = s;
  });
  return pairwise_sum(row_sums);
}

inline double kl_from_kernel(const SquareMatrix& p, const SquareMatrix& w, double z, double p_scale,
                             std::size_t threads) {
  const std::size_t n = p.size();
  std::vector<double> row_sums(n, 0.0);
  parallel_for(n, threads, [&](std::size_t i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double pij = std::max(p_scale * p(i, j), kProbabilityFloor);
      const double qij = std::max(w(i, j) / z, kProbabilityFloor);
      s += pij * std::log(pij / qij);
    }
    row_sums[i] = s;
  });
  return pairwise_sum(row_sums);
}

inline void gradient_from_kernel(const SquareMatrix& p, const SquareMatrix& w, double z, double p_scale,
                                 const Embedding& y, std::span<double> grad, std::size_t threads) {
  const std::size_t n = p.size();
  parallel_for(n, threads, [&](std::size_t i) {
    double gx = 0.0;
    double gy = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double pij = std::max(p_scale * p(i, j), kProbabilityFloor);
      const double coeff = (pij - w(i, j) / z) * w(i, j);
      gx += coeff * (y.x(i) - y.x(j));
      gy += coeff * (y.y(i) - y.y(j));
    }
    grad[2 * i] = 4.0 * gx;
    grad[2 * i + 1] = 4.0 * gy;
  });
}

}  // namespace detail

// KL(P || Q) over off-diagonal pairs, with both distributions floored at 1e-12.
inline double kl_objective(const SquareMatrix& p, const Embedding& y, std::size_t threads = 1) {
  if (p.size() != y.size()) throw Error("affinity and embedding sizes differ");
  SquareMatrix w(p.size());
  const double z = detail::student_kernel(y, w, threads);
  return detail::kl_from_kernel(p, w, z, 1.0, threads);
}

inline Embedding kl_gradient(const SquareMatrix& p, const Embedding& y, std::size_t threads = 1) {
  if (p.size() != y.size()) throw Error("affinity and embedding sizes differ");
  SquareMatrix w(p.size());
  const double z = detail::student_kernel(y, w, threads);
  Embedding grad{std::vector<double>(y.xy.size(), 0.0)};
  detail::gradient_from_kernel(p, w, z, 1.0, y, grad.xy, threads);
  return grad;
}

inline Embedding initial_embedding(std::size_t n, const TsneConfig& cfg) {
  Pcg32 rng(cfg.seed);
  Embedding y{std::vector<double>(2 * n)};
  for (double& v : y.xy) v = cfg.init_sigma * rng.normal();
  return y;
}

inline TsneResult tsne_embed(const FeatureSet& x, const TsneConfig& cfg) {
  cfg.validate();
  const std::size_t n = x.count();
  TsneResult result;
  result.coords = initial_embedding(n, cfg);
  const auto aff = perplexity_calibration(pairwise_sq_dists(x, cfg.threads), cfg);
  result.target_perplexity = aff.target_perplexity;
  result.calibration = aff.calibration;
  if (n < 3) {
    result.final_kl = n < 2 ? 0.0 : kl_objective(aff.p, result.coords, cfg.threads);
    return result;
  }

  Embedding& y = result.coords;
  std::vector<double> velocity(y.xy.size(), 0.0);
  std::vector<double> grad(y.xy.size(), 0.0);
  SquareMatrix w(n);
  result.kl_trace.reserve(cfg.max_iter);

  for (std::size_t iter = 0; iter < cfg.max_iter; ++iter) {
    const double p_scale = iter < cfg.exagg_iters ? cfg.exaggeration : 1.0;
    const double momentum = iter < cfg.momentum_switch ? cfg.momentum_early : cfg.momentum_late;
    const double z = detail::student_kernel(y, w, cfg.threads);
    detail::gradient_from_kernel(aff.p, w, z, p_scale, y, grad, cfg.threads);
    for (std::size_t k = 0; k < y.xy.size(); ++k) {
      velocity[k] = momentum * velocity[k] - cfg.learning_rate * grad[k];
      y.xy[k] += velocity[k];
    }
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mx += y.x(i);
      my += y.y(i);
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      y.xy[2 * i] -= mx;
      y.xy[2 * i + 1] -= my;
    }
    result.kl_trace.push_back(kl_objective(aff.p, y, cfg.threads));
  }
  result.final_kl = std::max(0.0, result.kl_trace.back());
  return result;
}

}  // namespace clinrel
