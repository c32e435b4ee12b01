#pragma once

// L2-regularised logistic regression on standardised features, trained by
// full-batch gradient descent with Armijo backtracking, plus binary
// classification metrics with the positive class as label 1.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "clinrel/error.hpp"
#include "clinrel/feature_set.hpp"

namespace clinrel {

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;  // 1 for zero-variance features

  friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

// Population statistics per column.
inline Standardizer standardize_fit(const FeatureSet& x) {
  const std::size_t n = x.count();
  const std::size_t d = x.dim();
  Standardizer s{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = x.row(i);
    for (std::size_t k = 0; k < d; ++k) s.mean[k] += r[k];
  }
  for (double& m : s.mean) m /= static_cast<double>(n);
  std::vector<double> var(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = x.row(i);
    for (std::size_t k = 0; k < d; ++k) {
      const double c = r[k] - s.mean[k];
      var[k] += c * c;
    }
  }
  for (std::size_t k = 0; k < d; ++k) {
    const double sd = std::sqrt(var[k] / static_cast<double>(n));
    s.scale[k] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

// Row-major n x d doubles.
inline std::vector<double> standardize_apply(const Standardizer& s, const FeatureSet& x) {
  if (x.dim() != s.mean.size()) throw Error("standardizer dim mismatch");
  std::vector<double> out(x.count() * x.dim());
  for (std::size_t i = 0; i < x.count(); ++i) {
    const auto r = x.row(i);
    for (std::size_t k = 0; k < x.dim(); ++k) out[i * x.dim() + k] = (r[k] - s.mean[k]) / s.scale[k];
  }
  return out;
}

struct LogRegConfig {
  double l2 = 1e-4;
  std::size_t max_epochs = 2000;
  double grad_tol = 1e-6;
  double init_step = 1.0;
  double armijo_c = 1e-4;
  std::optional<std::array<double, 2>> class_weights;  // {negative, positive}

  void validate() const {
    if (!(l2 >= 0.0)) throw Error("l2 must be >= 0");
    if (!(grad_tol > 0.0)) throw Error("grad_tol must be > 0");
    if (!(init_step > 0.0)) throw Error("init_step must be > 0");
    if (!(armijo_c > 0.0 && armijo_c < 1.0)) throw Error("armijo_c must be in (0, 1)");
    if (class_weights && !((*class_weights)[0] > 0.0 && (*class_weights)[1] > 0.0)) {
      throw Error("class weights must be > 0");
    }
  }
};

struct LogRegModel {
  std::vector<double> weights;
  double bias = 0.0;
  Standardizer standardizer;
  // Diagnostics.
  std::vector<double> loss_trace;  // objective at start and after each accepted step
  std::size_t epochs = 0;
  double grad_inf_norm = 0.0;
  bool converged = false;

  double decision(std::span<const float> row) const {
    double z = bias;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      z += weights[k] * ((row[k] - standardizer.mean[k]) / standardizer.scale[k]);
    }
    return z;
  }
};

namespace detail {

// log(1 + exp(-t)) without overflow.
inline double log1p_exp_neg(double t) { return t > 0.0 ? std::log1p(std::exp(-t)) : -t + std::log1p(std::exp(t)); }

inline double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// Mean (optionally class-weighted) logistic loss plus (l2/2)|w|^2 over
// standardised rows `xs`; params = (w_0 .. w_{d-1}, b).
struct LogisticObjective {
  std::span<const double> xs;
  std::span<const std::uint8_t> y;
  std::size_t d;
  double l2;
  std::array<double, 2> weights{1.0, 1.0};

  double value(std::span<const double> params) const {
    const std::size_t n = y.size();
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double z = params[d];
      for (std::size_t k = 0; k < d; ++k) z += params[k] * xs[i * d + k];
      const double margin = y[i] ? z : -z;
      loss += weights[y[i]] * log1p_exp_neg(margin);
    }
    double reg = 0.0;
    for (std::size_t k = 0; k < d; ++k) reg += params[k] * params[k];
    return loss / static_cast<double>(n) + 0.5 * l2 * reg;
  }

  void gradient(std::span<const double> params, std::span<double> grad) const {
    const std::size_t n = y.size();
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double z = params[d];
      for (std::size_t k = 0; k < d; ++k) z += params[k] * xs[i * d + k];
      const double r = weights[y[i]] * (sigmoid(z) - static_cast<double>(y[i]));
      for (std::size_t k = 0; k < d; ++k) grad[k] += r * xs[i * d + k];
      grad[d] += r;
    }
    for (std::size_t k = 0; k <= d; ++k) grad[k] /= static_cast<double>(n);
    for (std::size_t k = 0; k < d; ++k) grad[k] += l2 * params[k];
  }
};

inline double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace detail

inline LogRegModel train_logreg(const FeatureSet& x, std::span<const std::uint8_t> y, const LogRegConfig& cfg) {
  cfg.validate();
  if (y.size() != x.count()) throw Error("label count does not match sample count");
  bool has0 = false, has1 = false;
  for (auto v : y) {
    if (v > 1) throw Error("labels must be 0 or 1");
    (v ? has1 : has0) = true;
  }
  if (!has0 || !has1) throw Error("training data must contain both classes");

  LogRegModel model;
  model.standardizer = standardize_fit(x);
  const auto xs = standardize_apply(model.standardizer, x);
  const std::size_t d = x.dim();
  detail::LogisticObjective f{xs, y, d, cfg.l2};
  if (cfg.class_weights) f.weights = *cfg.class_weights;

  std::vector<double> params(d + 1, 0.0), grad(d + 1), trial(d + 1);
  double loss = f.value(params);
  model.loss_trace.push_back(loss);
  f.gradient(params, grad);
  model.grad_inf_norm = detail::inf_norm(grad);

  while (model.epochs < cfg.max_epochs && model.grad_inf_norm >= cfg.grad_tol) {
    double grad_sq = 0.0;
    for (double g : grad) grad_sq += g * g;
    double step = cfg.init_step;
    double trial_loss = 0.0;
    bool accepted = false;
    for (int halvings = 0; halvings < 60; ++halvings, step *= 0.5) {
      for (std::size_t k = 0; k <= d; ++k) trial[k] = params[k] - step * grad[k];
      trial_loss = f.value(trial);
      if (trial_loss <= loss - cfg.armijo_c * step * grad_sq) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;  // step underflow: at numerical optimum
    params.swap(trial);
    loss = trial_loss;
    model.loss_trace.push_back(loss);
    ++model.epochs;
    f.gradient(params, grad);
    model.grad_inf_norm = detail::inf_norm(grad);
  }
  model.converged = model.grad_inf_norm < cfg.grad_tol;
  model.weights.assign(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(d));
  model.bias = params[d];
  return model;
}

// Label 1 iff sigmoid(w.x' + b) >= 0.5, i.e. iff the decision value is >= 0.
inline std::vector<std::uint8_t> predict(const LogRegModel& model, const FeatureSet& x) {
  if (x.dim() != model.weights.size()) throw Error("model/feature dim mismatch");
  std::vector<std::uint8_t> out(x.count());
  for (std::size_t i = 0; i < x.count(); ++i) out[i] = model.decision(x.row(i)) >= 0.0 ? 1 : 0;
  return out;
}

struct ConfusionMatrix {
  std::size_t tp = 0, fn = 0, fp = 0, tn = 0;
  std::size_t total() const noexcept { return tp + fn + fp + tn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

inline ConfusionMatrix confusion(std::span<const std::uint8_t> truth, std::span<const std::uint8_t> pred) {
  if (truth.size() != pred.size()) throw Error("label vectors differ in length");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i]) {
      (pred[i] ? cm.tp : cm.fn) += 1;
    } else {
      (pred[i] ? cm.fp : cm.tn) += 1;
    }
  }
  return cm;
}

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  friend bool operator==(const ClassMetrics&, const ClassMetrics&) = default;
};

struct ClassificationReport {
  ClassMetrics positive;  // AD
  ClassMetrics negative;  // NonAD
  double balanced_accuracy = 0.0;
  bool undefined = false;  // some ratio had a zero denominator and was reported as 0
  ConfusionMatrix counts;
  friend bool operator==(const ClassificationReport&, const ClassificationReport&) = default;
};

inline ClassificationReport metrics(const ConfusionMatrix& cm) {
  ClassificationReport rep;
  rep.counts = cm;
  auto ratio = [&](std::size_t num, std::size_t den) {
    if (den == 0) {
      rep.undefined = true;
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  auto f1 = [&](const ClassMetrics& m) {
    if (m.precision + m.recall == 0.0) {
      rep.undefined = true;
      return 0.0;
    }
    return 2.0 * m.precision * m.recall / (m.precision + m.recall);
  };
  rep.positive.precision = ratio(cm.tp, cm.tp + cm.fp);
  rep.positive.recall = ratio(cm.tp, cm.tp + cm.fn);
  rep.positive.f1 = f1(rep.positive);
  rep.negative.precision = ratio(cm.tn, cm.tn + cm.fn);
  rep.negative.recall = ratio(cm.tn, cm.tn + cm.fp);
  rep.negative.f1 = f1(rep.negative);
  rep.balanced_accuracy = 0.5 * (rep.positive.recall + rep.negative.recall);
  return rep;
}

}  // namespace clinrel
