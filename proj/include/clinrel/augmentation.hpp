#pragma once

// Augmentation experiment: does adding synthetic training features help a
// downstream classifier? One model is trained on real training data only,
// a second on real plus synthetic training data, and both are scored on the
// same real test split.

#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "clinrel/classifier.hpp"
#include "clinrel/error.hpp"
#include "clinrel/protocol.hpp"
#include "clinrel/registry.hpp"

namespace clinrel {

// Feature sets by role. Synthetic sets are optional.
struct AugmentationData {
  FeatureSet train_positive;
  FeatureSet train_negative;
  FeatureSet test_positive;
  FeatureSet test_negative;
  std::optional<FeatureSet> synth_positive;
  std::optional<FeatureSet> synth_negative;
};

struct AugmentationConfig {
  LogRegConfig logreg;
  ClassPair classes;
  // Checkpoint whose synthetic sets augment training; unset uses every
  // synthetic non-test entry of each class.
  std::optional<std::int64_t> iteration;
};

struct SampleCounts {
  std::size_t train_positive = 0, train_negative = 0, test_positive = 0, test_negative = 0;
  friend bool operator==(const SampleCounts&, const SampleCounts&) = default;
};

struct AugReport {
  ClassificationReport real_only;
  ClassificationReport real_plus_synth;
  SampleCounts real_counts;
  SampleCounts augmented_counts;
  std::optional<std::int64_t> iteration;
};

namespace detail {

inline std::pair<FeatureSet, std::vector<std::uint8_t>> stack_labelled(const std::vector<const FeatureSet*>& pos,
                                                                      const std::vector<const FeatureSet*>& neg) {
  std::vector<FeatureSet> parts;
  std::vector<std::uint8_t> labels;
  for (const auto* p : pos) {
    parts.push_back(*p);
    labels.insert(labels.end(), p->count(), 1);
  }
  for (const auto* n : neg) {
    parts.push_back(*n);
    labels.insert(labels.end(), n->count(), 0);
  }
  return {concat(parts, "stacked"), std::move(labels)};
}

inline ClassificationReport run_once(const FeatureSet& train, const std::vector<std::uint8_t>& labels,
                                     const FeatureSet& test, const std::vector<std::uint8_t>& test_labels,
                                     const LogRegConfig& cfg) {
  const auto model = train_logreg(train, labels, cfg);
  return metrics(confusion(test_labels, predict(model, test)));
}

}  // namespace detail

inline AugReport augmentation_experiment(const AugmentationData& data, const LogRegConfig& cfg) {
  const auto [test, test_labels] = detail::stack_labelled({&data.test_positive}, {&data.test_negative});

  std::vector<const FeatureSet*> pos{&data.train_positive};
  std::vector<const FeatureSet*> neg{&data.train_negative};
  const auto [real_train, real_labels] = detail::stack_labelled(pos, neg);

  AugReport rep;
  rep.real_counts = {data.train_positive.count(), data.train_negative.count(), data.test_positive.count(),
                     data.test_negative.count()};
  rep.real_only = detail::run_once(real_train, real_labels, test, test_labels, cfg);

  if (data.synth_positive) pos.push_back(&*data.synth_positive);
  if (data.synth_negative) neg.push_back(&*data.synth_negative);
  rep.augmented_counts = rep.real_counts;
  rep.augmented_counts.train_positive += data.synth_positive ? data.synth_positive->count() : 0;
  rep.augmented_counts.train_negative += data.synth_negative ? data.synth_negative->count() : 0;
  if (pos.size() == 1 && neg.size() == 1) {
    rep.real_plus_synth = rep.real_only;
  } else {
    const auto [aug_train, aug_labels] = detail::stack_labelled(pos, neg);
    rep.real_plus_synth = detail::run_once(aug_train, aug_labels, test, test_labels, cfg);
  }
  return rep;
}

inline AugmentationData load_augmentation_data(const DatasetRegistry& reg, const AugmentationConfig& cfg) {
  const auto& c = cfg.classes;
  auto require = [&](Source src, const std::string& cls, Split split) {
    return detail::require_set(reg, {.source = src, .class_label = cls, .split = split},
                               std::string(to_string(src)) + "/" + cls + "/" + std::string(to_string(split)));
  };
  AugmentationData data{require(Source::Real, c.positive, Split::Train), require(Source::Real, c.negative, Split::Train),
                        require(Source::Real, c.positive, Split::Test), require(Source::Real, c.negative, Split::Test),
                        std::nullopt, std::nullopt};
  auto synth = [&](const std::string& cls) {
    return reg.load({.source = Source::Synthetic, .class_label = cls, .iteration = cfg.iteration, .exclude_test = true},
                    "synthetic/" + cls);
  };
  data.synth_positive = synth(c.positive);
  data.synth_negative = synth(c.negative);
  return data;
}

inline AugReport augmentation_experiment(const DatasetRegistry& reg, const AugmentationConfig& cfg) {
  auto rep = augmentation_experiment(load_augmentation_data(reg, cfg), cfg.logreg);
  rep.iteration = cfg.iteration;
  return rep;
}

inline nlohmann::json to_json(const ClassificationReport& r) {
  auto cls = [](const ClassMetrics& m) { return nlohmann::json{{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}}; };
  return {{"positive", cls(r.positive)},
          {"negative", cls(r.negative)},
          {"balanced_accuracy", r.balanced_accuracy},
          {"undefined", r.undefined},
          {"confusion", {{"tp", r.counts.tp}, {"fn", r.counts.fn}, {"fp", r.counts.fp}, {"tn", r.counts.tn}}}};
}

inline nlohmann::json to_json(const SampleCounts& c) {
  return {{"train_positive", c.train_positive},
          {"train_negative", c.train_negative},
          {"test_positive", c.test_positive},
          {"test_negative", c.test_negative}};
}

inline std::string render_aug_report(const AugReport& rep, ReportFormat format, const ClassPair& classes = {}) {
  std::ostringstream os;
  const std::pair<const char*, const ClassificationReport*> rows[] = {{"Real", &rep.real_only},
                                                                      {"Real+Synthetic", &rep.real_plus_synth}};
  switch (format) {
    case ReportFormat::Markdown: {
      const auto& p = classes.positive;
      const auto& n = classes.negative;
      os << "| Training images | " << p << " Precision | " << p << " Recall | " << p << " F1-score | " << n
         << " Precision | " << n << " Recall | " << n << " F1-score | Balanced Accuracy |\n";
      os << "|---|---|---|---|---|---|---|---|\n";
      for (const auto& [name, r] : rows) {
        os << "| " << name;
        for (double v : {r->positive.precision, r->positive.recall, r->positive.f1, r->negative.precision,
                         r->negative.recall, r->negative.f1, r->balanced_accuracy}) {
          os << " | " << detail::format_fixed(v, 4);
        }
        os << " |\n";
      }
      os << "\nTraining samples: real " << rep.real_counts.train_positive << " " << p << " / "
         << rep.real_counts.train_negative << " " << n << "; real+synthetic " << rep.augmented_counts.train_positive
         << " " << p << " / " << rep.augmented_counts.train_negative << " " << n << ". Test samples: "
         << rep.real_counts.test_positive << " " << p << " / " << rep.real_counts.test_negative << " " << n << ".\n";
      if (rep.real_only.undefined || rep.real_plus_synth.undefined) {
        os << "\nSome ratios had a zero denominator and are reported as 0.\n";
      }
      break;
    }
    case ReportFormat::Csv: {
      os << "training,positive_precision,positive_recall,positive_f1,negative_precision,negative_recall,"
            "negative_f1,balanced_accuracy,tp,fn,fp,tn,train_positive,train_negative\n";
      for (const auto& [name, r] : rows) {
        const auto& counts = r == &rep.real_only ? rep.real_counts : rep.augmented_counts;
        os << name;
        for (double v : {r->positive.precision, r->positive.recall, r->positive.f1, r->negative.precision,
                         r->negative.recall, r->negative.f1, r->balanced_accuracy}) {
          os << ',' << detail::format_full(v);
        }
        os << ',' << r->counts.tp << ',' << r->counts.fn << ',' << r->counts.fp << ',' << r->counts.tn << ','
           << counts.train_positive << ',' << counts.train_negative << '\n';
      }
      break;
    }
    case ReportFormat::Json: {
      nlohmann::json doc{{"classes", {{"positive", classes.positive}, {"negative", classes.negative}}},
                         {"real", to_json(rep.real_only)},
                         {"real_plus_synthetic", to_json(rep.real_plus_synth)},
                         {"counts", {{"real", to_json(rep.real_counts)}, {"real_plus_synthetic", to_json(rep.augmented_counts)}}}};
      doc["iteration"] = rep.iteration ? nlohmann::json(*rep.iteration) : nlohmann::json(nullptr);
      os << doc.dump(2) << '\n';
      break;
    }
  }
  return os.str();
}

}  // namespace clinrel
