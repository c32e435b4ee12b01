#pragma once

// Directional relevance protocol.
//
// For every generator checkpoint the synthetic sets of both classes are
// compared with both real classes. Same-class KID should be low and
// cross-class KID high; a sweep over checkpoints marks the best iteration per
// column and a linear same-minus-cross score picks one checkpoint.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "clinrel/error.hpp"
#include "clinrel/kid.hpp"
#include "clinrel/parallel.hpp"
#include "clinrel/registry.hpp"

namespace clinrel {

// Which class labels play the two roles of the binary protocol.
struct ClassPair {
  std::string positive = "AD";
  std::string negative = "NonAD";
};

struct ComparisonRow {
  std::int64_t iteration = 0;
  KidEstimate same_ad;      // synthetic positive vs real positive
  KidEstimate cross_ad;     // synthetic positive vs real negative
  KidEstimate same_nonad;   // synthetic negative vs real negative
  KidEstimate cross_nonad;  // synthetic negative vs real positive
  friend bool operator==(const ComparisonRow&, const ComparisonRow&) = default;
};

enum class Column { SameAd = 0, CrossAd = 1, SameNonAd = 2, CrossNonAd = 3 };
inline constexpr std::array<Column, 4> kColumns = {Column::SameAd, Column::CrossAd, Column::SameNonAd,
                                                   Column::CrossNonAd};

inline const KidEstimate& cell(const ComparisonRow& row, Column c) {
  switch (c) {
    case Column::SameAd: return row.same_ad;
    case Column::CrossAd: return row.cross_ad;
    case Column::SameNonAd: return row.same_nonad;
    case Column::CrossNonAd: break;
  }
  return row.cross_nonad;
}

inline bool minimized(Column c) { return c == Column::SameAd || c == Column::SameNonAd; }

inline std::string_view column_key(Column c) {
  switch (c) {
    case Column::SameAd: return "same_ad";
    case Column::CrossAd: return "cross_ad";
    case Column::SameNonAd: return "same_nonad";
    case Column::CrossNonAd: break;
  }
  return "cross_nonad";
}

struct SweepTable {
  std::vector<ComparisonRow> rows;                      // ascending iteration
  std::array<std::vector<std::int64_t>, 4> best_markers;  // indexed by Column

  bool marked(Column c, std::int64_t iteration) const {
    const auto& m = best_markers[static_cast<std::size_t>(c)];
    return std::find(m.begin(), m.end(), iteration) != m.end();
  }
};

struct SelectionResult {
  std::int64_t chosen_iteration = 0;
  std::map<std::int64_t, double> score_per_iteration;
  double lambda = 1.0;
};

// Sorts rows and marks, per column, every iteration attaining the column's
// objective (minimum for same-class, maximum for cross-class). Ties are all marked.
inline SweepTable build_sweep_table(std::vector<ComparisonRow> rows) {
  std::sort(rows.begin(), rows.end(),
            [](const ComparisonRow& a, const ComparisonRow& b) { return a.iteration < b.iteration; });
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].iteration == rows[i - 1].iteration) {
      throw Error("duplicate iteration " + std::to_string(rows[i].iteration) + " in sweep");
    }
  }
  SweepTable table;
  table.rows = std::move(rows);
  if (table.rows.empty()) return table;
  for (Column c : kColumns) {
    double best = cell(table.rows.front(), c).mean;
    for (const auto& r : table.rows) {
      const double v = cell(r, c).mean;
      best = minimized(c) ? std::min(best, v) : std::max(best, v);
    }
    auto& markers = table.best_markers[static_cast<std::size_t>(c)];
    for (const auto& r : table.rows) {
      if (cell(r, c).mean == best) markers.push_back(r.iteration);
    }
  }
  return table;
}

namespace detail {

inline FeatureSet require_set(const DatasetRegistry& reg, const EntryQuery& q, std::string_view role) {
  auto set = reg.load(q, std::string(role));
  if (!set) throw Error("no " + std::string(role));
  return std::move(*set);
}

inline std::string synthetic_role(const std::string& cls, std::int64_t iteration) {
  return "synthetic/" + cls + "@" + std::to_string(iteration);
}

}  // namespace detail

// Real reference sets: every real entry of the class, any split, in manifest order.
struct RealReferences {
  FeatureSet positive;
  FeatureSet negative;
};

inline RealReferences load_real_references(const DatasetRegistry& reg, const ClassPair& classes) {
  return {detail::require_set(reg, {.source = Source::Real, .class_label = classes.positive}, "real/" + classes.positive),
          detail::require_set(reg, {.source = Source::Real, .class_label = classes.negative}, "real/" + classes.negative)};
}

inline ComparisonRow directional_row(const RealReferences& real, const FeatureSet& synth_pos,
                                     const FeatureSet& synth_neg, std::int64_t iteration, const KidConfig& cfg) {
  ComparisonRow row;
  row.iteration = iteration;
  row.same_ad = kid_estimate(synth_pos, real.positive, cfg);
  row.cross_ad = kid_estimate(synth_pos, real.negative, cfg);
  row.same_nonad = kid_estimate(synth_neg, real.negative, cfg);
  row.cross_nonad = kid_estimate(synth_neg, real.positive, cfg);
  return row;
}

inline ComparisonRow directional_matrix(const DatasetRegistry& reg, std::int64_t iteration, const KidConfig& cfg,
                                        const ClassPair& classes = {}) {
  const auto synth = [&](const std::string& cls) {
    return detail::require_set(reg, {.source = Source::Synthetic, .class_label = cls, .iteration = iteration},
                               detail::synthetic_role(cls, iteration));
  };
  auto synth_pos = synth(classes.positive);
  auto synth_neg = synth(classes.negative);
  return directional_row(load_real_references(reg, classes), synth_pos, synth_neg, iteration, cfg);
}

// Rows are independent and run on cfg.threads workers; each row's KID
// repetitions then run serially, so output is independent of the worker count.
inline SweepTable iteration_sweep(const DatasetRegistry& reg, const std::vector<std::int64_t>& iterations,
                                  const KidConfig& cfg, const ClassPair& classes = {}) {
  if (iterations.empty()) throw Error("iteration sweep needs at least one iteration");
  require_iterations(reg);
  const auto real = load_real_references(reg, classes);
  KidConfig row_cfg = cfg;
  row_cfg.threads = 1;
  std::vector<ComparisonRow> rows(iterations.size());
  parallel_for(iterations.size(), cfg.threads, [&](std::size_t i) {
    const auto it = iterations[i];
    const auto synth = [&](const std::string& cls) {
      return detail::require_set(reg, {.source = Source::Synthetic, .class_label = cls, .iteration = it},
                                 detail::synthetic_role(cls, it));
    };
    rows[i] = directional_row(real, synth(classes.positive), synth(classes.negative), it, row_cfg);
  });
  return build_sweep_table(std::move(rows));
}

inline SelectionResult select_iteration(const SweepTable& table, double lambda = 1.0) {
  if (table.rows.empty()) throw Error("cannot select from an empty sweep");
  SelectionResult sel;
  sel.lambda = lambda;
  bool first = true;
  double best = 0.0;
  for (const auto& r : table.rows) {
    const double score =
        (r.same_ad.mean + r.same_nonad.mean) - lambda * (r.cross_ad.mean + r.cross_nonad.mean);
    sel.score_per_iteration[r.iteration] = score;
    // rows ascend, so strict < keeps the smallest iteration on ties
    if (first || score < best) {
      best = score;
      sel.chosen_iteration = r.iteration;
      first = false;
    }
  }
  return sel;
}

// ---------------------------------------------------------------------------
// Rendering

enum class ReportFormat { Markdown, Csv, Json };

inline std::string_view extension(ReportFormat f) {
  switch (f) {
    case ReportFormat::Markdown: return "md";
    case ReportFormat::Csv: return "csv";
    case ReportFormat::Json: break;
  }
  return "json";
}

namespace detail {

inline std::string format_fixed(double v, int decimals) {
  // Half-away-from-zero at the printed precision, so exact binary ties such
  // as 0.59375 print as 0.5938 rather than banker's 0.5937.
  const double scale = std::pow(10.0, decimals);
  double rounded = std::round(v * scale) / scale;
  if (rounded == 0.0) rounded = 0.0;  // no "-0.000"
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, rounded);
  return buf;
}

inline std::string format_full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string iteration_label(std::int64_t it) {
  if (it != 0 && it % 1000 == 0) return std::to_string(it / 1000) + "k";
  return std::to_string(it);
}

}  // namespace detail

inline std::string column_header(Column c, const ClassPair& classes) {
  const auto& p = classes.positive;
  const auto& n = classes.negative;
  switch (c) {
    case Column::SameAd: return "Synthetic " + p + " vs Real " + p + " \xE2\x86\x93";
    case Column::CrossAd: return "Synthetic " + p + " vs Real " + n + " \xE2\x86\x91";
    case Column::SameNonAd: return "Synthetic " + n + " vs Real " + n + " \xE2\x86\x93";
    case Column::CrossNonAd: break;
  }
  return "Synthetic " + n + " vs Real " + p + " \xE2\x86\x91";
}

inline nlohmann::json sweep_to_json(const SweepTable& table, const SelectionResult* selection) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : table.rows) {
    nlohmann::json row{{"iteration", r.iteration}};
    for (Column c : kColumns) {
      const auto& e = cell(r, c);
      row[std::string(column_key(c))] = {
          {"mean", e.mean}, {"std", e.std}, {"n_subsets", e.n_subsets}, {"subset_size", e.subset_size}};
    }
    rows.push_back(std::move(row));
  }
  nlohmann::json markers = nlohmann::json::object();
  for (Column c : kColumns) markers[std::string(column_key(c))] = table.best_markers[static_cast<std::size_t>(c)];
  nlohmann::json doc{{"rows", std::move(rows)}, {"markers", std::move(markers)}};
  if (selection) {
    nlohmann::json scores = nlohmann::json::object();
    for (const auto& [it, s] : selection->score_per_iteration) scores[std::to_string(it)] = s;
    doc["selection"] = {{"chosen", selection->chosen_iteration}, {"lambda", selection->lambda}, {"scores", scores}};
  }
  return doc;
}

// Inverse of sweep_to_json's "rows"; markers are recomputed.
inline std::vector<ComparisonRow> rows_from_json(const nlohmann::json& doc) {
  const auto& rows = doc.is_object() ? doc.at("rows") : doc;
  std::vector<ComparisonRow> out;
  for (const auto& j : rows) {
    ComparisonRow r;
    r.iteration = j.at("iteration").get<std::int64_t>();
    auto read = [&](Column c) {
      const auto& e = j.at(std::string(column_key(c)));
      KidEstimate k;
      k.mean = e.at("mean").get<double>();
      k.std = e.value("std", 0.0);
      k.n_subsets = e.value("n_subsets", std::size_t{0});
      k.subset_size = e.value("subset_size", std::size_t{0});
      return k;
    };
    r.same_ad = read(Column::SameAd);
    r.cross_ad = read(Column::CrossAd);
    r.same_nonad = read(Column::SameNonAd);
    r.cross_nonad = read(Column::CrossNonAd);
    out.push_back(r);
  }
  return out;
}

inline std::string render_sweep_report(const SweepTable& table, const SelectionResult& selection,
                                       ReportFormat format, const ClassPair& classes = {}) {
  std::ostringstream os;
  switch (format) {
    case ReportFormat::Markdown: {
      os << "| Iteration |";
      for (Column c : kColumns) os << ' ' << column_header(c, classes) << " |";
      os << " Score (\xCE\xBB=" << detail::format_fixed(selection.lambda, 2) << ") |\n";
      os << "|---|---|---|---|---|---|\n";
      for (const auto& r : table.rows) {
        os << "| " << detail::iteration_label(r.iteration) << " |";
        for (Column c : kColumns) {
          const auto& e = cell(r, c);
          std::string text = detail::format_fixed(e.mean, 3) + " (" + detail::format_fixed(e.std, 3) + ")";
          if (table.marked(c, r.iteration)) text = "**" + text + "**";
          os << ' ' << text << " |";
        }
        const auto score = selection.score_per_iteration.find(r.iteration);
        std::string s = score == selection.score_per_iteration.end() ? "" : detail::format_fixed(score->second, 3);
        if (r.iteration == selection.chosen_iteration) s = "**" + s + "**";
        os << ' ' << s << " |\n";
      }
      os << "\nSelected iteration: " << detail::iteration_label(selection.chosen_iteration) << "\n";
      break;
    }
    case ReportFormat::Csv: {
      os << "iteration";
      for (Column c : kColumns) {
        os << ',' << column_key(c) << "_mean," << column_key(c) << "_std," << column_key(c) << "_best";
      }
      os << ",score,chosen\n";
      for (const auto& r : table.rows) {
        os << r.iteration;
        for (Column c : kColumns) {
          const auto& e = cell(r, c);
          os << ',' << detail::format_full(e.mean) << ',' << detail::format_full(e.std) << ','
             << (table.marked(c, r.iteration) ? 1 : 0);
        }
        const auto score = selection.score_per_iteration.find(r.iteration);
        os << ',' << (score == selection.score_per_iteration.end() ? "" : detail::format_full(score->second)) << ','
           << (r.iteration == selection.chosen_iteration ? 1 : 0) << '\n';
      }
      break;
    }
    case ReportFormat::Json:
      os << sweep_to_json(table, &selection).dump(2) << '\n';
      break;
  }
  return os.str();
}

}  // namespace clinrel
