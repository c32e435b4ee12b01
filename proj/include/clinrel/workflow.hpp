#pragma once

// Command implementations behind the clinrel executable:
// validate -> sweep -> tsne -> classify -> report.
//
// Each command takes a RunConfig, writes its artifacts into the output
// directory and returns a process exit code:
//   0 success, 1 validation or domain failure, 2 I/O or configuration failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "clinrel/augmentation.hpp"
#include "clinrel/error.hpp"
#include "clinrel/kid.hpp"
#include "clinrel/parallel.hpp"
#include "clinrel/protocol.hpp"
#include "clinrel/registry.hpp"
#include "clinrel/scatter.hpp"
#include "clinrel/tsne.hpp"

namespace clinrel {

struct RunConfig {
  std::filesystem::path manifest;
  std::filesystem::path out_dir = "clinrel-out";
  std::optional<std::filesystem::path> estimates;  // precomputed sweep rows (JSON)
  KidConfig kid;
  TsneConfig tsne;
  LogRegConfig logreg;
  ClassPair classes;
  double lambda = 1.0;
  std::vector<ReportFormat> formats{ReportFormat::Markdown, ReportFormat::Csv, ReportFormat::Json};
  std::vector<std::int64_t> iterations;             // empty: every synthetic iteration
  std::optional<std::int64_t> augmentation_iteration;
  std::size_t threads = 1;
};

inline ReportFormat parse_format(std::string_view s) {
  if (s == "md" || s == "markdown") return ReportFormat::Markdown;
  if (s == "csv") return ReportFormat::Csv;
  if (s == "json") return ReportFormat::Json;
  throw IoError("unknown format \"" + std::string(s) + "\" (expected md, csv or json)");
}

namespace detail {

template <typename T>
void read_if(const nlohmann::json& j, const char* key, T& dst) {
  if (j.contains(key) && !j.at(key).is_null()) dst = j.at(key).get<T>();
}

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_relative() ? base / path : path;
}

}  // namespace detail

// Paths inside the config resolve against the config file's directory.
inline RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base) {
  RunConfig cfg;
  try {
    if (!j.is_object()) throw IoError("config must be a JSON object");
    if (j.contains("manifest")) cfg.manifest = detail::resolve(base, j.at("manifest").get<std::string>());
    if (j.contains("out")) cfg.out_dir = detail::resolve(base, j.at("out").get<std::string>());
    if (j.contains("estimates")) cfg.estimates = detail::resolve(base, j.at("estimates").get<std::string>());
    detail::read_if(j, "lambda", cfg.lambda);
    detail::read_if(j, "iterations", cfg.iterations);
    if (j.contains("formats")) {
      cfg.formats.clear();
      for (const auto& f : j.at("formats")) cfg.formats.push_back(parse_format(f.get<std::string>()));
    }
    if (j.contains("classes")) {
      detail::read_if(j.at("classes"), "positive", cfg.classes.positive);
      detail::read_if(j.at("classes"), "negative", cfg.classes.negative);
    }
    if (j.contains("kid")) {
      const auto& k = j.at("kid");
      detail::read_if(k, "subset_size", cfg.kid.subset_size);
      detail::read_if(k, "n_subsets", cfg.kid.n_subsets);
      detail::read_if(k, "seed", cfg.kid.seed);
      detail::read_if(k, "degree", cfg.kid.kernel.degree);
      detail::read_if(k, "coef", cfg.kid.kernel.coef);
      if (k.contains("gamma") && !k.at("gamma").is_null()) cfg.kid.kernel.gamma = k.at("gamma").get<double>();
    }
    if (j.contains("tsne")) {
      const auto& t = j.at("tsne");
      detail::read_if(t, "perplexity", cfg.tsne.perplexity);
      detail::read_if(t, "max_iter", cfg.tsne.max_iter);
      detail::read_if(t, "exaggeration", cfg.tsne.exaggeration);
      detail::read_if(t, "exagg_iters", cfg.tsne.exagg_iters);
      detail::read_if(t, "learning_rate", cfg.tsne.learning_rate);
      detail::read_if(t, "momentum_early", cfg.tsne.momentum_early);
      detail::read_if(t, "momentum_late", cfg.tsne.momentum_late);
      detail::read_if(t, "momentum_switch", cfg.tsne.momentum_switch);
      detail::read_if(t, "seed", cfg.tsne.seed);
      detail::read_if(t, "calib_tol", cfg.tsne.calib_tol);
      detail::read_if(t, "calib_max_steps", cfg.tsne.calib_max_steps);
    }
    if (j.contains("logreg")) {
      const auto& l = j.at("logreg");
      detail::read_if(l, "l2", cfg.logreg.l2);
      detail::read_if(l, "max_epochs", cfg.logreg.max_epochs);
      detail::read_if(l, "grad_tol", cfg.logreg.grad_tol);
      detail::read_if(l, "init_step", cfg.logreg.init_step);
      detail::read_if(l, "armijo_c", cfg.logreg.armijo_c);
      if (l.contains("class_weights") && !l.at("class_weights").is_null()) {
        cfg.logreg.class_weights = l.at("class_weights").get<std::array<double, 2>>();
      }
    }
    if (j.contains("augmentation")) {
      const auto& a = j.at("augmentation");
      if (a.contains("iteration") && !a.at("iteration").is_null()) {
        cfg.augmentation_iteration = a.at("iteration").get<std::int64_t>();
      }
    }
  } catch (const nlohmann::json::exception& ex) {
    throw IoError(std::string("invalid config: ") + ex.what());
  }
  return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  try {
    return parse_run_config(nlohmann::json::parse(in), path.parent_path());
  } catch (const nlohmann::json::parse_error& ex) {
    throw IoError("unparseable config " + path.string() + ": " + ex.what());
  }
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

inline void ensure_out_dir(const RunConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + cfg.out_dir.string() + ": " + ec.message());
}

inline DatasetRegistry open_registry(const RunConfig& cfg) {
  if (cfg.manifest.empty()) throw IoError("no manifest given (set \"manifest\" in the config)");
  return load_manifest(cfg.manifest);
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const IoError& ex) {
    err << "error: " << ex.what() << '\n';
    return 2;
  } catch (const Error& ex) {
    err << "error: " << ex.what() << '\n';
    return 1;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return 2;
  }
}

struct SweepOutcome {
  SweepTable table;
  SelectionResult selection;
};

inline SweepOutcome run_sweep(const RunConfig& cfg) {
  SweepOutcome out;
  if (cfg.estimates) {
    std::ifstream in(*cfg.estimates);
    if (!in) throw IoError("cannot read estimates " + cfg.estimates->string());
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
      out.table = build_sweep_table(rows_from_json(doc));
    } catch (const nlohmann::json::exception& ex) {
      throw IoError("unparseable estimates " + cfg.estimates->string() + ": " + ex.what());
    }
  } else {
    const auto reg = open_registry(cfg);
    const auto iterations = cfg.iterations.empty() ? reg.synthetic_iterations() : cfg.iterations;
    KidConfig kid = cfg.kid;
    kid.threads = cfg.threads;
    out.table = iteration_sweep(reg, iterations, kid, cfg.classes);
  }
  if (out.table.rows.empty()) throw Error("sweep has no rows");
  out.selection = select_iteration(out.table, cfg.lambda);
  return out;
}

inline void write_sweep(const RunConfig& cfg, const SweepOutcome& s) {
  for (auto f : cfg.formats) {
    write_text(cfg.out_dir / ("sweep." + std::string(extension(f))),
               render_sweep_report(s.table, s.selection, f, cfg.classes));
  }
}

struct TsneJob {
  std::string name;
  FeatureSet points;
  std::vector<PointLabel> labels;
};

struct TsneOutcome {
  std::string name;
  std::size_t points = 0;
  double final_kl = 0.0;
  std::size_t uncalibrated = 0;
};

inline TsneJob iteration_job(const DatasetRegistry& reg, const RunConfig& cfg, std::int64_t it) {
  std::vector<FeatureSet> parts;
  std::vector<PointLabel> labels;
  auto add = [&](Source src, const std::string& cls, std::optional<std::int64_t> iteration) {
    EntryQuery q{.source = src, .class_label = cls, .iteration = iteration};
    const std::string role = src == Source::Real ? "real/" + cls : synthetic_role(cls, it);
    auto set = require_set(reg, q, role);
    labels.insert(labels.end(), set.count(), PointLabel{src, cls});
    parts.push_back(std::move(set));
  };
  add(Source::Real, cfg.classes.positive, std::nullopt);
  add(Source::Real, cfg.classes.negative, std::nullopt);
  add(Source::Synthetic, cfg.classes.positive, it);
  add(Source::Synthetic, cfg.classes.negative, it);
  return {std::to_string(it), concat(parts, "tsne_" + std::to_string(it)), std::move(labels)};
}

inline TsneJob entries_job(const DatasetRegistry& reg, const std::vector<std::string>& ids, const std::string& name) {
  std::vector<FeatureSet> parts;
  std::vector<PointLabel> labels;
  for (const auto& id : ids) {
    const auto* e = reg.find(id);
    if (!e) throw Error("no entry \"" + id + "\" in manifest");
    auto set = load_feature_file(e->path, e->id);
    labels.insert(labels.end(), set.count(), PointLabel{e->source, e->class_label});
    parts.push_back(std::move(set));
  }
  return {name, concat(parts, "tsne_" + name), std::move(labels)};
}

inline std::vector<TsneOutcome> run_tsne_jobs(const RunConfig& cfg, const std::vector<TsneJob>& jobs) {
  std::vector<TsneOutcome> outcomes(jobs.size());
  std::vector<TsneResult> results(jobs.size());
  TsneConfig tcfg = cfg.tsne;
  tcfg.threads = jobs.size() > 1 ? 1 : cfg.threads;
  parallel_for(jobs.size(), jobs.size() > 1 ? cfg.threads : 1,
               [&](std::size_t i) { results[i] = tsne_embed(jobs[i].points, tcfg); });
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& job = jobs[i];
    const auto& r = results[i];
    const auto stem = cfg.out_dir / ("tsne_" + job.name);
    write_text(stem.string() + ".svg", render_scatter(r, job.labels, "t-SNE " + job.name));
    write_text(stem.string() + ".csv", coords_csv(r, job.labels));
    write_text(stem.string() + "_kl.csv", kl_trace_csv(r));
    auto& o = outcomes[i];
    o.name = job.name;
    o.points = job.points.count();
    o.final_kl = r.final_kl;
    for (const auto& c : r.calibration) o.uncalibrated += c.converged ? 0 : 1;
  }
  return outcomes;
}

inline std::optional<std::int64_t> resolve_aug_iteration(const DatasetRegistry& reg, const RunConfig& cfg) {
  if (cfg.augmentation_iteration) return cfg.augmentation_iteration;
  const auto its = reg.synthetic_iterations();
  if (its.size() > 1) {
    throw IoError("registry has synthetic sets for several iterations; set augmentation.iteration or --iteration");
  }
  if (its.size() == 1) return its.front();
  return std::nullopt;
}

inline void write_augmentation(const RunConfig& cfg, const AugReport& rep) {
  for (auto f : cfg.formats) {
    write_text(cfg.out_dir / ("augmentation." + std::string(extension(f))), render_aug_report(rep, f, cfg.classes));
  }
}

}  // namespace detail

inline int cmd_validate(const std::filesystem::path& manifest, std::ostream& out = std::cout,
                        std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    DatasetRegistry reg;
    try {
      reg = load_manifest(manifest);
    } catch (const Error& ex) {
      throw IoError(ex.what());
    }
    const auto report = validate_registry(reg);
    out << "entries: " << reg.entries().size() << ", dim: " << report.dim << '\n';
    for (const auto& issue : report.issues) out << "  " << issue.entry_id << ": " << issue.message << '\n';
    out << (report.ok() ? "ok" : "FAILED") << '\n';
    return report.ok() ? 0 : 1;
  });
}

inline int cmd_sweep(const RunConfig& cfg, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    detail::ensure_out_dir(cfg);
    const auto s = detail::run_sweep(cfg);
    detail::write_sweep(cfg, s);
    out << "sweep: " << s.table.rows.size() << " iterations, selected " << s.selection.chosen_iteration
        << " (lambda " << s.selection.lambda << ")\n";
    return 0;
  });
}

// With no ids, one plot per synthetic iteration; otherwise one joint plot of
// the given entries named `name`.
inline int cmd_tsne(const RunConfig& cfg, const std::vector<std::string>& ids, const std::string& name = "selection",
                    std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    detail::ensure_out_dir(cfg);
    const auto reg = detail::open_registry(cfg);
    std::vector<detail::TsneJob> jobs;
    if (!ids.empty()) {
      jobs.push_back(detail::entries_job(reg, ids, name));
    } else {
      const auto its = cfg.iterations.empty() ? reg.synthetic_iterations() : cfg.iterations;
      if (its.empty()) throw Error("no synthetic iterations to plot");
      for (auto it : its) jobs.push_back(detail::iteration_job(reg, cfg, it));
    }
    for (const auto& o : detail::run_tsne_jobs(cfg, jobs)) {
      out << "tsne_" << o.name << ": " << o.points << " points, KL " << o.final_kl;
      if (o.uncalibrated) out << ", " << o.uncalibrated << " rows off target perplexity";
      out << '\n';
    }
    return 0;
  });
}

inline int cmd_classify(const RunConfig& cfg, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    detail::ensure_out_dir(cfg);
    const auto reg = detail::open_registry(cfg);
    AugmentationConfig acfg{cfg.logreg, cfg.classes, detail::resolve_aug_iteration(reg, cfg)};
    const auto rep = augmentation_experiment(reg, acfg);
    detail::write_augmentation(cfg, rep);
    out << "balanced accuracy: real " << detail::format_fixed(rep.real_only.balanced_accuracy, 4)
        << ", real+synthetic " << detail::format_fixed(rep.real_plus_synth.balanced_accuracy, 4) << '\n';
    return 0;
  });
}

// Runs every strategy and juxtaposes them per iteration in report.md.
inline int cmd_report(const RunConfig& cfg, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    detail::ensure_out_dir(cfg);
    const auto sweep = detail::run_sweep(cfg);
    detail::write_sweep(cfg, sweep);

    std::optional<DatasetRegistry> reg;
    if (!cfg.manifest.empty()) reg = detail::open_registry(cfg);

    std::map<std::int64_t, detail::TsneOutcome> tsne;
    if (reg) {
      std::vector<detail::TsneJob> jobs;
      for (const auto& r : sweep.table.rows) jobs.push_back(detail::iteration_job(*reg, cfg, r.iteration));
      const auto outcomes = detail::run_tsne_jobs(cfg, jobs);
      for (std::size_t i = 0; i < outcomes.size(); ++i) tsne[sweep.table.rows[i].iteration] = outcomes[i];
    }

    // Per-iteration augmentation, when the registry carries real train/test splits.
    std::map<std::int64_t, AugReport> aug;
    std::optional<AugReport> aug_selected;
    if (reg && !reg->select({.source = Source::Real, .split = Split::Train}).empty() &&
        !reg->select({.source = Source::Real, .split = Split::Test}).empty()) {
      for (const auto& r : sweep.table.rows) {
        aug[r.iteration] = augmentation_experiment(*reg, AugmentationConfig{cfg.logreg, cfg.classes, r.iteration});
      }
      aug_selected = aug.at(sweep.selection.chosen_iteration);
      detail::write_augmentation(cfg, *aug_selected);
    }

    std::ostringstream md;
    md << "# Clinical relevance report\n\n## KID iteration sweep\n\n"
       << render_sweep_report(sweep.table, sweep.selection, ReportFormat::Markdown, cfg.classes)
       << "\n## Per-iteration summary\n\n"
       << "| Iteration | Same-class KID sum \xE2\x86\x93 | Cross-class KID sum \xE2\x86\x91 | Score | t-SNE plot | "
          "t-SNE KL | Balanced accuracy (real+synthetic) |\n"
       << "|---|---|---|---|---|---|---|\n";
    for (const auto& r : sweep.table.rows) {
      md << "| " << detail::iteration_label(r.iteration) << " | "
         << detail::format_fixed(r.same_ad.mean + r.same_nonad.mean, 3) << " | "
         << detail::format_fixed(r.cross_ad.mean + r.cross_nonad.mean, 3) << " | "
         << detail::format_fixed(sweep.selection.score_per_iteration.at(r.iteration), 3) << " | ";
      if (const auto t = tsne.find(r.iteration); t != tsne.end()) {
        md << "[tsne_" << t->second.name << ".svg](tsne_" << t->second.name << ".svg) | "
           << detail::format_fixed(t->second.final_kl, 4) << " | ";
      } else {
        md << "n/a | n/a | ";
      }
      if (const auto a = aug.find(r.iteration); a != aug.end()) {
        md << detail::format_fixed(a->second.real_plus_synth.balanced_accuracy, 4) << " |\n";
      } else {
        md << "n/a |\n";
      }
    }
    md << "\n## Augmentation experiment\n\n";
    if (aug_selected) {
      md << "Synthetic training data from iteration " << detail::iteration_label(sweep.selection.chosen_iteration)
         << " (the selected checkpoint).\n\n"
         << render_aug_report(*aug_selected, ReportFormat::Markdown, cfg.classes);
    } else {
      md << "Not run: the registry has no real train/test splits.\n";
    }
    detail::write_text(cfg.out_dir / "report.md", md.str());
    out << "report: " << (cfg.out_dir / "report.md").string() << '\n';
    return 0;
  });
}

}  // namespace clinrel
