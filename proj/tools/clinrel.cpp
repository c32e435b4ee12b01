// clinrel: clinical-relevance evaluation of synthetic image feature sets.
//
//   clinrel validate <manifest.json>
//   clinrel sweep    --config run.json [--out DIR] [--seed N] [--format md|csv|json]
//   clinrel tsne     --config run.json [ENTRY_ID ...] [--name NAME]
//   clinrel classify --config run.json [--iteration N]
//   clinrel report   --config run.json

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "clinrel/workflow.hpp"

namespace {

struct GlobalFlags {
  std::string config;
  std::string manifest;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> formats;
  std::optional<double> lambda;
};

clinrel::RunConfig build_config(const GlobalFlags& g) {
  clinrel::RunConfig cfg;
  if (!g.config.empty()) cfg = clinrel::load_run_config(g.config);
  if (!g.manifest.empty()) cfg.manifest = g.manifest;
  if (!g.out.empty()) cfg.out_dir = g.out;
  if (g.seed) {
    cfg.kid.seed = *g.seed;
    cfg.tsne.seed = *g.seed;
  }
  if (!g.formats.empty()) {
    cfg.formats.clear();
    for (const auto& f : g.formats) cfg.formats.push_back(clinrel::parse_format(f));
  }
  if (g.lambda) cfg.lambda = *g.lambda;
  cfg.threads = clinrel::default_thread_count();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evaluate the clinical relevance of synthetic image feature sets"};
  app.require_subcommand(1);

  GlobalFlags g;
  auto add_globals = [&](CLI::App* cmd) {
    cmd->add_option("--config", g.config, "Run configuration (JSON)");
    cmd->add_option("--manifest", g.manifest, "Dataset manifest (overrides the config)");
    cmd->add_option("--out", g.out, "Output directory");
    cmd->add_option("--seed", g.seed, "Seed for KID subsampling and t-SNE initialisation");
    cmd->add_option("--format", g.formats, "Output format(s): md, csv, json")->check(CLI::IsMember({"md", "csv", "json"}));
    cmd->add_option("--lambda", g.lambda, "Cross-class weight in the selection score");
  };

  std::string validate_manifest;
  auto* validate = app.add_subcommand("validate", "Check a manifest and every feature file it references");
  validate->add_option("path", validate_manifest, "Manifest path");
  add_globals(validate);

  auto* sweep = app.add_subcommand("sweep", "Directional KID comparison across iterations");
  add_globals(sweep);

  std::vector<std::string> tsne_ids;
  std::string tsne_name = "selection";
  auto* tsne = app.add_subcommand("tsne", "t-SNE scatter plots per iteration or for chosen entries");
  tsne->add_option("ids", tsne_ids, "Entry ids to embed jointly (default: one plot per iteration)");
  tsne->add_option("--name", tsne_name, "Output name when embedding chosen entries");
  add_globals(tsne);

  std::optional<std::int64_t> classify_iteration;
  auto* classify = app.add_subcommand("classify", "Real vs real+synthetic classification experiment");
  classify->add_option("--iteration", classify_iteration, "Synthetic checkpoint used for augmentation");
  add_globals(classify);

  auto* report = app.add_subcommand("report", "Run every strategy and write a combined report");
  add_globals(report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (validate->parsed()) {
    std::string manifest = validate_manifest.empty() ? g.manifest : validate_manifest;
    if (manifest.empty() && !g.config.empty()) {
      try {
        manifest = clinrel::load_run_config(g.config).manifest.string();
      } catch (const clinrel::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
      }
    }
    if (manifest.empty()) {
      std::cerr << "error: validate needs a manifest\n";
      return 2;
    }
    return clinrel::cmd_validate(manifest);
  }

  clinrel::RunConfig cfg;
  try {
    cfg = build_config(g);
  } catch (const clinrel::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  if (sweep->parsed()) return clinrel::cmd_sweep(cfg);
  if (tsne->parsed()) return clinrel::cmd_tsne(cfg, tsne_ids, tsne_name);
  if (classify->parsed()) {
    if (classify_iteration) cfg.augmentation_iteration = classify_iteration;
    return clinrel::cmd_classify(cfg);
  }
  return clinrel::cmd_report(cfg);
}
