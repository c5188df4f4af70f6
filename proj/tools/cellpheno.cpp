// Command-line front end: one subcommand per pipeline stage plus `pipeline`
// to chain them all over a single artifacts directory.

#include "cellpheno/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

int main(int argc, char** argv) {
  CLI::App app{"cell phenotype comparison pipeline"};
  app.set_version_flag("--version", cellpheno::pipeline::kVersion);
  app.require_subcommand(1);

  struct {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<std::string> out_dir;
    bool force = false;
  } cli;

  const std::vector<std::string> stages = {"synth",  "segment", "features", "prune",
                                           "embed",  "cluster", "panel",    "pipeline"};
  const std::vector<std::string> help = {
      "generate a synthetic labeled cohort (images + manifest + ground truth)",
      "segment cells from manifest images into instance masks",
      "compute per-cell features into features.csv",
      "ensemble-vote data pruning over features.csv",
      "MDS embedding of (pruned) features",
      "per-group k-means with elbow-selected K",
      "assemble representative-cell panels per cluster",
      "run all stages in order"};
  for (std::size_t i = 0; i < stages.size(); ++i) {
    CLI::App* sub = app.add_subcommand(stages[i], help[i]);
    sub->add_option("--config", cli.config_path, "JSON config file (defaults apply if omitted)");
    sub->add_option("--seed", cli.seed, "override the config seed");
    sub->add_option("--threads", cli.threads, "intra-stage worker threads");
    sub->add_option("--out", cli.out_dir, "artifacts directory (overrides config out_dir)");
    sub->add_flag("--force", cli.force, "recompute even when outputs are up to date");
  }

  CLI11_PARSE(app, argc, argv);

  cellpheno::config::PipelineConfig cfg;
  try {
    cfg = cli.config_path.empty() ? cellpheno::config::default_config()
                                  : cellpheno::config::load_config(cli.config_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  if (cli.seed) cfg.seed = *cli.seed;
  if (cli.threads) cfg.threads = *cli.threads;
  if (cli.out_dir) cfg.out_dir = *cli.out_dir;

  cellpheno::pipeline::StageOptions opts;
  opts.force = cli.force;
  const auto stage = cellpheno::pipeline::parse_stage(app.get_subcommands().front()->get_name());
  return cellpheno::pipeline::run_stage(stage, cfg, opts);
}
