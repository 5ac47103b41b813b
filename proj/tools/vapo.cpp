// vapo: run experiments, ablation tables and plot data from the command line.
//
//   vapo run      [--config PATH] [--seed N] [--set key=value]... [--out DIR]
//   vapo ablate   [--config PATH] [--seeds 1,2,3] [--set key=value]... [--out DIR]
//   vapo plotdata --quantity {length,reward,entropy,explained_variance} [--out DIR] FILE...

#include <iostream>

#include <CLI11.hpp>

#include "vapo/cli.hpp"

namespace {

void add_common(CLI::App* cmd, vapo::cli::CommonOptions& opts) {
  cmd->add_option("--config", opts.config_path, "Experiment config (JSON)");
  cmd->add_option("--set", opts.overrides, "Override a config field, e.g. train.mu=0 (repeatable)")
      ->allow_extra_args(false);
  cmd->add_option("--out", opts.out_dir, "Output directory (relative paths resolve under $VAPO_OUTPUT_ROOT)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Value-model-based PPO on a synthetic verifier task"};
  app.require_subcommand(1);

  vapo::cli::CommonOptions run_opts;
  std::uint64_t run_seed = 0;
  auto* run = app.add_subcommand("run", "Train one configuration and write metrics");
  add_common(run, run_opts);
  auto* seed_opt = run->add_option("--seed", run_seed, "Master seed (overrides train.seed)");

  vapo::cli::CommonOptions ablate_opts;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  auto* ablate = app.add_subcommand("ablate", "Run the nine-row ablation table");
  add_common(ablate, ablate_opts);
  ablate->add_option("--seeds,--seed", seeds, "Seeds, comma separated or repeated")->delimiter(',');

  vapo::cli::PlotOptions plot_opts;
  auto* plot = app.add_subcommand("plotdata", "Emit step-aligned CSV of one metric across runs");
  plot->add_option("--quantity", plot_opts.quantity, "length, reward, entropy or explained_variance")->required();
  plot->add_option("--out", plot_opts.out_dir, "Write plot_<quantity>.csv here instead of stdout");
  plot->add_option("files", plot_opts.files, "metrics.jsonl files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : vapo::cli::kConfigError;
  }

  if (*run) {
    if (*seed_opt) run_opts.seed = run_seed;
    return vapo::cli::cmd_run(run_opts, std::cout, std::cerr);
  }
  if (*ablate) return vapo::cli::cmd_ablate(ablate_opts, seeds, std::cout, std::cerr);
  return vapo::cli::cmd_plotdata(plot_opts, std::cout, std::cerr);
}
