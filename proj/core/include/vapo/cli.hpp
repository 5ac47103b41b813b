#ifndef VAPO_CLI_HPP_
#define VAPO_CLI_HPP_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vapo/config.hpp"

namespace vapo::cli {

// Environment variable that replaces the working directory as the root for
// relative output directories.
inline constexpr const char* kOutputRootEnv = "VAPO_OUTPUT_ROOT";

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kRuntimeError = 1;
inline constexpr int kConfigError = 2;

struct CommonOptions {
  std::string config_path;  // empty: built-in defaults
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out_dir;  // empty: output.dir from the config
};

struct PlotOptions {
  std::vector<std::string> files;
  std::string quantity;
  std::string out_dir;  // empty: CSV goes to the output stream
};

// Quantities accepted by cmd_plotdata and the metrics field each reads.
const std::vector<std::pair<std::string, std::string>>& plot_quantities();

// Loads the config file (or defaults), applies overrides and the seed.
config::ExperimentConfig resolve_config(const CommonOptions& opts);

// Joins a relative directory onto $VAPO_OUTPUT_ROOT when it is set.
std::string resolve_output_dir(const std::string& dir);

// Writes metrics.jsonl / metrics.csv (per output.formats), summary.json,
// config.json, params.json and checkpoints/step_<n>.json into the output
// directory. Errors print one "error: ..." line to `err`.
int cmd_run(const CommonOptions& opts, std::ostream& out, std::ostream& err);

// Runs the nine-row ablation table for each seed. Per-run metrics go under
// runs/<variant>/seed_<n>/; the table goes to ablation.md and ablation.csv.
int cmd_ablate(const CommonOptions& opts, const std::vector<std::uint64_t>& seeds, std::ostream& out,
               std::ostream& err);

// Emits step-aligned CSV: a step column plus one column per input file.
// Steps missing from a run are left empty.
int cmd_plotdata(const PlotOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace vapo::cli

#endif  // VAPO_CLI_HPP_
