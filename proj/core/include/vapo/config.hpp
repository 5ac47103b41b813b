#ifndef VAPO_CONFIG_HPP_
#define VAPO_CONFIG_HPP_

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vapo/trainer.hpp"

namespace vapo::config {

struct OutputConfig {
  std::string dir = "runs/default";
  int checkpoint_interval = 0;  // train steps between parameter snapshots; 0 = final only
  std::vector<std::string> formats{"jsonl", "csv"};

  void validate() const;
};

struct ExperimentConfig {
  trainer::Experiment experiment{};
  OutputConfig output{};

  void validate() const;
};

// Strict conversion: unknown keys and wrongly typed values throw ConfigError
// naming the offending field ("train.mu: expected number"). Missing keys keep
// their defaults.
ExperimentConfig from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& cfg);

ExperimentConfig parse(const std::string& text);
std::string serialize(const ExperimentConfig& cfg);
ExperimentConfig load_file(const std::string& path);

// Applies "section.key=value" overrides. The value is read as JSON when it
// parses (numbers, booleans, arrays) and as a string otherwise. The key must
// name an existing config field.
ExperimentConfig apply_overrides(const ExperimentConfig& cfg, const std::vector<std::string>& overrides);

}  // namespace vapo::config

#endif  // VAPO_CONFIG_HPP_
