#include "vapo/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "vapo/errors.hpp"

namespace vapo::config {

using nlohmann::json;

namespace {

// Walks one JSON object, recording which keys were consumed so the rest can
// be rejected as unknown.
class Reader {
 public:
  Reader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(where() + "expected object");
  }

  void read(const char* key, double& out) { scalar(key, out, "number", &json::is_number); }
  void read(const char* key, bool& out) { scalar(key, out, "boolean", &json::is_boolean); }
  void read(const char* key, std::string& out) { scalar(key, out, "string", &json::is_string); }
  void read(const char* key, int& out) { scalar(key, out, "integer", &json::is_number_integer); }
  void read(const char* key, std::uint64_t& out) {
    const json* v = find(key);
    if (v == nullptr) return;
    if (!v->is_number_integer() || (v->is_number_integer() && !v->is_number_unsigned() && v->get<long long>() < 0)) {
      throw ConfigError(where(key) + "expected non-negative integer");
    }
    out = v->get<std::uint64_t>();
  }
  template <typename T>
  void read(const char* key, std::vector<T>& out) {
    const json* v = find(key);
    if (v == nullptr) return;
    if (!v->is_array()) throw ConfigError(where(key) + "expected array");
    std::vector<T> tmp;
    for (const auto& item : *v) {
      bool ok = false;
      if constexpr (std::is_same_v<T, int>) ok = item.is_number_integer();
      if constexpr (std::is_same_v<T, double>) ok = item.is_number();
      if constexpr (std::is_same_v<T, std::string>) ok = item.is_string();
      if (!ok) throw ConfigError(where(key) + "array element has the wrong type");
      tmp.push_back(item.get<T>());
    }
    out = std::move(tmp);
  }

  bool has(const char* key) const { return node_.contains(key); }
  Reader child(const char* key) {
    seen_.insert(key);
    return Reader(node_.at(key), path_.empty() ? key : path_ + "." + key);
  }

  void finish() const {
    for (const auto& [key, _] : node_.items()) {
      if (!seen_.count(key)) throw ConfigError(where(key.c_str()) + "unknown key");
    }
  }

 private:
  const json* find(const char* key) {
    seen_.insert(key);
    auto it = node_.find(key);
    return it == node_.end() ? nullptr : &*it;
  }

  template <typename T>
  void scalar(const char* key, T& out, const char* type, bool (json::*check)() const noexcept) {
    const json* v = find(key);
    if (v == nullptr) return;
    if (!((*v).*check)()) throw ConfigError(where(key) + "expected " + type);
    out = v->get<T>();
  }

  std::string where(const char* key = nullptr) const {
    std::string p = path_;
    if (key != nullptr) p = p.empty() ? key : p + "." + key;
    return (p.empty() ? std::string("config") : p) + ": ";
  }

  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_env(Reader r, env::EnvConfig& e) {
  r.read("family", e.family);
  r.read("vocab_size", e.vocab.size);
  r.read("eos_id", e.vocab.eos_id);
  r.read("base", e.base);
  r.read("max_len", e.max_len);
  if (r.has("difficulty_mix")) {
    auto m = r.child("difficulty_mix");
    m.read("levels", e.difficulty_mix.levels);
    m.read("weights", e.difficulty_mix.weights);
    m.finish();
  }
  r.finish();
}

void read_model(Reader r, model::ModelConfig& m) {
  r.read("context_window", m.context_window);
  r.read("value_init_offset", m.value_init_offset);
  r.read("policy_prior", m.policy_prior);
  r.finish();
}

void read_train(Reader r, trainer::TrainConfig& t) {
  r.read("prompts_per_batch", t.prompts_per_batch);
  r.read("group_size", t.group_size);
  r.read("minibatch_size", t.minibatch_size);
  r.read("epochs", t.epochs);
  r.read("actor_lr", t.actor_lr);
  r.read("critic_lr", t.critic_lr);
  r.read("value_pretrain_steps", t.value_pretrain_steps);
  if (r.has("switches")) {
    auto s = r.child("switches");
    s.read("value_pretraining", t.switches.value_pretraining);
    s.read("decoupled_gae", t.switches.decoupled_gae);
    s.read("length_adaptive_gae", t.switches.length_adaptive_gae);
    s.read("clip_higher", t.switches.clip_higher);
    s.read("token_level_loss", t.switches.token_level_loss);
    s.read("positive_nll", t.switches.positive_nll);
    s.read("group_sampling", t.switches.group_sampling);
    s.finish();
  }
  r.read("mu", t.mu);
  r.read("alpha", t.alpha);
  r.read("eps_low", t.eps_low);
  r.read("eps_high", t.eps_high);
  r.read("beta", t.beta);
  r.read("gamma", t.gamma);
  r.read("lambda_policy", t.lambda_policy);
  r.read("lambda_critic", t.lambda_critic);
  r.read("whiten_advantages", t.whiten_advantages);
  std::string opt = to_string(t.optimizer);
  r.read("optimizer", opt);
  try {
    t.optimizer = parse_optimizer_kind(opt);
  } catch (const ConfigError&) {
    throw ConfigError("train.optimizer: expected \"momentum\" or \"adam\"");
  }
  r.read("momentum", t.momentum);
  r.read("total_steps", t.total_steps);
  r.read("seed", t.seed);
  r.finish();
}

void read_output(Reader r, OutputConfig& o) {
  r.read("dir", o.dir);
  r.read("checkpoint_interval", o.checkpoint_interval);
  r.read("formats", o.formats);
  r.finish();
}

}  // namespace

void OutputConfig::validate() const {
  if (dir.empty()) throw ConfigError("output.dir: must not be empty");
  if (checkpoint_interval < 0) throw ConfigError("output.checkpoint_interval: must be >= 0");
  for (const auto& f : formats) {
    if (f != "jsonl" && f != "csv") throw ConfigError("output.formats: unknown format '" + f + "'");
  }
}

void ExperimentConfig::validate() const {
  experiment.validate();
  output.validate();
}

ExperimentConfig from_json(const json& j) {
  ExperimentConfig cfg;
  Reader root(j, "");
  if (root.has("env")) read_env(root.child("env"), cfg.experiment.env);
  if (root.has("model")) read_model(root.child("model"), cfg.experiment.model);
  if (root.has("train")) read_train(root.child("train"), cfg.experiment.train);
  if (root.has("output")) read_output(root.child("output"), cfg.output);
  root.finish();
  cfg.validate();
  return cfg;
}

json to_json(const ExperimentConfig& cfg) {
  const auto& e = cfg.experiment.env;
  const auto& m = cfg.experiment.model;
  const auto& t = cfg.experiment.train;
  json j;
  j["env"] = {
      {"family", e.family},
      {"vocab_size", e.vocab.size},
      {"eos_id", e.vocab.eos_id},
      {"base", e.base},
      {"max_len", e.max_len},
      {"difficulty_mix", {{"levels", e.difficulty_mix.levels}, {"weights", e.difficulty_mix.weights}}},
  };
  j["model"] = {
      {"context_window", m.context_window},
      {"value_init_offset", m.value_init_offset},
      {"policy_prior", m.policy_prior},
  };
  j["train"] = {
      {"prompts_per_batch", t.prompts_per_batch},
      {"group_size", t.group_size},
      {"minibatch_size", t.minibatch_size},
      {"epochs", t.epochs},
      {"actor_lr", t.actor_lr},
      {"critic_lr", t.critic_lr},
      {"value_pretrain_steps", t.value_pretrain_steps},
      {"switches",
       {
           {"value_pretraining", t.switches.value_pretraining},
           {"decoupled_gae", t.switches.decoupled_gae},
           {"length_adaptive_gae", t.switches.length_adaptive_gae},
           {"clip_higher", t.switches.clip_higher},
           {"token_level_loss", t.switches.token_level_loss},
           {"positive_nll", t.switches.positive_nll},
           {"group_sampling", t.switches.group_sampling},
       }},
      {"mu", t.mu},
      {"alpha", t.alpha},
      {"eps_low", t.eps_low},
      {"eps_high", t.eps_high},
      {"beta", t.beta},
      {"gamma", t.gamma},
      {"lambda_policy", t.lambda_policy},
      {"lambda_critic", t.lambda_critic},
      {"whiten_advantages", t.whiten_advantages},
      {"optimizer", to_string(t.optimizer)},
      {"momentum", t.momentum},
      {"total_steps", t.total_steps},
      {"seed", t.seed},
  };
  j["output"] = {
      {"dir", cfg.output.dir},
      {"checkpoint_interval", cfg.output.checkpoint_interval},
      {"formats", cfg.output.formats},
  };
  return j;
}

ExperimentConfig parse(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  return from_json(j);
}

std::string serialize(const ExperimentConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

ExperimentConfig load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

ExperimentConfig apply_overrides(const ExperimentConfig& cfg, const std::vector<std::string>& overrides) {
  if (overrides.empty()) return cfg;
  json j = to_json(cfg);
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("--set: expected key=value, got '" + ov + "'");
    }
    const std::string key = ov.substr(0, eq);
    const std::string raw = ov.substr(eq + 1);
    json* node = &j;
    std::stringstream parts(key);
    std::string part;
    while (std::getline(parts, part, '.')) {
      if (!node->is_object() || !node->contains(part)) throw ConfigError(key + ": unknown key");
      node = &(*node)[part];
    }
    json value = json::parse(raw, nullptr, /*allow_exceptions=*/false);
    if (value.is_discarded()) value = raw;
    *node = std::move(value);
  }
  return from_json(j);
}

}  // namespace vapo::config
