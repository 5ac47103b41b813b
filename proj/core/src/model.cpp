#include "vapo/model.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "vapo/errors.hpp"

namespace vapo::model {

void ModelConfig::validate() const {
  if (context_window < 1) throw ConfigError("model.context_window: must be >= 1");
  if (!std::isfinite(value_init_offset)) throw ConfigError("model.value_init_offset: must be finite");
  if (!std::isfinite(policy_prior)) throw ConfigError("model.policy_prior: must be finite");
}

Featurizer::Featurizer(const env::ModSumChain& env, int context_window)
    : env_(env),
      k_(context_window),
      vocab_(env.vocab().size),
      max_len_(env.config().max_len) {
  if (k_ < 1) throw ConfigError("model.context_window: must be >= 1");
  width_ = phase_offset() + 3 + 3;
}

void Featurizer::fill(const env::Prompt& prompt, std::span<const int> response,
                      std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  const auto t = response.size();
  const auto slot = static_cast<std::size_t>(vocab_ + 1);
  for (std::size_t j = 0; j < static_cast<std::size_t>(k_); ++j) {
    const int tok = j < t ? response[t - 1 - j] : vocab_;  // vocab_ is the pad entry
    out[j * slot + static_cast<std::size_t>(tok)] = 1.0;
  }
  const std::vector<int> prefix(response.begin(), response.end());
  const int hint = env_.expected_next(prompt, prefix);
  const auto hint_slot = static_cast<std::size_t>(hint == env::ModSumChain::kOffTrack ? vocab_ : hint);
  const auto bucket = difficulty_bucket(prompt.difficulty);
  out[hint_offset() + bucket * static_cast<std::size_t>(vocab_ + 1) + hint_slot] = 1.0;
  const auto d = static_cast<std::size_t>(prompt.difficulty);
  out[remaining_offset() + remaining_bucket(t < d ? static_cast<int>(d - t) : 0)] = 1.0;

  const std::size_t phase = t < d ? 0 : (t == d ? 1 : 2);
  out[phase_offset() + phase] = 1.0;
  out[difficulty_offset()] = static_cast<double>(prompt.difficulty) / max_len_;
  out[position_offset()] = static_cast<double>(t) / max_len_;
  out[constant_offset()] = 1.0;
}

std::size_t Featurizer::difficulty_bucket(int difficulty) {
  std::size_t b = 0;
  while (b < kDifficultyEdges.size() && difficulty > kDifficultyEdges[b]) ++b;
  return b;
}

std::size_t Featurizer::remaining_bucket(int remaining) {
  std::size_t b = 0;
  while (b < kRemainingEdges.size() && remaining > kRemainingEdges[b]) ++b;
  return b;
}

Features Featurizer::featurize(const env::State& state) const {
  Features f;
  f.values.resize(width_);
  fill(state.prompt, state.response, f.values);
  return f;
}

std::vector<Features> Featurizer::featurize_prefixes(const env::Prompt& prompt,
                                                     const std::vector<int>& response) const {
  std::vector<Features> out(response.size());
  for (std::size_t t = 0; t < response.size(); ++t) {
    out[t].values.resize(width_);
    fill(prompt, std::span<const int>(response.data(), t), out[t].values);
  }
  return out;
}

PolicyParams PolicyParams::zeros(int vocab_size, int feature_width) {
  PolicyParams p;
  p.vocab_size = vocab_size;
  p.feature_width = feature_width;
  p.weights.assign(static_cast<std::size_t>(vocab_size) * feature_width, 0.0);
  return p;
}

ValueParams ValueParams::zeros(int feature_width) {
  ValueParams v;
  v.weights.assign(static_cast<std::size_t>(feature_width), 0.0);
  return v;
}

ValueParams ValueParams::constant(int feature_width, double offset) {
  ValueParams v = zeros(feature_width);
  v.bias = offset;
  return v;
}

void policy_logits(const PolicyParams& params, std::span<const double> feats, std::span<double> out) {
  const auto width = static_cast<std::size_t>(params.feature_width);
  if (feats.size() != width || out.size() != static_cast<std::size_t>(params.vocab_size)) {
    throw UsageError("policy_logits: feature width " + std::to_string(feats.size()) +
                     " does not match parameters (" + std::to_string(width) + ")");
  }
  for (std::size_t a = 0; a < out.size(); ++a) {
    const double* row = params.weights.data() + a * width;
    double acc = 0.0;
    for (std::size_t j = 0; j < width; ++j) acc += row[j] * feats[j];
    out[a] = acc;
  }
}

std::vector<double> policy_logits(const PolicyParams& params, const Features& feats) {
  std::vector<double> out(static_cast<std::size_t>(params.vocab_size));
  policy_logits(params, feats.values, out);
  return out;
}

std::vector<double> log_softmax(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - m);
  const double lse = m + std::log(z);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  auto out = log_softmax(logits);
  for (auto& v : out) v = std::exp(v);
  return out;
}

double logprob(const PolicyParams& params, const Features& feats, int token) {
  if (token < 0 || token >= params.vocab_size) throw UsageError("logprob: token outside vocab");
  return log_softmax(policy_logits(params, feats))[static_cast<std::size_t>(token)];
}

void add_scaled_grad_logprob(std::span<const double> probs, std::span<const double> feats, int token,
                             double scale, PolicyGrad& grad) {
  const auto width = feats.size();
  for (std::size_t a = 0; a < probs.size(); ++a) {
    const double coef = scale * ((static_cast<int>(a) == token ? 1.0 : 0.0) - probs[a]);
    if (coef == 0.0) continue;
    double* row = grad.weights.data() + a * width;
    for (std::size_t j = 0; j < width; ++j) row[j] += coef * feats[j];
  }
}

PolicyGrad grad_logprob(const PolicyParams& params, const Features& feats, int token) {
  if (token < 0 || token >= params.vocab_size) throw UsageError("grad_logprob: token outside vocab");
  const auto probs = softmax(policy_logits(params, feats));
  PolicyGrad g = PolicyParams::zeros(params.vocab_size, params.feature_width);
  add_scaled_grad_logprob(probs, feats.values, token, 1.0, g);
  return g;
}

double value_predict(const ValueParams& params, std::span<const double> feats) {
  if (feats.size() != params.weights.size()) {
    throw UsageError("value_predict: feature width does not match parameters");
  }
  double acc = params.bias;
  for (std::size_t j = 0; j < feats.size(); ++j) acc += params.weights[j] * feats[j];
  return acc;
}

double value_predict(const ValueParams& params, const Features& feats) {
  return value_predict(params, std::span<const double>(feats.values));
}

ValueGrad grad_value(const ValueParams& params, const Features& feats) {
  if (feats.width() != params.weights.size()) {
    throw UsageError("grad_value: feature width does not match parameters");
  }
  ValueGrad g;
  g.weights = feats.values;
  g.bias = 1.0;
  return g;
}

double entropy(std::span<const double> logits) {
  const auto lp = log_softmax(logits);
  double h = 0.0;
  for (double l : lp) {
    const double p = std::exp(l);
    if (p > 0.0) h -= p * l;
  }
  return std::clamp(h, 0.0, std::log(static_cast<double>(logits.size())));
}

PolicyParams prior_policy(const Featurizer& featurizer, double strength) {
  auto params = PolicyParams::zeros(featurizer.vocab_size(), static_cast<int>(featurizer.width()));
  const auto slot = static_cast<std::size_t>(featurizer.vocab_size() + 1);
  for (std::size_t b = 0; b < Featurizer::kDifficultyBuckets; ++b) {
    for (int tok = 0; tok < featurizer.vocab_size(); ++tok) {
      params.at(tok, featurizer.hint_offset() + b * slot + static_cast<std::size_t>(tok)) = strength;
    }
  }
  return params;
}

void save_snapshot(std::ostream& os, const Snapshot& snapshot) {
  nlohmann::json j;
  j["format"] = "vapo-params";
  j["version"] = kSnapshotVersion;
  j["vocab_size"] = snapshot.policy.vocab_size;
  j["feature_width"] = snapshot.policy.feature_width;
  j["policy"] = snapshot.policy.weights;
  j["value"] = {{"weights", snapshot.value.weights}, {"bias", snapshot.value.bias}};
  os << j.dump() << '\n';
}

Snapshot load_snapshot(std::istream& is) {
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("snapshot: ") + e.what());
  }
  if (j.value("format", "") != "vapo-params") throw ConfigError("snapshot: not a vapo-params file");
  if (j.value("version", 0) != kSnapshotVersion) throw ConfigError("snapshot: unsupported version");
  Snapshot s;
  s.policy.vocab_size = j.at("vocab_size").get<int>();
  s.policy.feature_width = j.at("feature_width").get<int>();
  s.policy.weights = j.at("policy").get<std::vector<double>>();
  s.value.weights = j.at("value").at("weights").get<std::vector<double>>();
  s.value.bias = j.at("value").at("bias").get<double>();
  if (s.policy.weights.size() != static_cast<std::size_t>(s.policy.vocab_size) * s.policy.feature_width ||
      s.value.weights.size() != static_cast<std::size_t>(s.policy.feature_width)) {
    throw ConfigError("snapshot: array sizes disagree with header");
  }
  return s;
}

}  // namespace vapo::model
