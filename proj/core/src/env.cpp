#include "vapo/env.hpp"

#include <numeric>
#include <utility>

#include "vapo/errors.hpp"
#include "vapo/rng.hpp"

namespace vapo::env {

void Vocab::validate() const {
  if (size < 3) throw ConfigError("env.vocab_size: must be >= 3, got " + std::to_string(size));
  if (eos_id < 0 || eos_id >= size) {
    throw ConfigError("env.eos_id: must be in [0, vocab_size), got " + std::to_string(eos_id));
  }
}

DifficultyMix DifficultyMix::uniform(std::vector<int> levels) {
  DifficultyMix mix;
  mix.weights.assign(levels.size(), 1.0);
  mix.levels = std::move(levels);
  return mix;
}

void DifficultyMix::validate() const {
  if (levels.empty()) throw ConfigError("env.difficulty_mix: must not be empty");
  if (levels.size() != weights.size()) {
    throw ConfigError("env.difficulty_mix: levels and weights differ in length");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] < 1) throw ConfigError("env.difficulty_mix: difficulty levels must be >= 1");
    if (!(weights[i] >= 0.0)) throw ConfigError("env.difficulty_mix: weights must be >= 0");
    total += weights[i];
  }
  if (!(total > 0.0)) throw ConfigError("env.difficulty_mix: weights sum to zero");
}

void EnvConfig::validate() const {
  if (family != "mod_sum_chain") throw ConfigError("env.family: unknown family '" + family + "'");
  vocab.validate();
  if (base < 2) throw ConfigError("env.base: must be >= 2");
  if (base > vocab.size - 1 || vocab.eos_id < base) {
    throw ConfigError("env.base: digit tokens 0..base-1 must fit below eos_id");
  }
  if (max_len < 3) throw ConfigError("env.max_len: must be >= 3");
  difficulty_mix.validate();
  for (int level : difficulty_mix.levels) {
    if (level + 2 > max_len) {
      throw ConfigError("env.difficulty_mix: difficulty " + std::to_string(level) +
                        " cannot be solved within max_len " + std::to_string(max_len));
    }
  }
}

void Trajectory::check(int eos_id) const {
  if (old_logprobs.size() != tokens.size() || values.size() != tokens.size()) {
    throw UsageError("trajectory: tokens, old_logprobs and values differ in length");
  }
  if (terminal_reward != 0.0 && terminal_reward != 1.0) {
    throw UsageError("trajectory: terminal reward must be 0 or 1");
  }
  if (truncated && !tokens.empty() && tokens.back() == eos_id) {
    throw UsageError("trajectory: truncated trajectory ends with eos");
  }
}

ModSumChain::ModSumChain(EnvConfig config) : config_(std::move(config)) { config_.validate(); }

void ModSumChain::check_prompt(const Prompt& prompt) const {
  if (prompt.tokens.empty()) throw ConfigError("prompt: empty token list");
  for (int tok : prompt.tokens) {
    if (tok < 0 || tok >= config_.vocab.size) {
      throw ConfigError("prompt: token id " + std::to_string(tok) + " outside vocab of size " +
                        std::to_string(config_.vocab.size));
    }
  }
  if (prompt.difficulty < 1) throw ConfigError("prompt: difficulty must be >= 1");
}

Prompt ModSumChain::make_prompt(std::vector<int> digits, int difficulty) const {
  Prompt p;
  p.tokens = std::move(digits);
  p.difficulty = difficulty;
  long sum = 0;
  for (int d : p.tokens) sum += d;
  p.answer = static_cast<int>(sum % config_.base);
  check_prompt(p);
  return p;
}

State ModSumChain::reset(const Prompt& prompt) const {
  check_prompt(prompt);
  State s;
  s.prompt = prompt;
  return s;
}

StepResult ModSumChain::step(const State& state, int action) const {
  if (state.done) throw UsageError("step: episode already finished");
  if (action < 0 || action >= config_.vocab.size) {
    throw UsageError("step: action " + std::to_string(action) + " outside vocab");
  }
  StepResult out{state, 0.0, false};
  out.state.response.push_back(action);
  const bool eos = action == config_.vocab.eos_id;
  const bool full = static_cast<int>(out.state.response.size()) >= config_.max_len;
  if (eos || full) {
    out.state.done = true;
    out.state.truncated = !eos;
    out.done = true;
    // Truncated responses have no eos, so verify() yields 0 for them.
    out.reward = verify(state.prompt, out.state.response);
  }
  return out;
}

int ModSumChain::verify(const Prompt& prompt, const std::vector<int>& response) const {
  const int eos = config_.vocab.eos_id;
  if (response.size() < 2 || response.back() != eos) return 0;
  const std::size_t body = response.size() - 1;  // chain + answer
  const std::size_t chain = body - 1;
  if (chain < static_cast<std::size_t>(prompt.difficulty) || prompt.tokens.empty()) return 0;
  if (response[chain] != prompt.answer) return 0;
  int running = 0;
  for (std::size_t j = 0; j < chain; ++j) {
    running = (running + prompt.tokens[j % prompt.tokens.size()]) % config_.base;
    if (response[j] != running) return 0;
  }
  return 1;
}

int ModSumChain::expected_next(const Prompt& prompt, const std::vector<int>& response) const {
  const auto d = static_cast<std::size_t>(prompt.difficulty);
  if (response.size() > d + 1) return kOffTrack;
  int running = 0;
  for (std::size_t j = 0; j < response.size(); ++j) {
    const int want = j < d ? (running = (running + prompt.tokens[j % prompt.tokens.size()]) % config_.base)
                           : prompt.answer;
    if (response[j] != want) return kOffTrack;
  }
  const auto t = response.size();
  if (t < d) return (running + prompt.tokens[t % prompt.tokens.size()]) % config_.base;
  if (t == d) return prompt.answer;
  return config_.vocab.eos_id;
}

std::vector<Prompt> ModSumChain::sample_prompts(int n, const DifficultyMix& mix,
                                                std::uint64_t seed) const {
  if (n < 1) throw ConfigError("sample_prompts: n must be >= 1");
  mix.validate();
  const double total = std::accumulate(mix.weights.begin(), mix.weights.end(), 0.0);
  Rng rng(seed);
  std::vector<Prompt> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double u = rng.uniform() * total;
    std::size_t pick = mix.levels.size() - 1;
    for (std::size_t j = 0; j < mix.levels.size(); ++j) {
      if (u < mix.weights[j]) {
        pick = j;
        break;
      }
      u -= mix.weights[j];
    }
    const int difficulty = mix.levels[pick];
    std::vector<int> digits(static_cast<std::size_t>(difficulty));
    for (auto& dgt : digits) dgt = static_cast<int>(rng.below(static_cast<std::uint64_t>(config_.base)));
    out.push_back(make_prompt(std::move(digits), difficulty));
  }
  return out;
}

}  // namespace vapo::env
