#ifndef VAPO_ENV_HPP_
#define VAPO_ENV_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace vapo::env {

struct Vocab {
  int size = 16;
  int eos_id = 15;  // terminal action

  void validate() const;
};

// Weighted choice over difficulty levels.
struct DifficultyMix {
  std::vector<int> levels;
  std::vector<double> weights;

  // Uniform over the given levels.
  static DifficultyMix uniform(std::vector<int> levels);
  void validate() const;
};

struct EnvConfig {
  std::string family = "mod_sum_chain";
  Vocab vocab{};
  int base = 10;  // digit tokens are 0..base-1
  int max_len = 64;
  DifficultyMix difficulty_mix = DifficultyMix::uniform({1, 2, 3, 4, 6, 8, 12, 16, 22, 30});

  void validate() const;
};

struct Prompt {
  std::vector<int> tokens;
  int answer = 0;      // hidden from the agent's reward path, read only by verify
  int difficulty = 1;  // minimum number of chain tokens
};

struct State {
  Prompt prompt;
  std::vector<int> response;
  bool done = false;
  bool truncated = false;
};

struct StepResult {
  State state;
  double reward = 0.0;
  bool done = false;
};

// One sampled response. `tokens`, `old_logprobs` and `values` are aligned
// per step: entry t describes the action taken in state s_t.
struct Trajectory {
  std::uint64_t prompt_id = 0;
  std::vector<int> tokens;
  std::vector<double> old_logprobs;
  std::vector<double> values;
  double terminal_reward = 0.0;
  bool truncated = false;

  std::size_t length() const { return tokens.size(); }
  bool is_positive() const { return terminal_reward > 0.5; }
  // Throws UsageError when the per-step arrays disagree or the reward or
  // truncation flag is inconsistent.
  void check(int eos_id) const;
};

// ModSumChain: the prompt is a list of digits. A correct response is
//
//   w_1 ... w_k  a  <eos>      with k >= difficulty,
//
// where w_j = (w_{j-1} + x_{(j-1) mod d}) mod base, w_0 = 0 (running sums
// over the prompt digits, cycling if k > d), and a = (sum of digits) mod
// base. The shortest correct response has difficulty + 2 tokens.
class ModSumChain {
 public:
  explicit ModSumChain(EnvConfig config);

  const EnvConfig& config() const { return config_; }
  const Vocab& vocab() const { return config_.vocab; }

  State reset(const Prompt& prompt) const;
  StepResult step(const State& state, int action) const;

  // Pure. 1 iff `response` (eos included) is a correct answer to `prompt`.
  int verify(const Prompt& prompt, const std::vector<int>& response) const;

  std::vector<Prompt> sample_prompts(int n, const DifficultyMix& mix, std::uint64_t seed) const;
  std::vector<Prompt> sample_prompts(int n, std::uint64_t seed) const {
    return sample_prompts(n, config_.difficulty_mix, seed);
  }

  // Length of the shortest correct response.
  static int optimal_length(const Prompt& prompt) { return prompt.difficulty + 2; }

  static constexpr int kOffTrack = -1;

  // The next token of the shortest correct response, or kOffTrack once the
  // response has left it.
  int expected_next(const Prompt& prompt, const std::vector<int>& response) const;

  Prompt make_prompt(std::vector<int> digits, int difficulty) const;

 private:
  void check_prompt(const Prompt& prompt) const;

  EnvConfig config_;
};

}  // namespace vapo::env

#endif  // VAPO_ENV_HPP_
