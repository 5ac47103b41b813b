#ifndef VAPO_MODEL_HPP_
#define VAPO_MODEL_HPP_

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "vapo/env.hpp"

namespace vapo::model {

struct ModelConfig {
  int context_window = 4;
  // Initial value of every state (biased value-model emulation).
  double value_init_offset = 0.5;
  // Strength of the warm-start policy prior, see prior_policy().
  double policy_prior = 3.0;

  void validate() const;
};

struct Features {
  std::vector<double> values;

  std::size_t width() const { return values.size(); }
};

// Fixed-width state encoding. Layout, in order:
//
//   [context]   k slots, most recent response token first, each a one-hot
//               over vocab + 1 entries (the extra entry is "pad")
//   [hint]      one-hot over vocab + 1 entries: the next token of the
//               shortest correct response, or the last entry once the
//               response has left it
//   [phase]     one-hot: chain / answer / closing
//   [difficulty]  difficulty / max_len
//   [position]  t / max_len
//   [constant]  1
class Featurizer {
 public:
  Featurizer(const env::ModSumChain& env, int context_window);

  std::size_t width() const { return width_; }
  int context_window() const { return k_; }
  int vocab_size() const { return vocab_; }

  Features featurize(const env::State& state) const;
  // Features of s_0 .. s_{n-1} for a response of n tokens.
  std::vector<Features> featurize_prefixes(const env::Prompt& prompt,
                                           const std::vector<int>& response) const;

  // Difficulty d falls in bucket b when kDifficultyEdges[b-1] < d <= kDifficultyEdges[b].
  static constexpr std::array<int, 3> kDifficultyEdges{3, 8, 16};
  static constexpr std::size_t kDifficultyBuckets = kDifficultyEdges.size() + 1;
  static constexpr std::array<int, 6> kRemainingEdges{0, 1, 2, 4, 8, 16};
  static constexpr std::size_t kRemainingBuckets = kRemainingEdges.size() + 1;
  static std::size_t difficulty_bucket(int difficulty);
  static std::size_t remaining_bucket(int remaining);

  std::size_t context_offset() const { return 0; }
  std::size_t hint_offset() const { return static_cast<std::size_t>(k_ * (vocab_ + 1)); }
  std::size_t remaining_offset() const {
    return hint_offset() + kDifficultyBuckets * static_cast<std::size_t>(vocab_ + 1);
  }
  std::size_t phase_offset() const { return remaining_offset() + kRemainingBuckets; }
  std::size_t difficulty_offset() const { return phase_offset() + 3; }
  std::size_t position_offset() const { return difficulty_offset() + 1; }
  std::size_t constant_offset() const { return position_offset() + 1; }

 private:
  void fill(const env::Prompt& prompt, std::span<const int> response, std::span<double> out) const;

  env::ModSumChain env_;
  int k_;
  int vocab_;
  int max_len_;
  std::size_t width_;
};

// Linear softmax policy: logits = weights * features. Row-major
// (vocab_size x feature_width).
struct PolicyParams {
  int vocab_size = 0;
  int feature_width = 0;
  std::vector<double> weights;

  static PolicyParams zeros(int vocab_size, int feature_width);
  std::size_t size() const { return weights.size(); }
  double& at(int token, std::size_t j) { return weights[static_cast<std::size_t>(token) * feature_width + j]; }
  double at(int token, std::size_t j) const {
    return weights[static_cast<std::size_t>(token) * feature_width + j];
  }
};

// Linear value: V(s) = weights . features + bias.
struct ValueParams {
  std::vector<double> weights;
  double bias = 0.0;

  static ValueParams zeros(int feature_width);
  // Emulates a value model that starts from a biased estimate: every state
  // is initially valued at `offset`.
  static ValueParams constant(int feature_width, double offset);
  std::size_t size() const { return weights.size() + 1; }
};

// Same shape as the parameters it differentiates.
using PolicyGrad = PolicyParams;
using ValueGrad = ValueParams;

std::vector<double> policy_logits(const PolicyParams& params, const Features& feats);
void policy_logits(const PolicyParams& params, std::span<const double> feats, std::span<double> out);

// Numerically stable log-softmax.
std::vector<double> log_softmax(std::span<const double> logits);
std::vector<double> softmax(std::span<const double> logits);

double logprob(const PolicyParams& params, const Features& feats, int token);

// d log pi(token|s) / d weights: row a gets (1[a = token] - p_a) * feats.
PolicyGrad grad_logprob(const PolicyParams& params, const Features& feats, int token);
// Accumulates scale * grad_logprob into `grad` without allocating a
// gradient; `probs` are the softmax probabilities at `feats`.
void add_scaled_grad_logprob(std::span<const double> probs, std::span<const double> feats, int token,
                             double scale, PolicyGrad& grad);

double value_predict(const ValueParams& params, const Features& feats);
double value_predict(const ValueParams& params, std::span<const double> feats);
ValueGrad grad_value(const ValueParams& params, const Features& feats);

// Shannon entropy in nats of softmax(logits).
double entropy(std::span<const double> logits);

// Initial policy resembling a supervised warm start: places `strength` on
// the hint -> token diagonal so the canonical next token is preferred.
// strength = 0 gives the uniform policy.
PolicyParams prior_policy(const Featurizer& featurizer, double strength);

// Parameter snapshots (JSON, see README).
struct Snapshot {
  PolicyParams policy;
  ValueParams value;
};
inline constexpr int kSnapshotVersion = 1;
void save_snapshot(std::ostream& os, const Snapshot& snapshot);
Snapshot load_snapshot(std::istream& is);

}  // namespace vapo::model

#endif  // VAPO_MODEL_HPP_
