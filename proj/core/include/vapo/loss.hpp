#ifndef VAPO_LOSS_HPP_
#define VAPO_LOSS_HPP_

#include <cstdint>
#include <span>
#include <vector>

namespace vapo::loss {

struct ClipConfig {
  double eps_low = 0.2;
  double eps_high = 0.28;

  static ClipConfig symmetric(double eps) { return {eps, eps}; }
  void validate() const;
};

struct TokenRecord {
  double new_logprob = 0.0;
  double old_logprob = 0.0;
  double advantage = 0.0;
  std::uint64_t traj_id = 0;
  std::size_t traj_len = 1;
  bool is_positive = false;
};

struct LossBreakdown {
  double ppo_loss = 0.0;
  double nll_loss = 0.0;
  double value_loss = 0.0;
  double kl_loss = 0.0;
  double combined = 0.0;
  double clip_fraction = 0.0;
};

// |new - old| is capped at this before exponentiation.
inline constexpr double kLogRatioGuard = 20.0;

double ratio(double new_logprob, double old_logprob);

struct TokenObjective {
  double value = 0.0;
  // d value / d new_logprob; zero when the clipped branch is active.
  double dlogprob = 0.0;
  bool clipped = false;
};

// min(r * A, clip(r, 1 - eps_low, 1 + eps_high) * A)
double ppo_token_objective(double r, double advantage, const ClipConfig& clip);
TokenObjective ppo_token_objective_with_grad(double new_logprob, double old_logprob, double advantage,
                                             const ClipConfig& clip);

// Per-token weights such that loss = -sum_i w_i * objective_i.
// Sample level: 1 / (G * |o_i|); token level: 1 / sum |o_i|. Trajectory
// sizes are counted from the records themselves.
std::vector<double> sample_level_weights(std::span<const TokenRecord> records);
std::vector<double> token_level_weights(std::span<const TokenRecord> records);
// 1 / sum_{positive} |o_i| on positive tokens, 0 elsewhere.
std::vector<double> positive_nll_weights(std::span<const TokenRecord> records);

double ppo_loss_sample_level(std::span<const TokenRecord> records, const ClipConfig& clip);
double ppo_loss_token_level(std::span<const TokenRecord> records, const ClipConfig& clip);
// Fraction of records whose clipped branch is active.
double clip_fraction(std::span<const TokenRecord> records, const ClipConfig& clip);

// Mean of -new_logprob over tokens of positive trajectories; 0 if none.
double nll_positive_loss(std::span<const TokenRecord> records);

double combined_loss(double ppo, double nll, double mu);

double value_loss(std::span<const double> predictions, std::span<const double> returns);

// KL(softmax(logits) || softmax(ref_logits)) for one state, and its gradient
// with respect to `logits` written into `grad` (same size).
double kl_divergence(std::span<const double> logits, std::span<const double> ref_logits,
                     std::span<double> grad);

}  // namespace vapo::loss

#endif  // VAPO_LOSS_HPP_
