#ifndef VAPO_ADVANTAGE_HPP_
#define VAPO_ADVANTAGE_HPP_

#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "vapo/env.hpp"

namespace vapo::advantage {

struct FixedLambda {
  double lambda = 0.95;
};

// lambda = 1 - 1 / (alpha * l), l the response length.
struct LengthAdaptive {
  double alpha = 0.05;
};

using LambdaPolicyMode = std::variant<FixedLambda, LengthAdaptive>;

struct LambdaClamp {
  double lo = 0.0;
  double hi = 0.999;
};

struct GaeConfig {
  double gamma = 1.0;
  double lambda_critic = 1.0;
  // When false the value targets use the policy's lambda (classic coupled GAE).
  bool decoupled = true;
  LambdaPolicyMode lambda_policy = FixedLambda{};
  LambdaClamp clamp{};

  void validate() const;
};

struct AdvantageResult {
  std::vector<double> advantages;  // policy side
  std::vector<double> returns;     // value regression targets
  std::vector<double> deltas;
  double lambda_used = 0.0;        // policy lambda for this trajectory
};

// delta_t = r_t + gamma * V(s_{t+1}) - V(s_t). Rewards are zero except the
// terminal reward on the last step; V after the last step is 0.
std::vector<double> td_errors(const env::Trajectory& traj, double gamma);

// A_t = delta_t + gamma * lambda * A_{t+1}, evaluated backwards.
std::vector<double> gae(std::span<const double> deltas, double lambda, double gamma);

double length_adaptive_lambda(std::size_t length, double alpha, LambdaClamp clamp = {});

AdvantageResult compute(const env::Trajectory& traj, const GaeConfig& cfg);

// Batch standardization: (x - mean) / (std + 1e-8), population std.
std::vector<double> whiten(std::span<const double> advantages, bool enabled);
inline constexpr double kWhitenEps = 1e-8;

}  // namespace vapo::advantage

#endif  // VAPO_ADVANTAGE_HPP_
