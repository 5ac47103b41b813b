#include "vapo/advantage.hpp"

#include <algorithm>
#include <cmath>

#include "vapo/errors.hpp"

namespace vapo::advantage {

void GaeConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gae.gamma: must be in [0, 1]");
  if (!(lambda_critic >= 0.0 && lambda_critic <= 1.0)) {
    throw ConfigError("gae.lambda_critic: must be in [0, 1]");
  }
  if (!(clamp.lo >= 0.0 && clamp.lo <= clamp.hi && clamp.hi <= 1.0)) {
    throw ConfigError("gae.lambda_clamp: need 0 <= lo <= hi <= 1");
  }
  if (const auto* fixed = std::get_if<FixedLambda>(&lambda_policy)) {
    if (!(fixed->lambda >= 0.0 && fixed->lambda <= 1.0)) {
      throw ConfigError("gae.lambda_policy: must be in [0, 1]");
    }
  } else if (!(std::get<LengthAdaptive>(lambda_policy).alpha > 0.0)) {
    throw ConfigError("gae.alpha: must be > 0");
  }
}

std::vector<double> td_errors(const env::Trajectory& traj, double gamma) {
  const auto n = traj.length();
  if (n == 0) throw UsageError("td_errors: empty trajectory");
  if (traj.values.size() != n) throw UsageError("td_errors: values not populated");
  std::vector<double> deltas(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double reward = t + 1 == n ? traj.terminal_reward : 0.0;
    const double next = t + 1 < n ? traj.values[t + 1] : 0.0;
    deltas[t] = reward + gamma * next - traj.values[t];
  }
  return deltas;
}

std::vector<double> gae(std::span<const double> deltas, double lambda, double gamma) {
  std::vector<double> adv(deltas.size());
  double running = 0.0;
  for (std::size_t i = deltas.size(); i-- > 0;) {
    running = deltas[i] + gamma * lambda * running;
    adv[i] = running;
  }
  return adv;
}

double length_adaptive_lambda(std::size_t length, double alpha, LambdaClamp clamp) {
  if (length == 0) throw UsageError("length_adaptive_lambda: length must be >= 1");
  if (!(alpha > 0.0)) throw UsageError("length_adaptive_lambda: alpha must be > 0");
  const double raw = 1.0 - 1.0 / (alpha * static_cast<double>(length));
  return std::clamp(raw, clamp.lo, clamp.hi);
}

AdvantageResult compute(const env::Trajectory& traj, const GaeConfig& cfg) {
  AdvantageResult out;
  out.deltas = td_errors(traj, cfg.gamma);
  if (const auto* fixed = std::get_if<FixedLambda>(&cfg.lambda_policy)) {
    out.lambda_used = fixed->lambda;
  } else {
    out.lambda_used =
        length_adaptive_lambda(traj.length(), std::get<LengthAdaptive>(cfg.lambda_policy).alpha, cfg.clamp);
  }
  out.advantages = gae(out.deltas, out.lambda_used, cfg.gamma);

  const double lambda_value = cfg.decoupled ? cfg.lambda_critic : out.lambda_used;
  const auto n = traj.length();
  if (lambda_value == 1.0) {
    // The value terms telescope away: the target is the Monte-Carlo return,
    // computed directly so it carries no rounding from the value predictions.
    out.returns.resize(n);
    double ret = 0.0;
    for (std::size_t t = n; t-- > 0;) {
      ret = (t + 1 == n ? traj.terminal_reward : 0.0) + cfg.gamma * ret;
      out.returns[t] = ret;
    }
    return out;
  }
  const auto value_adv =
      lambda_value == out.lambda_used ? out.advantages : gae(out.deltas, lambda_value, cfg.gamma);
  out.returns.resize(value_adv.size());
  for (std::size_t t = 0; t < value_adv.size(); ++t) out.returns[t] = value_adv[t] + traj.values[t];
  return out;
}

std::vector<double> whiten(std::span<const double> advantages, bool enabled) {
  std::vector<double> out(advantages.begin(), advantages.end());
  if (!enabled || out.empty()) return out;
  double mean = 0.0;
  for (double a : out) mean += a;
  mean /= static_cast<double>(out.size());
  double var = 0.0;
  for (double a : out) var += (a - mean) * (a - mean);
  var /= static_cast<double>(out.size());
  const double scale = 1.0 / (std::sqrt(var) + kWhitenEps);
  for (double& a : out) a = (a - mean) * scale;
  return out;
}

}  // namespace vapo::advantage
