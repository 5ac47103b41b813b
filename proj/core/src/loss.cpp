#include "vapo/loss.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "vapo/errors.hpp"
#include "vapo/model.hpp"

namespace vapo::loss {

void ClipConfig::validate() const {
  if (!(eps_low > 0.0 && eps_low <= eps_high && eps_high < 1.0)) {
    throw ConfigError("clip: need 0 < eps_low <= eps_high < 1");
  }
}

double ratio(double new_logprob, double old_logprob) {
  return std::exp(std::clamp(new_logprob - old_logprob, -kLogRatioGuard, kLogRatioGuard));
}

double ppo_token_objective(double r, double advantage, const ClipConfig& clip) {
  const double clipped = std::clamp(r, 1.0 - clip.eps_low, 1.0 + clip.eps_high);
  return std::min(r * advantage, clipped * advantage);
}

TokenObjective ppo_token_objective_with_grad(double new_logprob, double old_logprob, double advantage,
                                             const ClipConfig& clip) {
  const double r = ratio(new_logprob, old_logprob);
  const double unclipped = r * advantage;
  const double clipped = std::clamp(r, 1.0 - clip.eps_low, 1.0 + clip.eps_high) * advantage;
  TokenObjective out;
  if (clipped < unclipped) {
    out.value = clipped;
    out.clipped = true;
  } else {
    out.value = unclipped;
    // The ratio guard saturates exp(), so its derivative vanishes there too.
    const double log_ratio = new_logprob - old_logprob;
    const bool guarded = log_ratio > kLogRatioGuard || log_ratio < -kLogRatioGuard;
    out.dlogprob = guarded ? 0.0 : unclipped;
  }
  return out;
}

namespace {

void require_nonempty(std::span<const TokenRecord> records, const char* what) {
  if (records.empty()) throw UsageError(std::string(what) + ": empty batch");
}

double weighted_loss(std::span<const TokenRecord> records, std::span<const double> weights,
                     const ClipConfig& clip) {
  double acc = 0.0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    acc += weights[i] * ppo_token_objective(ratio(rec.new_logprob, rec.old_logprob), rec.advantage, clip);
  }
  return -acc;
}

}  // namespace

std::vector<double> sample_level_weights(std::span<const TokenRecord> records) {
  std::map<std::uint64_t, std::size_t> counts;
  for (const auto& rec : records) ++counts[rec.traj_id];
  const double groups = static_cast<double>(counts.size());
  std::vector<double> w(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    w[i] = 1.0 / (groups * static_cast<double>(counts[records[i].traj_id]));
  }
  return w;
}

std::vector<double> token_level_weights(std::span<const TokenRecord> records) {
  return std::vector<double>(records.size(), 1.0 / static_cast<double>(records.size()));
}

std::vector<double> positive_nll_weights(std::span<const TokenRecord> records) {
  const auto positives = std::count_if(records.begin(), records.end(),
                                       [](const TokenRecord& r) { return r.is_positive; });
  std::vector<double> w(records.size(), 0.0);
  if (positives == 0) return w;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].is_positive) w[i] = 1.0 / static_cast<double>(positives);
  }
  return w;
}

double ppo_loss_sample_level(std::span<const TokenRecord> records, const ClipConfig& clip) {
  require_nonempty(records, "ppo_loss_sample_level");
  return weighted_loss(records, sample_level_weights(records), clip);
}

double ppo_loss_token_level(std::span<const TokenRecord> records, const ClipConfig& clip) {
  require_nonempty(records, "ppo_loss_token_level");
  return weighted_loss(records, token_level_weights(records), clip);
}

double clip_fraction(std::span<const TokenRecord> records, const ClipConfig& clip) {
  if (records.empty()) return 0.0;
  std::size_t clipped = 0;
  for (const auto& rec : records) {
    if (ppo_token_objective_with_grad(rec.new_logprob, rec.old_logprob, rec.advantage, clip).clipped) {
      ++clipped;
    }
  }
  return static_cast<double>(clipped) / static_cast<double>(records.size());
}

double nll_positive_loss(std::span<const TokenRecord> records) {
  double acc = 0.0;
  std::size_t n = 0;
  for (const auto& rec : records) {
    if (!rec.is_positive) continue;
    acc -= rec.new_logprob;
    ++n;
  }
  return n == 0 ? 0.0 : acc / static_cast<double>(n);
}

double combined_loss(double ppo, double nll, double mu) {
  if (mu == 0.0) return ppo;
  return ppo + mu * nll;
}

double value_loss(std::span<const double> predictions, std::span<const double> returns) {
  if (predictions.size() != returns.size()) throw UsageError("value_loss: length mismatch");
  if (predictions.empty()) throw UsageError("value_loss: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double e = predictions[i] - returns[i];
    acc += e * e;
  }
  return acc / static_cast<double>(predictions.size());
}

double kl_divergence(std::span<const double> logits, std::span<const double> ref_logits,
                     std::span<double> grad) {
  if (logits.size() != ref_logits.size() || grad.size() != logits.size()) {
    throw UsageError("kl_divergence: size mismatch");
  }
  const auto lp = model::log_softmax(logits);
  const auto lq = model::log_softmax(ref_logits);
  double kl = 0.0;
  for (std::size_t i = 0; i < lp.size(); ++i) kl += std::exp(lp[i]) * (lp[i] - lq[i]);
  // d KL / d z_j = p_j * (log p_j - log q_j - KL)
  for (std::size_t i = 0; i < lp.size(); ++i) grad[i] = std::exp(lp[i]) * (lp[i] - lq[i] - kl);
  return kl;
}

}  // namespace vapo::loss
