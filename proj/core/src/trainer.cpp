#include "vapo/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vapo/errors.hpp"
#include "vapo/rng.hpp"

namespace vapo::trainer {

namespace {

// Seed-derivation tags, one per random stream.
constexpr std::uint64_t kPretrainPrompts = 1;
constexpr std::uint64_t kPretrainRollout = 2;
constexpr std::uint64_t kPretrainShuffle = 3;
constexpr std::uint64_t kTrainPrompts = 4;
constexpr std::uint64_t kTrainRollout = 5;
constexpr std::uint64_t kTrainShuffle = 6;

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

int sample_token(std::span<const double> probs, Rng& rng) {
  double u = rng.uniform();
  for (std::size_t a = 0; a < probs.size(); ++a) {
    if (u < probs[a]) return static_cast<int>(a);
    u -= probs[a];
  }
  // Rounding left u slightly above the total mass: take the last token with
  // nonzero probability.
  for (std::size_t a = probs.size(); a-- > 0;) {
    if (probs[a] > 0.0) return static_cast<int>(a);
  }
  return 0;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

std::vector<double> pack(const model::ValueParams& v) {
  std::vector<double> flat(v.weights);
  flat.push_back(v.bias);
  return flat;
}

void unpack(std::span<const double> flat, model::ValueParams& v) {
  std::copy(flat.begin(), flat.end() - 1, v.weights.begin());
  v.bias = flat.back();
}

void require_finite(std::span<const double> values, const char* what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw NumericalError(std::string(what) + ": non-finite gradient at index " + std::to_string(i));
    }
  }
}

// Flattened per-token view of a batch.
struct TokenTable {
  std::size_t width = 0;
  std::vector<double> feats;  // n x width
  std::vector<int> tokens;
  std::vector<double> old_logprobs;
  std::vector<double> old_values;
  std::vector<double> advantages;
  std::vector<double> returns;
  std::vector<loss::TokenRecord> records;
  double lambda_sum = 0.0;

  std::size_t size() const { return tokens.size(); }
  std::span<const double> row(std::size_t i) const {
    return {feats.data() + i * width, width};
  }
};

TokenTable flatten(const model::Featurizer& featurizer, const std::vector<env::Prompt>& prompts,
                   const std::vector<env::Trajectory>& batch, const advantage::GaeConfig& gae_cfg) {
  TokenTable table;
  table.width = featurizer.width();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& traj = batch[i];
    if (traj.prompt_id >= prompts.size()) throw UsageError("train_step: prompt_id out of range");
    if (traj.length() == 0) throw UsageError("train_step: empty trajectory");
    const auto adv = advantage::compute(traj, gae_cfg);
    table.lambda_sum += adv.lambda_used;
    const auto feats = featurizer.featurize_prefixes(prompts[traj.prompt_id], traj.tokens);
    for (std::size_t t = 0; t < traj.length(); ++t) {
      table.feats.insert(table.feats.end(), feats[t].values.begin(), feats[t].values.end());
      table.tokens.push_back(traj.tokens[t]);
      table.old_logprobs.push_back(traj.old_logprobs[t]);
      table.old_values.push_back(traj.values[t]);
      table.advantages.push_back(adv.advantages[t]);
      table.returns.push_back(adv.returns[t]);
      loss::TokenRecord rec;
      rec.old_logprob = traj.old_logprobs[t];
      rec.new_logprob = traj.old_logprobs[t];
      rec.traj_id = i;
      rec.traj_len = traj.length();
      rec.is_positive = traj.is_positive();
      table.records.push_back(rec);
    }
  }
  return table;
}

double mean_success(const std::vector<env::Trajectory>& batch) {
  double s = 0.0;
  for (const auto& t : batch) s += t.terminal_reward;
  return s / static_cast<double>(batch.size());
}

double mean_length(const std::vector<env::Trajectory>& batch) {
  double s = 0.0;
  for (const auto& t : batch) s += static_cast<double>(t.length());
  return s / static_cast<double>(batch.size());
}

double mean_entropy(const model::PolicyParams& policy, const TokenTable& table) {
  std::vector<double> logits(static_cast<std::size_t>(policy.vocab_size));
  double acc = 0.0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    model::policy_logits(policy, table.row(i), logits);
    acc += model::entropy(logits);
  }
  return acc / static_cast<double>(table.size());
}

// One pass of value regression over shuffled token minibatches. Returns the
// pre-update squared error summed over tokens.
double value_pass(model::ValueParams& value, Optimizer& opt, const TokenTable& table,
                  std::span<const std::size_t> order, int minibatch_size, double lr) {
  auto flat = pack(value);
  std::vector<double> grad(flat.size());
  double sq_err = 0.0;
  const auto mb = static_cast<std::size_t>(minibatch_size);
  for (std::size_t start = 0; start < order.size(); start += mb) {
    const auto end = std::min(order.size(), start + mb);
    const double inv = 1.0 / static_cast<double>(end - start);
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t k = start; k < end; ++k) {
      const auto i = order[k];
      const auto f = table.row(i);
      const double e = model::value_predict(value, f) - table.returns[i];
      sq_err += e * e;
      const double c = 2.0 * e * inv;
      for (std::size_t j = 0; j < f.size(); ++j) grad[j] += c * f[j];
      grad.back() += c;
    }
    require_finite(grad, "value update");
    opt.step(flat, grad, lr);
    unpack(flat, value);
  }
  return sq_err;
}

}  // namespace

Switches Switches::all(bool on) { return {on, on, on, on, on, on, on}; }

void TrainConfig::validate() const {
  require(prompts_per_batch >= 1, "train.prompts_per_batch: must be >= 1");
  require(group_size >= 1, "train.group_size: must be >= 1");
  require(minibatch_size >= 1, "train.minibatch_size: must be >= 1");
  require(epochs >= 1, "train.epochs: must be >= 1");
  require(actor_lr > 0.0 && std::isfinite(actor_lr), "train.actor_lr: must be > 0");
  require(critic_lr > 0.0 && std::isfinite(critic_lr), "train.critic_lr: must be > 0");
  require(value_pretrain_steps >= 0, "train.value_pretrain_steps: must be >= 0");
  require(mu >= 0.0 && std::isfinite(mu), "train.mu: must be >= 0");
  require(alpha > 0.0 && std::isfinite(alpha), "train.alpha: must be > 0");
  require(beta >= 0.0 && std::isfinite(beta), "train.beta: must be >= 0");
  require(total_steps >= 0, "train.total_steps: must be >= 0");
  require(momentum >= 0.0 && momentum < 1.0, "train.momentum: must be in [0, 1)");
  try {
    clip_config().validate();
    loss::ClipConfig{eps_low, eps_high}.validate();
    gae_config().validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("train.") + e.what());
  }
}

advantage::GaeConfig TrainConfig::gae_config() const {
  advantage::GaeConfig g;
  g.gamma = gamma;
  g.lambda_critic = lambda_critic;
  g.decoupled = switches.decoupled_gae;
  if (switches.length_adaptive_gae) {
    g.lambda_policy = advantage::LengthAdaptive{alpha};
  } else {
    g.lambda_policy = advantage::FixedLambda{lambda_policy};
  }
  return g;
}

loss::ClipConfig TrainConfig::clip_config() const {
  return switches.clip_higher ? loss::ClipConfig{eps_low, eps_high} : loss::ClipConfig::symmetric(eps_low);
}

void Experiment::validate() const {
  env.validate();
  model.validate();
  train.validate();
}

Learner Learner::initial(const model::Featurizer& featurizer, const model::ModelConfig& model_cfg,
                         const TrainConfig& train_cfg) {
  Learner l;
  l.policy = model::prior_policy(featurizer, model_cfg.policy_prior);
  l.value = model::ValueParams::constant(static_cast<int>(featurizer.width()), model_cfg.value_init_offset);
  l.policy_opt = Optimizer(train_cfg.optimizer, train_cfg.momentum);
  l.value_opt = Optimizer(train_cfg.optimizer, train_cfg.momentum);
  return l;
}

std::vector<env::Trajectory> rollout(const env::ModSumChain& env, const model::Featurizer& featurizer,
                                     const model::PolicyParams& policy, const model::ValueParams& value,
                                     const std::vector<env::Prompt>& prompts, int group_size,
                                     std::uint64_t seed) {
  if (prompts.empty()) throw UsageError("rollout: no prompts");
  if (group_size < 1) throw UsageError("rollout: group_size must be >= 1");
  std::vector<env::Trajectory> out;
  out.reserve(prompts.size() * static_cast<std::size_t>(group_size));
  std::vector<double> logits(static_cast<std::size_t>(policy.vocab_size));
  for (std::size_t p = 0; p < prompts.size(); ++p) {
    for (int g = 0; g < group_size; ++g) {
      Rng rng(derive_seed({seed, p, static_cast<std::uint64_t>(g)}));
      env::Trajectory traj;
      traj.prompt_id = p;
      auto state = env.reset(prompts[p]);
      while (!state.done) {
        const auto feats = featurizer.featurize(state);
        model::policy_logits(policy, feats.values, logits);
        const auto logp = model::log_softmax(logits);
        std::vector<double> probs(logp.size());
        std::transform(logp.begin(), logp.end(), probs.begin(), [](double l) { return std::exp(l); });
        const int action = sample_token(probs, rng);
        traj.tokens.push_back(action);
        traj.old_logprobs.push_back(logp[static_cast<std::size_t>(action)]);
        traj.values.push_back(model::value_predict(value, feats));
        auto next = env.step(state, action);
        if (next.done) {
          traj.terminal_reward = next.reward;
          traj.truncated = next.state.truncated;
        }
        state = std::move(next.state);
      }
      out.push_back(std::move(traj));
    }
  }
  return out;
}

double explained_variance(std::span<const double> predictions, std::span<const double> returns) {
  if (predictions.size() != returns.size()) throw UsageError("explained_variance: length mismatch");
  if (returns.empty()) throw UsageError("explained_variance: empty input");
  const double n = static_cast<double>(returns.size());
  double mr = 0.0;
  double me = 0.0;
  for (std::size_t i = 0; i < returns.size(); ++i) {
    mr += returns[i];
    me += returns[i] - predictions[i];
  }
  mr /= n;
  me /= n;
  double vr = 0.0;
  double ve = 0.0;
  for (std::size_t i = 0; i < returns.size(); ++i) {
    vr += (returns[i] - mr) * (returns[i] - mr);
    const double e = returns[i] - predictions[i] - me;
    ve += e * e;
  }
  if (vr == 0.0) return 0.0;
  return 1.0 - ve / vr;
}

PretrainResult value_pretrain(const env::ModSumChain& env, const model::Featurizer& featurizer,
                              const model::ValueParams& value, const model::PolicyParams& frozen_policy,
                              const TrainConfig& cfg, int steps, std::uint64_t seed, Optimizer* optimizer) {
  if (steps < 0) throw UsageError("value_pretrain: steps must be >= 0");
  PretrainResult result{value, {}};
  Optimizer local(cfg.optimizer, cfg.momentum);
  Optimizer& opt = optimizer != nullptr ? *optimizer : local;

  advantage::GaeConfig mc;
  mc.gamma = cfg.gamma;
  mc.lambda_critic = 1.0;
  mc.decoupled = true;
  for (int step = 0; step < steps; ++step) {
    const auto s = static_cast<std::uint64_t>(step);
    const auto prompts = env.sample_prompts(cfg.effective_prompts(), derive_seed({seed, kPretrainPrompts, s}));
    const auto batch = rollout(env, featurizer, frozen_policy, result.value, prompts, cfg.effective_group_size(),
                               derive_seed({seed, kPretrainRollout, s}));
    const auto table = flatten(featurizer, prompts, batch, mc);
    MetricsRow row;
    row.step = step;
    row.phase = "pretrain";
    row.success_rate = mean_success(batch);
    row.mean_length = mean_length(batch);
    row.entropy = mean_entropy(frozen_policy, table);
    row.explained_variance = explained_variance(table.old_values, table.returns);
    const auto order = shuffled_indices(table.size(), derive_seed({seed, kPretrainShuffle, s}));
    const double sq = value_pass(result.value, opt, table, order, cfg.minibatch_size, cfg.critic_lr);
    row.value_loss = sq / static_cast<double>(table.size());
    result.rows.push_back(row);
  }
  return result;
}

MetricsRow train_step(Learner& learner, const model::Featurizer& featurizer,
                      const std::vector<env::Prompt>& prompts, const std::vector<env::Trajectory>& batch,
                      const TrainConfig& cfg, std::uint64_t shuffle_seed) {
  if (batch.empty()) throw UsageError("train_step: empty batch");
  auto table = flatten(featurizer, prompts, batch, cfg.gae_config());
  const std::size_t n = table.size();
  table.advantages = advantage::whiten(table.advantages, cfg.whiten_advantages);
  for (std::size_t i = 0; i < n; ++i) table.records[i].advantage = table.advantages[i];

  const auto clip = cfg.clip_config();
  const double mu = cfg.effective_mu();
  const auto ppo_w = cfg.switches.token_level_loss ? loss::token_level_weights(table.records)
                                                   : loss::sample_level_weights(table.records);
  const auto nll_w = loss::positive_nll_weights(table.records);
  const double kl_w = 1.0 / static_cast<double>(n);
  const bool use_kl = cfg.beta > 0.0 && learner.reference.has_value();

  MetricsRow row;
  row.success_rate = mean_success(batch);
  row.mean_length = mean_length(batch);
  row.entropy = mean_entropy(learner.policy, table);
  row.explained_variance = explained_variance(table.old_values, table.returns);
  row.lambda_policy_mean = table.lambda_sum / static_cast<double>(batch.size());

  const auto vocab = static_cast<std::size_t>(learner.policy.vocab_size);
  std::vector<double> logits(vocab);
  std::vector<double> probs(vocab);
  std::vector<double> ref_logits(vocab);
  std::vector<double> kl_grad(vocab);
  auto grad = model::PolicyParams::zeros(learner.policy.vocab_size, learner.policy.feature_width);
  auto value_flat = pack(learner.value);
  std::vector<double> value_grad(value_flat.size());

  double ppo_acc = 0.0;
  double nll_acc = 0.0;
  double kl_acc = 0.0;
  double sq_err = 0.0;
  std::size_t clipped = 0;
  const auto mb = static_cast<std::size_t>(cfg.minibatch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order =
        shuffled_indices(n, derive_seed({shuffle_seed, static_cast<std::uint64_t>(epoch)}));
    for (std::size_t start = 0; start < n; start += mb) {
      const auto end = std::min(n, start + mb);
      // Scale so each minibatch gradient is an unbiased estimate of the
      // full-batch gradient under the batch-level token weights.
      const double scale = static_cast<double>(n) / static_cast<double>(end - start);
      const double inv_mb = 1.0 / static_cast<double>(end - start);
      std::fill(grad.weights.begin(), grad.weights.end(), 0.0);
      std::fill(value_grad.begin(), value_grad.end(), 0.0);
      for (std::size_t k = start; k < end; ++k) {
        const auto i = order[k];
        const auto f = table.row(i);
        const int token = table.tokens[i];
        model::policy_logits(learner.policy, f, logits);
        const auto logp = model::log_softmax(logits);
        std::transform(logp.begin(), logp.end(), probs.begin(), [](double l) { return std::exp(l); });
        const double lp = logp[static_cast<std::size_t>(token)];

        const auto obj = loss::ppo_token_objective_with_grad(lp, table.old_logprobs[i], table.advantages[i], clip);
        ppo_acc -= ppo_w[i] * obj.value;
        if (obj.clipped) ++clipped;
        // d loss / d logprob
        double coef = -ppo_w[i] * obj.dlogprob;
        if (nll_w[i] > 0.0) {
          nll_acc -= nll_w[i] * lp;
          coef -= mu * nll_w[i];
        }
        model::add_scaled_grad_logprob(probs, f, token, coef * scale, grad);

        if (use_kl) {
          model::policy_logits(*learner.reference, f, ref_logits);
          kl_acc += kl_w * loss::kl_divergence(logits, ref_logits, kl_grad);
          for (std::size_t a = 0; a < vocab; ++a) {
            const double c = cfg.beta * kl_w * scale * kl_grad[a];
            if (c == 0.0) continue;
            double* rowp = grad.weights.data() + a * f.size();
            for (std::size_t j = 0; j < f.size(); ++j) rowp[j] += c * f[j];
          }
        }

        const double e = model::value_predict(learner.value, f) - table.returns[i];
        sq_err += e * e;
        const double c = 2.0 * e * inv_mb;
        for (std::size_t j = 0; j < f.size(); ++j) value_grad[j] += c * f[j];
        value_grad.back() += c;
      }
      require_finite(grad.weights, "policy update");
      require_finite(value_grad, "value update");
      learner.policy_opt.step(learner.policy.weights, grad.weights, cfg.actor_lr);
      learner.value_opt.step(value_flat, value_grad, cfg.critic_lr);
      unpack(value_flat, learner.value);
    }
  }
  const double passes = static_cast<double>(cfg.epochs);
  row.ppo_loss = ppo_acc / passes;
  row.nll_loss = nll_acc / passes;
  row.kl_loss = kl_acc / passes;
  row.value_loss = sq_err / (static_cast<double>(n) * passes);
  row.clip_fraction = static_cast<double>(clipped) / (static_cast<double>(n) * passes);
  return row;
}

RunResult run_experiment(const Experiment& experiment, const RunCallbacks& callbacks) {
  experiment.validate();
  const auto& cfg = experiment.train;
  const env::ModSumChain env(experiment.env);
  const model::Featurizer featurizer(env, experiment.model.context_window);
  auto learner = Learner::initial(featurizer, experiment.model, cfg);

  RunResult result;
  auto emit = [&](MetricsRow row) {
    if (callbacks.on_row) callbacks.on_row(row);
    result.rows.push_back(std::move(row));
  };

  const int pretrain_steps = cfg.effective_pretrain_steps();
  if (pretrain_steps > 0) {
    auto pre = value_pretrain(env, featurizer, learner.value, learner.policy, cfg, pretrain_steps, cfg.seed,
                              &learner.value_opt);
    learner.value = std::move(pre.value);
    for (auto& row : pre.rows) emit(std::move(row));
  }
  if (cfg.beta > 0.0) learner.reference = learner.policy;

  for (int step = 0; step < cfg.total_steps; ++step) {
    const auto s = static_cast<std::uint64_t>(step);
    const auto prompts = env.sample_prompts(cfg.effective_prompts(), derive_seed({cfg.seed, kTrainPrompts, s}));
    const auto batch = rollout(env, featurizer, learner.policy, learner.value, prompts, cfg.effective_group_size(),
                               derive_seed({cfg.seed, kTrainRollout, s}));
    auto row = train_step(learner, featurizer, prompts, batch, cfg, derive_seed({cfg.seed, kTrainShuffle, s}));
    row.step = pretrain_steps + step;
    emit(std::move(row));
    if (callbacks.on_checkpoint && callbacks.checkpoint_interval > 0 &&
        (step + 1) % callbacks.checkpoint_interval == 0) {
      callbacks.on_checkpoint(pretrain_steps + step, model::Snapshot{learner.policy, learner.value});
    }
  }
  result.final_params = model::Snapshot{learner.policy, learner.value};
  return result;
}

double final_success(const std::vector<MetricsRow>& rows) {
  std::vector<double> train;
  for (const auto& r : rows) {
    if (r.phase == "train") train.push_back(r.success_rate);
  }
  if (train.empty()) return 0.0;
  const std::size_t tail = std::max<std::size_t>(1, train.size() / 10);
  double acc = 0.0;
  for (std::size_t i = train.size() - tail; i < train.size(); ++i) acc += train[i];
  return acc / static_cast<double>(tail);
}

TrainConfig vanilla_ppo(const TrainConfig& base) {
  TrainConfig v = base;
  v.switches = Switches::all(false);
  v.eps_high = v.eps_low;
  return v;
}

std::vector<Variant> ablation_variants(const TrainConfig& base) {
  std::vector<Variant> out;
  out.push_back({"Vanilla PPO", vanilla_ppo(base)});
  TrainConfig full = base;
  full.switches = Switches::all(true);
  auto without = [&](const std::string& name, bool Switches::*flag) {
    TrainConfig v = full;
    v.switches.*flag = false;
    out.push_back({"VAPO w/o " + name, v});
  };
  without("Value-Pretraining", &Switches::value_pretraining);
  without("Decoupled-GAE", &Switches::decoupled_gae);
  without("Length-adaptive GAE", &Switches::length_adaptive_gae);
  without("Clip-Higher", &Switches::clip_higher);
  without("Token-level Loss", &Switches::token_level_loss);
  without("Positive Example LM Loss", &Switches::positive_nll);
  without("Group-Sampling", &Switches::group_sampling);
  out.push_back({"VAPO", full});
  return out;
}

std::vector<AblationRow> ablation_suite(const Experiment& base, const std::vector<std::uint64_t>& seeds,
                                        const ExperimentRunner& runner) {
  if (seeds.empty()) throw ConfigError("ablation: at least one seed is required");
  base.validate();
  std::vector<AblationRow> table;
  for (const auto& variant : ablation_variants(base.train)) {
    AblationRow row;
    row.name = variant.name;
    for (auto seed : seeds) {
      Experiment e = base;
      e.train = variant.train;
      e.train.seed = seed;
      const auto result = runner ? runner(variant.name, seed, e) : run_experiment(e);
      row.final_success.push_back(final_success(result.rows));
    }
    row.mean = std::accumulate(row.final_success.begin(), row.final_success.end(), 0.0) /
               static_cast<double>(row.final_success.size());
    table.push_back(std::move(row));
  }
  return table;
}

}  // namespace vapo::trainer
