#ifndef VAPO_TRAINER_HPP_
#define VAPO_TRAINER_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vapo/advantage.hpp"
#include "vapo/env.hpp"
#include "vapo/loss.hpp"
#include "vapo/model.hpp"
#include "vapo/optim.hpp"

namespace vapo::trainer {

// The seven modifications layered over vanilla PPO. All on = VAPO.
struct Switches {
  bool value_pretraining = true;
  bool decoupled_gae = true;
  bool length_adaptive_gae = true;
  bool clip_higher = true;
  bool token_level_loss = true;
  bool positive_nll = true;
  bool group_sampling = true;

  static Switches all(bool on);
};

struct TrainConfig {
  int prompts_per_batch = 32;
  int group_size = 8;
  int minibatch_size = 256;  // tokens
  int epochs = 1;
  double actor_lr = 0.03;
  double critic_lr = 0.1;
  int value_pretrain_steps = 50;
  Switches switches{};

  double mu = 0.1;
  double alpha = 0.05;
  double eps_low = 0.2;
  double eps_high = 0.28;
  double beta = 0.0;  // KL penalty towards the initial policy; 0 disables it

  double gamma = 1.0;
  double lambda_policy = 0.95;  // used when length-adaptive GAE is off
  double lambda_critic = 1.0;   // used when decoupled GAE is on
  bool whiten_advantages = true;

  OptimizerKind optimizer = OptimizerKind::kMomentum;
  double momentum = 0.9;

  int total_steps = 300;
  std::uint64_t seed = 0;

  void validate() const;

  // Settings implied by the switches.
  advantage::GaeConfig gae_config() const;
  loss::ClipConfig clip_config() const;
  double effective_mu() const { return switches.positive_nll ? mu : 0.0; }
  int effective_prompts() const { return switches.group_sampling ? prompts_per_batch : prompts_per_batch * group_size; }
  int effective_group_size() const { return switches.group_sampling ? group_size : 1; }
  int effective_pretrain_steps() const { return switches.value_pretraining ? value_pretrain_steps : 0; }
};

struct MetricsRow {
  long step = 0;
  std::string phase = "train";  // "pretrain" or "train"
  double success_rate = 0.0;
  double mean_length = 0.0;
  double entropy = 0.0;
  double explained_variance = 0.0;
  double ppo_loss = 0.0;
  double value_loss = 0.0;
  double nll_loss = 0.0;
  double kl_loss = 0.0;
  double clip_fraction = 0.0;
  double lambda_policy_mean = 0.0;
};

// Everything needed to run one experiment.
struct Experiment {
  env::EnvConfig env{};
  model::ModelConfig model{};
  TrainConfig train{};

  void validate() const;
};

// Mutable learner: parameters plus optimizer state.
struct Learner {
  model::PolicyParams policy;
  model::ValueParams value;
  std::optional<model::PolicyParams> reference;  // KL anchor, set when beta > 0
  Optimizer policy_opt;
  Optimizer value_opt;

  static Learner initial(const model::Featurizer& featurizer, const model::ModelConfig& model_cfg,
                         const TrainConfig& train_cfg);
};

// Samples `group_size` responses per prompt under `policy`, recording the
// sampling-time log-probs and values. Trajectory i*group_size+g belongs to
// prompt i; its randomness is derived from (seed, i, g) only.
std::vector<env::Trajectory> rollout(const env::ModSumChain& env, const model::Featurizer& featurizer,
                                     const model::PolicyParams& policy, const model::ValueParams& value,
                                     const std::vector<env::Prompt>& prompts, int group_size,
                                     std::uint64_t seed);

// 1 - Var(returns - predictions) / Var(returns); 0 when Var(returns) = 0.
double explained_variance(std::span<const double> predictions, std::span<const double> returns);

struct PretrainResult {
  model::ValueParams value;
  std::vector<MetricsRow> rows;
};

// Regresses the value function on Monte-Carlo returns of responses sampled
// from the frozen policy. Each step draws prompts_per_batch x group_size
// fresh responses and makes one pass of token minibatches.
PretrainResult value_pretrain(const env::ModSumChain& env, const model::Featurizer& featurizer,
                              const model::ValueParams& value, const model::PolicyParams& frozen_policy,
                              const TrainConfig& cfg, int steps, std::uint64_t seed,
                              Optimizer* optimizer = nullptr);

// One PPO update over a batch of trajectories (one or more passes of shuffled
// token minibatches). `prompts` is indexed by Trajectory::prompt_id.
// Throws NumericalError on a non-finite gradient, leaving `learner` in the
// state before the offending minibatch.
MetricsRow train_step(Learner& learner, const model::Featurizer& featurizer,
                      const std::vector<env::Prompt>& prompts, const std::vector<env::Trajectory>& batch,
                      const TrainConfig& cfg, std::uint64_t shuffle_seed);

struct RunCallbacks {
  std::function<void(const MetricsRow&)> on_row;
  // Called after every `checkpoint_interval` train steps (0 disables).
  std::function<void(long step, const model::Snapshot&)> on_checkpoint;
  int checkpoint_interval = 0;
};

struct RunResult {
  std::vector<MetricsRow> rows;
  model::Snapshot final_params;
};

RunResult run_experiment(const Experiment& experiment, const RunCallbacks& callbacks = {});

// Mean success rate over the last 10% of train rows (at least one row).
double final_success(const std::vector<MetricsRow>& rows);

struct Variant {
  std::string name;
  TrainConfig train;
};

// Table row order: vanilla PPO, the seven leave-one-out variants, full VAPO.
std::vector<Variant> ablation_variants(const TrainConfig& base);
TrainConfig vanilla_ppo(const TrainConfig& base);

struct AblationRow {
  std::string name;
  std::vector<double> final_success;  // per seed
  double mean = 0.0;
};

using ExperimentRunner = std::function<RunResult(const std::string& variant, std::uint64_t seed,
                                                 const Experiment& experiment)>;

std::vector<AblationRow> ablation_suite(const Experiment& base, const std::vector<std::uint64_t>& seeds,
                                        const ExperimentRunner& runner = {});

}  // namespace vapo::trainer

#endif  // VAPO_TRAINER_HPP_
