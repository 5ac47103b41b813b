// Acceptance suite: one PASS/FAIL line per criterion. Tolerances and runtime
// budgets are pinned below. Pass criterion numbers as arguments to run a
// subset; the exit code is nonzero if any selected criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../support/oracles.hpp"
#include "vapo/advantage.hpp"
#include "vapo/cli.hpp"
#include "vapo/loss.hpp"
#include "vapo/model.hpp"
#include "vapo/trainer.hpp"

namespace {

using namespace vapo;

constexpr double kGaeTol = 1e-10;
constexpr double kGradTol = 1e-5;
constexpr double kExactTol = 1e-9;
constexpr double kDecayTol = 1e-6;
constexpr double kThreeDecimals = 5e-4;  // 0.006 is the three-decimal rounding
constexpr double kIdentityTol = 1e-12;
constexpr double kCollapseRatio = 0.5;
const std::vector<std::uint64_t> kSeeds{1, 2, 3};

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome gae_oracle() {
  std::mt19937_64 rng(20250401);
  double worst = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const auto n = 1 + rng() % 256;
    const auto d = oracle::random_vector(rng, n, -1, 1);
    const double lambda = oracle::random_vector(rng, 1, 0, 1)[0];
    const double gamma = oracle::random_vector(rng, 1, 0, 1)[0];
    worst = std::max(worst, oracle::rel_error(advantage::gae(d, lambda, gamma), oracle::gae_direct(d, lambda, gamma)));
  }
  return {worst < kGaeTol, fmt("200 instances, max rel error %.2e", worst)};
}

Outcome gradient_checks() {
  const env::ModSumChain env{env::EnvConfig{}};
  const model::Featurizer feat(env, 4);
  std::mt19937_64 rng(7);
  double worst_policy = 0.0;
  double worst_value = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const auto prompt = env.sample_prompts(1, rng())[0];
    env::State s = env.reset(prompt);
    for (auto len = rng() % 12; len > 0; --len) s.response.push_back(static_cast<int>(rng() % 15));
    const auto f = feat.featurize(s);

    auto p = model::PolicyParams::zeros(feat.vocab_size(), static_cast<int>(feat.width()));
    p.weights = oracle::random_vector(rng, p.size(), -0.5, 0.5);
    const int tok = static_cast<int>(rng() % 16);
    const auto g = model::grad_logprob(p, f, tok);
    const auto fd = oracle::finite_diff(
        [&](const std::vector<double>& w) {
          auto q = p;
          q.weights = w;
          return model::logprob(q, f, tok);
        },
        p.weights);
    worst_policy = std::max(worst_policy, oracle::rel_error(g.weights, fd));

    auto flat = oracle::random_vector(rng, feat.width() + 1, -1, 1);
    const auto unflat = [&](const std::vector<double>& x) {
      model::ValueParams v;
      v.weights.assign(x.begin(), x.end() - 1);
      v.bias = x.back();
      return v;
    };
    const auto vg = model::grad_value(unflat(flat), f);
    auto vgflat = vg.weights;
    vgflat.push_back(vg.bias);
    const auto vfd = oracle::finite_diff([&](const std::vector<double>& x) { return model::value_predict(unflat(x), f); },
                                         flat);
    worst_value = std::max(worst_value, oracle::rel_error(vgflat, vfd));
  }
  return {worst_policy < kGradTol && worst_value < kGradTol,
          fmt("100 instances, max rel error policy %.2e value %.2e", worst_policy, worst_value)};
}

Outcome decoupled_unbiased() {
  std::mt19937_64 rng(3);
  advantage::GaeConfig cfg;  // decoupled, lambda_critic = 1, gamma = 1
  int mismatches = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    env::Trajectory t;
    const auto n = 1 + rng() % 64;
    t.values = oracle::random_vector(rng, n, -2, 2);
    t.tokens.assign(n, 0);
    t.old_logprobs.assign(n, 0.0);
    t.terminal_reward = static_cast<double>(rng() % 2);
    for (double r : advantage::compute(t, cfg).returns) mismatches += r != t.terminal_reward;
  }
  return {mismatches == 0, fmt("1000 trajectories, %d targets differ from the terminal reward", mismatches)};
}

Outcome length_adaptive() {
  const double l100 = advantage::length_adaptive_lambda(100, 0.05);
  const double l1000 = advantage::length_adaptive_lambda(1000, 0.05);
  bool ok = l100 == 0.8 && l1000 == 0.98;
  double worst_sum = 0.0;
  for (double target : {2.0, 5.0, 50.0}) {
    const auto len = static_cast<std::size_t>(std::llround(target / 0.05));
    const double lambda = advantage::length_adaptive_lambda(len, 0.05, {0.0, 1.0});
    worst_sum = std::max(worst_sum, std::abs(1.0 / (1.0 - lambda) - target));
  }
  ok = ok && worst_sum < kExactTol;

  env::Trajectory t;
  t.values.assign(101, 0.0);
  t.tokens.assign(101, 0);
  t.old_logprobs.assign(101, 0.0);
  t.terminal_reward = 1.0;
  advantage::GaeConfig cfg;
  cfg.lambda_policy = advantage::FixedLambda{0.95};
  const double a0 = advantage::compute(t, cfg).advantages[0];
  const bool decay_ok = std::abs(a0 - std::pow(0.95, 100)) < kDecayTol && std::abs(a0 - 0.006) < kThreeDecimals;
  return {ok && decay_ok,
          fmt("lambda(100)=%.17g lambda(1000)=%.17g, geometric sum error %.1e, t=0 coefficient %.7f "
              "(0.95^100 within %.0e; equals 0.006 to three decimals, |diff| = %.1e)",
              l100, l1000, worst_sum, a0, kDecayTol, std::abs(a0 - 0.006))};
}

Outcome loss_identities() {
  std::vector<loss::TokenRecord> mixed;
  for (std::size_t i = 0; i < 2; ++i) mixed.push_back({0, 0, 1.0, 0, 2, false});
  for (std::size_t i = 0; i < 8; ++i) mixed.push_back({0, 0, 1.0, 1, 8, false});
  const auto sample = loss::sample_level_weights(mixed);
  const auto token = loss::token_level_weights(mixed);
  bool ok = sample[0] == 0.25 && sample[9] == 0.0625;
  for (double w : token) ok = ok && w == 0.1;

  std::mt19937_64 rng(5);
  std::vector<loss::TokenRecord> equal;
  for (std::size_t traj = 0; traj < 4; ++traj) {
    for (std::size_t t = 0; t < 6; ++t) {
      const auto v = oracle::random_vector(rng, 3, -1, 1);
      equal.push_back({v[0], v[0] + 0.3 * v[1], v[2], traj, 6, traj % 2 == 0});
    }
  }
  const loss::ClipConfig clip{0.2, 0.28};
  const double ppo = loss::ppo_loss_token_level(equal, clip);
  const double gap = std::abs(ppo - loss::ppo_loss_sample_level(equal, clip));
  const double combined = loss::combined_loss(ppo, loss::nll_positive_loss(equal), 0.0);
  ok = ok && gap < kIdentityTol && combined == ppo;
  return {ok, fmt("mixed (2,8) weights sample %.4g/%.4g token %.4g, equal-length gap %.1e, mu=0 bitwise %s",
                  sample[0], sample[9], token[0], gap, combined == ppo ? "yes" : "no")};
}

double final_length(const std::vector<trainer::MetricsRow>& rows) {
  std::vector<double> train;
  for (const auto& r : rows) {
    if (r.phase == "train") train.push_back(r.mean_length);
  }
  const std::size_t tail = std::max<std::size_t>(1, train.size() / 10);
  double acc = 0.0;
  for (std::size_t i = train.size() - tail; i < train.size(); ++i) acc += train[i];
  return acc / static_cast<double>(tail);
}

double initial_length(const std::vector<trainer::MetricsRow>& rows) {
  for (const auto& r : rows) {
    if (r.phase == "train") return r.mean_length;
  }
  return 0.0;
}

Outcome pretraining_regression() {
  int collapsed_without = 0;
  int collapsed_with = 0;
  std::string detail;
  for (bool pretrain : {false, true}) {
    detail += pretrain ? "; with 50 pretrain steps:" : "without pretraining:";
    for (auto seed : kSeeds) {
      trainer::Experiment e;
      e.model.value_init_offset = 0.5;
      e.train = trainer::vanilla_ppo(e.train);
      e.train.switches.value_pretraining = pretrain;
      e.train.value_pretrain_steps = 50;
      e.train.seed = seed;
      const auto rows = trainer::run_experiment(e).rows;
      const double first = initial_length(rows);
      const double last = final_length(rows);
      const bool collapsed = last < kCollapseRatio * first;
      (pretrain ? collapsed_with : collapsed_without) += collapsed;
      detail += fmt(" %.1f->%.1f", first, last);
    }
  }
  return {collapsed_without >= 2 && collapsed_with <= 1,
          fmt("collapsed runs %d/3 without, %d/3 with; ", collapsed_without, collapsed_with) + detail};
}

std::vector<trainer::AblationRow> ablation_table() {
  return trainer::ablation_suite(trainer::Experiment{}, kSeeds);
}

Outcome directional_ablation() {
  const auto table = ablation_table();
  std::printf("  %-34s %8s %8s %8s %8s\n", "variant", "seed 1", "seed 2", "seed 3", "mean");
  double full = 0.0;
  double no_dgae = 0.0;
  double no_vp = 0.0;
  for (const auto& row : table) {
    std::printf("  %-34s", row.name.c_str());
    for (double s : row.final_success) std::printf(" %8.4f", s);
    std::printf(" %8.4f\n", row.mean);
    if (row.name == "VAPO") full = row.mean;
    if (row.name == "VAPO w/o Decoupled-GAE") no_dgae = row.mean;
    if (row.name == "VAPO w/o Value-Pretraining") no_vp = row.mean;
  }
  return {full > no_dgae && full > no_vp,
          fmt("mean final success VAPO %.4f, w/o Decoupled-GAE %.4f, w/o Value-Pretraining %.4f", full, no_dgae,
              no_vp)};
}

double late_entropy(const std::vector<trainer::MetricsRow>& rows) {
  std::vector<double> train;
  for (const auto& r : rows) {
    if (r.phase == "train") train.push_back(r.entropy);
  }
  const std::size_t tail = std::max<std::size_t>(1, train.size() / 5);
  double acc = 0.0;
  for (std::size_t i = train.size() - tail; i < train.size(); ++i) acc += train[i];
  return acc / static_cast<double>(tail);
}

Outcome clip_higher_entropy() {
  double asym = 0.0;
  double sym = 0.0;
  std::string detail;
  for (auto seed : kSeeds) {
    trainer::Experiment e;
    e.train.seed = seed;
    const double a = late_entropy(trainer::run_experiment(e).rows);
    e.train.switches.clip_higher = false;
    const double s = late_entropy(trainer::run_experiment(e).rows);
    asym += a / static_cast<double>(kSeeds.size());
    sym += s / static_cast<double>(kSeeds.size());
    detail += fmt(" seed %llu %.4f/%.4f", static_cast<unsigned long long>(seed), a, s);
  }
  return {asym > sym, fmt("late entropy (eps_high 0.28 vs 0.2) mean %.4f vs %.4f;", asym, sym) + detail};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  namespace fs = std::filesystem;
  const auto root = fs::temp_directory_path() / "vapo_acceptance_determinism";
  fs::remove_all(root);
  std::vector<std::string> texts;
  for (const char* name : {"a", "b"}) {
    cli::CommonOptions o;
    o.seed = 42;
    o.overrides = {"train.total_steps=40"};
    o.out_dir = (root / name).string();
    std::stringstream out;
    std::stringstream err;
    if (cli::cmd_run(o, out, err) != cli::kOk) return {false, "cmd_run failed: " + err.str()};
    texts.push_back(slurp(root / name / "metrics.jsonl"));
  }
  fs::remove_all(root);
  const bool same = !texts[0].empty() && texts[0] == texts[1];
  return {same, fmt("two cmd_run invocations, %zu bytes each, identical: %s", texts[0].size(), same ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "GAE oracle equivalence", 1.0, gae_oracle},
      {2, "gradient checks", 5.0, gradient_checks},
      {3, "decoupled value targets unbiased", 1.0, decoupled_unbiased},
      {4, "length-adaptive lambda formula", 1.0, length_adaptive},
      {5, "loss weight identities", 1.0, loss_identities},
      {6, "value-pretraining length regression", 600.0, pretraining_regression},
      {7, "directional ablation", 1800.0, directional_ablation},
      {8, "clip-higher entropy effect", 600.0, clip_higher_entropy},
      {9, "cmd_run determinism", 120.0, determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_budget = secs <= c.budget_s;
    const bool pass = o.pass && in_budget;
    failures += !pass;
    std::printf("%s criterion %d: %s (%.2f s, budget %.0f s%s) %s\n", pass ? "PASS" : "FAIL", c.id, c.name, secs,
                c.budget_s, in_budget ? "" : ", over budget", o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
