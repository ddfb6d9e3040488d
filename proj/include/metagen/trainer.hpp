#pragma once

// PPO training of the policy on generated programs, best-of-K inference,
// diagonal Fisher estimation and EWC-regularized continual training.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "metagen/interpreter.hpp"
#include "metagen/landscape.hpp"
#include "metagen/policy.hpp"
#include "metagen/problems.hpp"
#include "metagen/program.hpp"

namespace metagen {

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch = 16;
  std::size_t ppo_iters = 5;
  double clip = 0.2;
  std::size_t runs_per_instance = 5;
  std::size_t train_budget = 5000;
  std::size_t pop_size = 50;
  double lr0 = 5e-5;
  double lr_final_ratio = 0.1;  // cosine annealing down to lr0 * ratio
  double ewc_lambda = 200.0;
  double baseline_decay = 0.9;
  std::size_t fisher_samples = 256;
  std::size_t infer_samples = 16;
  std::uint64_t master_seed = 0;
  std::size_t threads = 1;  // reward evaluation workers

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct TaskSpec {
  ProblemKey key;                // family and W-model layers; key.dim is ignored
  std::vector<std::size_t> dims;  // training dimensions

  std::string label() const;
};

// Parses "onemax:50,100+neutrality3" style specs: the dimension list follows
// the family name.
TaskSpec parse_task_spec(std::string_view text);

struct Task {
  TaskSpec spec;
  std::vector<ProblemInstance> instances;
  // continual mode only
  std::optional<FactorVector> factors;
  std::vector<WalkSample> walks;  // one per instance

  bool continual() const { return factors.has_value(); }
};

// Instances are seeded from (seed, instance index). With `continual`, the
// landscape factors of the first instance are computed and a walk is
// retained for every instance.
Task make_task(const TaskSpec& spec, std::uint64_t seed, bool continual);

// Mean best fitness over instances x runs.
double evaluate_reward(const Program& program, const Task& task, const TrainConfig& config, std::uint64_t seed);

// Seed of run `run` on instance `instance` within a reward evaluation.
std::uint64_t reward_run_seed(std::uint64_t seed, std::size_t instance, std::size_t run);

// Initial population for a continual-mode run: pop_size walk points chosen
// without replacement, fitness reused.
Population population_from_walk(const WalkSample& walk, std::size_t pop_size, std::uint64_t seed);

class RewardNormalizer {
 public:
  std::vector<double> normalize(std::span<const double> rewards);
  double lo() const { return lo_; }
  double hi() const { return hi_; }

 private:
  bool init_ = false;
  double lo_ = 0.0, hi_ = 0.0;
};

class BaselineTracker {
 public:
  explicit BaselineTracker(double decay = 0.9) : decay_(decay) {}
  // First call initializes b to the batch mean.
  double value_for(std::span<const double> normalized);
  void update(std::span<const double> normalized);
  double value() const { return b_; }

 private:
  double decay_;
  bool init_ = false;
  double b_ = 0.0;
};

// Per-sample clipped objective min(h·A, clip(h, 1-ε, 1+ε)·A).
double ppo_term(double ratio, double advantage, double clip);
// d(term)/d(log-prob); zero when the clipped branch is active.
double ppo_term_grad(double ratio, double advantage, double clip);

struct Ewc {
  std::vector<double> fisher;
  std::vector<double> anchor;
  double lambda = 0.0;

  bool active() const { return !fisher.empty(); }
  double penalty(std::span<const double> params) const;
  void add_gradient(std::span<const double> params, std::span<double> grad) const;
};

struct PpoSample {
  std::vector<TokenId> tokens;
  double old_logprob = 0.0;
  double advantage = 0.0;
};

// PPO loss (negated mean clipped objective, plus the EWC penalty when given)
// and its gradient, accumulated into grad.
double ppo_loss(const Policy& policy, std::span<const PpoSample> batch, Factors factors, double clip,
                const Ewc* ewc, std::span<double> grad);

class Adam {
 public:
  explicit Adam(std::size_t n, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(std::span<double> params, std::span<const double> grad, double lr);
  void reset();

 private:
  double b1_, b2_, eps_;
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

double cosine_lr(const TrainConfig& config, std::size_t epoch);

struct EpochLog {
  std::size_t task = 0;
  std::size_t epoch = 0;
  double lr = 0.0;
  double mean_reward = 0.0;
  double max_reward = 0.0;
  double baseline = 0.0;
  double loss = 0.0;  // first PPO iteration
  std::size_t skipped_steps = 0;
  std::array<std::size_t, kMaxComponents> length_hist{};  // snippet counts 1..6
  std::string best_program;
};

// Trains in place; returns one log row per epoch.
std::vector<EpochLog> train(Policy& policy, const Task& task, const TrainConfig& config,
                            const Ewc* ewc = nullptr, std::size_t task_index = 0);

struct Candidate {
  std::vector<TokenId> tokens;
  Program program;
  double reward = 0.0;
};

struct InferResult {
  Candidate best;
  std::vector<Candidate> candidates;
};

// Best of config.infer_samples sampled programs by training reward; ties go
// to fewer tokens, then the lexicographically smaller token sequence.
InferResult infer(const Policy& policy, const Task& task, const TrainConfig& config, std::uint64_t seed);

// Mean reward of n sampled programs.
double evaluate_policy(const Policy& policy, const Task& task, const TrainConfig& config, std::size_t n,
                       std::uint64_t seed);

std::vector<double> estimate_fisher(const Policy& policy, const Task& task, std::size_t samples, std::uint64_t seed);

struct ContinualResult {
  std::vector<std::vector<EpochLog>> logs;  // per task
  Ewc ewc;                                  // final consolidated state
};

ContinualResult train_continual(Policy& policy, std::span<const Task> tasks, const TrainConfig& config);

// Runs fn(i) for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace metagen
