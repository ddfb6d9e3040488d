#include "metagen/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <atomic>
#include <cctype>
#include <mutex>
#include <thread>

#include "metagen/rng.hpp"

namespace metagen {
namespace {

const std::uint64_t kTagSample = label_hash("sample");
const std::uint64_t kTagReward = label_hash("reward");
const std::uint64_t kTagInstance = label_hash("instance");
const std::uint64_t kTagWalk = label_hash("walk");
const std::uint64_t kTagInit = label_hash("init-pop");

Factors factors_for(const Policy& policy, const Task& task) {
  if (!policy.uses_factors()) return std::nullopt;
  if (!task.factors) throw std::invalid_argument("policy expects problem factors but the task has none");
  return std::span<const double>(task.factors->values);
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

void TrainConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("invalid config: ") + what);
  };
  need(epochs > 0, "epochs must be positive");
  need(batch > 0, "batch must be positive");
  need(ppo_iters > 0, "ppo_iters must be positive");
  need(clip > 0.0 && clip < 1.0, "clip must lie in (0, 1)");
  need(runs_per_instance > 0, "runs_per_instance must be positive");
  need(pop_size > 0, "pop_size must be positive");
  need(train_budget >= pop_size, "train_budget must be >= pop_size");
  need(lr0 > 0.0, "lr0 must be positive");
  need(lr_final_ratio > 0.0 && lr_final_ratio <= 1.0, "lr_final_ratio must lie in (0, 1]");
  need(ewc_lambda >= 0.0, "ewc_lambda must be non-negative");
  need(baseline_decay >= 0.0 && baseline_decay < 1.0, "baseline_decay must lie in [0, 1)");
  need(fisher_samples > 0, "fisher_samples must be positive");
  need(infer_samples > 0, "infer_samples must be positive");
}

std::string TaskSpec::label() const {
  std::string s(family_name(key.family));
  s += ":";
  for (std::size_t i = 0; i < dims.size(); ++i) s += (i ? "," : "") + std::to_string(dims[i]);
  for (const auto& l : key.layers) s += "+" + layer_name(l);
  return s;
}

TaskSpec parse_task_spec(std::string_view text) {
  // pull the dimension list out, then reuse the problem-key parser
  TaskSpec spec;
  std::string rest;
  std::size_t i = 0;
  std::string dims;
  while (i < text.size()) {
    if (text[i] == ':') {
      ++i;
      while (i < text.size() && (std::isdigit(static_cast<unsigned char>(text[i])) || text[i] == ',')) dims += text[i++];
      continue;
    }
    rest += text[i++];
  }
  spec.key = parse_problem_key(rest);
  std::size_t start = 0;
  while (start <= dims.size() && !dims.empty()) {
    const std::size_t comma = dims.find(',', start);
    const std::string part = dims.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (part.empty()) throw std::invalid_argument("empty dimension in task spec '" + std::string(text) + "'");
    spec.dims.push_back(std::stoul(part));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (spec.dims.empty()) throw std::invalid_argument("task spec '" + std::string(text) + "' lists no dimension");
  return spec;
}

Task make_task(const TaskSpec& spec, std::uint64_t seed, bool continual) {
  if (spec.dims.empty()) throw std::invalid_argument("task needs at least one training dimension");
  Task task;
  task.spec = spec;
  for (std::size_t i = 0; i < spec.dims.size(); ++i)
    task.instances.push_back(
        make_instance(spec.key.family, spec.dims[i], spec.key.layers, derive_seed(seed, {kTagInstance, i})));
  if (continual) {
    for (std::size_t i = 0; i < task.instances.size(); ++i) {
      const Objective obj = objective_of(task.instances[i]);
      if (i == 0) {
        LandscapeAnalysis la = analyze(obj, derive_seed(seed, {kTagWalk, i}));
        task.factors = la.factors;
        task.walks.push_back(std::move(la.walks.front()));
      } else {
        task.walks.push_back(random_walk_sample(obj, derive_seed(seed, {kTagWalk, i})));
      }
    }
  }
  return task;
}

std::uint64_t reward_run_seed(std::uint64_t seed, std::size_t instance, std::size_t run) {
  return derive_seed(seed, {instance, run});
}

Population population_from_walk(const WalkSample& walk, std::size_t pop_size, std::uint64_t seed) {
  const std::size_t n = walk.points.size();
  if (n < pop_size) throw std::invalid_argument("walk sample smaller than the population");
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed);
  Population pop;
  pop.reserve(pop_size);
  for (std::size_t i = 0; i < pop_size; ++i) {
    std::swap(idx[i], idx[i + rng.below(n - i)]);
    pop.push_back({walk.points[idx[i]], walk.fitness[idx[i]]});
  }
  return pop;
}

double evaluate_reward(const Program& program, const Task& task, const TrainConfig& config, std::uint64_t seed) {
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < task.instances.size(); ++i)
    for (std::size_t r = 0; r < config.runs_per_instance; ++r) {
      RunConfig rc{config.train_budget, config.pop_size, reward_run_seed(seed, i, r), false};
      if (task.continual()) {
        const Population init = population_from_walk(task.walks[i], config.pop_size, derive_seed(rc.seed, {kTagInit}));
        total += run(program, task.instances[i], rc, &init).best_fitness;
      } else {
        total += run(program, task.instances[i], rc).best_fitness;
      }
      ++count;
    }
  return total / static_cast<double>(count);
}

std::vector<double> RewardNormalizer::normalize(std::span<const double> r) {
  if (r.empty()) return {};
  const auto [mn, mx] = std::minmax_element(r.begin(), r.end());
  if (!init_) {
    lo_ = *mn;
    hi_ = *mx;
    init_ = true;
  } else {
    lo_ = std::min(lo_, *mn);
    hi_ = std::max(hi_, *mx);
  }
  std::vector<double> out(r.size(), 0.5);
  if (*mn == *mx || hi_ == lo_) return out;
  for (std::size_t i = 0; i < r.size(); ++i) out[i] = (r[i] - lo_) / (hi_ - lo_);
  return out;
}

double BaselineTracker::value_for(std::span<const double> normalized) {
  if (!init_) {
    double s = 0.0;
    for (double v : normalized) s += v;
    b_ = normalized.empty() ? 0.0 : s / static_cast<double>(normalized.size());
    init_ = true;
  }
  return b_;
}

void BaselineTracker::update(std::span<const double> normalized) {
  if (normalized.empty()) return;
  double s = 0.0;
  for (double v : normalized) s += v;
  const double mean = s / static_cast<double>(normalized.size());
  if (!init_) {
    b_ = mean;
    init_ = true;
    return;
  }
  b_ = decay_ * b_ + (1.0 - decay_) * mean;
}

double ppo_term(double ratio, double advantage, double clip) {
  const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
  return std::min(ratio * advantage, clipped * advantage);
}

double ppo_term_grad(double ratio, double advantage, double clip) {
  const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
  return ratio * advantage <= clipped * advantage ? ratio * advantage : 0.0;
}

double Ewc::penalty(std::span<const double> params) const {
  if (!active()) return 0.0;
  double s = 0.0;
  for (std::size_t r = 0; r < params.size(); ++r) {
    const double diff = params[r] - anchor[r];
    s += fisher[r] * diff * diff;
  }
  return 0.5 * lambda * s;
}

void Ewc::add_gradient(std::span<const double> params, std::span<double> grad) const {
  if (!active()) return;
  for (std::size_t r = 0; r < params.size(); ++r) grad[r] += lambda * fisher[r] * (params[r] - anchor[r]);
}

double ppo_loss(const Policy& policy, std::span<const PpoSample> batch, Factors factors, double clip,
                const Ewc* ewc, std::span<double> grad) {
  std::vector<std::vector<TokenId>> seqs;
  seqs.reserve(batch.size());
  for (const auto& s : batch) seqs.push_back(s.tokens);
  const double inv_k = 1.0 / static_cast<double>(batch.size());
  double loss = policy.gradient(
      seqs, factors,
      [&](std::span<const double> lp, std::span<double> dl) {
        double objective = 0.0;
        for (std::size_t k = 0; k < batch.size(); ++k) {
          const double h = std::exp(lp[k] - batch[k].old_logprob);
          objective += ppo_term(h, batch[k].advantage, clip);
          dl[k] = -inv_k * ppo_term_grad(h, batch[k].advantage, clip);
        }
        return -objective * inv_k;
      },
      grad);
  if (ewc && ewc->active()) {
    const auto params = policy.model().params();
    loss += ewc->penalty(params);
    ewc->add_gradient(params, grad);
  }
  return loss;
}

Adam::Adam(std::size_t n, double beta1, double beta2, double eps)
    : b1_(beta1), b2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

void Adam::reset() {
  std::fill(m_.begin(), m_.end(), 0.0);
  std::fill(v_.begin(), v_.end(), 0.0);
  t_ = 0;
}

void Adam::step(std::span<double> params, std::span<const double> grad, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = b1_ * m_[i] + (1.0 - b1_) * grad[i];
    v_[i] = b2_ * v_[i] + (1.0 - b2_) * grad[i] * grad[i];
    params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

double cosine_lr(const TrainConfig& c, std::size_t epoch) {
  if (c.epochs <= 1) return c.lr0;
  const double lo = c.lr0 * c.lr_final_ratio;
  const double t = static_cast<double>(epoch) / static_cast<double>(c.epochs - 1);
  return lo + 0.5 * (c.lr0 - lo) * (1.0 + std::cos(std::numbers::pi * t));
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(threads, n); ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<EpochLog> train(Policy& policy, const Task& task, const TrainConfig& config, const Ewc* ewc,
                            std::size_t task_index) {
  config.validate();
  const Factors factors = factors_for(policy, task);
  auto params = policy.model().params();
  Adam adam(params.size());
  RewardNormalizer normalizer;
  BaselineTracker tracker(config.baseline_decay);
  std::vector<double> grad(params.size());
  std::vector<EpochLog> logs;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    EpochLog log;
    log.task = task_index;
    log.epoch = epoch;
    log.lr = cosine_lr(config, epoch);

    std::vector<SampledSequence> seqs(config.batch);
    std::vector<Program> programs(config.batch);
    for (std::size_t k = 0; k < config.batch; ++k) {
      Rng rng(derive_seed(config.master_seed, {kTagSample, task_index, epoch, k}));
      seqs[k] = policy.sample(factors, rng);
      programs[k] = parse_tokens(seqs[k].tokens);
      ++log.length_hist[programs[k].snippets.size() - 1];
    }
    std::vector<double> rewards(config.batch);
    parallel_for(config.batch, config.threads, [&](std::size_t k) {
      rewards[k] = evaluate_reward(programs[k], task,
                                   config, derive_seed(config.master_seed, {kTagReward, task_index, epoch, k}));
    });

    const auto norm = normalizer.normalize(rewards);
    const double b = tracker.value_for(norm);
    std::vector<PpoSample> batch(config.batch);
    for (std::size_t k = 0; k < config.batch; ++k) {
      batch[k].tokens = seqs[k].tokens;
      batch[k].old_logprob = policy.sequence_logprob(seqs[k].tokens, factors);
      batch[k].advantage = norm[k] - b;
    }
    for (std::size_t it = 0; it < config.ppo_iters; ++it) {
      std::fill(grad.begin(), grad.end(), 0.0);
      const double loss = ppo_loss(policy, batch, factors, config.clip, ewc, grad);
      if (it == 0) log.loss = loss;
      if (!std::isfinite(loss) || !all_finite(grad)) {
        ++log.skipped_steps;
        continue;
      }
      adam.step(params, grad, log.lr);
    }
    tracker.update(norm);

    const auto best = std::max_element(rewards.begin(), rewards.end());
    double sum = 0.0;
    for (double r : rewards) sum += r;
    log.mean_reward = sum / static_cast<double>(rewards.size());
    log.max_reward = *best;
    log.baseline = tracker.value();
    log.best_program = to_text(programs[static_cast<std::size_t>(best - rewards.begin())]);
    logs.push_back(std::move(log));
  }
  return logs;
}

namespace {
bool better_candidate(const Candidate& a, const Candidate& b) {
  if (a.reward != b.reward) return a.reward > b.reward;
  if (a.tokens.size() != b.tokens.size()) return a.tokens.size() < b.tokens.size();
  return a.tokens < b.tokens;
}
}  // namespace

InferResult infer(const Policy& policy, const Task& task, const TrainConfig& config, std::uint64_t seed) {
  const Factors factors = factors_for(policy, task);
  InferResult out;
  out.candidates.resize(config.infer_samples);
  for (std::size_t k = 0; k < config.infer_samples; ++k) {
    Rng rng(derive_seed(seed, {kTagSample, k}));
    out.candidates[k].tokens = policy.sample(factors, rng).tokens;
    out.candidates[k].program = parse_tokens(out.candidates[k].tokens);
  }
  // every candidate sees the same run seeds
  const std::uint64_t reward_seed = derive_seed(seed, {kTagReward});
  parallel_for(out.candidates.size(), config.threads, [&](std::size_t k) {
    out.candidates[k].reward = evaluate_reward(out.candidates[k].program, task, config, reward_seed);
  });
  out.best = *std::min_element(out.candidates.begin(), out.candidates.end(), better_candidate);
  return out;
}

double evaluate_policy(const Policy& policy, const Task& task, const TrainConfig& config, std::size_t n,
                       std::uint64_t seed) {
  const Factors factors = factors_for(policy, task);
  std::vector<Program> programs(n);
  for (std::size_t k = 0; k < n; ++k) {
    Rng rng(derive_seed(seed, {kTagSample, k}));
    programs[k] = parse_tokens(policy.sample(factors, rng).tokens);
  }
  std::vector<double> r(n);
  const std::uint64_t reward_seed = derive_seed(seed, {kTagReward});
  parallel_for(n, config.threads, [&](std::size_t k) { r[k] = evaluate_reward(programs[k], task, config, reward_seed); });
  double s = 0.0;
  for (double v : r) s += v;
  return n ? s / static_cast<double>(n) : 0.0;
}

std::vector<double> estimate_fisher(const Policy& policy, const Task& task, std::size_t samples, std::uint64_t seed) {
  const Factors factors = factors_for(policy, task);
  const std::size_t n = policy.model().num_params();
  std::vector<double> fisher(n, 0.0), g(n);
  for (std::size_t s = 0; s < samples; ++s) {
    Rng rng(derive_seed(seed, {s}));
    const auto seq = policy.sample(factors, rng);
    std::fill(g.begin(), g.end(), 0.0);
    policy.accumulate_logprob_gradient(seq.tokens, factors, 1.0, g);
    for (std::size_t r = 0; r < n; ++r) fisher[r] += g[r] * g[r];
  }
  for (double& f : fisher) f /= static_cast<double>(samples);
  return fisher;
}

ContinualResult train_continual(Policy& policy, std::span<const Task> tasks, const TrainConfig& config) {
  if (tasks.empty()) throw std::invalid_argument("continual training needs at least one task");
  ContinualResult out;
  out.ewc.lambda = config.ewc_lambda;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    out.logs.push_back(train(policy, tasks[t], config, t > 0 ? &out.ewc : nullptr, t));
    const auto fresh =
        estimate_fisher(policy, tasks[t], config.fisher_samples, derive_seed(config.master_seed, {label_hash("fisher"), t}));
    if (out.ewc.fisher.empty()) out.ewc.fisher.assign(fresh.size(), 0.0);
    for (std::size_t r = 0; r < fresh.size(); ++r) out.ewc.fisher[r] += fresh[r];
    const auto p = policy.model().params();
    out.ewc.anchor.assign(p.begin(), p.end());
  }
  return out;
}

}  // namespace metagen
