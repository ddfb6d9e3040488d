#include "metagen/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <optional>

#include "metagen/baselines.hpp"
#include "metagen/io.hpp"
#include "metagen/landscape.hpp"
#include "metagen/trainer.hpp"

namespace metagen {
namespace {

namespace fs = std::filesystem;

struct TrainFlags {
  std::string config;
  std::vector<std::string> tasks;
  std::string problem;
  std::string dims;
  std::optional<std::size_t> epochs, batch, ppo_iters, runs, budget, pop, infer_samples, fisher_samples, workers;
  std::optional<double> clip, lr, lr_final_ratio, lambda, baseline_decay;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_train_flags(CLI::App* app, TrainFlags& f, bool continual) {
  app->add_option("--config", f.config, "key = value configuration file")->check(CLI::ExistingFile);
  app->add_option("--task", f.tasks, "task spec family:dims[+layer...], e.g. onemax:50,100");
  if (!continual) {
    app->add_option("--problem", f.problem, "problem family with optional W-model layers");
    app->add_option("--dims", f.dims, "comma-separated training dimensions");
  }
  app->add_option("--epochs", f.epochs);
  app->add_option("--batch", f.batch, "programs sampled per epoch");
  app->add_option("--ppo-iters", f.ppo_iters);
  app->add_option("--clip", f.clip);
  app->add_option("--runs", f.runs, "runs per training instance");
  app->add_option("--budget", f.budget, "FE budget per training run");
  app->add_option("--pop", f.pop, "population size");
  app->add_option("--lr", f.lr, "initial learning rate");
  app->add_option("--lr-final-ratio", f.lr_final_ratio);
  app->add_option("--baseline-decay", f.baseline_decay);
  app->add_option("--infer-samples", f.infer_samples);
  if (continual) {
    app->add_option("--lambda", f.lambda, "EWC strength");
    app->add_option("--fisher-samples", f.fisher_samples);
  }
  app->add_option("--seed", f.seed, "master seed");
  app->add_option("--workers", f.workers, "parallel interpreter runs");
  app->add_option("--out", f.out, "output directory");
}

CliConfig resolve(const TrainFlags& f) {
  CliConfig c;
  if (!f.config.empty()) c = load_config(f.config, c);
  auto& t = c.train;
  if (f.epochs) t.epochs = *f.epochs;
  if (f.batch) t.batch = *f.batch;
  if (f.ppo_iters) t.ppo_iters = *f.ppo_iters;
  if (f.runs) t.runs_per_instance = *f.runs;
  if (f.budget) t.train_budget = *f.budget;
  if (f.pop) t.pop_size = *f.pop;
  if (f.infer_samples) t.infer_samples = *f.infer_samples;
  if (f.fisher_samples) t.fisher_samples = *f.fisher_samples;
  if (f.workers) t.threads = *f.workers;
  if (f.clip) t.clip = *f.clip;
  if (f.lr) t.lr0 = *f.lr;
  if (f.lr_final_ratio) t.lr_final_ratio = *f.lr_final_ratio;
  if (f.lambda) t.ewc_lambda = *f.lambda;
  if (f.baseline_decay) t.baseline_decay = *f.baseline_decay;
  if (f.seed) t.master_seed = *f.seed;
  if (!f.tasks.empty()) c.tasks = f.tasks;
  if (!f.problem.empty()) {
    if (f.dims.empty()) throw std::invalid_argument("--problem needs --dims");
    const ProblemKey key = parse_problem_key(f.problem);
    std::string spec(family_name(key.family));
    spec += ":" + f.dims;
    for (const auto& l : key.layers) spec += "+" + layer_name(l);
    c.tasks = {spec};
  }
  if (!f.out.empty()) c.out = f.out;
  t.validate();
  return c;
}

fs::path output_dir(const std::optional<std::string>& flag) {
  if (flag && !flag->empty()) return *flag;
  if (const char* env = std::getenv("METAGEN_OUT"); env && *env) return env;
  return "metagen_out";
}

std::uint64_t task_seed(std::uint64_t master, std::size_t t) {
  return derive_seed(master, {label_hash("task"), t});
}

Json candidate_json(const Candidate& c) {
  Json j = program_to_json(c.program);
  j["reward"] = c.reward;
  return j;
}

Json inferred_json(const InferResult& r, const Task& task) {
  Json j;
  j["task"] = task.spec.label();
  j["best"] = candidate_json(r.best);
  Json cands = Json::array();
  for (const auto& c : r.candidates) cands.push_back({{"text", to_text(c.program)}, {"reward", c.reward}});
  j["candidates"] = std::move(cands);
  return j;
}

int cmd_train(const TrainFlags& f, std::ostream& out) {
  CliConfig c = resolve(f);
  if (c.tasks.size() != 1) throw std::invalid_argument("train needs exactly one task (--problem/--dims or --task)");
  const fs::path dir = output_dir(c.out);
  const Task task = make_task(parse_task_spec(c.tasks[0]), task_seed(c.train.master_seed, 0), false);
  Policy policy(default_policy_hyper(false));
  policy.model().init(derive_seed(c.train.master_seed, {label_hash("init")}));
  const auto logs = train(policy, task, c.train);
  const InferResult best = infer(policy, task, c.train, derive_seed(c.train.master_seed, {label_hash("infer")}));

  Json echo = train_config_json(c.train);
  echo["tasks"] = c.tasks;
  write_file(dir / "train_log.csv", train_log_csv(logs));
  save_checkpoint(dir / "checkpoint.json", policy, echo);
  Json algs;
  algs["seed"] = c.train.master_seed;
  algs["algorithms"] = Json::array({inferred_json(best, task)});
  write_file(dir / "algorithms.json", algs.dump(2) + "\n");
  out << to_text(best.best.program) << "\n";
  return 0;
}

int cmd_continual(const TrainFlags& f, std::ostream& out) {
  CliConfig c = resolve(f);
  if (c.tasks.size() < 2) throw std::invalid_argument("continual needs at least two --task entries");
  const fs::path dir = output_dir(c.out);
  std::vector<Task> tasks;
  for (std::size_t t = 0; t < c.tasks.size(); ++t)
    tasks.push_back(make_task(parse_task_spec(c.tasks[t]), task_seed(c.train.master_seed, t), true));
  Policy policy(default_policy_hyper(true));
  policy.model().init(derive_seed(c.train.master_seed, {label_hash("init")}));
  const ContinualResult res = train_continual(policy, tasks, c.train);

  std::vector<EpochLog> rows;
  for (const auto& l : res.logs) rows.insert(rows.end(), l.begin(), l.end());
  Json echo = train_config_json(c.train);
  echo["tasks"] = c.tasks;
  write_file(dir / "train_log.csv", train_log_csv(rows));
  save_checkpoint(dir / "checkpoint.json", policy, echo);
  Json algs;
  algs["seed"] = c.train.master_seed;
  algs["algorithms"] = Json::array();
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const InferResult best =
        infer(policy, tasks[t], c.train, derive_seed(c.train.master_seed, {label_hash("infer"), t}));
    algs["algorithms"].push_back(inferred_json(best, tasks[t]));
    out << tasks[t].spec.label() << ": " << to_text(best.best.program) << "\n";
  }
  write_file(dir / "algorithms.json", algs.dump(2) + "\n");
  return 0;
}

struct InferFlags {
  std::string checkpoint, task, out;
  std::optional<std::size_t> samples, runs, budget, pop, workers;
  std::uint64_t seed = 0;
};

int cmd_infer(const InferFlags& f, std::ostream& out) {
  Json echo;
  const Policy policy = load_checkpoint(f.checkpoint, &echo);
  TrainConfig cfg;
  cfg.runs_per_instance = f.runs.value_or(echo.value("runs_per_instance", cfg.runs_per_instance));
  cfg.train_budget = f.budget.value_or(echo.value("train_budget", cfg.train_budget));
  cfg.pop_size = f.pop.value_or(echo.value("pop_size", cfg.pop_size));
  cfg.infer_samples = f.samples.value_or(echo.value("infer_samples", cfg.infer_samples));
  cfg.threads = f.workers.value_or(1);
  cfg.validate();
  const Task task = make_task(parse_task_spec(f.task), task_seed(f.seed, 0), policy.uses_factors());
  const InferResult best = infer(policy, task, cfg, derive_seed(f.seed, {label_hash("infer")}));
  Json algs;
  algs["seed"] = f.seed;
  algs["algorithms"] = Json::array({inferred_json(best, task)});
  write_file(output_dir(f.out.empty() ? std::nullopt : std::optional(f.out)) / "algorithms.json", algs.dump(2) + "\n");
  out << to_text(best.best.program) << "\n";
  return 0;
}

// IR text, a program JSON object, or an algorithms.json file (first entry).
Program load_program(const fs::path& path) {
  const std::string text = read_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    const Json j = Json::parse(text);
    if (j.contains("algorithms")) return program_from_json(j.at("algorithms").at(0).at("best"));
    return program_from_json(j);
  }
  std::string body;
  for (char c : text) body += (c == '\n' || c == '\r') ? ' ' : c;
  return from_text(body);
}

struct EvalFlags {
  std::vector<std::string> programs, baselines, problems;
  std::size_t runs = 30, budget = 5000, pop = 50, workers = 1;
  std::uint64_t seed = 0;
  bool no_timing = false, ga_grid = false;
  std::string out;
};

struct RunRecord {
  std::string program_id, problem;
  std::size_t dim = 0, run = 0;
  std::uint64_t seed = 0;
  double best = 0.0;
  std::size_t fe = 0;
  double wall_ms = 0.0;
};

std::string records_csv(const std::vector<RunRecord>& rows) {
  std::string s = "program_id,problem,dim,run,seed,best_fitness,fe_used,wall_ms\n";
  for (const auto& r : rows)
    s += csv_field(r.program_id) + "," + csv_field(r.problem) + "," + std::to_string(r.dim) + "," +
         std::to_string(r.run) + "," + std::to_string(r.seed) + "," + format_double(r.best) + "," +
         std::to_string(r.fe) + "," + format_double(r.wall_ms) + "\n";
  return s;
}

ProblemInstance instance_for(const std::string& key, std::uint64_t seed) {
  return make_instance(parse_problem_key(key), std::nullopt, derive_seed(seed, {label_hash("instance"), label_hash(key)}));
}

std::uint64_t run_seed(std::uint64_t seed, const std::string& key, std::size_t run) {
  return derive_seed(seed, {label_hash(key), run});
}

using Runner = std::function<ExecutionReport(const ProblemInstance&, const RunConfig&)>;

struct Algorithm {
  std::string id;
  std::function<Runner(const ProblemInstance&)> make;  // per-instance runner
};

std::vector<RunRecord> run_all(const std::vector<Algorithm>& algs, const EvalFlags& f) {
  std::vector<RunRecord> rows;
  for (const auto& key : f.problems) {
    const ProblemInstance inst = instance_for(key, f.seed);
    for (const auto& alg : algs) {
      const Runner runner = alg.make(inst);
      std::vector<RunRecord> part(f.runs);
      parallel_for(f.runs, f.workers, [&](std::size_t r) {
        RunConfig rc{f.budget, f.pop, run_seed(f.seed, key, r), false};
        const auto t0 = std::chrono::steady_clock::now();
        const ExecutionReport rep = runner(inst, rc);
        const auto t1 = std::chrono::steady_clock::now();
        part[r] = {alg.id, key, inst.dim(), r, rc.seed, rep.best_fitness, rep.fe_used,
                   f.no_timing ? 0.0 : std::chrono::duration<double, std::milli>(t1 - t0).count()};
      });
      rows.insert(rows.end(), part.begin(), part.end());
    }
  }
  return rows;
}

std::vector<Algorithm> program_algorithms(const EvalFlags& f) {
  std::vector<Algorithm> algs;
  for (const auto& p : f.programs) {
    auto program = std::make_shared<Program>(load_program(p));
    algs.push_back({fs::path(p).stem().string(), [program](const ProblemInstance&) {
                      return Runner([program](const ProblemInstance& i, const RunConfig& rc) { return run(*program, i, rc); });
                    }});
  }
  return algs;
}

Algorithm baseline_algorithm(BaselineKind kind, const EvalFlags& f) {
  return {std::string(baseline_name(kind)), [kind, &f](const ProblemInstance& inst) {
            GaSettings ga;
            if (kind == BaselineKind::ga && f.ga_grid)
              ga = ga_grid_search(inst, f.budget, f.pop, derive_seed(f.seed, {label_hash("ga-grid")})).best;
            return Runner([kind, ga](const ProblemInstance& i, const RunConfig& rc) {
              return run_handcoded(kind, i, rc, ga);
            });
          }};
}

int cmd_eval(const EvalFlags& f, std::ostream& out) {
  std::vector<Algorithm> algs = program_algorithms(f);
  for (const auto& b : f.baselines) {
    auto kind = baseline_from_name(b);
    if (!kind) throw std::invalid_argument("unknown baseline '" + b + "'");
    algs.push_back(baseline_algorithm(*kind, f));
  }
  if (algs.empty()) throw std::invalid_argument("eval needs --program or --baseline");
  const auto rows = run_all(algs, f);
  const std::string csv = records_csv(rows);
  if (f.out.empty()) out << csv;
  else write_file(f.out, csv);
  return 0;
}

// Two-sided Mann-Whitney U with normal approximation and tie correction.
// Returns +1 when a is significantly larger, -1 when smaller, 0 otherwise.
int rank_sum_flag(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n1 = a.size(), n2 = b.size();
  if (n1 == 0 || n2 == 0) return 0;
  std::vector<std::pair<double, int>> all;
  for (double v : a) all.emplace_back(v, 0);
  for (double v : b) all.emplace_back(v, 1);
  std::sort(all.begin(), all.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  double r1 = 0.0, tie_term = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    const double rank = (static_cast<double>(i + j) + 1.0) / 2.0;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    for (std::size_t k = i; k < j; ++k)
      if (all[k].second == 0) r1 += rank;
    i = j;
  }
  const double N = static_cast<double>(n1 + n2);
  const double u = r1 - static_cast<double>(n1) * (static_cast<double>(n1) + 1.0) / 2.0;
  const double mu = static_cast<double>(n1 * n2) / 2.0;
  const double var = static_cast<double>(n1 * n2) / 12.0 * ((N + 1.0) - tie_term / (N * (N - 1.0)));
  if (var <= 0.0) return 0;
  const double z = (u - mu) / std::sqrt(var);
  if (z > 1.959963984540054) return 1;
  if (z < -1.959963984540054) return -1;
  return 0;
}

int cmd_bench(EvalFlags f, std::ostream& out) {
  if (f.problems.empty()) throw std::invalid_argument("bench needs at least one --problem");
  std::vector<Algorithm> algs = program_algorithms(f);
  const std::size_t programs = algs.size();
  for (BaselineKind k : kAllBaselines) algs.push_back(baseline_algorithm(k, f));
  const auto rows = run_all(algs, f);
  const fs::path dir = output_dir(f.out.empty() ? std::nullopt : std::optional(f.out));
  write_file(dir / "runs.csv", records_csv(rows));

  std::string s = "problem,algorithm,runs,mean,std,min,max,vs_reference\n";
  for (const auto& key : f.problems) {
    std::vector<std::vector<double>> vals(algs.size());
    for (const auto& r : rows)
      if (r.problem == key)
        for (std::size_t a = 0; a < algs.size(); ++a)
          if (algs[a].id == r.program_id) vals[a].push_back(r.best);
    for (std::size_t a = 0; a < algs.size(); ++a) {
      const auto& v = vals[a];
      const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      double var = 0.0;
      for (double x : v) var += (x - mean) * (x - mean);
      const double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
      std::string flag = "";
      if (programs > 0 && a > 0) {
        // reference program vs this algorithm: '+' reference better, '-' worse, '=' no difference
        const int c = rank_sum_flag(vals[0], v);
        flag = c > 0 ? "+" : (c < 0 ? "-" : "=");
      }
      s += csv_field(key) + "," + csv_field(algs[a].id) + "," + std::to_string(v.size()) + "," + format_double(mean) +
           "," + format_double(sd) + "," + format_double(*std::min_element(v.begin(), v.end())) + "," +
           format_double(*std::max_element(v.begin(), v.end())) + "," + flag + "\n";
    }
  }
  write_file(dir / "summary.csv", s);
  out << s;
  return 0;
}

int cmd_features(const std::string& problem, std::uint64_t seed, bool csv, const std::string& out_path,
                 std::ostream& out) {
  const ProblemInstance inst = instance_for(problem, seed);
  const FactorVector fv = compute_factors(inst, seed);
  std::string text;
  if (csv) {
    text = "problem_key,seed";
    for (auto n : factor_names()) text += "," + std::string(n);
    text += "\n" + csv_field(problem) + "," + std::to_string(seed);
    for (double v : fv.values) text += "," + format_double(v);
    text += "\n";
  } else {
    nlohmann::ordered_json j;
    j["problem_key"] = problem;
    j["seed"] = seed;
    j["factors"] = factors_json(fv);
    j["ridge_fallback"] = fv.ridge_used;
    text = j.dump(2) + "\n";
  }
  if (out_path.empty()) out << text;
  else write_file(out_path, text);
  return 0;
}

int cmd_export(bool vocab, const std::string& baseline, std::size_t dim, bool json, const std::string& out_path,
               std::ostream& out) {
  std::string text;
  if (vocab) {
    text = vocabulary_json().dump(2) + "\n";
  } else if (!baseline.empty()) {
    auto kind = baseline_from_name(baseline);
    if (!kind) throw std::invalid_argument("unknown baseline '" + baseline + "'");
    if (dim == 0) throw std::invalid_argument("export --baseline needs --dim");
    const Program p = as_program(*kind, dim);
    text = json ? program_to_json(p).dump(2) + "\n" : to_text(p) + "\n";
  } else {
    throw std::invalid_argument("export needs --vocab or --baseline");
  }
  if (out_path.empty()) out << text;
  else write_file(out_path, text);
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Learned design of metaheuristic programs for pseudo-Boolean optimization", "metagen"};
  app.require_subcommand(1);

  TrainFlags train_f, cont_f;
  add_train_flags(app.add_subcommand("train", "train the policy on one task"), train_f, false);
  add_train_flags(app.add_subcommand("continual", "train across a task sequence with EWC"), cont_f, true);

  InferFlags inf;
  auto* infer_cmd = app.add_subcommand("infer", "sample programs from a checkpoint and keep the best");
  infer_cmd->add_option("--checkpoint", inf.checkpoint)->required()->check(CLI::ExistingFile);
  infer_cmd->add_option("--task", inf.task, "task spec family:dims[+layer...]")->required();
  infer_cmd->add_option("--samples", inf.samples);
  infer_cmd->add_option("--runs", inf.runs);
  infer_cmd->add_option("--budget", inf.budget);
  infer_cmd->add_option("--pop", inf.pop);
  infer_cmd->add_option("--workers", inf.workers);
  infer_cmd->add_option("--seed", inf.seed);
  infer_cmd->add_option("--out", inf.out, "output directory");

  EvalFlags ev, bench;
  auto* eval_cmd = app.add_subcommand("eval", "run programs or baselines and print one CSV row per run");
  auto* bench_cmd = app.add_subcommand("bench", "compare programs with the four baselines");
  for (auto [cmd, f] : {std::pair{eval_cmd, &ev}, std::pair{bench_cmd, &bench}}) {
    cmd->add_option("--program", f->programs, "IR text or JSON program file")->check(CLI::ExistingFile);
    cmd->add_option("--problem", f->problems, "problem key family:dim[+layer...]")->required();
    cmd->add_option("--runs", f->runs);
    cmd->add_option("--budget", f->budget);
    cmd->add_option("--pop", f->pop);
    cmd->add_option("--seed", f->seed);
    cmd->add_option("--workers", f->workers);
    cmd->add_flag("--no-timing", f->no_timing, "report wall_ms as 0 so output is byte-reproducible");
    cmd->add_flag("--ga-grid", f->ga_grid, "tune the GA baseline by grid search per problem");
  }
  eval_cmd->add_option("--baseline", ev.baselines, "ILS, SA, TS or GA");
  eval_cmd->add_option("--out", ev.out, "CSV file (default: stdout)");
  bench_cmd->add_option("--out", bench.out, "output directory");

  std::string feat_problem, feat_out;
  std::uint64_t feat_seed = 0;
  bool feat_csv = false;
  auto* feat_cmd = app.add_subcommand("features", "landscape factor vector of a problem");
  feat_cmd->add_option("--problem", feat_problem)->required();
  feat_cmd->add_option("--seed", feat_seed);
  feat_cmd->add_flag("--csv", feat_csv);
  feat_cmd->add_option("--out", feat_out, "file (default: stdout)");

  bool exp_vocab = false, exp_json = false;
  std::string exp_baseline, exp_out;
  std::size_t exp_dim = 0;
  auto* export_cmd = app.add_subcommand("export", "export the vocabulary or a baseline program");
  export_cmd->add_flag("--vocab", exp_vocab);
  export_cmd->add_option("--baseline", exp_baseline);
  export_cmd->add_option("--dim", exp_dim);
  export_cmd->add_flag("--json", exp_json);
  export_cmd->add_option("--out", exp_out, "file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (app.got_subcommand("train")) return cmd_train(train_f, out);
    if (app.got_subcommand("continual")) return cmd_continual(cont_f, out);
    if (app.got_subcommand("infer")) return cmd_infer(inf, out);
    if (app.got_subcommand("eval")) return cmd_eval(ev, out);
    if (app.got_subcommand("bench")) return cmd_bench(bench, out);
    if (app.got_subcommand("features")) return cmd_features(feat_problem, feat_seed, feat_csv, feat_out, out);
    if (app.got_subcommand("export")) return cmd_export(exp_vocab, exp_baseline, exp_dim, exp_json, exp_out, out);
  } catch (const std::exception& e) {
    err << "metagen: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace metagen
