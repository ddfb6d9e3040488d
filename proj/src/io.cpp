#include "metagen/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace metagen {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

Json program_to_json(const Program& program) {
  Json snippets = Json::array();
  for (const Snippet& s : program.snippets) {
    Json j;
    j["component"] = std::string(describe(s.component).name);
    j["params"] = s.params;
    j["pointer"] = std::string(pointer_name(s.pointer.kind));
    if (s.pointer.kind == PointerKind::fork) j["offset"] = s.pointer.offset;
    switch (s.condition.kind) {
      case ConditionKind::once:
        j["condition"] = "once";
        break;
      case ConditionKind::count_frac:
        j["condition"] = "count";
        j["fraction"] = s.condition.fraction;
        break;
      case ConditionKind::event:
        j["condition"] = "event";
        j["event"] = std::string(event_name(s.condition.event));
        break;
    }
    snippets.push_back(std::move(j));
  }
  Json out;
  out["text"] = to_text(program);
  out["snippets"] = std::move(snippets);
  if (representable_as_tokens(program)) {
    Json toks = Json::array();
    for (TokenId t : to_tokens(program)) toks.push_back(build_vocabulary().info(t).name);
    out["tokens"] = std::move(toks);
  }
  return out;
}

Program program_from_json(const Json& j) {
  try {
    if (j.contains("snippets")) {
      std::vector<Snippet> snippets;
      for (const Json& s : j.at("snippets")) {
        Snippet sn;
        const auto name = s.at("component").get<std::string>();
        auto comp = component_from_name(name);
        if (!comp) throw std::invalid_argument("unknown component '" + name + "'");
        sn.component = *comp;
        sn.params = s.value("params", std::vector<double>{});
        const auto ptr = s.at("pointer").get<std::string>();
        if (ptr == "forward") sn.pointer = Pointer::forward();
        else if (ptr == "iterate") sn.pointer = Pointer::iterate();
        else if (ptr == "fork") sn.pointer = Pointer::fork(s.at("offset").get<std::size_t>());
        else throw std::invalid_argument("unknown pointer '" + ptr + "'");
        const auto cond = s.at("condition").get<std::string>();
        if (cond == "once") sn.condition = Condition::once();
        else if (cond == "count") sn.condition = Condition::count(s.at("fraction").get<double>());
        else if (cond == "event") {
          const auto ev = event_from_name(s.at("event").get<std::string>());
          if (!ev) throw std::invalid_argument("unknown event");
          sn.condition = Condition::on(*ev);
        } else {
          throw std::invalid_argument("unknown condition '" + cond + "'");
        }
        snippets.push_back(std::move(sn));
      }
      return make_program(std::move(snippets));
    }
    if (j.contains("text")) return from_text(j.at("text").get<std::string>());
  } catch (const Json::exception& e) {
    throw std::invalid_argument(std::string("malformed program JSON: ") + e.what());
  }
  throw std::invalid_argument("program JSON needs `snippets` or `text`");
}

Json vocabulary_json() {
  Json arr = Json::array();
  static constexpr const char* kKinds[] = {"component", "n_value", "p_value", "pointer",
                                           "fork_offset", "condition", "begin", "end"};
  for (const TokenInfo& t : build_vocabulary().tokens())
    arr.push_back({{"id", t.id}, {"name", t.name}, {"kind", kKinds[static_cast<int>(t.kind)]}, {"value", t.value}});
  return arr;
}

nlohmann::ordered_json factors_json(const FactorVector& f) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  const auto names = factor_names();
  for (std::size_t i = 0; i < kNumFactors; ++i) j[std::string(names[i])] = f.values[i];
  return j;
}

Json checkpoint_to_json(const Policy& policy, const Json& config_echo) {
  const auto& h = policy.model().hyper();
  Json j;
  j["format"] = "metagen-checkpoint";
  j["version"] = 1;
  j["hyper"] = {{"vocab", h.vocab},   {"d_model", h.d_model}, {"heads", h.heads},         {"blocks", h.blocks},
                {"ffn", h.ffn},       {"max_len", h.max_len}, {"factor_dim", h.factor_dim}};
  j["grammar"] = {{"allow_events", policy.grammar().options().allow_events}};
  j["config"] = config_echo;
  Json tensors = Json::array();
  const auto p = policy.model().params();
  for (const TensorInfo& t : policy.model().tensors())
    tensors.push_back({{"name", t.name},
                       {"rows", t.rows},
                       {"cols", t.cols},
                       {"data", std::vector<double>(p.begin() + static_cast<std::ptrdiff_t>(t.offset),
                                                    p.begin() + static_cast<std::ptrdiff_t>(t.offset + t.size()))}});
  j["tensors"] = std::move(tensors);
  return j;
}

void save_checkpoint(const std::filesystem::path& path, const Policy& policy, const Json& config_echo) {
  write_file(path, checkpoint_to_json(policy, config_echo).dump(1) + "\n");
}

Policy policy_from_json(const Json& j, Json* config_echo) {
  try {
    if (j.at("format") != "metagen-checkpoint") throw std::runtime_error("not a checkpoint file");
    if (j.at("version").get<int>() != 1) throw std::runtime_error("unsupported checkpoint version");
    const Json& hj = j.at("hyper");
    TransformerHyper h;
    h.vocab = hj.at("vocab");
    h.d_model = hj.at("d_model");
    h.heads = hj.at("heads");
    h.blocks = hj.at("blocks");
    h.ffn = hj.at("ffn");
    h.max_len = hj.at("max_len");
    h.factor_dim = hj.at("factor_dim");
    GrammarOptions g;
    g.allow_events = j.at("grammar").at("allow_events");
    Policy policy(h, g);
    auto params = policy.model().params();
    const auto& tensors = policy.model().tensors();
    const Json& tj = j.at("tensors");
    if (tj.size() != tensors.size()) throw std::runtime_error("checkpoint tensor count mismatch");
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      const TensorInfo& t = tensors[i];
      if (tj[i].at("name") != t.name || tj[i].at("rows") != t.rows || tj[i].at("cols") != t.cols)
        throw std::runtime_error("checkpoint tensor '" + t.name + "' has the wrong name or shape");
      const auto data = tj[i].at("data").get<std::vector<double>>();
      if (data.size() != t.size()) throw std::runtime_error("checkpoint tensor '" + t.name + "' has the wrong size");
      std::copy(data.begin(), data.end(), params.begin() + static_cast<std::ptrdiff_t>(t.offset));
    }
    if (config_echo) *config_echo = j.value("config", Json::object());
    return policy;
  } catch (const Json::exception& e) {
    throw std::runtime_error(std::string("malformed checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("malformed checkpoint: ") + e.what());
  }
}

Policy load_checkpoint(const std::filesystem::path& path, Json* config_echo) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::exception& e) {
    throw std::runtime_error("cannot parse checkpoint " + path.string() + ": " + e.what());
  }
  return policy_from_json(j, config_echo);
}

Json train_config_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch", c.batch},
          {"ppo_iters", c.ppo_iters},
          {"clip", c.clip},
          {"runs_per_instance", c.runs_per_instance},
          {"train_budget", c.train_budget},
          {"pop_size", c.pop_size},
          {"lr0", c.lr0},
          {"lr_final_ratio", c.lr_final_ratio},
          {"ewc_lambda", c.ewc_lambda},
          {"baseline_decay", c.baseline_decay},
          {"fisher_samples", c.fisher_samples},
          {"infer_samples", c.infer_samples},
          {"master_seed", c.master_seed}};
}

KeyValues parse_key_values(std::string_view text) {
  KeyValues out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  auto trim = [](std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return std::string_view{};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (!line.empty()) {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos)
        throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
      const auto key = trim(line.substr(0, eq));
      const auto value = trim(line.substr(eq + 1));
      if (key.empty()) throw std::invalid_argument("config line " + std::to_string(line_no) + ": empty key");
      out.emplace_back(std::string(key), std::string(value));
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return out;
}

namespace {
template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw std::invalid_argument("config key '" + key + "': invalid value '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config key '" + key + "': expected a boolean, got '" + v + "'");
}
}  // namespace

void apply_config(const KeyValues& kv, CliConfig& c) {
  for (const auto& [k, v] : kv) {
    auto& t = c.train;
    if (k == "epochs") t.epochs = parse_number<std::size_t>(k, v);
    else if (k == "batch") t.batch = parse_number<std::size_t>(k, v);
    else if (k == "ppo_iters") t.ppo_iters = parse_number<std::size_t>(k, v);
    else if (k == "clip") t.clip = parse_number<double>(k, v);
    else if (k == "runs_per_instance") t.runs_per_instance = parse_number<std::size_t>(k, v);
    else if (k == "train_budget") t.train_budget = parse_number<std::size_t>(k, v);
    else if (k == "pop_size") t.pop_size = parse_number<std::size_t>(k, v);
    else if (k == "lr0") t.lr0 = parse_number<double>(k, v);
    else if (k == "lr_final_ratio") t.lr_final_ratio = parse_number<double>(k, v);
    else if (k == "ewc_lambda") t.ewc_lambda = parse_number<double>(k, v);
    else if (k == "baseline_decay") t.baseline_decay = parse_number<double>(k, v);
    else if (k == "fisher_samples") t.fisher_samples = parse_number<std::size_t>(k, v);
    else if (k == "infer_samples") t.infer_samples = parse_number<std::size_t>(k, v);
    else if (k == "master_seed") t.master_seed = parse_number<std::uint64_t>(k, v);
    else if (k == "workers") t.threads = parse_number<std::size_t>(k, v);
    else if (k == "task") c.tasks.push_back(v);
    else if (k == "out") c.out = v;
    else if (k == "trace") c.trace = parse_bool(k, v);
    else throw std::invalid_argument("unknown config key '" + k + "'");
  }
}

CliConfig load_config(const std::filesystem::path& path, CliConfig base) {
  apply_config(parse_key_values(read_file(path)), base);
  return base;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string train_log_csv(const std::vector<EpochLog>& rows) {
  std::string s = "task,epoch,lr,mean_reward,max_reward,baseline,loss,skipped";
  for (std::size_t i = 1; i <= kMaxComponents; ++i) s += ",len" + std::to_string(i);
  s += ",best_program\n";
  for (const EpochLog& r : rows) {
    s += std::to_string(r.task) + "," + std::to_string(r.epoch + 1) + "," + format_double(r.lr) + "," +
         format_double(r.mean_reward) + "," + format_double(r.max_reward) + "," + format_double(r.baseline) + "," +
         format_double(r.loss) + "," + std::to_string(r.skipped_steps);
    for (std::size_t c : r.length_hist) s += "," + std::to_string(c);
    s += "," + csv_field(r.best_program) + "\n";
  }
  return s;
}

}  // namespace metagen
