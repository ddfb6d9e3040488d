#pragma once

// Serialization: program JSON, checkpoints, key=value configs, CSV helpers.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>
#include "metagen/landscape.hpp"
#include "metagen/policy.hpp"
#include "metagen/program.hpp"
#include "metagen/trainer.hpp"

namespace metagen {

using Json = nlohmann::json;

// Shortest round-trip decimal form.
std::string format_double(double v);

// One CSV field; quotes when needed.
std::string csv_field(std::string_view s);

Json program_to_json(const Program& program);
// Throws std::invalid_argument on malformed input.
Program program_from_json(const Json& j);

Json vocabulary_json();
// name -> value in the fixed factor order
nlohmann::ordered_json factors_json(const FactorVector& f);

struct Checkpoint {
  TransformerHyper hyper;
  GrammarOptions grammar;
  std::vector<double> params;
  Json config;  // echo of the training configuration
};

Json checkpoint_to_json(const Policy& policy, const Json& config_echo);
void save_checkpoint(const std::filesystem::path& path, const Policy& policy, const Json& config_echo);
// Throws std::runtime_error for missing files, shape or version mismatches.
Policy load_checkpoint(const std::filesystem::path& path, Json* config_echo = nullptr);
Policy policy_from_json(const Json& j, Json* config_echo = nullptr);

Json train_config_json(const TrainConfig& c);

// key = value lines; '#' starts a comment; repeated keys accumulate.
using KeyValues = std::vector<std::pair<std::string, std::string>>;
KeyValues parse_key_values(std::string_view text);

struct CliConfig {
  TrainConfig train;
  std::vector<std::string> tasks;  // task specs, e.g. "onemax:50"
  std::optional<std::string> out;
  bool trace = false;
};

// Applies known keys onto `base`; throws std::invalid_argument on unknown
// keys or malformed values.
void apply_config(const KeyValues& kv, CliConfig& base);
CliConfig load_config(const std::filesystem::path& path, CliConfig base = {});

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

std::string train_log_csv(const std::vector<EpochLog>& rows);

}  // namespace metagen
