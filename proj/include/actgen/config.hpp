#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "actgen/corpus.hpp"
#include "actgen/encoding.hpp"
#include "actgen/model.hpp"
#include "actgen/ppo.hpp"
#include "actgen/sft.hpp"

namespace actgen {

/// Everything a command reads. Serialized as flat `key = value` lines.
struct RunConfig {
  std::string task = "corpus";  // "corpus" or "benchmark"
  std::filesystem::path corpus;
  std::filesystem::path run_dir = "runs/default";
  std::filesystem::path policy_checkpoint;
  std::filesystem::path classifier_checkpoint;
  std::filesystem::path vocab;  // defaults to vocab.txt beside the policy checkpoint
  SplitFractions split{0.7, 0.1, 0.2};
  std::uint64_t seed = 2024;
  std::size_t context_k = 4;
  std::size_t vocab_max_size = 8000;
  std::size_t vocab_min_freq = 1;
  EncodingLimits limits;
  ModelConfig model;
  SFTConfig sft;
  SFTConfig classifier_sft;
  PPOConfig ppo;
  DecodingConfig eval_decoding{0.0, 0, 1.0, 24, 7};

  RunConfig();

  /// Every violated constraint, one message per field.
  std::vector<std::string> violations() const;
};

inline constexpr const char* kEnvPrefix = "ACTGEN_";

/// Environment variable for a key: prefix + upper-case key with '.' as '_'.
std::string env_name(const std::string& key);

/// All recognised keys in serialization order.
const std::vector<std::string>& config_keys();

/// Applies one value; returns an error message (empty on success).
std::string set_config_value(RunConfig& config, const std::string& key, const std::string& value);
std::string get_config_value(const RunConfig& config, const std::string& key);

/// Layers defaults < file < environment < overrides. Collects every unknown key, malformed
/// value and constraint violation before throwing one ConfigError.
RunConfig load_run_config(const std::filesystem::path& file, const std::map<std::string, std::string>& environment,
                          const std::map<std::string, std::string>& overrides);

/// Variables from the process environment that carry the prefix.
std::map<std::string, std::string> process_environment();

std::string serialize_config(const RunConfig& config);

}  // namespace actgen
