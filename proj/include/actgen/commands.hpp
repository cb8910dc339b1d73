#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>

#include "actgen/config.hpp"
#include "actgen/corpus.hpp"
#include "actgen/model.hpp"

// Command implementations behind the actgen CLI. Each returns a process exit status;
// failures are reported by run_command.
namespace actgen {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitDivergence = 4;

/// Runs `body`, mapping ConfigError, DataError and DivergenceError to their exit codes and
/// writing one JSON error line ({"error": kind, "message": ...}) to `err`.
int run_command(const std::function<int()>& body, std::ostream& err);

/// Fine-tunes the policy (LM-Head and RAC-Head) and the reference act classifier.
/// Writes config.txt, vocab.txt, policy.ckpt, classifier.ckpt and the two SFT curves.
int cmd_train_sft(const RunConfig& config, std::ostream& out);

/// PPO from the configured checkpoints, or from a freshly prepared benchmark when
/// task = benchmark. Writes config.txt, vocab.txt, trainlog.jsonl, reward_log.jsonl and
/// step-<N>.ckpt into run_dir.
int cmd_train_ppo(const RunConfig& config, std::ostream& out);

/// Generation metrics, RAC comparison and per-example records on the test split.
int cmd_eval(const RunConfig& config, std::ostream& out);

/// Line-aligned candidate and reference files; prints a JSON report of ROUGE and METEOR.
int cmd_score(const std::filesystem::path& candidates, const std::filesystem::path& references, std::ostream& out);

struct GenerateRequest {
  std::filesystem::path checkpoint;
  std::filesystem::path vocab;    // defaults to vocab.txt beside the checkpoint
  std::filesystem::path context;  // corpus-format file; its last dialogue is the context
  DecodingConfig decoding{0.0, 0, 1.0, 24, 7, 1};
  std::size_t k = 4;
};

/// Prints {speaker, act, text} for the next turn of the context's last dialogue.
int cmd_generate(const GenerateRequest& request, std::ostream& out);

/// Prints corpus statistics and validation results as JSON.
int cmd_stats(const std::filesystem::path& corpus, std::ostream& out);

struct ServeRequest {
  std::filesystem::path checkpoint;
  std::filesystem::path vocab;
  std::filesystem::path store_dir = "sessions";
  std::string host = "127.0.0.1";
  int port = 8080;
};

/// Blocks serving HTTP until the process is signalled.
int cmd_serve(const ServeRequest& request, std::ostream& out);

struct SynthRequest {
  std::string kind = "hope";  // hope | markov | cycle | benchmark
  std::filesystem::path out_path;
  std::uint64_t seed = 1;
};

/// Writes a generated corpus (two files, target and prior, for the benchmark).
int cmd_synth(const SynthRequest& request, std::ostream& out);

/// Policy checkpoint plus the vocabulary it was trained with; the hashes must agree.
struct LoadedPolicy {
  MultiHeadModel model;
  Vocabulary vocab;
};
LoadedPolicy load_policy(const std::filesystem::path& checkpoint, const std::filesystem::path& vocab);

}  // namespace actgen
