#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "actgen/commands.hpp"
#include "actgen/errors.hpp"

using namespace actgen;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int count_lines(const fs::path& p) {
  std::ifstream in(p);
  int n = 0;
  for (std::string l; std::getline(in, l);) ++n;
  return n;
}

}  // namespace

TEST_CASE("errors map to exit codes and one JSON line") {
  std::ostringstream err;
  CHECK(run_command([]() -> int { throw ConfigError("bad key"); }, err) == kExitConfig);
  const auto j = nlohmann::json::parse(err.str());
  CHECK(j["error"] == "config");
  CHECK(j["message"] == "bad key");
  const std::string line = err.str();
  CHECK(std::count(line.begin(), line.end(), '\n') == 1);

  std::ostringstream e2, e3, e4;
  CHECK(run_command([]() -> int { throw DataError("x"); }, e2) == kExitData);
  CHECK(run_command([]() -> int { throw DivergenceError("x"); }, e3) == kExitDivergence);
  CHECK(run_command([]() -> int { throw std::runtime_error("x"); }, e4) == kExitUsage);
  std::ostringstream quiet;
  CHECK(run_command([] { return kExitOk; }, quiet) == kExitOk);
  CHECK(quiet.str().empty());
}

TEST_CASE("score of identical files is one") {
  const auto dir = temp_dir("actgen_cmd_score");
  std::ofstream(dir / "a.txt") << "i hear you\nthat sounds hard for you\n";
  std::ostringstream out;
  CHECK(cmd_score(dir / "a.txt", dir / "a.txt", out) == kExitOk);
  const auto j = nlohmann::json::parse(out.str());
  CHECK(j["n"] == 2);
  CHECK(j["rouge1"]["f1"].get<double>() == doctest::Approx(1.0));
  CHECK(j["rougeL"]["f1"].get<double>() == doctest::Approx(1.0));

  std::ofstream(dir / "b.txt") << "one line\n";
  CHECK_THROWS_AS(cmd_score(dir / "a.txt", dir / "b.txt", out), DataError);
}

TEST_CASE("stats of a two-turn corpus") {
  const auto dir = temp_dir("actgen_cmd_stats");
  std::ofstream(dir / "c.jsonl")
      << R"({"dialogue_id":"d","turn_index":0,"speaker":"therapist","text":"how are you","act":"GT"})" "\n"
      << R"({"dialogue_id":"d","turn_index":1,"speaker":"client","text":"fine","act":"ID"})" "\n";
  std::ostringstream out;
  CHECK(cmd_stats(dir / "c.jsonl", out) == kExitOk);
  const auto j = nlohmann::json::parse(out.str());
  CHECK(j["dialogues"] == 1);
  CHECK(j["utterances"] == 2);
  CHECK(j["transition_total"] == 1);
  CHECK(j["violations"].empty());
  CHECK_THROWS_AS(cmd_stats(dir / "missing.jsonl", out), DataError);
}

TEST_CASE("train-sft, train-ppo, eval and generate chain on a synthetic corpus") {
  const auto dir = temp_dir("actgen_cmd_chain");
  std::ostringstream out;
  CHECK(cmd_synth({"markov", dir / "corpus.jsonl", 3}, out) == kExitOk);

  std::map<std::string, std::string> o = {
      {"corpus", (dir / "corpus.jsonl").string()},
      {"run_dir", (dir / "sft").string()},
      {"model.d_model", "16"},
      {"model.n_layers", "1"},
      {"model.n_heads", "2"},
      {"model.max_seq_len", "64"},
      {"model.rac_gru_width", "8"},
      {"model.rac_attn_heads", "2"},
      {"limits.max_seq_len", "64"},
      {"limits.max_response_words", "6"},
      {"sft.epochs", "1"},
      {"classifier_sft.epochs", "1"},
      {"context_k", "2"},
  };
  CHECK(cmd_train_sft(load_run_config({}, {}, o), out) == kExitOk);
  for (const char* f : {"config.txt", "vocab.txt", "policy.ckpt", "classifier.ckpt", "sft_curve.jsonl"}) {
    CHECK_MESSAGE(fs::exists(dir / "sft" / f), f);
  }

  o["run_dir"] = (dir / "ppo").string();
  o["policy_checkpoint"] = (dir / "sft" / "policy.ckpt").string();
  o["classifier_checkpoint"] = (dir / "sft" / "classifier.ckpt").string();
  o["ppo.total_steps"] = "5";
  o["ppo.batch_size"] = "4";
  o["ppo.max_new_tokens"] = "4";
  o["eval.max_new_tokens"] = "4";
  CHECK(cmd_train_ppo(load_run_config({}, {}, o), out) == kExitOk);
  CHECK(fs::exists(dir / "ppo" / "config.txt"));
  CHECK(count_lines(dir / "ppo" / "trainlog.jsonl") == 5);
  CHECK(fs::exists(dir / "ppo" / "step-5.ckpt"));
  const auto echoed = load_run_config(dir / "ppo" / "config.txt", {}, {});
  CHECK(echoed.ppo.total_steps == 5);

  o["run_dir"] = (dir / "eval").string();
  o["policy_checkpoint"] = (dir / "ppo" / "step-5.ckpt").string();
  o["vocab"] = (dir / "sft" / "vocab.txt").string();
  CHECK(cmd_eval(load_run_config({}, {}, o), out) == kExitOk);
  for (const char* f : {"metrics.tsv", "records.jsonl", "rac.tsv"}) CHECK_MESSAGE(fs::exists(dir / "eval" / f), f);

  std::ostringstream gen;
  GenerateRequest g;
  g.checkpoint = dir / "sft" / "policy.ckpt";
  g.context = dir / "corpus.jsonl";
  g.decoding.max_new_tokens = 4;
  CHECK(cmd_generate(g, gen) == kExitOk);
  const auto reply = nlohmann::json::parse(gen.str());
  CHECK(reply.contains("act"));
  CHECK(reply.contains("text"));

  // A checkpoint paired with the wrong vocabulary is a data error.
  std::ofstream(dir / "other_vocab.txt") << "<pad>\n<bos>\n<eos>\n<unk>\n<sep_speaker>\n<sep_act>\nhello\n";
  g.vocab = dir / "other_vocab.txt";
  CHECK_THROWS_AS(cmd_generate(g, gen), DataError);
}

TEST_CASE("missing corpus is a data error; bad task a config error") {
  std::ostringstream out;
  CHECK_THROWS_AS(cmd_train_sft(load_run_config({}, {}, {{"corpus", "/nonexistent.jsonl"}}), out), DataError);
  CHECK_THROWS_AS(load_run_config({}, {}, {{"task", "other"}}), ConfigError);
}
