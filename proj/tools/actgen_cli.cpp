#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "actgen/commands.hpp"
#include "actgen/config.hpp"
#include "actgen/errors.hpp"

using namespace actgen;

namespace {

struct ConfigFlags {
  std::string file;
  std::vector<std::string> sets;
  std::map<std::string, std::string> named;

  void attach(CLI::App* cmd) {
    cmd->add_option("-c,--config", file, "key = value config file");
    cmd->add_option("--set", sets, "override, key=value (repeatable)");
    for (const char* key : {"task", "corpus", "run_dir", "policy_checkpoint", "classifier_checkpoint", "vocab", "seed"}) {
      std::string flag = std::string("--") + key;
      for (auto& ch : flag) ch = ch == '_' ? '-' : ch;
      cmd->add_option_function<std::string>(flag, [this, key](const std::string& v) { named[key] = v; },
                                            std::string("sets ") + key);
    }
  }

  RunConfig load() const {
    std::map<std::string, std::string> overrides;
    std::vector<std::string> bad;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) {
        bad.push_back("--set " + s + ": expected key=value");
        continue;
      }
      overrides[s.substr(0, eq)] = s.substr(eq + 1);
    }
    for (const auto& [k, v] : named) overrides[k] = v;
    if (!bad.empty()) {
      std::string msg = "invalid configuration: ";
      for (std::size_t i = 0; i < bad.size(); ++i) msg += (i ? "; " : "") + bad[i];
      throw ConfigError(msg);
    }
    return load_run_config(file, process_environment(), overrides);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"actgen: response-act guided dialogue generation"};
  app.require_subcommand(1);

  ConfigFlags sft_flags, ppo_flags, eval_flags;
  auto* sft = app.add_subcommand("train-sft", "fine-tune the policy and the reference act classifier");
  sft_flags.attach(sft);
  auto* ppo = app.add_subcommand("train-ppo", "PPO fine-tuning against the composite reward");
  ppo_flags.attach(ppo);
  auto* eval = app.add_subcommand("eval", "generation metrics and RAC comparison");
  eval_flags.attach(eval);

  std::string cand, ref;
  auto* score = app.add_subcommand("score", "score line-aligned candidates against references");
  score->add_option("candidates", cand)->required();
  score->add_option("references", ref)->required();

  GenerateRequest gen;
  std::string gen_ckpt, gen_vocab, gen_ctx;
  auto* generate = app.add_subcommand("generate", "generate the next turn of a dialogue");
  generate->add_option("--checkpoint", gen_ckpt)->required();
  generate->add_option("--vocab", gen_vocab);
  generate->add_option("--context", gen_ctx, "corpus-format file; the last dialogue is used")->required();
  generate->add_option("--temperature", gen.decoding.temperature, "<= 0 for greedy");
  generate->add_option("--top-k", gen.decoding.top_k);
  generate->add_option("--top-p", gen.decoding.top_p);
  generate->add_option("--max-new-tokens", gen.decoding.max_new_tokens);
  generate->add_option("--seed", gen.decoding.seed);
  generate->add_option("--min-new-tokens", gen.decoding.min_new_tokens);
  generate->add_option("-k,--context-turns", gen.k);

  std::string stats_path;
  auto* stats = app.add_subcommand("stats", "corpus statistics and validation");
  stats->add_option("corpus", stats_path)->required();

  ServeRequest serve_req;
  std::string serve_ckpt, serve_vocab, serve_store = "sessions";
  auto* serve = app.add_subcommand("serve", "run the dialogue session service");
  serve->add_option("--checkpoint", serve_ckpt)->required();
  serve->add_option("--vocab", serve_vocab);
  serve->add_option("--store", serve_store, "session transcript directory");
  serve->add_option("--host", serve_req.host);
  serve->add_option("--port", serve_req.port);

  SynthRequest synth_req;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "write a generated corpus");
  synth->add_option("kind", synth_req.kind, "hope | markov | cycle | benchmark")->required();
  synth->add_option("--out", synth_out)->required();
  synth->add_option("--seed", synth_req.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  return run_command(
      [&]() -> int {
        if (*sft) return cmd_train_sft(sft_flags.load(), std::cout);
        if (*ppo) return cmd_train_ppo(ppo_flags.load(), std::cout);
        if (*eval) return cmd_eval(eval_flags.load(), std::cout);
        if (*score) return cmd_score(cand, ref, std::cout);
        if (*generate) {
          gen.checkpoint = gen_ckpt;
          gen.vocab = gen_vocab;
          gen.context = gen_ctx;
          return cmd_generate(gen, std::cout);
        }
        if (*stats) return cmd_stats(stats_path, std::cout);
        if (*serve) {
          serve_req.checkpoint = serve_ckpt;
          serve_req.vocab = serve_vocab;
          serve_req.store_dir = serve_store;
          return cmd_serve(serve_req, std::cout);
        }
        synth_req.out_path = synth_out;
        return cmd_synth(synth_req, std::cout);
      },
      std::cerr);
}
