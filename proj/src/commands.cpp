#include "actgen/commands.hpp"

#include <csignal>
#include <fstream>
#include <iostream>
#include <optional>

#include <httplib.h>
#include <json.hpp>

#include "actgen/agent.hpp"
#include "actgen/benchmark.hpp"
#include "actgen/errors.hpp"
#include "actgen/eval.hpp"
#include "actgen/metrics.hpp"
#include "actgen/ppo.hpp"
#include "actgen/reward.hpp"
#include "actgen/service.hpp"
#include "actgen/sft.hpp"
#include "actgen/synthetic.hpp"
#include "actgen/vocab.hpp"

namespace actgen {

using ojson = nlohmann::ordered_json;

int run_command(const std::function<int()>& body, std::ostream& err) {
  auto report = [&err](const char* kind, const std::exception& e) {
    err << ojson{{"error", kind}, {"message", e.what()}}.dump() << '\n';
  };
  try {
    return body();
  } catch (const ConfigError& e) {
    report("config", e);
    return kExitConfig;
  } catch (const DataError& e) {
    report("data", e);
    return kExitData;
  } catch (const DivergenceError& e) {
    report("divergence", e);
    return kExitDivergence;
  } catch (const std::exception& e) {
    report("internal", e);
    return kExitUsage;
  }
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

void prepare_run_dir(const RunConfig& config) {
  std::filesystem::create_directories(config.run_dir);
  write_text(config.run_dir / "config.txt", serialize_config(config));
}

ojson epoch_json(const EpochStats& s) {
  return {{"epoch", s.epoch},       {"loss", s.loss},         {"lm_nll", s.lm_nll},
          {"perplexity", s.perplexity}, {"act_loss", s.act_loss}, {"act_accuracy", s.act_accuracy}};
}

void write_curve(const std::filesystem::path& path, const SFTResult& r) {
  auto out = open_output(path);
  for (const auto& s : r.curve) out << epoch_json(s).dump() << '\n';
}

struct CorpusSplits {
  Corpus train, validation, test;
};

CorpusSplits load_splits(const RunConfig& config) {
  if (config.corpus.empty()) throw ConfigError("corpus: required when task = corpus");
  const Corpus c = load_corpus(config.corpus);
  const auto report = validate(c);
  if (!report.ok()) {
    std::string msg = "corpus failed validation:";
    for (const auto& v : report.violations) msg += " " + v.dialogue_id + ": " + v.message + ";";
    throw DataError(msg);
  }
  auto [train, valid, test] = split(c, config.split, config.seed);
  return {std::move(train), std::move(valid), std::move(test)};
}

std::filesystem::path vocab_path_for(const std::filesystem::path& checkpoint, const std::filesystem::path& vocab) {
  return vocab.empty() ? checkpoint.parent_path() / "vocab.txt" : vocab;
}

MultiHeadModel load_model_for(const std::filesystem::path& path, const Vocabulary& vocab, const char* what) {
  if (path.empty()) throw ConfigError(std::string(what) + ": checkpoint path required");
  Checkpoint ck = load_checkpoint(path);
  if (ck.vocab_hash != vocab.hash()) throw DataError(std::string(what) + " checkpoint was trained with another vocabulary");
  return std::move(ck.model);
}

}  // namespace

LoadedPolicy load_policy(const std::filesystem::path& checkpoint, const std::filesystem::path& vocab) {
  if (checkpoint.empty()) throw ConfigError("checkpoint: path required");
  Vocabulary v = Vocabulary::load(vocab_path_for(checkpoint, vocab));
  MultiHeadModel m = load_model_for(checkpoint, v, "policy");
  return {std::move(m), std::move(v)};
}

int cmd_train_sft(const RunConfig& config, std::ostream& out) {
  if (config.task == "benchmark") {
    prepare_run_dir(config);
    auto b = prepare_benchmark(default_benchmark_options());
    const Vocabulary& vocab = b->space->vocab();
    vocab.save(config.run_dir / "vocab.txt");
    save_checkpoint(config.run_dir / "policy.ckpt", b->policy, vocab.hash());
    save_checkpoint(config.run_dir / "classifier.ckpt", b->classifier, vocab.hash());
    write_curve(config.run_dir / "sft_curve.jsonl", b->policy_sft);
    write_curve(config.run_dir / "classifier_curve.jsonl", b->classifier_sft);
    out << ojson{{"task", "benchmark"}, {"policy_perplexity", b->policy_sft.curve.back().perplexity},
                 {"classifier_accuracy", b->classifier_sft.curve.back().act_accuracy}}
               .dump()
        << '\n';
    return kExitOk;
  }

  const auto splits = load_splits(config);
  prepare_run_dir(config);
  const Vocabulary vocab = build_vocab(splits.train, config.vocab_max_size, config.vocab_min_freq);
  const TokenSpace space(vocab);
  ModelConfig mc = config.model;
  mc.vocab_size = space.model_vocab_size();
  mc.validate();

  std::vector<SequenceExample> policy_data, classifier_data;
  for (const auto& e : turn_examples(splits.train, config.context_k)) {
    policy_data.push_back(policy_sequence(space, e, config.limits));
    classifier_data.push_back(classifier_sequence(space, e, config.limits));
  }
  if (policy_data.empty()) throw DataError("training split has no usable turns");

  vocab.save(config.run_dir / "vocab.txt");
  MultiHeadModel policy(mc);
  SFTConfig ps = config.sft;
  ps.seed = config.seed;
  const SFTResult pr = supervised_train(policy, policy_data, ps, &space.response_mask(),
                                        [&out](const EpochStats& s) { out << epoch_json(s).dump() << '\n'; });
  save_checkpoint(config.run_dir / "policy.ckpt", policy, vocab.hash());
  write_curve(config.run_dir / "sft_curve.jsonl", pr);

  ModelConfig cc = mc;
  cc.init_seed = mix_seed(mc.init_seed, 1);
  MultiHeadModel classifier(cc);
  SFTConfig cs = config.classifier_sft;
  cs.seed = mix_seed(config.seed, 1);
  const SFTResult cr = supervised_train(classifier, classifier_data, cs, nullptr);
  save_checkpoint(config.run_dir / "classifier.ckpt", classifier, vocab.hash());
  write_curve(config.run_dir / "classifier_curve.jsonl", cr);
  return kExitOk;
}

int cmd_train_ppo(const RunConfig& config, std::ostream& out) {
  std::unique_ptr<BenchmarkSetup> bench;
  std::unique_ptr<LoadedPolicy> loaded;
  std::unique_ptr<TokenSpace> space;
  std::optional<TrainSetup> setup;
  MultiHeadModel* policy = nullptr;

  if (config.task == "benchmark") {
    bench = prepare_benchmark(default_benchmark_options());
    setup = bench->train_setup();
    policy = &bench->policy;
  } else {
    loaded = std::make_unique<LoadedPolicy>(load_policy(config.policy_checkpoint, config.vocab));
    space = std::make_unique<TokenSpace>(loaded->vocab);
    MultiHeadModel classifier = load_model_for(config.classifier_checkpoint, loaded->vocab, "classifier");
    const auto splits = load_splits(config);
    setup = TrainSetup{freeze_reference(loaded->model), freeze_reference(classifier), space.get(),
                       turn_examples(splits.train, config.context_k)};
    policy = &loaded->model;
  }
  if (policy->config().max_seq_len < config.ppo.decoding.max_new_tokens + 6) {
    throw ConfigError("ppo.max_new_tokens: leaves no room for a prompt within the checkpoint's max_seq_len");
  }
  prepare_run_dir(config);
  const Vocabulary& vocab = setup->space->vocab();
  vocab.save(config.run_dir / "vocab.txt");
  if (bench) save_checkpoint(config.run_dir / "classifier.ckpt", bench->classifier, vocab.hash());

  PPOConfig pc = config.ppo;
  pc.seed = config.seed;
  const TrainLog log = train(*policy, *setup, pc, {config.run_dir, vocab.hash()});
  ojson summary{{"steps", log.steps.size()}};
  if (!log.steps.empty()) {
    summary["final_mean_reward"] = log.steps.back().mean_reward;
    summary["final_mean_kl"] = log.steps.back().mean_kl;
    summary["final_beta"] = log.steps.back().beta;
  }
  out << summary.dump() << '\n';
  return kExitOk;
}

int cmd_eval(const RunConfig& config, std::ostream& out) {
  const LoadedPolicy lp = load_policy(config.policy_checkpoint, config.vocab);
  const MultiHeadModel classifier = load_model_for(config.classifier_checkpoint, lp.vocab, "classifier");
  prepare_run_dir(config);
  const TokenSpace space(lp.vocab);

  std::vector<TurnExample> examples;
  if (config.task == "benchmark") {
    const auto b = synth::benchmark_corpora(default_benchmark_options().spec);
    if (!(Vocabulary(b.words) == lp.vocab)) throw DataError("checkpoint vocabulary does not match the benchmark");
    examples = turn_examples(b.target, default_benchmark_options().k);
  } else {
    const auto splits = load_splits(config);
    examples = turn_examples(splits.test.dialogues.empty() ? splits.train : splits.test, config.context_k);
  }

  const ReferenceModel frozen = freeze_reference(lp.model);
  const auto embedder = token_embedder(frozen, lp.vocab);
  const MetricsReport rep =
      evaluate_generation(model_responder(lp.model, space, config.eval_decoding),
                          examples, embedder, config.policy_checkpoint.stem().string());
  const RACComparison rac = evaluate_rac(lp.model, classifier, space, examples);

  {
    auto f = open_output(config.run_dir / "metrics.tsv");
    write_metrics_table(f, std::span<const MetricsReport>(&rep, 1));
  }
  {
    auto f = open_output(config.run_dir / "records.jsonl");
    write_records_jsonl(f, rep);
  }
  {
    auto f = open_output(config.run_dir / "rac.tsv");
    write_rac_table(f, rac);
  }
  {
    auto f = open_output(config.run_dir / "rac.jsonl");
    for (const auto* r : {&rac.classifier_vs_gold, &rac.rac_vs_gold, &rac.rac_vs_classifier}) f << to_json(*r).dump() << '\n';
  }
  write_metrics_table(out, std::span<const MetricsReport>(&rep, 1));
  write_rac_table(out, rac);
  return kExitOk;
}

int cmd_score(const std::filesystem::path& candidates, const std::filesystem::path& references, std::ostream& out) {
  auto read_lines = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw DataError("cannot read " + p.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
  };
  const auto cand = read_lines(candidates);
  const auto ref = read_lines(references);
  if (cand.size() != ref.size()) {
    throw DataError("candidate and reference files differ in line count (" + std::to_string(cand.size()) + " vs " +
                    std::to_string(ref.size()) + ")");
  }
  std::vector<GenerationRecord> records;
  for (std::size_t i = 0; i < cand.size(); ++i) {
    const auto c = tokenize(cand[i]);
    const auto r = tokenize(ref[i]);
    GenerationRecord rec;
    rec.turn_index = static_cast<int>(i);
    rec.scores.rouge1 = metrics::rouge_n(c, r, 1);
    rec.scores.rouge2 = metrics::rouge_n(c, r, 2);
    rec.scores.rougeL = metrics::rouge_l(c, r);
    rec.scores.meteor = metrics::meteor(c, r);
    records.push_back(rec);
  }
  ojson j = to_json(aggregate_scores(records));
  j.erase("bs");
  j["n"] = records.size();
  out << j.dump() << '\n';
  return kExitOk;
}

int cmd_generate(const GenerateRequest& request, std::ostream& out) {
  const LoadedPolicy lp = load_policy(request.checkpoint, request.vocab);
  const TokenSpace space(lp.vocab);
  const Corpus c = load_corpus(request.context);
  if (c.dialogues.empty() || c.dialogues.back().turns.empty()) throw DataError("context file holds no turns");
  const Dialogue& d = c.dialogues.back();
  const Context ctx = recent_context(d, request.k);
  const Speaker next = other(d.turns.back().speaker);
  Rng rng(request.decoding.seed);
  const AgentReply r = respond(lp.model, space, ctx, next, request.decoding, rng);
  out << ojson{{"speaker", std::string(speaker_name(next))}, {"act", std::string(act_code(r.act))}, {"text", r.text}}.dump()
      << '\n';
  return kExitOk;
}

int cmd_stats(const std::filesystem::path& corpus, std::ostream& out) {
  const Corpus c = load_corpus(corpus);
  const CorpusStats s = corpus_stats(c);
  const ValidationReport v = validate(c);
  ojson j;
  j["dialogues"] = s.dialogues;
  j["utterances"] = s.utterances;
  j["therapist_utterances"] = s.therapist_utterances;
  j["client_utterances"] = s.client_utterances;
  ojson acts = ojson::object();
  for (std::size_t a = 0; a < kNumActs; ++a) acts[std::string(kActCodes[a])] = s.act_counts[a];
  j["act_counts"] = acts;
  j["transitions"] = s.transitions;
  j["transition_total"] = s.transition_total;
  ojson violations = ojson::array();
  for (const auto& x : v.violations) {
    violations.push_back({{"dialogue_id", x.dialogue_id}, {"turn_index", x.turn_index}, {"message", x.message}});
  }
  j["violations"] = violations;
  out << j.dump() << '\n';
  return kExitOk;
}

namespace {

httplib::Server* g_server = nullptr;

void stop_server(int) {
  if (g_server != nullptr) g_server->stop();
}

}  // namespace

int cmd_serve(const ServeRequest& request, std::ostream& out) {
  LoadedPolicy lp = load_policy(request.checkpoint, request.vocab);
  auto model = std::make_shared<ServiceModel>(
      ServiceModel{std::move(lp.model), TokenSpace(lp.vocab), request.checkpoint.filename().string()});
  SessionManager sessions(model, request.store_dir);
  httplib::Server server;
  register_routes(server, sessions);
  if (!server.bind_to_port(request.host, request.port)) {
    throw ConfigError("cannot bind " + request.host + ":" + std::to_string(request.port));
  }
  g_server = &server;
  std::signal(SIGINT, stop_server);
  std::signal(SIGTERM, stop_server);
  out << ojson{{"listening", request.host + ":" + std::to_string(request.port)}}.dump() << std::endl;
  server.listen_after_bind();
  g_server = nullptr;
  return kExitOk;
}

int cmd_synth(const SynthRequest& request, std::ostream& out) {
  if (request.out_path.empty()) throw ConfigError("out: path required");
  if (request.out_path.has_parent_path()) std::filesystem::create_directories(request.out_path.parent_path());
  Corpus c;
  if (request.kind == "hope") {
    c = synth::hope_shape_fixture(request.seed);
  } else if (request.kind == "markov") {
    synth::MarkovSpec spec;
    spec.transitions = synth::random_transition_matrix(request.seed);
    spec.seed = mix_seed(request.seed, 1);
    c = synth::markov_corpus(spec).corpus;
  } else if (request.kind == "cycle") {
    c = synth::deterministic_act_corpus(100, 10, 8, request.seed);
  } else if (request.kind == "benchmark") {
    synth::BenchmarkSpec spec = default_benchmark_options().spec;
    spec.seed = request.seed;
    const auto b = synth::benchmark_corpora(spec);
    auto prior_path = request.out_path;
    prior_path.replace_extension(".prior" + request.out_path.extension().string());
    save_corpus(prior_path, b.prior);
    c = b.target;
  } else {
    throw ConfigError("kind: expected hope, markov, cycle or benchmark");
  }
  save_corpus(request.out_path, c);
  out << ojson{{"kind", request.kind}, {"dialogues", c.dialogues.size()}, {"utterances", c.utterance_count()},
               {"path", request.out_path.string()}}
             .dump()
      << '\n';
  return kExitOk;
}

}  // namespace actgen
