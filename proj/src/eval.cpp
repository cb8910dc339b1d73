#include "actgen/eval.hpp"

#include <cstdio>
#include <ostream>

#include "actgen/agent.hpp"
#include "actgen/corpus.hpp"
#include "actgen/sft.hpp"

namespace actgen {

Responder model_responder(const MultiHeadModel& policy, const TokenSpace& space, const DecodingConfig& decoding) {
  return [&policy, &space, decoding](const TurnExample& ex) {
    Rng rng(decoding.seed);
    const AgentReply r = respond(policy, space, ex.context, ex.speaker, decoding, rng);
    return Response{space.response_words(r.tokens), r.act};
  };
}

namespace {

void accumulate(GenerationScores& acc, const GenerationScores& s, double w) {
  auto add = [w](metrics::PRF& a, const metrics::PRF& b) {
    a.precision += w * b.precision;
    a.recall += w * b.recall;
    a.f1 += w * b.f1;
  };
  add(acc.rouge1, s.rouge1);
  add(acc.rouge2, s.rouge2);
  add(acc.rougeL, s.rougeL);
  acc.bs += w * s.bs;
  acc.meteor += w * s.meteor;
}

}  // namespace

GenerationScores aggregate_scores(const std::vector<GenerationRecord>& records) {
  GenerationScores acc;
  if (records.empty()) return acc;
  const double w = 1.0 / static_cast<double>(records.size());
  for (const auto& r : records) accumulate(acc, r.scores, w);
  return acc;
}

MetricsReport evaluate_generation(const Responder& responder, std::span<const TurnExample> examples,
                                  const metrics::Embedder& embedder, const std::string& system) {
  MetricsReport rep;
  rep.system = system;
  std::vector<metrics::Tokens> outputs;
  for (const auto& ex : examples) {
    const auto gold = tokenize(ex.response);
    if (gold.empty()) {
      ++rep.skipped;
      continue;
    }
    const Response out = responder(ex);
    GenerationRecord rec;
    rec.dialogue_id = ex.dialogue_id;
    rec.turn_index = ex.turn_index;
    rec.gold = ex.response;
    for (const auto& w : out.words) rec.candidate += (rec.candidate.empty() ? "" : " ") + w;
    rec.gold_act = ex.act;
    rec.predicted_act = out.act;
    rec.scores.rouge1 = metrics::rouge_n(out.words, gold, 1);
    rec.scores.rouge2 = metrics::rouge_n(out.words, gold, 2);
    rec.scores.rougeL = metrics::rouge_l(out.words, gold);
    rec.scores.bs = metrics::embed_similarity(out.words, gold, embedder).f1;
    rec.scores.meteor = metrics::meteor(out.words, gold);
    rep.records.push_back(std::move(rec));
    outputs.push_back(out.words);
  }
  rep.aggregate = aggregate_scores(rep.records);
  rep.distinct2 = metrics::distinct_n(outputs, 2);
  return rep;
}

RACReport rac_report(const std::string& name, std::span<const DialogueAct> truth,
                     std::span<const DialogueAct> predicted) {
  if (truth.size() != predicted.size()) throw std::invalid_argument("rac_report: length mismatch");
  RACReport r;
  r.name = name;
  r.total = static_cast<int>(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++r.confusion[static_cast<std::size_t>(act_index(truth[i]))][static_cast<std::size_t>(act_index(predicted[i]))];
  }
  if (r.total == 0) return r;
  int correct = 0;
  for (std::size_t c = 0; c < kNumActs; ++c) {
    int support = 0, predicted_c = 0;
    for (std::size_t j = 0; j < kNumActs; ++j) {
      support += r.confusion[c][j];
      predicted_c += r.confusion[j][c];
    }
    const int tp = r.confusion[c][c];
    correct += tp;
    if (support == 0) continue;
    const double p = predicted_c > 0 ? static_cast<double>(tp) / predicted_c : 0.0;
    const double rec = static_cast<double>(tp) / support;
    const double f = p + rec > 0.0 ? 2.0 * p * rec / (p + rec) : 0.0;
    const double w = static_cast<double>(support) / r.total;
    r.precision += w * p;
    r.recall += w * rec;
    r.f1 += w * f;
  }
  r.accuracy = static_cast<double>(correct) / r.total;
  return r;
}

RACComparison evaluate_rac(const MultiHeadModel& policy, const MultiHeadModel& classifier, const TokenSpace& space,
                           std::span<const TurnExample> examples) {
  std::vector<DialogueAct> gold, rac, cls;
  const auto max_len = static_cast<std::size_t>(classifier.config().max_seq_len);
  for (const auto& ex : examples) {
    gold.push_back(ex.act);
    rac.push_back(predict_next_act(policy, space, ex.context, ex.speaker,
                                   static_cast<std::size_t>(policy.config().max_seq_len) - 2)
                      .act);
    std::vector<int> response = space.encode_response(ex.response, max_len / 2);
    const std::size_t budget = max_len > response.size() + 3 ? max_len - response.size() - 3 : 1;
    const auto tokens = space.encode_classifier_input(space.fit_context(ex.context, budget), ex.speaker, response);
    cls.push_back(predict_act(classifier, tokens, tokens.size()).act);
  }
  return {rac_report("classifier vs gold", gold, cls), rac_report("RAC-Head vs gold", gold, rac),
          rac_report("RAC-Head vs classifier", cls, rac)};
}

std::string ablation_label(const RewardWeights& w) {
  std::vector<std::string> off;
  if (w.lambda3 == 0.0) off.push_back("RAC");
  if (w.lambda1 == 0.0) off.push_back("R");
  if (w.lambda2 == 0.0) off.push_back("BS");
  if (off.empty()) return "Full";
  std::string s = "- Rew(";
  for (std::size_t i = 0; i < off.size(); ++i) s += (i ? " + " : "") + off[i];
  return s + ")";
}

std::vector<AblationVariant> standard_ablations(const RewardWeights& full) {
  auto without = [&](bool r, bool bs, bool rac) {
    RewardWeights w = full;
    if (r) w.lambda1 = 0.0;
    if (bs) w.lambda2 = 0.0;
    if (rac) w.lambda3 = 0.0;
    return AblationVariant{ablation_label(w), w};
  };
  return {without(false, false, false), without(true, false, false), without(false, false, true),
          without(true, false, true),   without(true, true, false),  without(false, true, true)};
}

std::vector<AblationResult> ablate(const MultiHeadModel& initial, const TrainSetup& setup, const PPOConfig& config,
                                   std::span<const AblationVariant> variants,
                                   std::span<const TurnExample> eval_examples, const metrics::Embedder& embedder) {
  std::vector<AblationResult> out;
  DecodingConfig greedy = config.decoding;
  greedy.temperature = 0.0;
  for (const auto& v : variants) {
    MultiHeadModel policy = initial;
    PPOConfig c = config;
    c.weights = v.weights;
    AblationResult r;
    r.variant = v;
    r.log = train(policy, setup, c);
    r.report = evaluate_generation(model_responder(policy, *setup.space, greedy), eval_examples, embedder, v.label);
    out.push_back(std::move(r));
  }
  return out;
}

// ---- report output ------------------------------------------------------------------

namespace {

std::string fmt(const char* f, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

nlohmann::ordered_json prf_json(const metrics::PRF& p) {
  return {{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}};
}

}  // namespace

void write_metrics_table(std::ostream& out, std::span<const MetricsReport> reports) {
  out << "system\tR1-P\tR1-R\tR1-F1\tR2-P\tR2-R\tR2-F1\tRL-P\tRL-R\tRL-F1\tBS\tMETEOR\tdistinct-2\tn\n";
  for (const auto& r : reports) {
    const auto& a = r.aggregate;
    out << r.system;
    for (const auto* p : {&a.rouge1, &a.rouge2, &a.rougeL}) {
      out << '\t' << fmt("%.2f", 100.0 * p->precision) << '\t' << fmt("%.2f", 100.0 * p->recall) << '\t'
          << fmt("%.2f", 100.0 * p->f1);
    }
    out << '\t' << fmt("%.4f", a.bs) << '\t' << fmt("%.4f", a.meteor) << '\t' << fmt("%.4f", r.distinct2) << '\t'
        << r.records.size() << '\n';
  }
}

nlohmann::ordered_json to_json(const GenerationScores& s) {
  return {{"rouge1", prf_json(s.rouge1)}, {"rouge2", prf_json(s.rouge2)}, {"rougeL", prf_json(s.rougeL)},
          {"bs", s.bs},                   {"meteor", s.meteor}};
}

void write_records_jsonl(std::ostream& out, const MetricsReport& report) {
  for (const auto& r : report.records) {
    nlohmann::ordered_json j;
    j["system"] = report.system;
    j["dialogue_id"] = r.dialogue_id;
    j["turn_index"] = r.turn_index;
    j["gold"] = r.gold;
    j["candidate"] = r.candidate;
    j["gold_act"] = std::string(act_code(r.gold_act));
    j["predicted_act"] = std::string(act_code(r.predicted_act));
    j["scores"] = to_json(r.scores);
    out << j.dump() << '\n';
  }
}

nlohmann::ordered_json to_json(const RACReport& r) {
  nlohmann::ordered_json j;
  j["name"] = r.name;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  j["accuracy"] = r.accuracy;
  j["total"] = r.total;
  j["confusion"] = r.confusion;
  return j;
}

void write_rac_table(std::ostream& out, const RACComparison& c) {
  out << "comparison\tprecision\trecall\tf1\taccuracy\tn\n";
  for (const auto* r : {&c.classifier_vs_gold, &c.rac_vs_gold, &c.rac_vs_classifier}) {
    out << r->name << '\t' << fmt("%.4f", r->precision) << '\t' << fmt("%.4f", r->recall) << '\t'
        << fmt("%.4f", r->f1) << '\t' << fmt("%.4f", r->accuracy) << '\t' << r->total << '\n';
  }
}

}  // namespace actgen
