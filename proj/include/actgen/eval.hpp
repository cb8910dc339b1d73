#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "actgen/encoding.hpp"
#include "actgen/metrics.hpp"
#include "actgen/model.hpp"
#include "actgen/ppo.hpp"

namespace actgen {

struct Response {
  std::vector<std::string> words;
  DialogueAct act = DialogueAct::ID;
};

/// Produces the next turn for one test example.
using Responder = std::function<Response(const TurnExample&)>;

/// Greedy (or as configured) generation from `policy` with its own predicted act.
Responder model_responder(const MultiHeadModel& policy, const TokenSpace& space, const DecodingConfig& decoding);

struct GenerationScores {
  metrics::PRF rouge1, rouge2, rougeL;
  double bs = 0.0;
  double meteor = 0.0;
};

struct GenerationRecord {
  std::string dialogue_id;
  int turn_index = 0;
  std::string gold;
  std::string candidate;
  DialogueAct gold_act = DialogueAct::ID;
  DialogueAct predicted_act = DialogueAct::ID;
  GenerationScores scores;
};

struct MetricsReport {
  std::string system;
  GenerationScores aggregate;  // arithmetic mean of the per-example scores
  std::vector<GenerationRecord> records;
  int skipped = 0;             // examples whose gold response has no words
  double distinct2 = 0.0;      // over the generated responses
};

/// Scores the responder against every example with a non-empty gold response.
MetricsReport evaluate_generation(const Responder& responder, std::span<const TurnExample> examples,
                                  const metrics::Embedder& embedder, const std::string& system = "model");

/// Recomputes the aggregate from the stored per-example records.
GenerationScores aggregate_scores(const std::vector<GenerationRecord>& records);

struct RACReport {
  std::string name;
  double precision = 0.0;  // support-weighted over the gold classes
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  std::array<std::array<int, kNumActs>, kNumActs> confusion{};  // [truth][prediction]
  int total = 0;
};

/// Report for predictions against labels; labels play the role of the truth.
RACReport rac_report(const std::string& name, std::span<const DialogueAct> truth,
                     std::span<const DialogueAct> predicted);

struct RACComparison {
  RACReport classifier_vs_gold;
  RACReport rac_vs_gold;
  RACReport rac_vs_classifier;
};

/// The reference classifier labels each gold response from its context; the RAC-Head
/// predicts the act from the context alone.
RACComparison evaluate_rac(const MultiHeadModel& policy, const MultiHeadModel& classifier, const TokenSpace& space,
                           std::span<const TurnExample> examples);

struct AblationVariant {
  std::string label;
  RewardWeights weights;
};

/// "Full" when all three terms are on, otherwise "- Rew(...)" naming the zeroed terms.
std::string ablation_label(const RewardWeights& weights);

/// The full reward plus the five ablations of R, RAC and BS pairs.
std::vector<AblationVariant> standard_ablations(const RewardWeights& full);

struct AblationResult {
  AblationVariant variant;
  TrainLog log;
  MetricsReport report;
};

/// Trains a copy of `initial` per variant (same data, seeds and config apart from the
/// weights) and evaluates each with greedy decoding.
std::vector<AblationResult> ablate(const MultiHeadModel& initial, const TrainSetup& setup, const PPOConfig& config,
                                   std::span<const AblationVariant> variants,
                                   std::span<const TurnExample> eval_examples, const metrics::Embedder& embedder);

// ---- report output ------------------------------------------------------------------

/// Table with R1/R2/RL (P R F), BS and METEOR columns; one row per report. Scores in percent
/// except BS and METEOR.
void write_metrics_table(std::ostream& out, std::span<const MetricsReport> reports);
void write_records_jsonl(std::ostream& out, const MetricsReport& report);
void write_rac_table(std::ostream& out, const RACComparison& comparison);

nlohmann::ordered_json to_json(const GenerationScores& s);
nlohmann::ordered_json to_json(const RACReport& r);

}  // namespace actgen
