#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "actgen/encoding.hpp"
#include "actgen/metrics.hpp"
#include "actgen/model.hpp"

namespace actgen {

struct RewardWeights {
  double lambda1 = 0.5;   // R
  double lambda2 = 0.15;  // BS
  double lambda3 = 0.15;  // rho
  double lambda4 = 0.2;   // RE

  std::vector<std::string> violations() const;
  bool operator==(const RewardWeights&) const = default;
};

/// Reward inputs. RE is the relative entropy after division by the RE scale.
struct RewardComponents {
  double R = 0.0;
  double BS = 0.0;
  double rho = 0.0;
  double RE = 0.0;
};

struct RewardBreakdown {
  RewardComponents components;
  double re_raw = 0.0;  // batch relative entropy in nats, before scaling
  double total = 0.0;
  double beta = 0.0;
  std::vector<double> per_token_kl;  // logp_policy - logp_ref per response token
};

/// total = l1*R + l2*BS + l3*rho - l4*RE. Throws std::invalid_argument on non-finite input.
double compose_reward(const RewardComponents& c, const RewardWeights& w);

/// Every token gets -beta*(logp_policy - logp_ref); the last token also gets sequence_reward.
std::vector<double> per_token_rewards(double sequence_reward, const std::vector<double>& logp_policy,
                                      const std::vector<double>& logp_ref, double beta);

/// Mean over samples of the summed per-token log-ratio.
double batch_relative_entropy(const std::vector<std::vector<double>>& logp_policy,
                              const std::vector<std::vector<double>>& logp_ref);

/// Token embeddings of a frozen model, for the BS term. Unknown words map to the UNK row.
metrics::Embedder token_embedder(const ReferenceModel& model, const Vocabulary& vocab);

/// Reference classifier probability that `response` (spoken by `speaker` after `context`)
/// carries `predicted_act`.
double reference_act_score(const ReferenceModel& classifier, const TokenSpace& space, const Context& context,
                           Speaker speaker, const std::vector<int>& response, DialogueAct predicted_act,
                           std::size_t max_seq_len);

/// Frozen models and settings shared by every scoring call.
struct RewardScorer {
  const TokenSpace* space = nullptr;
  const ReferenceModel* reference = nullptr;   // source of BS embeddings
  const ReferenceModel* classifier = nullptr;  // rho
  metrics::RougeSelector rouge;
  double re_scale = 1000.0;
};

struct GenerationSample {
  Context context;
  Speaker speaker = Speaker::Therapist;
  std::string gold_response;
  std::vector<int> response;  // generated ids, EOS included when emitted
  DialogueAct predicted_act = DialogueAct::ID;
  std::vector<double> logp_policy;
  std::vector<double> logp_ref;
};

/// R and BS against the gold response, rho from the reference classifier, RE from the batch
/// estimate, then the weighted sum.
RewardBreakdown score_generation(const GenerationSample& sample, double batch_re, const RewardScorer& scorer,
                                 const RewardWeights& weights, double beta);

nlohmann::ordered_json to_json(const RewardBreakdown& b);

}  // namespace actgen
