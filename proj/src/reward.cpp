#include "actgen/reward.hpp"

#include <cmath>
#include <stdexcept>

#include "actgen/sft.hpp"

namespace actgen {

std::vector<std::string> RewardWeights::violations() const {
  std::vector<std::string> v;
  const double ls[4] = {lambda1, lambda2, lambda3, lambda4};
  for (int i = 0; i < 4; ++i) {
    if (!std::isfinite(ls[i]) || ls[i] < 0.0) {
      v.push_back("lambda" + std::to_string(i + 1) + " must be finite and non-negative");
    }
  }
  return v;
}

double compose_reward(const RewardComponents& c, const RewardWeights& w) {
  if (!std::isfinite(c.R) || !std::isfinite(c.BS) || !std::isfinite(c.rho) || !std::isfinite(c.RE)) {
    throw std::invalid_argument("compose_reward: non-finite component");
  }
  return w.lambda1 * c.R + w.lambda2 * c.BS + w.lambda3 * c.rho - w.lambda4 * c.RE;
}

std::vector<double> per_token_rewards(double sequence_reward, const std::vector<double>& logp_policy,
                                      const std::vector<double>& logp_ref, double beta) {
  if (logp_policy.size() != logp_ref.size()) throw std::invalid_argument("per_token_rewards: length mismatch");
  if (logp_policy.empty()) throw std::invalid_argument("per_token_rewards: empty response");
  std::vector<double> r(logp_policy.size());
  for (std::size_t t = 0; t < r.size(); ++t) r[t] = -beta * (logp_policy[t] - logp_ref[t]);
  r.back() += sequence_reward;
  return r;
}

double batch_relative_entropy(const std::vector<std::vector<double>>& logp_policy,
                              const std::vector<std::vector<double>>& logp_ref) {
  if (logp_policy.size() != logp_ref.size()) throw std::invalid_argument("batch_relative_entropy: size mismatch");
  std::vector<double> pol, ref;
  for (std::size_t i = 0; i < logp_policy.size(); ++i) {
    if (logp_policy[i].size() != logp_ref[i].size()) {
      throw std::invalid_argument("batch_relative_entropy: per-token length mismatch");
    }
    double a = 0.0, b = 0.0;
    for (std::size_t t = 0; t < logp_policy[i].size(); ++t) {
      a += logp_policy[i][t];
      b += logp_ref[i][t];
    }
    pol.push_back(a);
    ref.push_back(b);
  }
  return metrics::relative_entropy(pol, ref);
}

metrics::Embedder token_embedder(const ReferenceModel& model, const Vocabulary& vocab) {
  const ag::Matrix* table = nullptr;
  for (const auto& p : model->parameters()) {
    if (p.name == "tok_emb") table = &p.value;
  }
  if (table == nullptr) throw std::logic_error("model has no token embedding table");
  // Capture the reference by value: the shared model outlives the embedder.
  return [model, table, &vocab](const std::string& token) -> Eigen::VectorXd {
    return table->row(vocab.id(token)).transpose();
  };
}

double reference_act_score(const ReferenceModel& classifier, const TokenSpace& space, const Context& context,
                           Speaker speaker, const std::vector<int>& response, DialogueAct predicted_act,
                           std::size_t max_seq_len) {
  std::size_t words = 0;
  while (words < response.size() && response[words] != Vocabulary::kEos) ++words;
  const std::size_t budget = max_seq_len > words + 4 ? max_seq_len - words - 4 : 1;
  const auto tokens = space.encode_classifier_input(space.fit_context(context, budget), speaker, response);
  const auto pred = predict_act(classifier.model(), tokens, tokens.size());
  return pred.probs(act_index(predicted_act));
}

RewardBreakdown score_generation(const GenerationSample& s, double batch_re, const RewardScorer& scorer,
                                 const RewardWeights& weights, double beta) {
  RewardBreakdown b;
  const auto cand = scorer.space->response_words(s.response);
  const auto gold = tokenize(s.gold_response);
  b.components.R = scorer.rouge(cand, gold);
  b.components.BS =
      metrics::embed_similarity(cand, gold, token_embedder(*scorer.reference, scorer.space->vocab())).f1;
  b.components.rho = reference_act_score(*scorer.classifier, *scorer.space, s.context, s.speaker, s.response,
                                         s.predicted_act,
                                         static_cast<std::size_t>((*scorer.classifier)->config().max_seq_len));
  b.re_raw = batch_re;
  b.components.RE = batch_re / scorer.re_scale;
  b.total = compose_reward(b.components, weights);
  b.beta = beta;
  if (s.logp_policy.size() != s.logp_ref.size()) throw std::invalid_argument("score_generation: log-prob mismatch");
  for (std::size_t t = 0; t < s.logp_policy.size(); ++t) b.per_token_kl.push_back(s.logp_policy[t] - s.logp_ref[t]);
  return b;
}

nlohmann::ordered_json to_json(const RewardBreakdown& b) {
  nlohmann::ordered_json j;
  j["R"] = b.components.R;
  j["BS"] = b.components.BS;
  j["rho"] = b.components.rho;
  j["RE"] = b.components.RE;
  j["RE_raw"] = b.re_raw;
  j["total"] = b.total;
  j["beta"] = b.beta;
  double kl = 0.0;
  for (double v : b.per_token_kl) kl += v;
  j["kl"] = kl;
  return j;
}

}  // namespace actgen
