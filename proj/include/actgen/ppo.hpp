#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "actgen/encoding.hpp"
#include "actgen/model.hpp"
#include "actgen/optim.hpp"
#include "actgen/reward.hpp"

namespace actgen {

struct AdaptiveBeta {
  bool enabled = false;
  double target_kl = 6.0;
  double horizon = 10000.0;
};

struct PPOConfig {
  double lr = 2e-6;
  int batch_size = 128;
  int minibatch_size = 0;  // 0: the whole batch is one mini-batch
  int ppo_epochs = 4;
  double clip_eps = 0.2;
  double gamma = 1.0;
  double gae_lambda = 0.95;
  double beta = 0.2;
  AdaptiveBeta adaptive;
  double re_scale = 1000.0;
  RewardWeights weights;
  std::string rouge = "rouge1_f1";
  int total_steps = 100;
  double value_coef = 0.5;
  double act_coef = 0.1;
  double max_grad_norm = 1.0;
  DecodingConfig decoding;
  double divergence_factor = 50.0;  // abort when mean KL exceeds this multiple of target_kl ...
  int divergence_patience = 10;     // ... for this many consecutive steps
  int checkpoint_every = 0;         // 0: final checkpoint only
  std::uint64_t seed = 2024;

  /// Learning-rate preset reported as the most stable in longer runs.
  static constexpr double kStableLr = 2e-7;

  std::vector<std::string> violations() const;
};

struct RolloutItem {
  Context context;
  Speaker speaker = Speaker::Therapist;
  std::string gold_response;
  DialogueAct gold_act = DialogueAct::ID;
  DialogueAct predicted_act = DialogueAct::ID;

  std::vector<int> prompt;
  std::size_t rac_length = 0;
  std::vector<int> response;
  std::vector<double> logp_old;
  std::vector<double> logp_ref;
  std::vector<double> values;

  RewardBreakdown breakdown;
  std::vector<double> rewards;
  std::vector<double> advantages;
  std::vector<double> returns;

  std::vector<int> sequence() const;
};

struct RolloutBatch {
  std::vector<RolloutItem> items;
  double batch_re = 0.0;
};

/// Predicts the response-act with the policy's RAC-Head, samples a response, and records
/// policy, reference and value estimates along it.
RolloutBatch rollout(const MultiHeadModel& policy, const ReferenceModel& reference, const TokenSpace& space,
                     std::span<const TurnExample> examples, const DecodingConfig& decoding, Rng& rng);

/// Fills breakdowns and per-token rewards from the batch relative entropy and `beta`.
void score_batch(RolloutBatch& batch, const RewardScorer& scorer, const RewardWeights& weights, double beta);

/// Generalized advantage estimation with a zero terminal bootstrap.
std::pair<std::vector<double>, std::vector<double>> compute_advantages(const std::vector<double>& rewards,
                                                                       const std::vector<double>& values,
                                                                       double gamma, double gae_lambda);

/// Whitens advantages over every token in the batch.
void normalize_advantages(RolloutBatch& batch);

struct PPOLosses {
  double policy = 0.0;
  double value = 0.0;
  double act = 0.0;
  double total = 0.0;
  double clip_fraction = 0.0;
  double first_policy = 0.0;  // policy loss of the first mini-batch of the first epoch
  int updates = 0;
};

/// Clipped-surrogate policy loss for one item's tokens: -sum(min(r*A, clip(r)*A)).
ag::Var clipped_surrogate(ag::Tape& tape, ag::Var new_logp, const std::vector<double>& old_logp,
                          const std::vector<double>& advantages, double clip_eps);

/// `ppo_epochs` passes of shuffled mini-batches; one optimizer update per mini-batch on
/// policy + value_coef * value + act_coef * act. `mask` is the response mask used at rollout.
PPOLosses ppo_step(MultiHeadModel& policy, Adam& optimizer, const RolloutBatch& batch, const PPOConfig& config,
                   const std::vector<bool>& mask, Rng& rng);

/// Proportional controller for beta: doubles or halves over `horizon` samples at saturated error.
double adaptive_beta_update(double beta, double observed_kl, double target_kl, double horizon, int batch_size);
inline constexpr double kBetaGain = 3.4657359027997265;  // 5 ln 2
inline constexpr double kBetaMin = 1e-6;
inline constexpr double kBetaMax = 1e3;

struct StepRecord {
  int step = 0;
  double mean_reward = 0.0;
  double mean_kl = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double act_loss = 0.0;
  double beta = 0.0;
  double mean_R = 0.0;
  double mean_BS = 0.0;
  double mean_rho = 0.0;
  double RE = 0.0;
  double response_length = 0.0;
  double clip_fraction = 0.0;
};

nlohmann::ordered_json to_json(const StepRecord& r);

struct TrainLog {
  std::vector<StepRecord> steps;
};

struct TrainOutputs {
  std::filesystem::path run_dir;  // empty: nothing written
  std::uint64_t vocab_hash = 0;
};

/// Everything the training loop reads besides the policy.
struct TrainSetup {
  ReferenceModel reference;
  ReferenceModel classifier;
  const TokenSpace* space = nullptr;
  std::vector<TurnExample> examples;
};

using StepCallback = std::function<void(const StepRecord&, const RolloutBatch&)>;

/// rollout -> score -> advantages -> ppo_step -> beta update, total_steps times.
/// Writes trainlog.jsonl, reward_log.jsonl and step-<N>.ckpt files into run_dir when set.
/// Throws DivergenceError (after logging) when KL stays above the guard.
TrainLog train(MultiHeadModel& policy, const TrainSetup& setup, const PPOConfig& config,
               const TrainOutputs& outputs = {}, const StepCallback& on_step = {});

}  // namespace actgen
