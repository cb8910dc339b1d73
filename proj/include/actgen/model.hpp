#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "actgen/acts.hpp"
#include "actgen/autograd.hpp"
#include "actgen/rng.hpp"

namespace actgen {

struct ModelConfig {
  int vocab_size = 0;
  int d_model = 128;
  int n_layers = 4;
  int n_heads = 4;
  int max_seq_len = 256;
  int n_acts = static_cast<int>(kNumActs);
  int rac_gru_width = 64;
  int rac_attn_heads = 4;
  double init_std = 0.02;
  std::uint64_t init_seed = 1234;

  /// Every violated constraint, empty when valid.
  std::vector<std::string> violations() const;
  void validate() const;  // throws ConfigError listing all violations

  bool operator==(const ModelConfig&) const = default;
};

/// Closed-form parameter count for a configuration.
///   embeddings      V*d + L*d
///   per block       12*d*d + 13*d   (qkv, out, 4x MLP, two layer norms)
///   final norm      2*d
///   LM-Head         d*V + V
///   V-Head          d + 1
///   RAC-Head        GRU 3*g*(d+g) + 6*g; query/out g*g+g each; key/value d*g+g each; classifier g*A + A
std::int64_t parameter_count(const ModelConfig& config);

struct ForwardOutput {
  ag::Matrix hidden;     // (n x d)
  ag::Matrix lm_logits;  // (n x V)
  Eigen::VectorXd values;
};

struct ActPrediction {
  Eigen::VectorXd logits;  // n_acts
  Eigen::VectorXd probs;
  DialogueAct act = DialogueAct::ID;  // argmax, lowest index on ties
};

/// Tape-level handles for one forward pass.
struct ForwardVars {
  ag::Var hidden;
  ag::Var lm_logits;
  ag::Var values;  // (n x 1)
};

/// Decoder-only causal transformer with three heads: LM-Head (next token),
/// RAC-Head (response-act classifier over context hidden states) and V-Head
/// (per-position scalar value).
class MultiHeadModel {
 public:
  explicit MultiHeadModel(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  std::vector<ag::Parameter>& parameters() { return params_; }
  const std::vector<ag::Parameter>& parameters() const { return params_; }
  std::vector<ag::Parameter*> parameter_ptrs();
  std::int64_t num_parameters() const;
  ag::Parameter& parameter(const std::string& name);

  void zero_grad();

  // Recording forward; throws on overlong input or out-of-range ids.
  ForwardVars forward(ag::Tape& tape, std::span<const int> tokens);
  /// RAC-Head logits (1 x n_acts) from the given hidden rows.
  ag::Var rac_logits(ag::Tape& tape, ag::Var hidden);

  ForwardOutput forward(std::span<const int> tokens) const;
  ActPrediction rac_forward(const ag::Matrix& hidden) const;

  bool same_weights(const MultiHeadModel& other) const;

 private:
  struct Block {
    int ln1_g, ln1_b, w_qkv, b_qkv, w_o, b_o, ln2_g, ln2_b, w_fc, b_fc, w_proj, b_proj;
  };
  int add(const std::string& name, ag::Matrix value);
  ag::Var P(ag::Tape& tape, int idx) { return tape.param(params_[static_cast<std::size_t>(idx)]); }
  void init_weights();

  ModelConfig config_;
  std::vector<ag::Parameter> params_;
  int tok_emb_ = -1, pos_emb_ = -1, lnf_g_ = -1, lnf_b_ = -1, lm_w_ = -1, lm_b_ = -1, v_w_ = -1, v_b_ = -1;
  int gru_wih_ = -1, gru_whh_ = -1, gru_bih_ = -1, gru_bhh_ = -1;
  int rac_wq_ = -1, rac_bq_ = -1, rac_wk_ = -1, rac_bk_ = -1, rac_wv_ = -1, rac_bv_ = -1, rac_wo_ = -1,
      rac_bo_ = -1, rac_wc_ = -1, rac_bc_ = -1;
  std::vector<Block> blocks_;
};

/// Frozen deep copy of a model. Shares nothing mutable with the source.
class ReferenceModel {
 public:
  explicit ReferenceModel(const MultiHeadModel& model)
      : model_(std::make_shared<const MultiHeadModel>(model)) {}

  const MultiHeadModel& model() const { return *model_; }
  const MultiHeadModel* operator->() const { return model_.get(); }

 private:
  std::shared_ptr<const MultiHeadModel> model_;
};

ReferenceModel freeze_reference(const MultiHeadModel& model);
ReferenceModel freeze_reference(const ReferenceModel& reference);

// ---- losses over a single token sequence --------------------------------------------

/// Mean next-token cross-entropy over targets tokens[response_start..n).
/// Predictions are restricted to `allowed` columns when given.
ag::Var lm_loss(ag::Tape& tape, const ForwardVars& fwd, std::span<const int> tokens, std::size_t response_start,
                const std::vector<bool>* allowed);

/// Per-token log-probs of tokens[response_start..n) under the (masked) LM distribution, as (m x 1).
ag::Var response_logprobs(ag::Tape& tape, const ForwardVars& fwd, std::span<const int> tokens,
                          std::size_t response_start, const std::vector<bool>* allowed);

/// Cross-entropy of the RAC-Head reading hidden rows [0, rac_length) against `act`.
ag::Var act_loss(ag::Tape& tape, MultiHeadModel& model, const ForwardVars& fwd, std::size_t rac_length, int act);

/// Mean squared error of V-Head outputs at rows [start, start + targets.size()).
ag::Var value_loss(ag::Tape& tape, const ForwardVars& fwd, std::size_t start, std::span<const double> targets);

// ---- decoding -----------------------------------------------------------------------

struct DecodingConfig {
  double temperature = 1.0;  // <= 0 means greedy
  int top_k = 0;             // 0 disables
  double top_p = 1.0;        // 1 disables
  int max_new_tokens = 16;
  std::uint64_t seed = 7;
  int min_new_tokens = 0;  // EOS is not chosen before this many tokens; logprobs ignore the ban
  bool greedy() const { return temperature <= 0.0 || top_k == 1; }
};

struct Generation {
  std::vector<int> tokens;        // includes the terminating EOS when one was emitted
  std::vector<double> logprobs;   // policy log-prob of each emitted token (temperature 1, masked)
  bool hit_eos = false;
};

/// Samples a continuation of `prompt`. `allowed` masks the vocabulary; `eos` stops decoding.
Generation generate(const MultiHeadModel& model, std::span<const int> prompt, const DecodingConfig& decoding,
                    const std::vector<bool>& allowed, int eos, Rng& rng);

/// Recomputes log-probs of `response` following `prompt` under `model`.
std::vector<double> evaluate_logprobs(const MultiHeadModel& model, std::span<const int> prompt,
                                      std::span<const int> response, const std::vector<bool>& allowed);

// ---- checkpoints ----------------------------------------------------------------------

struct Checkpoint {
  MultiHeadModel model;
  std::uint64_t vocab_hash = 0;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const MultiHeadModel& model, std::uint64_t vocab_hash);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace actgen
