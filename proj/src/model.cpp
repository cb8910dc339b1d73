#include "actgen/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "actgen/errors.hpp"

namespace actgen {

std::vector<std::string> ModelConfig::violations() const {
  std::vector<std::string> v;
  if (vocab_size <= 0) v.emplace_back("vocab_size must be positive");
  if (d_model <= 0) v.emplace_back("d_model must be positive");
  if (n_layers <= 0) v.emplace_back("n_layers must be positive");
  if (n_heads <= 0 || (d_model > 0 && d_model % std::max(n_heads, 1) != 0)) {
    v.emplace_back("d_model must be divisible by n_heads");
  }
  if (max_seq_len <= 1) v.emplace_back("max_seq_len must be > 1");
  if (n_acts != static_cast<int>(kNumActs)) v.emplace_back("n_acts must be 12");
  if (rac_gru_width <= 0) v.emplace_back("rac_gru_width must be positive");
  if (rac_attn_heads <= 0 || (rac_gru_width > 0 && rac_gru_width % std::max(rac_attn_heads, 1) != 0)) {
    v.emplace_back("rac_gru_width must be divisible by rac_attn_heads");
  }
  if (!(init_std > 0.0)) v.emplace_back("init_std must be positive");
  return v;
}

void ModelConfig::validate() const {
  const auto v = violations();
  if (v.empty()) return;
  std::string msg = "invalid model config:";
  for (const auto& s : v) msg += " " + s + ";";
  throw ConfigError(msg);
}

std::int64_t parameter_count(const ModelConfig& c) {
  const std::int64_t V = c.vocab_size, d = c.d_model, L = c.max_seq_len, g = c.rac_gru_width, A = c.n_acts;
  const std::int64_t embeddings = V * d + L * d;
  const std::int64_t block = 12 * d * d + 13 * d;
  const std::int64_t rac = 3 * g * (d + g) + 6 * g + 2 * (g * g + g) + 2 * (d * g + g) + g * A + A;
  return embeddings + c.n_layers * block + 2 * d + (d * V + V) + (d + 1) + rac;
}

namespace {

using ag::Matrix;
using ag::Var;

Matrix normal_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double std) {
  Matrix m(r, c);
  for (Eigen::Index j = 0; j < c; ++j) {
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = rng.normal() * std;
  }
  return m;
}

Matrix orthogonal(Rng& rng, Eigen::Index n) {
  Matrix a = normal_matrix(rng, n, n, 1.0);
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  // Sign fix so the factorization is unique.
  Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (r(i, i) < 0) q.col(i) *= -1.0;
  }
  return q;
}

}  // namespace

MultiHeadModel::MultiHeadModel(const ModelConfig& config) : config_(config) {
  config_.validate();
  const int V = config_.vocab_size, d = config_.d_model, L = config_.max_seq_len;
  const int g = config_.rac_gru_width, A = config_.n_acts;
  tok_emb_ = add("tok_emb", Matrix::Zero(V, d));
  pos_emb_ = add("pos_emb", Matrix::Zero(L, d));
  for (int l = 0; l < config_.n_layers; ++l) {
    const std::string p = "block" + std::to_string(l) + ".";
    Block b{};
    b.ln1_g = add(p + "ln1.gain", Matrix::Ones(1, d));
    b.ln1_b = add(p + "ln1.bias", Matrix::Zero(1, d));
    b.w_qkv = add(p + "attn.w_qkv", Matrix::Zero(d, 3 * d));
    b.b_qkv = add(p + "attn.b_qkv", Matrix::Zero(1, 3 * d));
    b.w_o = add(p + "attn.w_out", Matrix::Zero(d, d));
    b.b_o = add(p + "attn.b_out", Matrix::Zero(1, d));
    b.ln2_g = add(p + "ln2.gain", Matrix::Ones(1, d));
    b.ln2_b = add(p + "ln2.bias", Matrix::Zero(1, d));
    b.w_fc = add(p + "mlp.w_fc", Matrix::Zero(d, 4 * d));
    b.b_fc = add(p + "mlp.b_fc", Matrix::Zero(1, 4 * d));
    b.w_proj = add(p + "mlp.w_proj", Matrix::Zero(4 * d, d));
    b.b_proj = add(p + "mlp.b_proj", Matrix::Zero(1, d));
    blocks_.push_back(b);
  }
  lnf_g_ = add("ln_f.gain", Matrix::Ones(1, d));
  lnf_b_ = add("ln_f.bias", Matrix::Zero(1, d));
  lm_w_ = add("lm_head.weight", Matrix::Zero(d, V));
  lm_b_ = add("lm_head.bias", Matrix::Zero(1, V));
  v_w_ = add("v_head.weight", Matrix::Zero(d, 1));
  v_b_ = add("v_head.bias", Matrix::Zero(1, 1));
  gru_wih_ = add("rac.gru.w_ih", Matrix::Zero(d, 3 * g));
  gru_whh_ = add("rac.gru.w_hh", Matrix::Zero(g, 3 * g));
  gru_bih_ = add("rac.gru.b_ih", Matrix::Zero(1, 3 * g));
  gru_bhh_ = add("rac.gru.b_hh", Matrix::Zero(1, 3 * g));
  rac_wq_ = add("rac.attn.w_q", Matrix::Zero(g, g));
  rac_bq_ = add("rac.attn.b_q", Matrix::Zero(1, g));
  rac_wk_ = add("rac.attn.w_k", Matrix::Zero(d, g));
  rac_bk_ = add("rac.attn.b_k", Matrix::Zero(1, g));
  rac_wv_ = add("rac.attn.w_v", Matrix::Zero(d, g));
  rac_bv_ = add("rac.attn.b_v", Matrix::Zero(1, g));
  rac_wo_ = add("rac.attn.w_out", Matrix::Zero(g, g));
  rac_bo_ = add("rac.attn.b_out", Matrix::Zero(1, g));
  rac_wc_ = add("rac.classifier.weight", Matrix::Zero(g, A));
  rac_bc_ = add("rac.classifier.bias", Matrix::Zero(1, A));
  init_weights();
}

int MultiHeadModel::add(const std::string& name, Matrix value) {
  params_.emplace_back(name, std::move(value));
  return static_cast<int>(params_.size() - 1);
}

void MultiHeadModel::init_weights() {
  Rng rng(config_.init_seed);
  const double s = config_.init_std;
  const double s_out = s / std::sqrt(2.0 * config_.n_layers);
  auto fill = [&](int idx, double std) {
    auto& p = params_[static_cast<std::size_t>(idx)].value;
    p = normal_matrix(rng, p.rows(), p.cols(), std);
  };
  fill(tok_emb_, s);
  fill(pos_emb_, s);
  for (const auto& b : blocks_) {
    fill(b.w_qkv, s);
    fill(b.w_o, s_out);
    fill(b.w_fc, s);
    fill(b.w_proj, s_out);
  }
  fill(lm_w_, s);
  fill(v_w_, s);

  const int d = config_.d_model, g = config_.rac_gru_width;
  const double s_in = 1.0 / std::sqrt(static_cast<double>(d));
  const double s_g = 1.0 / std::sqrt(static_cast<double>(g));
  fill(gru_wih_, s_in);
  auto& whh = params_[static_cast<std::size_t>(gru_whh_)].value;
  for (int gate = 0; gate < 3; ++gate) whh.middleCols(gate * g, g) = orthogonal(rng, g);
  fill(rac_wq_, s_g);
  fill(rac_wk_, s_in);
  fill(rac_wv_, s_in);
  fill(rac_wo_, s_g);
  fill(rac_wc_, s_g);
}

std::vector<ag::Parameter*> MultiHeadModel::parameter_ptrs() {
  std::vector<ag::Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(&p);
  return out;
}

std::int64_t MultiHeadModel::num_parameters() const {
  std::int64_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

ag::Parameter& MultiHeadModel::parameter(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return p;
  }
  throw std::out_of_range("no parameter named " + name);
}

void MultiHeadModel::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

ForwardVars MultiHeadModel::forward(ag::Tape& t, std::span<const int> tokens) {
  const auto n = static_cast<Eigen::Index>(tokens.size());
  if (n == 0) throw std::invalid_argument("forward: empty token sequence");
  if (n > config_.max_seq_len) {
    throw std::invalid_argument("forward: sequence of " + std::to_string(n) + " tokens exceeds max_seq_len " +
                                std::to_string(config_.max_seq_len));
  }
  for (int id : tokens) {
    if (id < 0 || id >= config_.vocab_size) {
      throw std::out_of_range("forward: token id " + std::to_string(id) + " outside vocabulary");
    }
  }
  const int d = config_.d_model;
  const int nh = config_.n_heads;
  const int dh = d / nh;
  const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));

  std::vector<int> positions(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) positions[static_cast<std::size_t>(i)] = static_cast<int>(i);
  Var x = ag::add(ag::embedding(P(t, tok_emb_), tokens), ag::embedding(P(t, pos_emb_), positions));

  for (const auto& b : blocks_) {
    Var h = ag::layer_norm(x, P(t, b.ln1_g), P(t, b.ln1_b));
    Var qkv = ag::add_row(ag::matmul(h, P(t, b.w_qkv)), P(t, b.b_qkv));
    std::vector<Var> heads;
    heads.reserve(static_cast<std::size_t>(nh));
    for (int hd = 0; hd < nh; ++hd) {
      Var q = ag::cols(qkv, hd * dh, dh);
      Var k = ag::cols(qkv, d + hd * dh, dh);
      Var v = ag::cols(qkv, 2 * d + hd * dh, dh);
      Var att = ag::softmax_rows(ag::scale(ag::matmul_nt(q, k), att_scale), /*causal=*/true);
      heads.push_back(ag::matmul(att, v));
    }
    Var merged = nh == 1 ? heads.front() : ag::concat_cols(heads);
    x = ag::add(x, ag::add_row(ag::matmul(merged, P(t, b.w_o)), P(t, b.b_o)));
    Var h2 = ag::layer_norm(x, P(t, b.ln2_g), P(t, b.ln2_b));
    Var ff = ag::gelu(ag::add_row(ag::matmul(h2, P(t, b.w_fc)), P(t, b.b_fc)));
    x = ag::add(x, ag::add_row(ag::matmul(ff, P(t, b.w_proj)), P(t, b.b_proj)));
  }
  Var hidden = ag::layer_norm(x, P(t, lnf_g_), P(t, lnf_b_));
  Var logits = ag::add_row(ag::matmul(hidden, P(t, lm_w_)), P(t, lm_b_));
  Var values = ag::add_row(ag::matmul(hidden, P(t, v_w_)), P(t, v_b_));
  return {hidden, logits, values};
}

Var MultiHeadModel::rac_logits(ag::Tape& t, Var hidden) {
  const auto n = hidden.rows();
  if (n == 0) throw std::invalid_argument("rac_forward: empty hidden sequence");
  const int g = config_.rac_gru_width;

  // Recurrent encoder over the hidden states: its last output is the attention query.
  Var gi = ag::add_row(ag::matmul(hidden, P(t, gru_wih_)), P(t, gru_bih_));
  Var whh = P(t, gru_whh_);
  Var bhh = P(t, gru_bhh_);
  Var h = t.constant(Matrix::Zero(1, g));
  for (Eigen::Index i = 0; i < n; ++i) {
    Var gi_t = ag::rows(gi, i, 1);
    Var gh_t = ag::add(ag::matmul(h, whh), bhh);
    Var r = ag::sigmoid(ag::add(ag::cols(gi_t, 0, g), ag::cols(gh_t, 0, g)));
    Var z = ag::sigmoid(ag::add(ag::cols(gi_t, g, g), ag::cols(gh_t, g, g)));
    Var cand = ag::tanh(ag::add(ag::cols(gi_t, 2 * g, g), ag::mul(r, ag::cols(gh_t, 2 * g, g))));
    // h' = (1 - z) * cand + z * h = cand + z * (h - cand)
    h = ag::add(cand, ag::mul(z, ag::sub(h, cand)));
  }

  // Linear projections of the hidden states are keys and values.
  Var q = ag::add_row(ag::matmul(h, P(t, rac_wq_)), P(t, rac_bq_));
  Var k = ag::add_row(ag::matmul(hidden, P(t, rac_wk_)), P(t, rac_bk_));
  Var v = ag::add_row(ag::matmul(hidden, P(t, rac_wv_)), P(t, rac_bv_));
  const int nh = config_.rac_attn_heads;
  const int dh = g / nh;
  const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Var> heads;
  for (int hd = 0; hd < nh; ++hd) {
    Var att = ag::softmax_rows(
        ag::scale(ag::matmul_nt(ag::cols(q, hd * dh, dh), ag::cols(k, hd * dh, dh)), att_scale));
    heads.push_back(ag::matmul(att, ag::cols(v, hd * dh, dh)));
  }
  Var merged = nh == 1 ? heads.front() : ag::concat_cols(heads);
  Var attended = ag::add_row(ag::matmul(merged, P(t, rac_wo_)), P(t, rac_bo_));
  return ag::add_row(ag::matmul(attended, P(t, rac_wc_)), P(t, rac_bc_));
}

ForwardOutput MultiHeadModel::forward(std::span<const int> tokens) const {
  ag::Tape tape(/*record=*/false);
  // A non-recording tape never writes to parameters.
  auto& self = const_cast<MultiHeadModel&>(*this);
  ForwardVars f = self.forward(tape, tokens);
  ForwardOutput out;
  out.hidden = f.hidden.value();
  out.lm_logits = f.lm_logits.value();
  out.values = f.values.value().col(0);
  return out;
}

ActPrediction MultiHeadModel::rac_forward(const Matrix& hidden) const {
  if (hidden.rows() == 0) throw std::invalid_argument("rac_forward: empty hidden sequence");
  ag::Tape tape(false);
  auto& self = const_cast<MultiHeadModel&>(*this);
  Var logits = self.rac_logits(tape, tape.constant(hidden));
  ActPrediction p;
  p.logits = logits.value().row(0).transpose();
  const double mx = p.logits.maxCoeff();
  p.probs = (p.logits.array() - mx).exp();
  p.probs /= p.probs.sum();
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < p.logits.size(); ++i) {
    if (p.logits(i) > p.logits(best)) best = i;
  }
  p.act = act_from_index(static_cast<int>(best));
  return p;
}

bool MultiHeadModel::same_weights(const MultiHeadModel& other) const {
  if (!(config_ == other.config_) || params_.size() != other.params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& a = params_[i].value;
    const auto& b = other.params_[i].value;
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    if (std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) != 0) return false;
  }
  return true;
}

ReferenceModel freeze_reference(const MultiHeadModel& model) { return ReferenceModel(model); }
ReferenceModel freeze_reference(const ReferenceModel& reference) { return reference; }

// ---- losses ------------------------------------------------------------------------------

namespace {

std::vector<int> shifted_targets(std::span<const int> tokens, std::size_t response_start) {
  if (response_start == 0 || response_start > tokens.size()) {
    throw std::invalid_argument("response_start must lie in [1, n]");
  }
  return {tokens.begin() + static_cast<long>(response_start), tokens.end()};
}

}  // namespace

Var response_logprobs(ag::Tape& /*tape*/, const ForwardVars& fwd, std::span<const int> tokens, std::size_t response_start,
                      const std::vector<bool>* allowed) {
  const auto targets = shifted_targets(tokens, response_start);
  if (targets.empty()) throw std::invalid_argument("response_logprobs: empty response");
  Var logits = ag::rows(fwd.lm_logits, static_cast<Eigen::Index>(response_start - 1),
                        static_cast<Eigen::Index>(targets.size()));
  return ag::gather_cols(ag::log_softmax_rows(logits, allowed), targets);
}

Var lm_loss(ag::Tape& t, const ForwardVars& fwd, std::span<const int> tokens, std::size_t response_start,
            const std::vector<bool>* allowed) {
  return ag::scale(ag::mean(response_logprobs(t, fwd, tokens, response_start, allowed)), -1.0);
}

Var act_loss(ag::Tape& t, MultiHeadModel& model, const ForwardVars& fwd, std::size_t rac_length, int act) {
  if (act < 0 || act >= static_cast<int>(kNumActs)) throw std::out_of_range("act_loss: act index");
  Var hidden = ag::rows(fwd.hidden, 0, static_cast<Eigen::Index>(rac_length));
  Var logp = ag::log_softmax_rows(model.rac_logits(t, hidden));
  const int target[1] = {act};
  return ag::scale(ag::gather_cols(logp, target), -1.0);
}

Var value_loss(ag::Tape& t, const ForwardVars& fwd, std::size_t start, std::span<const double> targets) {
  const auto m = static_cast<Eigen::Index>(targets.size());
  Var v = ag::rows(fwd.values, static_cast<Eigen::Index>(start), m);
  Matrix target(m, 1);
  for (Eigen::Index i = 0; i < m; ++i) target(i, 0) = targets[static_cast<std::size_t>(i)];
  return ag::mean(ag::square(ag::sub(v, t.constant(std::move(target)))));
}

// ---- decoding -----------------------------------------------------------------------------

namespace {

Eigen::VectorXd masked_log_softmax(const Eigen::VectorXd& logits, const std::vector<bool>& allowed, double temp) {
  const double neg_inf = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd out(logits.size());
  double mx = neg_inf;
  for (Eigen::Index j = 0; j < logits.size(); ++j) {
    if (allowed[static_cast<std::size_t>(j)]) mx = std::max(mx, logits(j) / temp);
  }
  double z = 0.0;
  for (Eigen::Index j = 0; j < logits.size(); ++j) {
    if (allowed[static_cast<std::size_t>(j)]) z += std::exp(logits(j) / temp - mx);
  }
  const double lz = mx + std::log(z);
  for (Eigen::Index j = 0; j < logits.size(); ++j) {
    out(j) = allowed[static_cast<std::size_t>(j)] ? logits(j) / temp - lz : neg_inf;
  }
  return out;
}

int argmax_lowest(const Eigen::VectorXd& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return static_cast<int>(best);
}

int sample_token(const Eigen::VectorXd& logp, const DecodingConfig& dec, Rng& rng) {
  std::vector<std::pair<double, int>> cand;
  for (Eigen::Index j = 0; j < logp.size(); ++j) {
    if (std::isfinite(logp(j))) cand.emplace_back(std::exp(logp(j)), static_cast<int>(j));
  }
  // Highest probability first, lowest id breaks ties.
  std::stable_sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  if (dec.top_k > 0 && static_cast<std::size_t>(dec.top_k) < cand.size()) cand.resize(static_cast<std::size_t>(dec.top_k));
  if (dec.top_p < 1.0) {
    double acc = 0.0;
    std::size_t keep = 0;
    while (keep < cand.size()) {
      acc += cand[keep].first;
      ++keep;
      if (acc >= dec.top_p) break;
    }
    cand.resize(std::max<std::size_t>(keep, 1));
  }
  double total = 0.0;
  for (const auto& c : cand) total += c.first;
  double u = rng.uniform() * total;
  for (const auto& c : cand) {
    u -= c.first;
    if (u < 0.0) return c.second;
  }
  return cand.back().second;
}

}  // namespace

Generation generate(const MultiHeadModel& model, std::span<const int> prompt, const DecodingConfig& dec,
                    const std::vector<bool>& allowed, int eos, Rng& rng) {
  if (prompt.empty()) throw std::invalid_argument("generate: empty prompt");
  if (static_cast<int>(prompt.size()) + dec.max_new_tokens > model.config().max_seq_len) {
    throw std::invalid_argument("generate: context of " + std::to_string(prompt.size()) + " tokens plus " +
                                std::to_string(dec.max_new_tokens) + " new tokens exceeds max_seq_len");
  }
  if (static_cast<int>(allowed.size()) != model.config().vocab_size) {
    throw std::invalid_argument("generate: mask width differs from vocab_size");
  }
  Generation out;
  std::vector<int> seq(prompt.begin(), prompt.end());
  std::vector<bool> no_eos = allowed;
  if (eos >= 0 && eos < static_cast<int>(no_eos.size())) no_eos[static_cast<std::size_t>(eos)] = false;
  for (int step = 0; step < dec.max_new_tokens; ++step) {
    const ForwardOutput f = model.forward(seq);
    const Eigen::VectorXd logits = f.lm_logits.row(f.lm_logits.rows() - 1).transpose();
    const Eigen::VectorXd policy_logp = masked_log_softmax(logits, allowed, 1.0);
    const auto& pick_mask = step < dec.min_new_tokens ? no_eos : allowed;
    int tok = 0;
    if (dec.greedy()) {
      tok = argmax_lowest(step < dec.min_new_tokens ? masked_log_softmax(logits, pick_mask, 1.0) : policy_logp);
    } else {
      tok = sample_token(masked_log_softmax(logits, pick_mask, dec.temperature), dec, rng);
    }
    out.tokens.push_back(tok);
    out.logprobs.push_back(policy_logp(tok));
    seq.push_back(tok);
    if (tok == eos) {
      out.hit_eos = true;
      break;
    }
  }
  return out;
}

std::vector<double> evaluate_logprobs(const MultiHeadModel& model, std::span<const int> prompt,
                                      std::span<const int> response, const std::vector<bool>& allowed) {
  if (response.empty()) return {};
  std::vector<int> seq(prompt.begin(), prompt.end());
  seq.insert(seq.end(), response.begin(), response.end());
  ag::Tape tape(false);
  auto& self = const_cast<MultiHeadModel&>(model);
  ForwardVars f = self.forward(tape, seq);
  Var lp = response_logprobs(tape, f, seq, prompt.size(), &allowed);
  const auto& v = lp.value();
  return {v.data(), v.data() + v.size()};
}

// ---- checkpoints -----------------------------------------------------------------------------

namespace {
constexpr char kMagic[8] = {'A', 'C', 'T', 'G', 'C', 'K', 'P', 'T'};

nlohmann::ordered_json config_to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["vocab_size"] = c.vocab_size;
  j["d_model"] = c.d_model;
  j["n_layers"] = c.n_layers;
  j["n_heads"] = c.n_heads;
  j["max_seq_len"] = c.max_seq_len;
  j["n_acts"] = c.n_acts;
  j["rac_gru_width"] = c.rac_gru_width;
  j["rac_attn_heads"] = c.rac_attn_heads;
  j["init_std"] = c.init_std;
  j["init_seed"] = c.init_seed;
  return j;
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.vocab_size = j.at("vocab_size").get<int>();
  c.d_model = j.at("d_model").get<int>();
  c.n_layers = j.at("n_layers").get<int>();
  c.n_heads = j.at("n_heads").get<int>();
  c.max_seq_len = j.at("max_seq_len").get<int>();
  c.n_acts = j.at("n_acts").get<int>();
  c.rac_gru_width = j.at("rac_gru_width").get<int>();
  c.rac_attn_heads = j.at("rac_attn_heads").get<int>();
  c.init_std = j.at("init_std").get<double>();
  c.init_seed = j.at("init_seed").get<std::uint64_t>();
  return c;
}

template <typename T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError("truncated checkpoint");
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const MultiHeadModel& model, std::uint64_t vocab_hash) {
  nlohmann::ordered_json header;
  header["format"] = "actgen-checkpoint";
  header["version"] = kCheckpointVersion;
  header["config"] = config_to_json(model.config());
  std::ostringstream hex;
  hex << std::hex << vocab_hash;
  header["vocab_hash"] = hex.str();
  auto& tensors = header["tensors"] = nlohmann::ordered_json::array();
  for (const auto& p : model.parameters()) {
    tensors.push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}});
  }
  const std::string h = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(out, kCheckpointVersion);
  write_pod<std::uint64_t>(out, h.size());
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const auto& p : model.parameters()) {
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(p.value.size())));
  }
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw DataError(path.string() + ": not a checkpoint");
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw DataError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto hlen = read_pod<std::uint64_t>(in);
  std::string h(hlen, '\0');
  in.read(h.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw DataError("truncated checkpoint header");
  const auto header = nlohmann::json::parse(h);
  Checkpoint ck{MultiHeadModel(config_from_json(header.at("config"))), 0};
  ck.vocab_hash = std::stoull(header.at("vocab_hash").get<std::string>(), nullptr, 16);
  const auto& tensors = header.at("tensors");
  auto& params = ck.model.parameters();
  if (tensors.size() != params.size()) throw DataError(path.string() + ": tensor count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& tj = tensors[i];
    auto& p = params[i];
    if (tj.at("name").get<std::string>() != p.name || tj.at("rows").get<long>() != p.value.rows() ||
        tj.at("cols").get<long>() != p.value.cols()) {
      throw DataError(path.string() + ": tensor layout mismatch at " + p.name);
    }
    in.read(reinterpret_cast<char*>(p.value.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(p.value.size())));
    if (!in) throw DataError(path.string() + ": truncated tensor data");
    p.zero_grad();
  }
  return ck;
}

}  // namespace actgen
