#include "actgen/sft.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "actgen/errors.hpp"
#include "actgen/optim.hpp"

namespace actgen {

namespace {

struct Accum {
  double loss = 0, nll = 0, act = 0;
  long tokens = 0, examples = 0, act_examples = 0, correct = 0;

  EpochStats stats(int epoch) const {
    EpochStats s;
    s.epoch = epoch;
    s.loss = examples ? loss / static_cast<double>(examples) : 0.0;
    s.lm_nll = tokens ? nll / static_cast<double>(tokens) : 0.0;
    s.perplexity = std::exp(s.lm_nll);
    s.act_loss = act_examples ? act / static_cast<double>(act_examples) : 0.0;
    s.act_accuracy = act_examples ? static_cast<double>(correct) / static_cast<double>(act_examples) : 0.0;
    return s;
  }
};

int argmax_row(const ag::Matrix& row) {
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < row.cols(); ++j) {
    if (row(0, j) > row(0, best)) best = j;
  }
  return static_cast<int>(best);
}

// Builds the loss for one example on `tape`, records statistics, returns the combined loss.
ag::Var example_loss(ag::Tape& tape, MultiHeadModel& model, const SequenceExample& ex,
                     const std::vector<bool>* mask, double lm_weight, double act_weight, Accum& acc) {
  const ForwardVars fwd = model.forward(tape, ex.tokens);
  ag::Var total = tape.constant(ag::Matrix::Zero(1, 1));
  if (ex.response_start > 0 && lm_weight > 0.0) {
    const ag::Var lm = lm_loss(tape, fwd, ex.tokens, ex.response_start, mask);
    const auto m = static_cast<long>(ex.tokens.size() - ex.response_start);
    acc.nll += lm.scalar() * static_cast<double>(m);
    acc.tokens += m;
    total = ag::add(total, ag::scale(lm, lm_weight));
  }
  if (ex.act >= 0 && act_weight > 0.0) {
    const ag::Var hidden = ag::rows(fwd.hidden, 0, static_cast<Eigen::Index>(ex.rac_length));
    const ag::Var logits = model.rac_logits(tape, hidden);
    const ag::Var logp = ag::log_softmax_rows(logits);
    const int target[1] = {ex.act};
    const ag::Var ce = ag::scale(ag::gather_cols(logp, target), -1.0);
    acc.act += ce.scalar();
    acc.act_examples += 1;
    acc.correct += argmax_row(logits.value()) == ex.act ? 1 : 0;
    total = ag::add(total, ag::scale(ce, act_weight));
  }
  acc.loss += total.scalar();
  acc.examples += 1;
  return total;
}

}  // namespace

EpochStats evaluate_sequences(const MultiHeadModel& model, const std::vector<SequenceExample>& data,
                              const std::vector<bool>* mask, double lm_weight, double act_weight) {
  Accum acc;
  auto& m = const_cast<MultiHeadModel&>(model);  // non-recording tape: read only
  for (const auto& ex : data) {
    ag::Tape tape(false);
    example_loss(tape, m, ex, mask, lm_weight, act_weight, acc);
  }
  return acc.stats(0);
}

SFTResult supervised_train(MultiHeadModel& model, const std::vector<SequenceExample>& data, const SFTConfig& config,
                           const std::vector<bool>* mask, const EpochCallback& on_epoch) {
  if (config.epochs < 0 || config.batch < 1 || !(config.lr > 0.0)) {
    throw ConfigError("supervised_train: epochs >= 0, batch >= 1 and lr > 0 required");
  }
  SFTResult result;
  result.curve.push_back(evaluate_sequences(model, data, mask, config.lm_weight, config.act_weight));
  if (on_epoch) on_epoch(result.curve.back());
  if (data.empty()) return result;

  AdamConfig ac;
  ac.lr = config.lr;
  ac.max_grad_norm = config.max_grad_norm;
  Adam opt(model.parameter_ptrs(), ac);
  Rng rng(config.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    Accum acc;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch));
      const double inv = 1.0 / static_cast<double>(end - start);
      for (std::size_t i = start; i < end; ++i) {
        ag::Tape tape;
        const ag::Var loss =
            example_loss(tape, model, data[order[i]], mask, config.lm_weight, config.act_weight, acc);
        if (!std::isfinite(loss.scalar())) {
          throw DivergenceError("supervised_train: non-finite loss at epoch " + std::to_string(epoch) +
                                ", example " + std::to_string(order[i]));
        }
        tape.backward(ag::scale(loss, inv));
      }
      const double gnorm = opt.step();
      if (!std::isfinite(gnorm)) {
        throw DivergenceError("supervised_train: non-finite gradient norm at epoch " + std::to_string(epoch));
      }
    }
    result.curve.push_back(acc.stats(epoch));
    if (on_epoch) on_epoch(result.curve.back());
  }
  return result;
}

ActPrediction predict_act(const MultiHeadModel& model, const std::vector<int>& tokens, std::size_t rac_length) {
  // Causal attention: hidden states of the prefix do not depend on later tokens.
  const ForwardOutput f = model.forward(std::span<const int>(tokens.data(), rac_length));
  return model.rac_forward(f.hidden);
}

}  // namespace actgen
