#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "actgen/encoding.hpp"
#include "actgen/model.hpp"

namespace actgen {

struct SFTConfig {
  int epochs = 50;
  double lr = 1e-3;
  int batch = 16;
  double lm_weight = 1.0;
  double act_weight = 1.0;
  double max_grad_norm = 1.0;
  std::uint64_t seed = 17;
};

struct EpochStats {
  int epoch = 0;             // 0 is the untrained model
  double loss = 0.0;         // mean combined loss per example
  double lm_nll = 0.0;       // per response token
  double perplexity = 0.0;   // exp(lm_nll)
  double act_loss = 0.0;     // mean act cross-entropy
  double act_accuracy = 0.0;
};

struct SFTResult {
  std::vector<EpochStats> curve;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Joint next-token and act cross-entropy over `data`. Examples are shuffled each epoch;
/// epoch e > 0 reports the losses seen while training that epoch. Throws DivergenceError
/// on a non-finite loss.
SFTResult supervised_train(MultiHeadModel& model, const std::vector<SequenceExample>& data, const SFTConfig& config,
                           const std::vector<bool>* response_mask, const EpochCallback& on_epoch = {});

/// Loss statistics of `model` over `data` without updating it.
EpochStats evaluate_sequences(const MultiHeadModel& model, const std::vector<SequenceExample>& data,
                              const std::vector<bool>* response_mask, double lm_weight = 1.0,
                              double act_weight = 1.0);

/// RAC-Head prediction for the first `rac_length` positions of `tokens`.
ActPrediction predict_act(const MultiHeadModel& model, const std::vector<int>& tokens, std::size_t rac_length);

}  // namespace actgen
