#pragma once

#include <memory>
#include <vector>

#include "actgen/encoding.hpp"
#include "actgen/model.hpp"
#include "actgen/ppo.hpp"
#include "actgen/sft.hpp"
#include "actgen/synthetic.hpp"

namespace actgen {

// Desk-scale generation benchmark: a small policy is fine-tuned on the prior corpus, a
// separate act classifier on both corpora, and PPO then moves the policy toward the target
// phrasing.
struct BenchmarkOptions {
  synth::BenchmarkSpec spec;
  ModelConfig model;
  EncodingLimits limits{48, 8};
  std::size_t k = 2;
  SFTConfig policy_sft;
  SFTConfig classifier_sft;
  std::uint64_t classifier_init_seed = 99;
};

BenchmarkOptions default_benchmark_options();

/// PPO settings sized for the benchmark: 200 steps of 32 rollouts in mini-batches of 8.
PPOConfig benchmark_ppo_config();

struct BenchmarkSetup {
  synth::Benchmark data;
  std::unique_ptr<TokenSpace> space;
  MultiHeadModel policy;  // fine-tuned on the prior corpus
  MultiHeadModel classifier;
  std::vector<TurnExample> prior_examples;
  std::vector<TurnExample> target_examples;
  SFTResult policy_sft;
  SFTResult classifier_sft;

  /// Reference = frozen copy of the fine-tuned policy; PPO prompts = target examples.
  TrainSetup train_setup() const;
};

std::unique_ptr<BenchmarkSetup> prepare_benchmark(const BenchmarkOptions& options);

}  // namespace actgen
