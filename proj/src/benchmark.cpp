#include "actgen/benchmark.hpp"

namespace actgen {

BenchmarkOptions default_benchmark_options() {
  BenchmarkOptions o;
  o.spec.core = {"well", "i"};
  o.spec.pool_size = 4;
  o.spec.prior_max_filler = 5;
  o.model.d_model = 32;
  o.model.n_layers = 2;
  o.model.n_heads = 2;
  o.model.max_seq_len = 48;
  o.model.rac_gru_width = 16;
  o.model.rac_attn_heads = 2;
  o.policy_sft.epochs = 12;
  o.policy_sft.lr = 3e-3;
  o.classifier_sft = o.policy_sft;
  o.classifier_sft.lm_weight = 0.0;
  return o;
}

PPOConfig benchmark_ppo_config() {
  PPOConfig c;
  c.lr = 3e-3;
  c.batch_size = 32;
  c.minibatch_size = 8;
  c.total_steps = 200;
  c.beta = 0.0;
  c.decoding.max_new_tokens = 8;
  return c;
}

TrainSetup BenchmarkSetup::train_setup() const {
  return {freeze_reference(policy), freeze_reference(classifier), space.get(), target_examples};
}

std::unique_ptr<BenchmarkSetup> prepare_benchmark(const BenchmarkOptions& o) {
  auto data = synth::benchmark_corpora(o.spec);
  auto space = std::make_unique<TokenSpace>(Vocabulary(data.words));
  ModelConfig mc = o.model;
  mc.vocab_size = space->model_vocab_size();
  ModelConfig cc = mc;
  cc.init_seed = o.classifier_init_seed;

  auto b = std::unique_ptr<BenchmarkSetup>(new BenchmarkSetup{std::move(data), std::move(space), MultiHeadModel(mc),
                                                              MultiHeadModel(cc), {}, {}, {}, {}});
  b->prior_examples = turn_examples(b->data.prior, o.k);
  b->target_examples = turn_examples(b->data.target, o.k);

  std::vector<SequenceExample> policy_data, classifier_data;
  for (const auto& e : b->prior_examples) policy_data.push_back(policy_sequence(*b->space, e, o.limits));
  for (const auto* set : {&b->target_examples, &b->prior_examples}) {
    for (const auto& e : *set) classifier_data.push_back(classifier_sequence(*b->space, e, o.limits));
  }
  b->policy_sft = supervised_train(b->policy, policy_data, o.policy_sft, &b->space->response_mask());
  b->classifier_sft = supervised_train(b->classifier, classifier_data, o.classifier_sft, nullptr);
  return b;
}

}  // namespace actgen
