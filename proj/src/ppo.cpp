#include "actgen/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "actgen/errors.hpp"
#include "actgen/sft.hpp"

namespace actgen {

std::vector<std::string> PPOConfig::violations() const {
  std::vector<std::string> v;
  if (!(lr > 0.0)) v.emplace_back("ppo.lr must be > 0");
  if (batch_size < 1) v.emplace_back("ppo.batch_size must be >= 1");
  if (minibatch_size < 0) v.emplace_back("ppo.minibatch_size must be >= 0");
  if (ppo_epochs < 1) v.emplace_back("ppo.epochs must be >= 1");
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) v.emplace_back("ppo.clip_eps must lie in (0,1)");
  if (!(gamma >= 0.0 && gamma <= 1.0)) v.emplace_back("ppo.gamma must lie in [0,1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) v.emplace_back("ppo.gae_lambda must lie in [0,1]");
  if (!(beta >= 0.0) || !std::isfinite(beta)) v.emplace_back("ppo.beta must be finite and >= 0");
  if (adaptive.enabled && !(beta > 0.0)) v.emplace_back("ppo.beta must be > 0 in adaptive mode");
  if (!(adaptive.target_kl > 0.0)) v.emplace_back("ppo.target_kl must be > 0");
  if (!(adaptive.horizon > 0.0)) v.emplace_back("ppo.horizon must be > 0");
  if (!(re_scale > 0.0)) v.emplace_back("ppo.re_scale must be > 0");
  if (total_steps < 0) v.emplace_back("ppo.total_steps must be >= 0");
  if (decoding.max_new_tokens < 1) v.emplace_back("ppo.max_new_tokens must be >= 1");
  if (checkpoint_every < 0) v.emplace_back("ppo.checkpoint_every must be >= 0");
  for (const auto& w : weights.violations()) v.push_back("reward." + w);
  return v;
}

std::vector<int> RolloutItem::sequence() const {
  std::vector<int> s = prompt;
  s.insert(s.end(), response.begin(), response.end());
  return s;
}

RolloutBatch rollout(const MultiHeadModel& policy, const ReferenceModel& reference, const TokenSpace& space,
                     std::span<const TurnExample> examples, const DecodingConfig& decoding, Rng& rng) {
  const auto& mask = space.response_mask();
  const auto max_len = static_cast<std::size_t>(policy.config().max_seq_len);
  const auto new_tokens = static_cast<std::size_t>(decoding.max_new_tokens);
  if (max_len < new_tokens + 6) throw std::invalid_argument("rollout: max_seq_len leaves no room for a prompt");
  const std::size_t ctx_budget = max_len - new_tokens - 4;

  RolloutBatch batch;
  std::vector<std::vector<double>> pol, ref;
  for (const auto& ex : examples) {
    RolloutItem it;
    it.context = space.fit_context(ex.context, ctx_budget);
    it.speaker = ex.speaker;
    it.gold_response = ex.response;
    it.gold_act = ex.act;

    std::vector<int> prefix = space.encode_context(it.context);
    prefix.push_back(Vocabulary::kSepSpeaker);
    prefix.push_back(space.role_token(ex.speaker));
    it.rac_length = prefix.size();
    it.predicted_act = predict_act(policy, prefix, prefix.size()).act;

    it.prompt = space.encode_prompt(it.context, ex.speaker, it.predicted_act);
    const Generation gen = generate(policy, it.prompt, decoding, mask, space.eos(), rng);
    it.response = gen.tokens;
    it.logp_old = gen.logprobs;
    it.logp_ref = evaluate_logprobs(reference.model(), it.prompt, it.response, mask);

    const auto f = policy.forward(it.sequence());
    const auto start = static_cast<Eigen::Index>(it.prompt.size() - 1);
    for (std::size_t t = 0; t < it.response.size(); ++t) it.values.push_back(f.values(start + static_cast<Eigen::Index>(t)));

    pol.push_back(it.logp_old);
    ref.push_back(it.logp_ref);
    batch.items.push_back(std::move(it));
  }
  if (!batch.items.empty()) batch.batch_re = batch_relative_entropy(pol, ref);
  return batch;
}

void score_batch(RolloutBatch& batch, const RewardScorer& scorer, const RewardWeights& weights, double beta) {
  for (auto& it : batch.items) {
    GenerationSample s;
    s.context = it.context;
    s.speaker = it.speaker;
    s.gold_response = it.gold_response;
    s.response = it.response;
    s.predicted_act = it.predicted_act;
    s.logp_policy = it.logp_old;
    s.logp_ref = it.logp_ref;
    it.breakdown = score_generation(s, batch.batch_re, scorer, weights, beta);
    it.rewards = per_token_rewards(it.breakdown.total, it.logp_old, it.logp_ref, beta);
  }
}

std::pair<std::vector<double>, std::vector<double>> compute_advantages(const std::vector<double>& rewards,
                                                                       const std::vector<double>& values,
                                                                       double gamma, double gae_lambda) {
  if (rewards.size() != values.size()) throw std::invalid_argument("compute_advantages: length mismatch");
  const std::size_t n = rewards.size();
  std::vector<double> adv(n), ret(n);
  double last = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double next_v = i + 1 < n ? values[i + 1] : 0.0;
    const double delta = rewards[i] + gamma * next_v - values[i];
    last = delta + gamma * gae_lambda * last;
    adv[i] = last;
    ret[i] = adv[i] + values[i];
  }
  return {adv, ret};
}

void normalize_advantages(RolloutBatch& batch) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& it : batch.items) {
    for (double a : it.advantages) {
      sum += a;
      ++n;
    }
  }
  if (n == 0) return;
  const double mean = sum / static_cast<double>(n);
  double sq = 0.0;
  for (const auto& it : batch.items) {
    for (double a : it.advantages) sq += (a - mean) * (a - mean);
  }
  const double std = std::sqrt(sq / static_cast<double>(n));
  const double denom = std::max(std, 1e-8);
  for (auto& it : batch.items) {
    for (double& a : it.advantages) a = (a - mean) / denom;
  }
}

ag::Var clipped_surrogate(ag::Tape& tape, ag::Var new_logp, const std::vector<double>& old_logp,
                          const std::vector<double>& advantages, double clip_eps) {
  const auto m = static_cast<Eigen::Index>(old_logp.size());
  const ag::Matrix old = Eigen::Map<const Eigen::VectorXd>(old_logp.data(), m);
  const ag::Matrix adv = Eigen::Map<const Eigen::VectorXd>(advantages.data(), m);
  const ag::Var a = tape.constant(adv);
  const ag::Var ratio = ag::exp(ag::sub(new_logp, tape.constant(old)));
  const ag::Var unclipped = ag::mul(ratio, a);
  const ag::Var clipped = ag::mul(ag::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps), a);
  return ag::scale(ag::sum(ag::minimum(unclipped, clipped)), -1.0);
}

PPOLosses ppo_step(MultiHeadModel& policy, Adam& optimizer, const RolloutBatch& batch, const PPOConfig& config,
                   const std::vector<bool>& mask, Rng& rng) {
  PPOLosses out;
  const std::size_t n = batch.items.size();
  if (n == 0) return out;
  const std::size_t mb =
      config.minibatch_size > 0 ? std::min<std::size_t>(n, static_cast<std::size_t>(config.minibatch_size)) : n;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  double pol_sum = 0.0, val_sum = 0.0, act_sum = 0.0;
  long clipped = 0, tokens_seen = 0;

  for (int epoch = 0; epoch < config.ppo_epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    for (std::size_t start = 0; start < n; start += mb) {
      const std::size_t end = std::min(n, start + mb);
      std::size_t mb_tokens = 0;
      for (std::size_t i = start; i < end; ++i) mb_tokens += batch.items[order[i]].response.size();
      // Policy and value losses average over tokens, the act loss over items.
      const double tok_w = 1.0 / static_cast<double>(mb_tokens);
      const double item_w = 1.0 / static_cast<double>(end - start);
      double mb_pol = 0.0, mb_val = 0.0, mb_act = 0.0;

      for (std::size_t i = start; i < end; ++i) {
        const auto& it = batch.items[order[i]];
        const auto seq = it.sequence();
        const std::size_t m = it.response.size();
        ag::Tape tape;
        const auto fwd = policy.forward(tape, seq);
        const auto new_logp = response_logprobs(tape, fwd, seq, it.prompt.size(), &mask);
        const auto pol = clipped_surrogate(tape, new_logp, it.logp_old, it.advantages, config.clip_eps);

        const auto values = ag::rows(fwd.values, static_cast<Eigen::Index>(it.prompt.size() - 1),
                                     static_cast<Eigen::Index>(m));
        const ag::Matrix ret = Eigen::Map<const Eigen::VectorXd>(it.returns.data(), static_cast<Eigen::Index>(m));
        const auto val = ag::sum(ag::square(ag::sub(values, tape.constant(ret))));

        const auto act = act_loss(tape, policy, fwd, it.rac_length, act_index(it.gold_act));

        const auto loss = ag::add(ag::add(ag::scale(pol, tok_w), ag::scale(val, config.value_coef * tok_w)),
                                  ag::scale(act, config.act_coef * item_w));
        if (!std::isfinite(loss.scalar())) {
          throw DivergenceError("ppo_step: non-finite loss (policy " + std::to_string(pol.scalar()) + ", value " +
                                std::to_string(val.scalar()) + ", act " + std::to_string(act.scalar()) + ")");
        }
        tape.backward(loss);

        mb_pol += pol.scalar() * tok_w;
        mb_val += val.scalar() * tok_w;
        mb_act += act.scalar() * item_w;
        const auto& lp = new_logp.value();
        for (std::size_t t = 0; t < m; ++t) {
          const double r = std::exp(lp(static_cast<Eigen::Index>(t), 0) - it.logp_old[t]);
          if (std::abs(r - 1.0) > config.clip_eps) ++clipped;
        }
        tokens_seen += static_cast<long>(m);
      }
      const double gnorm = optimizer.step();
      if (!std::isfinite(gnorm)) throw DivergenceError("ppo_step: non-finite gradient norm");
      if (out.updates == 0) out.first_policy = mb_pol;
      ++out.updates;
      pol_sum += mb_pol;
      val_sum += mb_val;
      act_sum += mb_act;
    }
  }
  const double u = static_cast<double>(out.updates);
  out.policy = pol_sum / u;
  out.value = val_sum / u;
  out.act = act_sum / u;
  out.total = out.policy + config.value_coef * out.value + config.act_coef * out.act;
  out.clip_fraction = tokens_seen ? static_cast<double>(clipped) / static_cast<double>(tokens_seen) : 0.0;
  return out;
}

double adaptive_beta_update(double beta, double observed_kl, double target_kl, double horizon, int batch_size) {
  const double err = std::clamp(observed_kl / target_kl - 1.0, -0.2, 0.2);
  const double next = beta * (1.0 + err * (static_cast<double>(batch_size) / horizon) * kBetaGain);
  return std::clamp(next, kBetaMin, kBetaMax);
}

nlohmann::ordered_json to_json(const StepRecord& r) {
  nlohmann::ordered_json j;
  j["step"] = r.step;
  j["mean_reward"] = r.mean_reward;
  j["mean_kl"] = r.mean_kl;
  j["policy_loss"] = r.policy_loss;
  j["value_loss"] = r.value_loss;
  j["act_loss"] = r.act_loss;
  j["beta"] = r.beta;
  j["mean_R"] = r.mean_R;
  j["mean_BS"] = r.mean_BS;
  j["mean_rho"] = r.mean_rho;
  j["RE"] = r.RE;
  j["response_length"] = r.response_length;
  j["clip_fraction"] = r.clip_fraction;
  return j;
}

namespace {

std::string act_str(DialogueAct a) { return std::string(act_code(a)); }

}  // namespace

TrainLog train(MultiHeadModel& policy, const TrainSetup& setup, const PPOConfig& config, const TrainOutputs& outputs,
               const StepCallback& on_step) {
  const auto problems = config.violations();
  if (!problems.empty()) {
    std::string msg = "invalid PPO config:";
    for (const auto& p : problems) msg += " " + p + ";";
    throw ConfigError(msg);
  }
  TrainLog log;
  if (config.total_steps == 0) return log;
  if (setup.examples.empty()) throw DataError("train: no training examples");
  if (setup.space == nullptr) throw std::invalid_argument("train: token space missing");

  RewardScorer scorer;
  scorer.space = setup.space;
  scorer.reference = &setup.reference;
  scorer.classifier = &setup.classifier;
  scorer.rouge = metrics::RougeSelector::parse(config.rouge);
  scorer.re_scale = config.re_scale;

  AdamConfig ac;
  ac.lr = config.lr;
  ac.max_grad_norm = config.max_grad_norm;
  Adam optimizer(policy.parameter_ptrs(), ac);

  std::ofstream trainlog, rewardlog;
  if (!outputs.run_dir.empty()) {
    std::filesystem::create_directories(outputs.run_dir);
    trainlog.open(outputs.run_dir / "trainlog.jsonl", std::ios::trunc);
    rewardlog.open(outputs.run_dir / "reward_log.jsonl", std::ios::trunc);
    if (!trainlog || !rewardlog) throw DataError("cannot write logs into " + outputs.run_dir.string());
  }
  auto checkpoint = [&](int step) {
    if (outputs.run_dir.empty()) return;
    save_checkpoint(outputs.run_dir / ("step-" + std::to_string(step) + ".ckpt"), policy, outputs.vocab_hash);
  };

  Rng data_rng(mix_seed(config.seed, 0));
  std::vector<std::size_t> order(setup.examples.size());
  std::iota(order.begin(), order.end(), 0);
  data_rng.shuffle(order.begin(), order.end());
  std::size_t cursor = 0;

  double beta = config.beta;
  int over_guard = 0;
  const auto& mask = setup.space->response_mask();

  for (int step = 1; step <= config.total_steps; ++step) {
    std::vector<TurnExample> items;
    for (int i = 0; i < config.batch_size; ++i) {
      if (cursor == order.size()) {
        data_rng.shuffle(order.begin(), order.end());
        cursor = 0;
      }
      items.push_back(setup.examples[order[cursor++]]);
    }
    Rng roll_rng(mix_seed(config.seed, 2 * static_cast<std::uint64_t>(step) + 1));
    RolloutBatch batch = rollout(policy, setup.reference, *setup.space, items, config.decoding, roll_rng);
    score_batch(batch, scorer, config.weights, beta);
    for (auto& it : batch.items) {
      std::tie(it.advantages, it.returns) = compute_advantages(it.rewards, it.values, config.gamma, config.gae_lambda);
    }
    normalize_advantages(batch);
    Rng update_rng(mix_seed(config.seed, 2 * static_cast<std::uint64_t>(step) + 2));
    const PPOLosses losses = ppo_step(policy, optimizer, batch, config, mask, update_rng);

    StepRecord rec;
    rec.step = step;
    rec.beta = beta;
    rec.mean_kl = batch.batch_re;
    rec.RE = batch.batch_re / config.re_scale;
    rec.policy_loss = losses.policy;
    rec.value_loss = losses.value;
    rec.act_loss = losses.act;
    rec.clip_fraction = losses.clip_fraction;
    const double inv = 1.0 / static_cast<double>(batch.items.size());
    for (const auto& it : batch.items) {
      rec.mean_reward += it.breakdown.total * inv;
      rec.mean_R += it.breakdown.components.R * inv;
      rec.mean_BS += it.breakdown.components.BS * inv;
      rec.mean_rho += it.breakdown.components.rho * inv;
      rec.response_length += static_cast<double>(it.response.size()) * inv;
    }
    log.steps.push_back(rec);

    if (trainlog.is_open()) {
      trainlog << to_json(rec).dump() << '\n';
      trainlog.flush();
      for (std::size_t i = 0; i < batch.items.size(); ++i) {
        const auto& it = batch.items[i];
        nlohmann::ordered_json j;
        j["step"] = step;
        j["item"] = i;
        const auto breakdown = to_json(it.breakdown);
        for (const auto& [k, v] : breakdown.items()) j[k] = v;
        j["predicted_act"] = act_str(it.predicted_act);
        j["gold_act"] = act_str(it.gold_act);
        j["response"] = setup.space->response_text(it.response);
        rewardlog << j.dump() << '\n';
      }
      rewardlog.flush();
    }
    if (on_step) on_step(rec, batch);

    if (config.adaptive.enabled) {
      beta = adaptive_beta_update(beta, batch.batch_re, config.adaptive.target_kl, config.adaptive.horizon,
                                  config.batch_size);
    }
    if (config.checkpoint_every > 0 && step % config.checkpoint_every == 0 && step != config.total_steps) {
      checkpoint(step);
    }

    over_guard = batch.batch_re > config.divergence_factor * config.adaptive.target_kl ? over_guard + 1 : 0;
    if (over_guard >= config.divergence_patience) {
      checkpoint(step);
      throw DivergenceError("train: mean KL " + std::to_string(batch.batch_re) + " above " +
                            std::to_string(config.divergence_factor) + "x target for " +
                            std::to_string(over_guard) + " consecutive steps (step " + std::to_string(step) + ")");
    }
  }
  checkpoint(config.total_steps);
  return log;
}

}  // namespace actgen
