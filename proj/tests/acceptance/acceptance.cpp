// Acceptance checks. Prints one PASS/FAIL line per criterion and exits non-zero if any fail.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "actgen/benchmark.hpp"
#include "actgen/commands.hpp"
#include "actgen/config.hpp"
#include "actgen/corpus.hpp"
#include "actgen/eval.hpp"
#include "actgen/metrics.hpp"
#include "actgen/model.hpp"
#include "actgen/ppo.hpp"
#include "actgen/reward.hpp"
#include "actgen/sft.hpp"
#include "actgen/synthetic.hpp"

using namespace actgen;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), fmt, args...);
  return buf;
}

// ---- 1: metric oracles --------------------------------------------------------------

using Tokens = std::vector<std::string>;

metrics::PRF oracle_rouge_n(const Tokens& cand, const Tokens& ref, std::size_t n) {
  auto grams = [n](const Tokens& t) {
    std::vector<Tokens> out;
    for (std::size_t i = 0; i + n <= t.size(); ++i) out.emplace_back(t.begin() + static_cast<long>(i), t.begin() + static_cast<long>(i + n));
    return out;
  };
  const auto c = grams(cand);
  auto r = grams(ref);
  if (c.empty() || r.empty()) return {};
  // Multiset intersection: each candidate gram consumes one unused matching reference gram.
  std::vector<bool> used(r.size(), false);
  double overlap = 0.0;
  for (const auto& g : c) {
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (!used[j] && r[j] == g) {
        used[j] = true;
        overlap += 1.0;
        break;
      }
    }
  }
  metrics::PRF out;
  out.precision = overlap / static_cast<double>(c.size());
  out.recall = overlap / static_cast<double>(r.size());
  out.f1 = out.precision + out.recall > 0.0 ? 2.0 * out.precision * out.recall / (out.precision + out.recall) : 0.0;
  return out;
}

metrics::PRF oracle_rouge_l(const Tokens& cand, const Tokens& ref) {
  std::vector<std::vector<int>> dp(cand.size() + 1, std::vector<int>(ref.size() + 1, 0));
  for (std::size_t i = 1; i <= cand.size(); ++i) {
    for (std::size_t j = 1; j <= ref.size(); ++j) {
      dp[i][j] = cand[i - 1] == ref[j - 1] ? dp[i - 1][j - 1] + 1 : std::max(dp[i - 1][j], dp[i][j - 1]);
    }
  }
  const double l = dp[cand.size()][ref.size()];
  metrics::PRF out;
  out.precision = l / static_cast<double>(cand.size());
  out.recall = l / static_cast<double>(ref.size());
  out.f1 = out.precision + out.recall > 0.0 ? 2.0 * out.precision * out.recall / (out.precision + out.recall) : 0.0;
  return out;
}

double prf_diff(const metrics::PRF& a, const metrics::PRF& b) {
  return std::max({std::abs(a.precision - b.precision), std::abs(a.recall - b.recall), std::abs(a.f1 - b.f1)});
}

Outcome metric_oracles() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  const Tokens words = {"a", "b", "c", "d", "e", "f", "g", "h"};
  auto draw = [&] {
    Tokens t(1 + rng.below(50));
    for (auto& w : t) w = words[rng.below(words.size())];
    return t;
  };
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Tokens c = draw(), r = draw();
    worst = std::max(worst, prf_diff(metrics::rouge_n(c, r, 1), oracle_rouge_n(c, r, 1)));
    worst = std::max(worst, prf_diff(metrics::rouge_n(c, r, 2), oracle_rouge_n(c, r, 2)));
    worst = std::max(worst, prf_diff(metrics::rouge_l(c, r), oracle_rouge_l(c, r)));
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-12 && t < 10.0, format("1000 pairs, max |diff| %.3g (tol 1e-12), %.2f s (limit 10 s)", worst, t)};
}

// ---- 2: relative entropy ------------------------------------------------------------

// Sequences over {0, 1, 2}: token 2 ends a sequence after one step, otherwise a second
// token follows. Seven sequences in all.
struct TinyLM {
  std::array<double, 3> first{};
  std::array<std::array<double, 3>, 2> second{};

  static TinyLM random(Rng& rng) {
    auto simplex = [&rng] {
      std::array<double, 3> p{};
      double s = 0.0;
      for (auto& v : p) s += (v = 0.1 + rng.uniform());
      for (auto& v : p) v /= s;
      return p;
    };
    TinyLM m;
    m.first = simplex();
    m.second = {simplex(), simplex()};
    return m;
  }
  double logp(const std::vector<int>& s) const {
    double lp = std::log(first[static_cast<std::size_t>(s[0])]);
    if (s.size() == 2) lp += std::log(second[static_cast<std::size_t>(s[0])][static_cast<std::size_t>(s[1])]);
    return lp;
  }
  std::vector<int> sample(Rng& rng) const {
    auto pick = [&rng](const std::array<double, 3>& p) {
      double u = rng.uniform();
      for (int i = 0; i < 2; ++i) {
        if ((u -= p[static_cast<std::size_t>(i)]) < 0.0) return i;
      }
      return 2;
    };
    std::vector<int> s{pick(first)};
    if (s[0] != 2) s.push_back(pick(second[static_cast<std::size_t>(s[0])]));
    return s;
  }
};

Outcome relative_entropy_check() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(202);
  const TinyLM p = TinyLM::random(rng), q = TinyLM::random(rng);
  std::vector<std::vector<int>> all = {{2}};
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 3; ++b) all.push_back({a, b});
  }
  double exact = 0.0, mass = 0.0;
  for (const auto& s : all) {
    const double ps = std::exp(p.logp(s));
    mass += ps;
    exact += ps * (p.logp(s) - q.logp(s));
  }
  constexpr int kSamples = 100000;
  std::vector<double> lp, lq;
  lp.reserve(kSamples);
  lq.reserve(kSamples);
  for (int i = 0; i < kSamples; ++i) {
    const auto s = p.sample(rng);
    lp.push_back(p.logp(s));
    lq.push_back(q.logp(s));
  }
  const double mc = metrics::relative_entropy(lp, lq);
  double var = 0.0;
  for (int i = 0; i < kSamples; ++i) var += std::pow(lp[static_cast<std::size_t>(i)] - lq[static_cast<std::size_t>(i)] - mc, 2);
  const double se = std::sqrt(var / (kSamples - 1) / kSamples);
  const double self = metrics::relative_entropy(lp, lp);
  const double t = seconds_since(t0);
  const bool ok = std::abs(mc - exact) <= 3.0 * se && self == 0.0 && std::abs(mass - 1.0) < 1e-12 && t < 30.0;
  return {ok, format("exact %.6f, MC %.6f, |diff| %.2e vs 3 SE %.2e, self-KL %g, %.2f s (limit 30 s)", exact, mc,
                     std::abs(mc - exact), 3.0 * se, self, t)};
}

// ---- 3: reward composition ----------------------------------------------------------

Outcome reward_composition() {
  const RewardWeights w{0.5, 0.15, 0.15, 0.2};
  const double v = compose_reward({0.5, 0.8, 0.6, 0.1}, w);
  Rng rng(303);
  int violations = 0;
  for (int i = 0; i < 10000; ++i) {
    const RewardComponents c{rng.uniform(), rng.uniform(), rng.uniform(), 2.0 * rng.uniform()};
    const double base = compose_reward(c, w);
    const double d = 1e-3 + rng.uniform();
    RewardComponents up = c;
    up.R += d;
    violations += compose_reward(up, w) > base ? 0 : 1;
    up = c;
    up.BS += d;
    violations += compose_reward(up, w) > base ? 0 : 1;
    up = c;
    up.rho += d;
    violations += compose_reward(up, w) > base ? 0 : 1;
    up = c;
    up.RE += d;
    violations += compose_reward(up, w) < base ? 0 : 1;
  }
  return {std::abs(v - 0.44) <= 1e-12 && violations == 0,
          format("compose = %.15f (target 0.44 +- 1e-12), monotonicity violations %d / 40000", v, violations)};
}

// ---- 4: gradient checks -------------------------------------------------------------

double rel_err(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale < 1e-12 ? 0.0 : std::abs(a - b) / scale;
}

template <typename LossFn>
double worst_gradient_error(MultiHeadModel& m, LossFn&& loss_fn, int samples, std::uint64_t seed, int& checked) {
  m.zero_grad();
  {
    ag::Tape tape;
    tape.backward(loss_fn(tape));
  }
  auto& params = m.parameters();
  std::vector<ag::Matrix> analytic;
  for (auto& p : params) analytic.push_back(p.grad);
  auto eval = [&] {
    ag::Tape tape(false);
    return loss_fn(tape).scalar();
  };
  Rng rng(seed);
  double worst = 0.0;
  checked = 0;
  for (int attempts = 0; checked < samples && attempts < samples * 100; ++attempts) {
    const auto pi = rng.below(params.size());
    auto& p = params[pi];
    const auto r = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(p.value.rows())));
    const auto c = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(p.value.cols())));
    const double a = analytic[pi](r, c);
    if (std::abs(a) < 1e-7) continue;  // entry off this loss's path
    const double h = 1e-5, orig = p.value(r, c);
    p.value(r, c) = orig + h;
    const double up = eval();
    p.value(r, c) = orig - h;
    const double down = eval();
    p.value(r, c) = orig;
    worst = std::max(worst, rel_err(a, (up - down) / (2 * h)));
    ++checked;
  }
  return worst;
}

Outcome gradient_checks() {
  const auto t0 = std::chrono::steady_clock::now();
  ModelConfig c;
  c.vocab_size = 30;
  c.d_model = 32;
  c.n_layers = 2;
  c.n_heads = 2;
  c.max_seq_len = 32;
  c.rac_gru_width = 16;
  c.rac_attn_heads = 2;
  c.init_std = 0.2;
  MultiHeadModel m(c);
  const std::vector<int> seq = {1, 4, 26, 5, 9, 10, 11, 4, 27, 5, 12, 13, 2};
  std::vector<bool> mask(30, true);
  mask[0] = false;
  const std::vector<double> targets = {0.5, -1.0, 2.0, 0.25};
  int n_lm = 0, n_act = 0, n_val = 0;
  const double lm = worst_gradient_error(
      m, [&](ag::Tape& t) { return lm_loss(t, m.forward(t, seq), seq, 9, &mask); }, 20, 41, n_lm);
  const double act = worst_gradient_error(
      m,
      [&](ag::Tape& t) {
        const auto fwd = m.forward(t, seq);
        return act_loss(t, m, fwd, 7, 4);
      },
      20, 42, n_act);
  const double val = worst_gradient_error(
      m, [&](ag::Tape& t) { return value_loss(t, m.forward(t, seq), 8, targets); }, 20, 43, n_val);
  const double t = seconds_since(t0);
  const bool ok = lm < 1e-4 && act < 1e-4 && val < 1e-4 && n_lm == 20 && n_act == 20 && n_val == 20 && t < 120.0;
  return {ok, format("max rel err LM %.2e (%d), act %.2e (%d), value %.2e (%d), tol 1e-4, %.2f s (limit 120 s)", lm,
                     n_lm, act, n_act, val, n_val, t)};
}

// ---- 5: RAC learnability ------------------------------------------------------------

Outcome rac_learnability() {
  const auto t0 = std::chrono::steady_clock::now();
  const Corpus corpus = synth::deterministic_act_corpus(80, 8, 6, 505);
  const auto [train_c, valid_c, test_c] = split(corpus, {0.75, 0.0, 0.25}, 506);
  std::vector<std::string> words;
  for (std::size_t a = 0; a < kNumActs; ++a) {
    for (int i = 0; i < 6; ++i) words.push_back(synth::act_word(act_from_index(static_cast<int>(a)), i));
  }
  const TokenSpace space{Vocabulary(words)};
  const EncodingLimits limits{64, 8};
  std::vector<SequenceExample> train, held_out;
  for (const auto& e : turn_examples(train_c, 2)) train.push_back(policy_sequence(space, e, limits));
  for (const auto& e : turn_examples(test_c, 2)) held_out.push_back(policy_sequence(space, e, limits));

  ModelConfig mc;
  mc.vocab_size = space.model_vocab_size();
  mc.d_model = 32;
  mc.n_layers = 2;
  mc.n_heads = 2;
  mc.max_seq_len = 64;
  mc.rac_gru_width = 16;
  mc.rac_attn_heads = 2;
  MultiHeadModel model(mc);
  SFTConfig sc;
  sc.epochs = 50;
  sc.lr = 3e-3;
  sc.lm_weight = 0.0;

  int reached = -1;
  double best = 0.0;
  supervised_train(model, train, sc, nullptr, [&](const EpochStats& s) {
    if (s.epoch == 0 || reached > 0) return;
    const double acc = evaluate_sequences(model, held_out, nullptr, 0.0, 1.0).act_accuracy;
    best = std::max(best, acc);
    if (acc >= 0.95) reached = s.epoch;
  });
  const double t = seconds_since(t0);
  const bool ok = reached > 0 && reached <= 50 && t < 300.0;
  return {ok, format("%zu train / %zu held-out turns; held-out accuracy >= 0.95 at epoch %d (best %.3f), %.1f s "
                     "(limit 300 s)",
                     train.size(), held_out.size(), reached, best, t)};
}

// ---- 6-8: benchmark runs ------------------------------------------------------------

struct Run {
  TrainLog log;
  double distinct2 = 0.0;
  double seconds = 0.0;
};

class BenchmarkRuns {
 public:
  BenchmarkRuns() : setup_(prepare_benchmark(default_benchmark_options())), train_(setup_->train_setup()) {}

  Run run(const std::string& name, const PPOConfig& config, const fs::path& run_dir = {}) {
    const auto it = cache_.find(name);
    if (it != cache_.end()) return it->second;
    const auto t0 = std::chrono::steady_clock::now();
    MultiHeadModel policy = setup_->policy;
    Run r;
    r.log = train(policy, train_, config, {run_dir, setup_->space->vocab().hash()});
    DecodingConfig greedy = config.decoding;
    greedy.temperature = 0.0;
    const auto frozen = freeze_reference(policy);
    r.distinct2 = evaluate_generation(model_responder(policy, *setup_->space, greedy), setup_->target_examples,
                                      token_embedder(frozen, setup_->space->vocab()))
                      .distinct2;
    r.seconds = seconds_since(t0);
    cache_[name] = r;
    return r;
  }

 private:
  std::unique_ptr<BenchmarkSetup> setup_;
  TrainSetup train_;
  std::map<std::string, Run> cache_;
};

BenchmarkRuns& bench() {
  static BenchmarkRuns runs;
  return runs;
}

PPOConfig full_reward_config(double beta) {
  PPOConfig c = benchmark_ppo_config();
  c.weights = {0.5, 0.15, 0.15, 0.2};
  c.beta = beta;
  return c;
}

double window_mean(const TrainLog& log, std::size_t from, std::size_t to, double StepRecord::*field) {
  double s = 0.0;
  for (std::size_t i = from; i < to; ++i) s += log.steps[i].*field;
  return s / static_cast<double>(to - from);
}

Outcome learning_curve() {
  PPOConfig c = benchmark_ppo_config();
  c.weights = {1.0, 0.0, 0.0, 0.0};
  c.beta = 0.0;
  const fs::path dir = fs::temp_directory_path() / "actgen_acceptance_curve";
  fs::remove_all(dir);
  const Run r = bench().run("rouge1", c, dir);
  const std::size_t n = r.log.steps.size(), w = n / 10;
  const double first = window_mean(r.log, 0, w, &StepRecord::mean_reward);
  const double last = window_mean(r.log, n - w, n, &StepRecord::mean_reward);
  std::ifstream in(dir / "trainlog.jsonl");
  std::size_t lines = 0;
  for (std::string l; std::getline(in, l);) ++lines;
  const bool ok = n == 200 && lines == 200 && last - first >= 0.2 && r.seconds < 900.0;
  return {ok, format("%zu steps (%zu logged), reward first 10%% %.3f, last 10%% %.3f, gain %.3f (need >= 0.2), "
                     "%.1f s (limit 900 s)",
                     n, lines, first, last, last - first, r.seconds)};
}

Outcome kl_anchoring() {
  const Run free = bench().run("full_beta0", full_reward_config(0.0));
  const Run anchored = bench().run("full_beta10", full_reward_config(10.0));
  const double kl_free = free.log.steps.back().mean_kl, kl_anchored = anchored.log.steps.back().mean_kl;

  PPOConfig a = full_reward_config(0.2);
  a.adaptive = {true, 4.0, 320.0};
  const Run adaptive = bench().run("adaptive", a);
  const std::size_t n = adaptive.log.steps.size();
  const double tail = window_mean(adaptive.log, n - 50, n, &StepRecord::mean_kl);
  const double target = a.adaptive.target_kl;
  const bool ok = kl_anchored < kl_free && tail <= 2.0 * target && tail >= target / 2.0;
  return {ok, format("final KL beta=10 %.3f < beta=0 %.3f; adaptive mean KL over final 50 steps %.3f within "
                     "[%.1f, %.1f] (target %.1f, final beta %.4f)",
                     kl_anchored, kl_free, tail, target / 2.0, 2.0 * target, target, adaptive.log.steps.back().beta)};
}

Outcome reward_pathology() {
  const Run full = bench().run("full_beta0", full_reward_config(0.0));
  PPOConfig c = full_reward_config(0.0);
  c.weights.lambda2 = 0.0;
  c.weights.lambda3 = 0.0;
  const Run rouge_only = bench().run("rouge_only", c);
  const bool ok = rouge_only.distinct2 <= 0.8 * full.distinct2;
  return {ok, format("greedy distinct-2 ROUGE-only %.4f vs full %.4f (need <= %.4f)", rouge_only.distinct2,
                     full.distinct2, 0.8 * full.distinct2)};
}

// ---- 9: reproducibility -------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome reproducibility() {
  const fs::path root = fs::temp_directory_path() / "actgen_acceptance_repro";
  fs::remove_all(root);
  std::map<std::string, std::string> overrides = {
      {"task", "benchmark"},           {"ppo.lr", "3e-3"},       {"ppo.batch_size", "8"},
      {"ppo.minibatch_size", "4"},     {"ppo.total_steps", "5"}, {"ppo.max_new_tokens", "8"},
      {"ppo.checkpoint_every", "2"},   {"ppo.beta", "0.2"},      {"seed", "99"}};
  std::vector<fs::path> dirs = {root / "a", root / "b"};
  std::ostringstream sink;
  for (const auto& d : dirs) {
    overrides["run_dir"] = d.string();
    const int code = cmd_train_ppo(load_run_config({}, {}, overrides), sink);
    if (code != 0) return {false, format("cmd_train_ppo exited with %d", code)};
  }
  std::set<std::string> names;
  for (const auto& e : fs::directory_iterator(dirs[0])) names.insert(e.path().filename().string());
  int compared = 0, differing = 0;
  bool has_log = false, has_ckpt = false;
  for (const auto& name : names) {
    if (name == "config.txt") continue;  // echoes run_dir, which differs by construction
    ++compared;
    if (slurp(dirs[0] / name) != slurp(dirs[1] / name)) ++differing;
    has_log = has_log || name == "trainlog.jsonl";
    has_ckpt = has_ckpt || name == "step-5.ckpt";
  }
  std::size_t records = 0;
  std::ifstream in(dirs[0] / "trainlog.jsonl");
  for (std::string l; std::getline(in, l);) ++records;
  const bool ok = differing == 0 && has_log && has_ckpt && records == 5;
  return {ok, format("%d artifacts compared (trainlog, reward log, checkpoints), %d differ; %zu log records", compared,
                     differing, records)};
}

// ---- 10: HOPE-shaped fixture --------------------------------------------------------

Outcome table1_fixture() {
  const fs::path p = fs::temp_directory_path() / "actgen_acceptance_hope.jsonl";
  save_corpus(p, synth::hope_shape_fixture(2024));
  const Corpus c = load_corpus(p);
  const CorpusStats s = corpus_stats(c);
  std::int64_t matrix_sum = 0, expected = 0;
  for (const auto& row : s.transitions) {
    for (auto v : row) matrix_sum += v;
  }
  for (const auto& d : c.dialogues) expected += static_cast<std::int64_t>(d.turns.size()) - 1;
  const bool ok = s.dialogues == 212 && s.utterances == 12854 && s.transitions.size() == 12 &&
                  s.transitions[0].size() == 12 && matrix_sum == expected && s.transition_total == expected;
  return {ok, format("%zu dialogues, %zu utterances (%zu therapist, %zu client), 12x12 transitions sum %lld = "
                     "sum(len-1) %lld",
                     s.dialogues, s.utterances, s.therapist_utterances, s.client_utterances,
                     static_cast<long long>(matrix_sum), static_cast<long long>(expected))};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"metric oracle equivalence", metric_oracles},
      {"relative-entropy correctness", relative_entropy_check},
      {"reward composition", reward_composition},
      {"gradient checks", gradient_checks},
      {"RAC learnability", rac_learnability},
      {"PPO learning curve", learning_curve},
      {"KL anchoring", kl_anchoring},
      {"reward-pathology reproduction", reward_pathology},
      {"end-to-end reproducibility", reproducibility},
      {"HOPE-shaped fixture", table1_fixture},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
