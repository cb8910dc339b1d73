#include "actgen/synthetic.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>

#include "actgen/rng.hpp"

namespace actgen::synth {

namespace {

DialogueAct sample_row(const std::array<double, kNumActs>& row, Rng& rng) {
  double u = rng.uniform();
  for (std::size_t j = 0; j < kNumActs; ++j) {
    u -= row[j];
    if (u < 0.0) return act_from_index(static_cast<int>(j));
  }
  return act_from_index(static_cast<int>(kNumActs) - 1);
}

std::string dialogue_name(const std::string& prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%04d", prefix.c_str(), i);
  return buf;
}

std::string act_text(DialogueAct a, int words, int lexicon, Rng& rng) {
  std::string out;
  for (int w = 0; w < words; ++w) {
    if (!out.empty()) out += ' ';
    out += act_word(a, static_cast<int>(rng.below(static_cast<std::uint64_t>(lexicon))));
  }
  return out;
}

}  // namespace

ActMatrix random_transition_matrix(std::uint64_t seed) {
  Rng rng(seed);
  ActMatrix m{};
  for (auto& row : m) {
    double total = 0.0;
    for (auto& v : row) {
      v = 0.05 + rng.uniform();
      total += v;
    }
    for (auto& v : row) v /= total;
  }
  return m;
}

DialogueAct cycle_successor(DialogueAct a) {
  using A = DialogueAct;
  static constexpr std::array<A, kNumActs> order = {A::IRQ, A::ID, A::ACK, A::YNQ, A::PA, A::ORQ,
                                                    A::OD,  A::CRQ, A::CD, A::GT, A::GC, A::NA};
  const auto it = std::find(order.begin(), order.end(), a);
  const auto next = (static_cast<std::size_t>(it - order.begin()) + 1) % kNumActs;
  return order[next];
}

std::string act_word(DialogueAct a, int i) {
  std::string code(act_code(a));
  for (auto& c : code) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return code + std::to_string(i);
}

MarkovCorpus markov_corpus(const MarkovSpec& spec) {
  Rng rng(spec.seed);
  MarkovCorpus out;
  for (int d = 0; d < spec.dialogues; ++d) {
    Dialogue dlg;
    dlg.id = dialogue_name("markov_", d);
    const int span = std::max(0, spec.max_turns - spec.min_turns);
    const int n = spec.min_turns + static_cast<int>(rng.below(static_cast<std::uint64_t>(span + 1)));
    DialogueAct act = act_from_index(static_cast<int>(rng.below(kNumActs)));
    for (int t = 0; t < n; ++t) {
      if (t > 0) {
        const DialogueAct next = sample_row(spec.transitions[static_cast<std::size_t>(act_index(act))], rng);
        ++out.tally[static_cast<std::size_t>(act_index(act))][static_cast<std::size_t>(act_index(next))];
        act = next;
      }
      dlg.turns.push_back({dlg.id, t, t % 2 == 0 ? Speaker::Therapist : Speaker::Client,
                           act_text(act, spec.words_per_turn, spec.lexicon_per_act, rng), act});
    }
    out.corpus.dialogues.push_back(std::move(dlg));
  }
  return out;
}

Corpus deterministic_act_corpus(int dialogues, int turns, int lexicon_per_act, std::uint64_t seed) {
  Rng rng(seed);
  Corpus c;
  for (int d = 0; d < dialogues; ++d) {
    Dialogue dlg;
    dlg.id = dialogue_name("cycle_", d);
    DialogueAct act = act_from_index(static_cast<int>(rng.below(kNumActs)));
    for (int t = 0; t < turns; ++t) {
      if (t > 0) act = cycle_successor(act);
      const int words = 2 + static_cast<int>(rng.below(4));
      dlg.turns.push_back({dlg.id, t, t % 2 == 0 ? Speaker::Therapist : Speaker::Client,
                           act_text(act, words, lexicon_per_act, rng), act});
    }
    c.dialogues.push_back(std::move(dlg));
  }
  return c;
}

Corpus hope_shape_fixture(std::uint64_t seed) {
  // 134 dialogues of 61 turns and 78 of 60 give 12854 utterances. Odd-length dialogues
  // that open with the therapist add one therapist turn; 22 of them open with the client
  // instead, leaving a surplus of 112 - 22 = 90 = 6472 - 6382.
  constexpr int kLong = 134;
  constexpr int kClientFirst = 22;
  Rng rng(seed);
  std::vector<int> kind(kHopeDialogues);  // 0: 60 turns, 1: 61 turns therapist first, 2: 61 client first
  for (int i = 0; i < kHopeDialogues; ++i) kind[static_cast<std::size_t>(i)] = i < kLong - kClientFirst ? 1 : (i < kLong ? 2 : 0);
  rng.shuffle(kind.begin(), kind.end());

  const ActMatrix transitions = random_transition_matrix(mix_seed(seed, 1));
  Corpus c;
  for (int d = 0; d < kHopeDialogues; ++d) {
    const int k = kind[static_cast<std::size_t>(d)];
    Dialogue dlg;
    dlg.id = dialogue_name("hope_", d);
    const int n = k == 0 ? 60 : 61;
    const int first = k == 2 ? 1 : 0;
    DialogueAct act = act_from_index(static_cast<int>(rng.below(kNumActs)));
    for (int t = 0; t < n; ++t) {
      if (t > 0) act = sample_row(transitions[static_cast<std::size_t>(act_index(act))], rng);
      const Speaker s = (t + first) % 2 == 0 ? Speaker::Therapist : Speaker::Client;
      const int words = 3 + static_cast<int>(rng.below(6));
      dlg.turns.push_back({dlg.id, t, s, act_text(act, words, 20, rng), act});
    }
    c.dialogues.push_back(std::move(dlg));
  }
  return c;
}

std::array<DialogueAct, 3> benchmark_successors(DialogueAct a) {
  const int i = act_index(a);
  return {act_from_index((i + 1) % 12), act_from_index((i + 4) % 12), act_from_index((i + 7) % 12)};
}

Benchmark benchmark_corpora(const BenchmarkSpec& spec) {
  Benchmark b;
  b.words = spec.core;
  b.words.insert(b.words.end(), spec.filler.begin(), spec.filler.end());
  std::vector<std::string> noise_words = b.words;
  for (std::size_t a = 0; a < kNumActs; ++a) {
    for (int i = 0; i < spec.pool_size; ++i) b.words.push_back(act_word(act_from_index(static_cast<int>(a)), i));
  }
  Rng rng(spec.seed);
  Rng prior_rng(mix_seed(spec.seed, 7));
  for (int d = 0; d < spec.dialogues; ++d) {
    Dialogue target;
    target.id = dialogue_name("bench_", d);
    Dialogue prior;
    prior.id = target.id;
    DialogueAct act = act_from_index(static_cast<int>(rng.below(kNumActs)));
    for (int t = 0; t < spec.turns; ++t) {
      if (t > 0) act = benchmark_successors(act)[rng.below(3)];
      const Speaker s = t % 2 == 0 ? Speaker::Therapist : Speaker::Client;
      std::string gold;
      for (const auto& w : spec.core) gold += w + " ";
      gold += act_word(act, static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.pool_size))));
      target.turns.push_back({target.id, t, s, gold, act});

      const int span = std::max(0, spec.prior_max_filler - spec.prior_min_filler);
      const int filler = spec.prior_min_filler + static_cast<int>(prior_rng.below(static_cast<std::uint64_t>(span + 1)));
      std::vector<std::string> words;
      for (int w = 0; w < filler; ++w) words.push_back(noise_words[prior_rng.below(noise_words.size())]);
      const auto at = static_cast<long>(prior_rng.below(static_cast<std::uint64_t>(filler + 1)));
      words.insert(words.begin() + at,
                   act_word(act, static_cast<int>(prior_rng.below(static_cast<std::uint64_t>(spec.pool_size)))));
      std::string noise;
      for (const auto& w : words) noise += (noise.empty() ? "" : " ") + w;
      prior.turns.push_back({prior.id, t, s, noise, act});
    }
    b.target.dialogues.push_back(std::move(target));
    b.prior.dialogues.push_back(std::move(prior));
  }
  return b;
}

}  // namespace actgen::synth
