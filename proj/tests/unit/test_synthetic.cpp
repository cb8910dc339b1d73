#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "actgen/synthetic.hpp"
#include "actgen/vocab.hpp"

using namespace actgen;

TEST_CASE("random transition matrices are strictly positive and row-stochastic") {
  const auto m = synth::random_transition_matrix(5);
  for (const auto& row : m) {
    double s = 0.0;
    for (double p : row) {
      CHECK(p > 0.0);
      s += p;
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(synth::random_transition_matrix(5) == m);
  CHECK(synth::random_transition_matrix(6) != m);
}

TEST_CASE("markov corpus tally agrees with the corpus transitions") {
  synth::MarkovSpec s;
  s.transitions = synth::random_transition_matrix(1);
  s.dialogues = 30;
  const auto mc = synth::markov_corpus(s);
  CHECK(mc.corpus.dialogues.size() == 30);
  CHECK(validate(mc.corpus).ok());
  CHECK(act_transition_counts(mc.corpus) == mc.tally);
  for (const auto& d : mc.corpus.dialogues) {
    CHECK(d.turns.size() >= 4);
    CHECK(d.turns.size() <= 12);
    for (std::size_t t = 0; t < d.turns.size(); ++t) {
      CHECK(d.turns[t].speaker == (t % 2 == 0 ? Speaker::Therapist : Speaker::Client));
    }
  }
}

TEST_CASE("deterministic corpus follows the successor cycle") {
  const auto c = synth::deterministic_act_corpus(5, 30, 3, 9);
  CHECK(validate(c).ok());
  std::vector<bool> seen(kNumActs, false);
  DialogueAct a = DialogueAct::ID;
  for (int i = 0; i < static_cast<int>(kNumActs); ++i) {
    seen[static_cast<std::size_t>(act_index(a))] = true;
    a = synth::cycle_successor(a);
  }
  CHECK(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }));
  for (const auto& d : c.dialogues) {
    for (std::size_t t = 1; t < d.turns.size(); ++t) {
      CHECK(d.turns[t].act == synth::cycle_successor(d.turns[t - 1].act));
    }
  }
}

TEST_CASE("HOPE-shaped fixture has the published counts") {
  const auto s = corpus_stats(synth::hope_shape_fixture(1));
  CHECK(s.dialogues == 212);
  CHECK(s.utterances == 12854);
  CHECK(s.therapist_utterances == 6472);
  CHECK(s.client_utterances == 6382);
}

TEST_CASE("benchmark target is core phrase plus an act pool word; prior keeps the act word") {
  synth::BenchmarkSpec spec;
  spec.core = {"well", "i"};
  spec.pool_size = 4;
  const auto b = synth::benchmark_corpora(spec);
  REQUIRE(b.target.dialogues.size() == 40);
  REQUIRE(b.prior.dialogues.size() == 40);
  for (std::size_t d = 0; d < b.target.dialogues.size(); ++d) {
    const auto& td = b.target.dialogues[d];
    const auto& pd = b.prior.dialogues[d];
    for (std::size_t t = 0; t < td.turns.size(); ++t) {
      const auto words = tokenize(td.turns[t].text);
      REQUIRE(words.size() == 3);
      CHECK(words[0] == "well");
      CHECK(words[1] == "i");
      bool in_pool = false;
      for (int i = 0; i < 4; ++i) in_pool = in_pool || words[2] == synth::act_word(td.turns[t].act, i);
      CHECK(in_pool);

      CHECK(pd.turns[t].act == td.turns[t].act);
      const auto prior_words = tokenize(pd.turns[t].text);
      CHECK(prior_words.size() >= 1);
      CHECK(prior_words.size() <= 4);
      int pool_hits = 0;
      for (const auto& w : prior_words) {
        for (int i = 0; i < 4; ++i) pool_hits += w == synth::act_word(td.turns[t].act, i);
      }
      CHECK(pool_hits == 1);
      if (t > 0) {
        const auto succ = synth::benchmark_successors(td.turns[t - 1].act);
        CHECK(std::find(succ.begin(), succ.end(), td.turns[t].act) != succ.end());
      }
    }
  }
  CHECK(b.words.size() == 2 + spec.filler.size() + 12 * 4);
}
