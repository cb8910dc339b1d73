#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "actgen/corpus.hpp"

// Generators for corpora with known structure. Used by tests, the benchmark runs and
// the `synth` command.
namespace actgen::synth {

using ActMatrix = std::array<std::array<double, kNumActs>, kNumActs>;

/// Row-stochastic matrix with every entry positive, drawn from the seed.
ActMatrix random_transition_matrix(std::uint64_t seed);

/// Act successor cycle through all twelve acts, with IRQ -> ID among its steps.
DialogueAct cycle_successor(DialogueAct a);

/// Pseudo-word `i` of an act-specific lexicon, e.g. "irq3".
std::string act_word(DialogueAct a, int i);

struct MarkovSpec {
  ActMatrix transitions{};
  int dialogues = 50;
  int min_turns = 4;
  int max_turns = 12;
  int words_per_turn = 5;
  int lexicon_per_act = 8;
  std::uint64_t seed = 1;
};

struct MarkovCorpus {
  Corpus corpus;
  TransitionMatrix tally{};  // generator-side count of every transition it sampled
};

/// Acts follow a Markov chain (uniform start act); speakers alternate from the therapist;
/// each turn's words come from its act's lexicon.
MarkovCorpus markov_corpus(const MarkovSpec& spec);

/// Next act is cycle_successor of the current one, so the response-act is a deterministic
/// function of the last act in the context.
Corpus deterministic_act_corpus(int dialogues, int turns, int lexicon_per_act, std::uint64_t seed);

/// Corpus with the shape of the HOPE release: 212 dialogues, 12854 utterances,
/// 6472 therapist and 6382 client turns.
Corpus hope_shape_fixture(std::uint64_t seed);

inline constexpr int kHopeDialogues = 212;
inline constexpr int kHopeUtterances = 12854;
inline constexpr int kHopeTherapist = 6472;
inline constexpr int kHopeClient = 6382;

/// Generation benchmark with a known target continuation.
///
/// Each act has three possible successors. A gold response is a fixed core phrase shared by
/// every turn followed by one word drawn from the act's pool. The prior corpus keeps the
/// dialogue structure, but each response is one pool word of its act mixed into random core and
/// filler words: a policy trained on it is act-aware yet starts far from the target phrasing.
struct BenchmarkSpec {
  int dialogues = 40;
  int turns = 6;
  int pool_size = 8;
  std::vector<std::string> core = {"well", "i", "see"};
  std::vector<std::string> filler = {"so", "um", "yeah", "okay", "right", "like"};
  int prior_min_filler = 0;
  int prior_max_filler = 3;
  std::uint64_t seed = 11;
};

struct Benchmark {
  Corpus target;
  Corpus prior;
  std::vector<std::string> words;  // every surface word the benchmark uses
};

Benchmark benchmark_corpora(const BenchmarkSpec& spec);

/// Successor set used by the benchmark.
std::array<DialogueAct, 3> benchmark_successors(DialogueAct a);

}  // namespace actgen::synth
