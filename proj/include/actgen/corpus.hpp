#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <tuple>
#include <vector>

#include "actgen/acts.hpp"

namespace actgen {

struct Utterance {
  std::string dialogue_id;
  int turn_index = 0;
  Speaker speaker = Speaker::Therapist;
  std::string text;
  DialogueAct act = DialogueAct::ID;

  bool operator==(const Utterance&) const = default;
};

struct Dialogue {
  std::string id;
  std::vector<Utterance> turns;

  std::size_t size() const { return turns.size(); }
  bool operator==(const Dialogue&) const = default;
};

enum class SplitTag { Train, Validation, Test, Unsplit };

struct Corpus {
  std::vector<Dialogue> dialogues;
  SplitTag split_tag = SplitTag::Unsplit;

  std::size_t utterance_count() const;
};

struct ContextTurn {
  Speaker speaker = Speaker::Therapist;
  std::string text;
  DialogueAct act = DialogueAct::ID;

  bool operator==(const ContextTurn&) const = default;
};

/// Last-k window of a dialogue, oldest turn first.
struct Context {
  std::vector<ContextTurn> window;
  std::size_t k = 4;
};

struct Violation {
  enum class Kind { TurnGap, EmptyText, TooFewTurns, DuplicateDialogue };
  Kind kind;
  std::string dialogue_id;
  int turn_index;  // offending (or missing) index; -1 when not turn-specific
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

using TransitionMatrix = std::array<std::array<std::int64_t, kNumActs>, kNumActs>;

// Parsing throws DataError naming the 1-based line number.
Corpus load_corpus(const std::filesystem::path& path);
Corpus parse_corpus(std::istream& in, const std::string& source_name = "<stream>");

// Canonical form: dialogues in corpus order, turns by index, fixed key order.
std::string serialize_utterance(const Utterance& u);
void write_corpus(std::ostream& out, const Corpus& corpus);
void save_corpus(const std::filesystem::path& path, const Corpus& corpus);

ValidationReport validate(const Corpus& corpus);

struct SplitFractions {
  double train = 1.0;
  double validation = 0.0;
  double test = 0.0;
};

/// Dialogue-level partition; deterministic for a given seed.
std::tuple<Corpus, Corpus, Corpus> split(const Corpus& corpus, SplitFractions fractions,
                                         std::uint64_t seed);

Context context_window(const Dialogue& dialogue, std::size_t t, std::size_t k);

/// The last k turns of a dialogue (all of them when shorter); context for the next turn.
Context recent_context(const Dialogue& dialogue, std::size_t k);

TransitionMatrix act_transition_counts(const Corpus& corpus);

struct CorpusStats {
  std::size_t dialogues = 0;
  std::size_t utterances = 0;
  std::size_t therapist_utterances = 0;
  std::size_t client_utterances = 0;
  std::array<std::size_t, kNumActs> act_counts{};
  TransitionMatrix transitions{};
  std::int64_t transition_total = 0;
};

CorpusStats corpus_stats(const Corpus& corpus);

}  // namespace actgen
