#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "actgen/corpus.hpp"
#include "actgen/vocab.hpp"

namespace actgen {

// Model token space: the text vocabulary followed by two role tokens and twelve act tokens.
//
//   turn     = SEP_SPK role SEP_ACT act w1 .. wn
//   context  = BOS turn*
//   prompt   = context SEP_SPK next_role SEP_ACT predicted_act
//   response = w1 .. wn EOS
class TokenSpace {
 public:
  explicit TokenSpace(Vocabulary vocab);

  const Vocabulary& vocab() const { return vocab_; }
  int model_vocab_size() const { return text_size_ + 2 + static_cast<int>(kNumActs); }

  int role_token(Speaker s) const { return text_size_ + static_cast<int>(s); }
  int act_token(DialogueAct a) const { return text_size_ + 2 + act_index(a); }
  int eos() const { return Vocabulary::kEos; }

  /// Tokens the LM-Head may emit inside a response: surface words, UNK and EOS.
  const std::vector<bool>& response_mask() const { return response_mask_; }

  std::vector<int> encode_turn(const ContextTurn& turn) const;
  std::vector<int> encode_context(const Context& context) const;
  /// Context followed by the header that announces the next speaker and its act.
  std::vector<int> encode_prompt(const Context& context, Speaker next, DialogueAct act) const;
  /// Number of prompt tokens the RAC-Head reads: the context plus SEP_SPK and the next role.
  static std::size_t rac_length(std::size_t prompt_length) { return prompt_length - 2; }

  /// Surface words of `text` (at most max_words), terminated by EOS.
  std::vector<int> encode_response(std::string_view text, std::size_t max_words) const;

  /// Input for the reference act classifier: context, speaker header, response words, EOS.
  std::vector<int> encode_classifier_input(const Context& context, Speaker speaker,
                                           const std::vector<int>& response) const;

  /// Surface words of a response id sequence (EOS and anything after it dropped).
  std::vector<std::string> response_words(const std::vector<int>& response) const;
  std::string response_text(const std::vector<int>& response) const;

  /// Drops the oldest turns until the encoded context fits in `budget` tokens.
  /// A single turn longer than the budget keeps only its most recent tokens.
  Context fit_context(const Context& context, std::size_t budget) const;

 private:
  Vocabulary vocab_;
  int text_size_;
  std::vector<bool> response_mask_;
};

/// One supervised target: generate turn t of a dialogue from the window ending at t-1.
struct TurnExample {
  std::string dialogue_id;
  int turn_index = 0;
  Context context;
  Speaker speaker = Speaker::Therapist;
  DialogueAct act = DialogueAct::ID;
  std::string response;
};

/// Every turn with at least one preceding turn becomes an example.
std::vector<TurnExample> turn_examples(const Corpus& corpus, std::size_t k);

/// Token sequence with the spans each loss reads. response_start == 0 disables the LM loss;
/// act < 0 disables the act loss.
struct SequenceExample {
  std::vector<int> tokens;
  std::size_t response_start = 0;
  std::size_t rac_length = 0;
  int act = -1;
};

struct EncodingLimits {
  std::size_t max_seq_len = 256;
  std::size_t max_response_words = 24;
};

/// Prompt (with the gold act) plus the gold response; trains LM-Head and RAC-Head jointly.
SequenceExample policy_sequence(const TokenSpace& space, const TurnExample& ex, const EncodingLimits& limits);
/// Context plus gold response; trains the reference act classifier on the final position.
SequenceExample classifier_sequence(const TokenSpace& space, const TurnExample& ex, const EncodingLimits& limits);

}  // namespace actgen
