#include "actgen/encoding.hpp"

#include <stdexcept>

namespace actgen {

TokenSpace::TokenSpace(Vocabulary vocab) : vocab_(std::move(vocab)), text_size_(static_cast<int>(vocab_.size())) {
  response_mask_.assign(static_cast<std::size_t>(model_vocab_size()), false);
  for (int id = static_cast<int>(Vocabulary::kNumSpecial); id < text_size_; ++id) {
    response_mask_[static_cast<std::size_t>(id)] = true;
  }
  response_mask_[Vocabulary::kUnk] = true;
  response_mask_[Vocabulary::kEos] = true;
}

std::vector<int> TokenSpace::encode_turn(const ContextTurn& turn) const {
  std::vector<int> out = {Vocabulary::kSepSpeaker, role_token(turn.speaker), Vocabulary::kSepAct,
                          act_token(turn.act)};
  const auto words = vocab_.encode_text(turn.text);
  out.insert(out.end(), words.begin(), words.end());
  return out;
}

std::vector<int> TokenSpace::encode_context(const Context& context) const {
  std::vector<int> out = {Vocabulary::kBos};
  for (const auto& turn : context.window) {
    const auto t = encode_turn(turn);
    out.insert(out.end(), t.begin(), t.end());
  }
  return out;
}

std::vector<int> TokenSpace::encode_prompt(const Context& context, Speaker next, DialogueAct act) const {
  auto out = encode_context(context);
  out.insert(out.end(), {Vocabulary::kSepSpeaker, role_token(next), Vocabulary::kSepAct, act_token(act)});
  return out;
}

std::vector<int> TokenSpace::encode_response(std::string_view text, std::size_t max_words) const {
  auto ids = vocab_.encode_text(text);
  if (ids.size() > max_words) ids.resize(max_words);
  ids.push_back(Vocabulary::kEos);
  return ids;
}

std::vector<int> TokenSpace::encode_classifier_input(const Context& context, Speaker speaker,
                                                     const std::vector<int>& response) const {
  auto out = encode_context(context);
  out.insert(out.end(), {Vocabulary::kSepSpeaker, role_token(speaker), Vocabulary::kSepAct});
  for (int id : response) {
    if (id == Vocabulary::kEos) break;
    out.push_back(id);
  }
  out.push_back(Vocabulary::kEos);
  return out;
}

std::vector<std::string> TokenSpace::response_words(const std::vector<int>& response) const {
  std::vector<std::string> out;
  for (int id : response) {
    if (id == Vocabulary::kEos) break;
    if (id >= 0 && id < text_size_) out.push_back(vocab_.token(id));
  }
  return out;
}

std::string TokenSpace::response_text(const std::vector<int>& response) const {
  std::string out;
  for (const auto& w : response_words(response)) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

Context TokenSpace::fit_context(const Context& context, std::size_t budget) const {
  if (budget < 1) throw std::invalid_argument("context budget must leave room for BOS");
  Context out = context;
  while (!out.window.empty() && encode_context(out).size() > budget) {
    if (out.window.size() == 1) {
      // Keep the most recent words of the lone turn: BOS + 4 header tokens + words.
      auto words = tokenize(out.window.front().text);
      const std::size_t room = budget > 5 ? budget - 5 : 0;
      if (room == 0) {
        out.window.clear();
        break;
      }
      std::string kept;
      for (std::size_t i = words.size() - std::min(words.size(), room); i < words.size(); ++i) {
        if (!kept.empty()) kept += ' ';
        kept += words[i];
      }
      out.window.front().text = kept;
      break;
    }
    out.window.erase(out.window.begin());
  }
  return out;
}

std::vector<TurnExample> turn_examples(const Corpus& corpus, std::size_t k) {
  std::vector<TurnExample> out;
  for (const auto& d : corpus.dialogues) {
    for (std::size_t t = 1; t < d.turns.size(); ++t) {
      TurnExample ex;
      ex.dialogue_id = d.id;
      ex.turn_index = d.turns[t].turn_index;
      ex.context = context_window(d, t - 1, k);
      ex.speaker = d.turns[t].speaker;
      ex.act = d.turns[t].act;
      ex.response = d.turns[t].text;
      out.push_back(std::move(ex));
    }
  }
  return out;
}

SequenceExample policy_sequence(const TokenSpace& space, const TurnExample& ex, const EncodingLimits& limits) {
  auto response = space.encode_response(ex.response, limits.max_response_words);
  if (response.size() + 5 > limits.max_seq_len) throw std::invalid_argument("max_seq_len too small for response");
  const Context ctx = space.fit_context(ex.context, limits.max_seq_len - response.size() - 4);
  SequenceExample s;
  s.tokens = space.encode_prompt(ctx, ex.speaker, ex.act);
  s.response_start = s.tokens.size();
  s.rac_length = TokenSpace::rac_length(s.tokens.size());
  s.act = act_index(ex.act);
  s.tokens.insert(s.tokens.end(), response.begin(), response.end());
  return s;
}

SequenceExample classifier_sequence(const TokenSpace& space, const TurnExample& ex, const EncodingLimits& limits) {
  const auto response = space.encode_response(ex.response, limits.max_response_words);
  if (response.size() + 4 > limits.max_seq_len) throw std::invalid_argument("max_seq_len too small for response");
  const Context ctx = space.fit_context(ex.context, limits.max_seq_len - response.size() - 3);
  SequenceExample s;
  s.tokens = space.encode_classifier_input(ctx, ex.speaker, response);
  s.rac_length = s.tokens.size();
  s.act = act_index(ex.act);
  return s;
}

}  // namespace actgen
