#include "actgen/agent.hpp"

#include <stdexcept>

#include "actgen/sft.hpp"

namespace actgen {

ActPrediction predict_next_act(const MultiHeadModel& policy, const TokenSpace& space, const Context& context,
                               Speaker speaker, std::size_t budget) {
  std::vector<int> prefix = space.encode_context(space.fit_context(context, budget));
  prefix.push_back(Vocabulary::kSepSpeaker);
  prefix.push_back(space.role_token(speaker));
  return predict_act(policy, prefix, prefix.size());
}

AgentReply respond(const MultiHeadModel& policy, const TokenSpace& space, const Context& context, Speaker speaker,
                   const DecodingConfig& decoding, Rng& rng) {
  const auto max_len = static_cast<std::size_t>(policy.config().max_seq_len);
  const auto new_tokens = static_cast<std::size_t>(decoding.max_new_tokens);
  if (max_len < new_tokens + 6) throw std::invalid_argument("respond: max_seq_len leaves no room for a prompt");
  const Context ctx = space.fit_context(context, max_len - new_tokens - 4);

  AgentReply r;
  r.act = predict_next_act(policy, space, ctx, speaker, max_len).act;
  const auto prompt = space.encode_prompt(ctx, speaker, r.act);
  r.tokens = generate(policy, prompt, decoding, space.response_mask(), space.eos(), rng).tokens;
  r.text = space.response_text(r.tokens);
  return r;
}

}  // namespace actgen
