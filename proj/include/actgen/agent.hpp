#pragma once

#include <string>
#include <vector>

#include "actgen/encoding.hpp"
#include "actgen/model.hpp"

namespace actgen {

struct AgentReply {
  DialogueAct act = DialogueAct::ID;
  std::vector<int> tokens;  // response ids, EOS included when emitted
  std::string text;
};

/// One agent turn: the RAC-Head picks the act for `speaker`, then the LM-Head writes the
/// response under that act. The context is trimmed to leave room for max_new_tokens.
AgentReply respond(const MultiHeadModel& policy, const TokenSpace& space, const Context& context, Speaker speaker,
                   const DecodingConfig& decoding, Rng& rng);

/// RAC-Head prediction for the next turn of `speaker` after `context`.
ActPrediction predict_next_act(const MultiHeadModel& policy, const TokenSpace& space, const Context& context,
                               Speaker speaker, std::size_t budget);

}  // namespace actgen
