#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace actgen {

/// The twelve counseling dialogue-act codes.
enum class DialogueAct : int {
  ID = 0,  // information-delivery
  IRQ,     // information-request
  YNQ,     // yes/no-question
  CRQ,     // clarification-request
  ORQ,     // opinion-request
  CD,      // clarification-delivery
  PA,      // positive-answer
  NA,      // negative-answer
  OD,      // opinion-delivery
  GT,      // greeting
  ACK,     // acknowledgment
  GC,      // general chit-chat
};

inline constexpr std::size_t kNumActs = 12;

inline constexpr std::array<std::string_view, kNumActs> kActCodes = {
    "ID", "IRQ", "YNQ", "CRQ", "ORQ", "CD", "PA", "NA", "OD", "GT", "ACK", "GC"};

inline constexpr std::array<std::string_view, kNumActs> kActNames = {
    "information-delivery", "information-request", "yes/no-question",
    "clarification-request", "opinion-request", "clarification-delivery",
    "positive-answer", "negative-answer", "opinion-delivery",
    "greeting", "acknowledgment", "general chit-chat"};

inline constexpr int act_index(DialogueAct a) { return static_cast<int>(a); }

inline DialogueAct act_from_index(int i) { return static_cast<DialogueAct>(i); }

inline std::string_view act_code(DialogueAct a) { return kActCodes[static_cast<std::size_t>(a)]; }

inline std::optional<DialogueAct> parse_act(std::string_view code) {
  for (std::size_t i = 0; i < kNumActs; ++i) {
    if (kActCodes[i] == code) return static_cast<DialogueAct>(i);
  }
  return std::nullopt;
}

enum class Speaker : int { Therapist = 0, Client = 1 };

inline std::string_view speaker_name(Speaker s) {
  return s == Speaker::Therapist ? "therapist" : "client";
}

inline std::optional<Speaker> parse_speaker(std::string_view s) {
  if (s == "therapist") return Speaker::Therapist;
  if (s == "client") return Speaker::Client;
  return std::nullopt;
}

inline Speaker other(Speaker s) {
  return s == Speaker::Therapist ? Speaker::Client : Speaker::Therapist;
}

}  // namespace actgen
