#include <doctest.h>

#include <filesystem>
#include <set>
#include <sstream>

#include "actgen/corpus.hpp"
#include "actgen/encoding.hpp"
#include "actgen/errors.hpp"
#include "actgen/vocab.hpp"

using namespace actgen;

namespace {

std::string record(const std::string& d, int t, const std::string& spk, const std::string& text,
                   const std::string& act) {
  return R"({"dialogue_id":")" + d + R"(","turn_index":)" + std::to_string(t) + R"(,"speaker":")" + spk +
         R"(","text":")" + text + R"(","act":")" + act + "\"}\n";
}

Corpus parse(const std::string& s) {
  std::istringstream in(s);
  return parse_corpus(in, "mem");
}

Dialogue make_dialogue(const std::string& id, int n) {
  Dialogue d{id, {}};
  for (int t = 0; t < n; ++t) {
    d.turns.push_back({id, t, t % 2 ? Speaker::Client : Speaker::Therapist, "turn " + std::to_string(t),
                       act_from_index(t % 12)});
  }
  return d;
}

}  // namespace

TEST_CASE("minimal corpus loads") {
  const auto c = parse(record("d1", 0, "therapist", "hello there", "GT") + record("d1", 1, "client", "hi", "GT"));
  REQUIRE(c.dialogues.size() == 1);
  CHECK(c.utterance_count() == 2);
  CHECK(c.dialogues[0].turns[1].speaker == Speaker::Client);
  CHECK(validate(c).ok());
}

TEST_CASE("turns are ordered by index regardless of file order") {
  const auto c = parse(record("d1", 1, "client", "b", "ID") + record("d2", 0, "client", "x", "ID") +
                       record("d1", 0, "therapist", "a", "IRQ") + record("d2", 1, "therapist", "y", "ACK"));
  REQUIRE(c.dialogues.size() == 2);
  CHECK(c.dialogues[0].id == "d1");
  CHECK(c.dialogues[0].turns[0].text == "a");
}

TEST_CASE("load errors name the line") {
  const std::string good = record("d1", 0, "therapist", "a", "ID");
  auto msg = [](const std::string& s) {
    try {
      parse(s);
    } catch (const DataError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(msg(good + record("d1", 1, "client", "b", "XYZ")).find("mem:2") != std::string::npos);
  CHECK(msg(good + record("d1", 1, "client", "b", "XYZ")).find("XYZ") != std::string::npos);
  CHECK(msg(good + "{not json\n").find("mem:2") != std::string::npos);
  CHECK(msg(good + good).find("duplicate") != std::string::npos);
  CHECK(msg(good + R"({"dialogue_id":"d1","turn_index":1,"speaker":"client","text":"b"})" "\n")
            .find("mem:2") != std::string::npos);
  CHECK(msg(good + R"({"dialogue_id":"d1","turn_index":1,"speaker":"client","text":"b","act":["ID","PA"]})" "\n")
            .find("mem:2") != std::string::npos);
  CHECK(msg(good + record("d1", 1, "doctor", "b", "ID")).find("mem:2") != std::string::npos);
}

TEST_CASE("validation reports gaps, blank text, short dialogues and duplicate ids") {
  Corpus ok;
  ok.dialogues.push_back(make_dialogue("a", 3));
  CHECK(validate(ok).ok());

  Corpus gap;
  gap.dialogues.push_back(make_dialogue("a", 3));
  gap.dialogues[0].turns.erase(gap.dialogues[0].turns.begin() + 1);
  auto r = validate(gap);
  REQUIRE(r.violations.size() == 1);
  CHECK(r.violations[0].kind == Violation::Kind::TurnGap);
  CHECK(r.violations[0].turn_index == 1);

  Corpus blank;
  blank.dialogues.push_back(make_dialogue("a", 2));
  blank.dialogues[0].turns[1].text = "  ";
  r = validate(blank);
  REQUIRE(r.violations.size() == 1);
  CHECK(r.violations[0].kind == Violation::Kind::EmptyText);

  Corpus misc;
  misc.dialogues.push_back(make_dialogue("a", 1));
  misc.dialogues.push_back(make_dialogue("b", 2));
  misc.dialogues.push_back(make_dialogue("b", 2));
  r = validate(misc);
  CHECK(r.violations.size() == 2);
}

TEST_CASE("canonical serialization round trips byte for byte") {
  Corpus c;
  for (int i = 0; i < 5; ++i) c.dialogues.push_back(make_dialogue("dlg" + std::to_string(i), 3 + i));
  c.dialogues[2].turns[1].text = "quotes \" and unicode caf\xc3\xa9";
  std::ostringstream a;
  write_corpus(a, c);
  std::istringstream in(a.str());
  const auto back = parse_corpus(in);
  std::ostringstream b;
  write_corpus(b, back);
  CHECK(a.str() == b.str());
  CHECK(back.dialogues == c.dialogues);
}

TEST_CASE("split is a deterministic dialogue-level partition") {
  Corpus c;
  for (int i = 0; i < 212; ++i) c.dialogues.push_back(make_dialogue("d" + std::to_string(i), 2 + i % 5));
  const SplitFractions table{149.0 / 213.0, 21.0 / 213.0, 43.0 / 213.0};
  const auto [tr, va, te] = split(c, table, 7);
  CHECK(std::abs(static_cast<int>(tr.dialogues.size()) - 149) <= 1);
  CHECK(std::abs(static_cast<int>(va.dialogues.size()) - 21) <= 1);
  CHECK(std::abs(static_cast<int>(te.dialogues.size()) - 43) <= 1);
  CHECK(tr.utterance_count() + va.utterance_count() + te.utterance_count() == c.utterance_count());
  std::set<std::string> ids;
  for (const auto* part : {&tr, &va, &te}) {
    for (const auto& d : part->dialogues) CHECK(ids.insert(d.id).second);
  }
  CHECK(ids.size() == 212);

  const auto [tr2, va2, te2] = split(c, table, 7);
  CHECK(tr2.dialogues == tr.dialogues);
  CHECK(te2.dialogues == te.dialogues);

  const auto [all, none1, none2] = split(c, {1, 0, 0}, 3);
  CHECK(all.dialogues.size() == 212);
  CHECK(none1.dialogues.empty());
  CHECK(none2.dialogues.empty());
  CHECK_THROWS_AS(split(c, {0.5, 0.2, 0.2}, 1), ConfigError);
}

TEST_CASE("context windows") {
  const auto d = make_dialogue("a", 8);
  CHECK(context_window(d, 0, 4).window.size() == 1);
  const auto w = context_window(d, 5, 3);
  REQUIRE(w.window.size() == 3);
  CHECK(w.window[0].text == "turn 3");
  CHECK(w.window[2].text == "turn 5");
  CHECK(w.window[2].act == d.turns[5].act);
  const auto three = make_dialogue("b", 3);
  CHECK(context_window(three, 2, 10).window.size() == 3);
  CHECK_THROWS_AS(context_window(three, 3, 2), std::out_of_range);
  for (std::size_t t = 0; t < d.size(); ++t) {
    for (std::size_t k = 1; k < 10; ++k) CHECK(context_window(d, t, k).window.size() == std::min(k, t + 1));
  }
}

TEST_CASE("transition counts") {
  Corpus one;
  one.dialogues.push_back(make_dialogue("a", 2));
  one.dialogues[0].turns[0].act = DialogueAct::IRQ;
  one.dialogues[0].turns[1].act = DialogueAct::ID;
  const auto m = act_transition_counts(one);
  std::int64_t total = 0;
  for (const auto& row : m) {
    for (auto v : row) total += v;
  }
  CHECK(total == 1);
  CHECK(m[act_index(DialogueAct::IRQ)][act_index(DialogueAct::ID)] == 1);

  const auto zero = act_transition_counts(Corpus{});
  for (const auto& row : zero) {
    for (auto v : row) CHECK(v == 0);
  }
}

TEST_CASE("vocabulary ordering, filtering and encoding") {
  Corpus c;
  c.dialogues.push_back({"a", {{"a", 0, Speaker::Therapist, "hello hello world", DialogueAct::GT},
                               {"a", 1, Speaker::Client, "Hello, there!", DialogueAct::GT}}});
  const auto v = build_vocab(c, 20, 1);
  CHECK(v.id("hello") < v.id("world"));
  CHECK(v.id("hello") == static_cast<int>(Vocabulary::kNumSpecial));
  CHECK(v.id("zebra") == Vocabulary::kUnk);
  const auto v2 = build_vocab(c, 20, 2);
  CHECK(v2.contains("hello"));
  CHECK_FALSE(v2.contains("world"));
  CHECK(build_vocab(c, 8, 1).size() == 8);
  CHECK_THROWS(build_vocab(c, 7, 1));

  CHECK(tokenize("Don't STOP, now.") == std::vector<std::string>{"don't", "stop", ",", "now", "."});
  const std::vector<std::string> toks = {"hello", "world", ",", "there"};
  CHECK(v.decode(v.encode(toks)) == toks);

  const auto path = std::filesystem::temp_directory_path() / "actgen_vocab_test.txt";
  v.save(path);
  const auto back = Vocabulary::load(path);
  CHECK(back == v);
  CHECK(back.hash() == v.hash());
  CHECK(v2.hash() != v.hash());
  std::filesystem::remove(path);
}

TEST_CASE("token space encodes turns, prompts and responses") {
  const Vocabulary v(std::vector<std::string>{"i", "feel", "sad", "ok"});
  const TokenSpace space(v);
  CHECK(space.model_vocab_size() == 10 + 14);
  Context ctx;
  ctx.window.push_back({Speaker::Client, "i feel sad", DialogueAct::ID});
  const auto prompt = space.encode_prompt(ctx, Speaker::Therapist, DialogueAct::IRQ);
  const std::vector<int> expect = {Vocabulary::kBos, Vocabulary::kSepSpeaker, space.role_token(Speaker::Client),
                                   Vocabulary::kSepAct, space.act_token(DialogueAct::ID), 6, 7, 8,
                                   Vocabulary::kSepSpeaker, space.role_token(Speaker::Therapist),
                                   Vocabulary::kSepAct, space.act_token(DialogueAct::IRQ)};
  CHECK(prompt == expect);
  CHECK(TokenSpace::rac_length(prompt.size()) == prompt.size() - 2);

  const auto resp = space.encode_response("ok ok ok ok", 2);
  CHECK(resp == std::vector<int>{9, 9, Vocabulary::kEos});
  CHECK(space.response_text(resp) == "ok ok");
  const auto& mask = space.response_mask();
  CHECK(mask[Vocabulary::kEos]);
  CHECK(mask[Vocabulary::kUnk]);
  CHECK_FALSE(mask[Vocabulary::kBos]);
  CHECK_FALSE(mask[static_cast<std::size_t>(space.act_token(DialogueAct::GC))]);

  Context longer;
  for (int i = 0; i < 6; ++i) longer.window.push_back({Speaker::Client, "i feel sad", DialogueAct::ID});
  const auto fit = space.fit_context(longer, 20);
  CHECK(space.encode_context(fit).size() <= 20);
  CHECK(fit.window.size() == 2);

  Dialogue d{"x", {{"x", 0, Speaker::Client, "i feel sad", DialogueAct::ID},
                   {"x", 1, Speaker::Therapist, "ok", DialogueAct::ACK}}};
  Corpus c;
  c.dialogues.push_back(d);
  const auto ex = turn_examples(c, 4);
  REQUIRE(ex.size() == 1);
  const auto seq = policy_sequence(space, ex[0], {});
  CHECK(seq.tokens.back() == Vocabulary::kEos);
  CHECK(seq.tokens[seq.response_start] == 9);
  CHECK(seq.act == act_index(DialogueAct::ACK));
  const auto cls = classifier_sequence(space, ex[0], {});
  CHECK(cls.response_start == 0);
  CHECK(cls.rac_length == cls.tokens.size());
}
