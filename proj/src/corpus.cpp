#include "actgen/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "actgen/errors.hpp"
#include "actgen/rng.hpp"

namespace actgen {

using nlohmann::json;

std::size_t Corpus::utterance_count() const {
  std::size_t n = 0;
  for (const auto& d : dialogues) n += d.turns.size();
  return n;
}

namespace {

[[noreturn]] void fail_line(const std::string& source, std::size_t line_no, const std::string& what) {
  throw DataError(source + ":" + std::to_string(line_no) + ": " + what);
}

Utterance parse_record(const std::string& line, const std::string& source, std::size_t line_no) {
  json rec;
  try {
    rec = json::parse(line);
  } catch (const json::parse_error& e) {
    fail_line(source, line_no, std::string("malformed record: ") + e.what());
  }
  if (!rec.is_object()) fail_line(source, line_no, "malformed record: expected an object");

  auto require = [&](const char* key) -> const json& {
    auto it = rec.find(key);
    if (it == rec.end()) fail_line(source, line_no, std::string("malformed record: missing field '") + key + "'");
    return *it;
  };

  Utterance u;
  const auto& id = require("dialogue_id");
  if (!id.is_string()) fail_line(source, line_no, "malformed record: dialogue_id must be a string");
  u.dialogue_id = id.get<std::string>();

  const auto& turn = require("turn_index");
  if (!turn.is_number_integer() || turn.get<long long>() < 0) {
    fail_line(source, line_no, "malformed record: turn_index must be a non-negative integer");
  }
  u.turn_index = turn.get<int>();

  const auto& spk = require("speaker");
  if (!spk.is_string()) fail_line(source, line_no, "malformed record: speaker must be a string");
  auto speaker = parse_speaker(spk.get<std::string>());
  if (!speaker) fail_line(source, line_no, "unknown speaker '" + spk.get<std::string>() + "'");
  u.speaker = *speaker;

  const auto& text = require("text");
  if (!text.is_string()) fail_line(source, line_no, "malformed record: text must be a string");
  u.text = text.get<std::string>();

  const auto& act = require("act");
  if (act.is_array()) fail_line(source, line_no, "multi-label act is not supported");
  if (!act.is_string()) fail_line(source, line_no, "malformed record: act must be a string");
  auto code = parse_act(act.get<std::string>());
  if (!code) fail_line(source, line_no, "unknown act '" + act.get<std::string>() + "'");
  u.act = *code;
  return u;
}

bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

}  // namespace

Corpus parse_corpus(std::istream& in, const std::string& source_name) {
  std::vector<std::string> order;
  std::unordered_map<std::string, std::map<int, Utterance>> by_dialogue;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) continue;
    Utterance u = parse_record(line, source_name, line_no);
    auto [it, inserted] = by_dialogue.try_emplace(u.dialogue_id);
    if (inserted) order.push_back(u.dialogue_id);
    const int idx = u.turn_index;
    if (!it->second.emplace(idx, std::move(u)).second) {
      fail_line(source_name, line_no,
                "duplicate (dialogue_id, turn_index) = (" + it->first + ", " + std::to_string(idx) + ")");
    }
  }
  Corpus corpus;
  corpus.dialogues.reserve(order.size());
  for (const auto& id : order) {
    Dialogue d;
    d.id = id;
    for (auto& [_, u] : by_dialogue[id]) d.turns.push_back(std::move(u));
    corpus.dialogues.push_back(std::move(d));
  }
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file " + path.string());
  return parse_corpus(in, path.string());
}

std::string serialize_utterance(const Utterance& u) {
  // ordered_json keeps the canonical key order.
  nlohmann::ordered_json rec;
  rec["dialogue_id"] = u.dialogue_id;
  rec["turn_index"] = u.turn_index;
  rec["speaker"] = std::string(speaker_name(u.speaker));
  rec["text"] = u.text;
  rec["act"] = std::string(act_code(u.act));
  return rec.dump();
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& d : corpus.dialogues) {
    for (const auto& u : d.turns) out << serialize_utterance(u) << '\n';
  }
}

void save_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write corpus file " + path.string());
  write_corpus(out, corpus);
}

ValidationReport validate(const Corpus& corpus) {
  ValidationReport report;
  std::unordered_set<std::string> seen;
  for (const auto& d : corpus.dialogues) {
    if (!seen.insert(d.id).second) {
      report.violations.push_back({Violation::Kind::DuplicateDialogue, d.id, -1, "duplicate dialogue id"});
    }
    if (d.turns.size() < 2) {
      report.violations.push_back({Violation::Kind::TooFewTurns, d.id, -1, "dialogue has fewer than 2 turns"});
    }
    int expected = 0;
    for (const auto& u : d.turns) {
      while (expected < u.turn_index) {
        report.violations.push_back(
            {Violation::Kind::TurnGap, d.id, expected, "missing turn_index " + std::to_string(expected)});
        ++expected;
      }
      expected = u.turn_index + 1;
      if (is_blank(u.text)) {
        report.violations.push_back({Violation::Kind::EmptyText, d.id, u.turn_index, "empty utterance text"});
      }
    }
  }
  return report;
}

std::tuple<Corpus, Corpus, Corpus> split(const Corpus& corpus, SplitFractions f, std::uint64_t seed) {
  const bool in_range = f.train >= 0 && f.train <= 1 && f.validation >= 0 && f.validation <= 1 &&
                        f.test >= 0 && f.test <= 1;
  if (!in_range || std::abs(f.train + f.validation + f.test - 1.0) > 1e-9) {
    throw ConfigError("split fractions must each lie in [0,1] and sum to 1");
  }
  const std::size_t n = corpus.dialogues.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(idx.begin(), idx.end());

  const auto n_train = std::min(n, static_cast<std::size_t>(std::llround(f.train * static_cast<double>(n))));
  const auto n_val =
      std::min(n - n_train, static_cast<std::size_t>(std::llround(f.validation * static_cast<double>(n))));
  // Whatever rounding leaves over goes to test, unless test was asked to be empty.
  std::size_t n_test = n - n_train - n_val;
  std::size_t train_extra = 0;
  if (f.test == 0.0) {
    train_extra = n_test;
    n_test = 0;
  }

  Corpus train, val, test;
  train.split_tag = SplitTag::Train;
  val.split_tag = SplitTag::Validation;
  test.split_tag = SplitTag::Test;
  // Keep original corpus order inside each split.
  std::vector<int> assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t pos = i;
    const std::size_t d = idx[pos];
    if (pos < n_train + train_extra) {
      assign[d] = 0;
    } else if (pos < n_train + train_extra + n_val) {
      assign[d] = 1;
    } else {
      assign[d] = 2;
    }
  }
  for (std::size_t d = 0; d < n; ++d) {
    Corpus& dst = assign[d] == 0 ? train : (assign[d] == 1 ? val : test);
    dst.dialogues.push_back(corpus.dialogues[d]);
  }
  return {std::move(train), std::move(val), std::move(test)};
}

Context context_window(const Dialogue& dialogue, std::size_t t, std::size_t k) {
  if (t >= dialogue.turns.size()) {
    throw std::out_of_range("context_window: turn " + std::to_string(t) + " out of range for dialogue " +
                            dialogue.id);
  }
  if (k == 0) throw std::invalid_argument("context_window: k must be >= 1");
  Context ctx;
  ctx.k = k;
  const std::size_t first = t + 1 >= k ? t + 1 - k : 0;
  for (std::size_t i = first; i <= t; ++i) {
    const auto& u = dialogue.turns[i];
    ctx.window.push_back({u.speaker, u.text, u.act});
  }
  return ctx;
}

Context recent_context(const Dialogue& dialogue, std::size_t k) {
  if (dialogue.turns.empty()) {
    Context ctx;
    ctx.k = k;
    return ctx;
  }
  return context_window(dialogue, dialogue.turns.size() - 1, k);
}

TransitionMatrix act_transition_counts(const Corpus& corpus) {
  TransitionMatrix m{};
  for (const auto& d : corpus.dialogues) {
    for (std::size_t i = 0; i + 1 < d.turns.size(); ++i) {
      ++m[static_cast<std::size_t>(d.turns[i].act)][static_cast<std::size_t>(d.turns[i + 1].act)];
    }
  }
  return m;
}

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats s;
  s.dialogues = corpus.dialogues.size();
  for (const auto& d : corpus.dialogues) {
    for (const auto& u : d.turns) {
      ++s.utterances;
      if (u.speaker == Speaker::Therapist) {
        ++s.therapist_utterances;
      } else {
        ++s.client_utterances;
      }
      ++s.act_counts[static_cast<std::size_t>(u.act)];
    }
  }
  s.transitions = act_transition_counts(corpus);
  for (const auto& row : s.transitions) {
    for (auto c : row) s.transition_total += c;
  }
  return s;
}

}  // namespace actgen
