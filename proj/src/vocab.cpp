#include "actgen/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <stdexcept>

#include "actgen/errors.hpp"

namespace actgen {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c) && c != '\'') {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    }
  }
  flush();
  return out;
}

const std::vector<std::string>& Vocabulary::special_tokens() {
  static const std::vector<std::string> specials = {"<pad>", "<bos>",         "<eos>",
                                                    "<unk>", "<sep_speaker>", "<sep_act>"};
  return specials;
}

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(const std::vector<std::string>& surface_tokens) {
  tokens_ = special_tokens();
  for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], static_cast<TokenId>(i));
  for (const auto& t : surface_tokens) {
    if (!index_.emplace(t, static_cast<TokenId>(tokens_.size())).second) {
      throw DataError("duplicate vocabulary token '" + t + "'");
    }
    tokens_.push_back(t);
  }
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return index_.count(std::string(token)) > 0; }

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<TokenId> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

std::vector<TokenId> Vocabulary::encode_text(std::string_view text) const { return encode(tokenize(text)); }

std::vector<std::string> Vocabulary::decode(const std::vector<TokenId>& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (auto i : ids) out.push_back(token(i));
  return out;
}

std::string Vocabulary::decode_text(const std::vector<TokenId>& ids) const {
  std::string out;
  for (auto i : ids) {
    if (!out.empty()) out.push_back(' ');
    out += token(i);
  }
  return out;
}

std::uint64_t Vocabulary::hash() const {
  // FNV-1a over newline-joined tokens
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& t : tokens_) {
    for (unsigned char c : t) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= '\n';
    h *= 0x100000001b3ULL;
  }
  return h;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vocabulary " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  const auto& specials = special_tokens();
  if (lines.size() < specials.size() || !std::equal(specials.begin(), specials.end(), lines.begin())) {
    throw DataError(path.string() + ": vocabulary file lacks the special-token header");
  }
  return Vocabulary(std::vector<std::string>(lines.begin() + static_cast<long>(specials.size()), lines.end()));
}

Vocabulary build_vocab(const Corpus& corpus, std::size_t max_size, std::size_t min_freq) {
  if (max_size < 8) throw std::invalid_argument("build_vocab: max_size must be >= 8");
  std::map<std::string, std::size_t> freq;
  for (const auto& d : corpus.dialogues) {
    for (const auto& u : d.turns) {
      for (auto& t : tokenize(u.text)) ++freq[t];
    }
  }
  const auto& specials = Vocabulary::special_tokens();
  std::vector<std::pair<std::string, std::size_t>> items;
  for (auto& [tok, n] : freq) {
    if (n >= min_freq && std::find(specials.begin(), specials.end(), tok) == specials.end()) {
      items.emplace_back(tok, n);
    }
  }
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  const std::size_t room = max_size - Vocabulary::kNumSpecial;
  if (items.size() > room) items.resize(room);
  std::vector<std::string> surface;
  surface.reserve(items.size());
  for (auto& [tok, _] : items) surface.push_back(tok);
  return Vocabulary(surface);
}

}  // namespace actgen
