#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "actgen/corpus.hpp"

namespace actgen {

using TokenId = int;

/// Lowercased whitespace-and-punctuation tokenization. Apostrophes stay inside words.
std::vector<std::string> tokenize(std::string_view text);

class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kBos = 1;
  static constexpr TokenId kEos = 2;
  static constexpr TokenId kUnk = 3;
  static constexpr TokenId kSepSpeaker = 4;
  static constexpr TokenId kSepAct = 5;
  static constexpr std::size_t kNumSpecial = 6;
  static const std::vector<std::string>& special_tokens();

  Vocabulary();  // special tokens only
  explicit Vocabulary(const std::vector<std::string>& surface_tokens);

  std::size_t size() const { return tokens_.size(); }
  TokenId id(std::string_view token) const;  // kUnk when absent
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<TokenId> encode(const std::vector<std::string>& tokens) const;
  std::vector<TokenId> encode_text(std::string_view text) const;
  std::vector<std::string> decode(const std::vector<TokenId>& ids) const;
  std::string decode_text(const std::vector<TokenId>& ids) const;

  std::uint64_t hash() const;

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

/// Frequency-capped vocabulary; surface tokens ordered by frequency desc, then lexicographically.
Vocabulary build_vocab(const Corpus& corpus, std::size_t max_size, std::size_t min_freq);

}  // namespace actgen
