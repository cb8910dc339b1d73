#pragma once

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace actgen::metrics {

using Tokens = std::vector<std::string>;

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  static PRF from(double p, double r);
};

PRF rouge_n(const Tokens& candidate, const Tokens& reference, int n);
PRF rouge_l(const Tokens& candidate, const Tokens& reference);

/// Length of the longest common subsequence.
std::size_t lcs_length(const Tokens& a, const Tokens& b);

struct MeteorDetail {
  std::size_t matches = 0;
  std::size_t chunks = 0;
  double precision = 0.0;
  double recall = 0.0;
  double fmean = 0.0;
  double penalty = 0.0;
  double score = 0.0;
};

// Exact-match METEOR: no stemming or synonym stages.
MeteorDetail meteor_detail(const Tokens& candidate, const Tokens& reference);
double meteor(const Tokens& candidate, const Tokens& reference);

/// Maps a token to its embedding vector; unknown tokens should map to an UNK vector.
using Embedder = std::function<Eigen::VectorXd(const std::string&)>;

/// Greedy cosine matching (BERTScore-style, no IDF). Cosines are clipped to [0,1].
PRF embed_similarity(const Tokens& candidate, const Tokens& reference, const Embedder& embedder);

/// Monte-Carlo relative entropy: mean over samples of (log p_policy - log p_ref).
/// Both spans hold per-sample sequence log-probabilities in nats.
double relative_entropy(std::span<const double> logp_policy, std::span<const double> logp_ref);

/// Pooled distinct-n: unique n-grams over total n-grams across all texts.
double distinct_n(const std::vector<Tokens>& texts, int n);

/// Which ROUGE number feeds the reward's R term.
struct RougeSelector {
  enum class Order { One, Two, L } order = Order::One;
  enum class Field { F1, Recall, Precision } field = Field::F1;

  double operator()(const Tokens& candidate, const Tokens& reference) const;
  std::string name() const;
  static RougeSelector parse(std::string_view spec);  // e.g. "rouge1_f1", "rougeL_recall"
};

}  // namespace actgen::metrics
