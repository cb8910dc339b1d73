#include "actgen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

#include "actgen/errors.hpp"

namespace actgen::metrics {

PRF PRF::from(double p, double r) {
  PRF out;
  out.precision = p;
  out.recall = r;
  out.f1 = (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
  return out;
}

namespace {

std::map<std::vector<std::string_view>, std::size_t> ngram_counts(const Tokens& toks, int n) {
  std::map<std::vector<std::string_view>, std::size_t> counts;
  const auto un = static_cast<std::size_t>(n);
  if (toks.size() < un) return counts;
  for (std::size_t i = 0; i + un <= toks.size(); ++i) {
    std::vector<std::string_view> key;
    key.reserve(un);
    for (std::size_t j = 0; j < un; ++j) key.emplace_back(toks[i + j]);
    ++counts[key];
  }
  return counts;
}

}  // namespace

PRF rouge_n(const Tokens& candidate, const Tokens& reference, int n) {
  if (n != 1 && n != 2) throw std::invalid_argument("rouge_n: n must be 1 or 2");
  const auto cand = ngram_counts(candidate, n);
  const auto ref = ngram_counts(reference, n);
  if (cand.empty() || ref.empty()) return {};
  std::size_t cand_total = 0, ref_total = 0, overlap = 0;
  for (const auto& [g, c] : cand) {
    cand_total += c;
    auto it = ref.find(g);
    if (it != ref.end()) overlap += std::min(c, it->second);
  }
  for (const auto& [g, c] : ref) ref_total += c;
  return PRF::from(static_cast<double>(overlap) / static_cast<double>(cand_total),
                   static_cast<double>(overlap) / static_cast<double>(ref_total));
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

PRF rouge_l(const Tokens& candidate, const Tokens& reference) {
  if (candidate.empty() || reference.empty()) return {};
  const auto l = static_cast<double>(lcs_length(candidate, reference));
  return PRF::from(l / static_cast<double>(candidate.size()), l / static_cast<double>(reference.size()));
}

MeteorDetail meteor_detail(const Tokens& candidate, const Tokens& reference) {
  MeteorDetail d;
  if (candidate.empty() || reference.empty()) return d;

  // Greedy alignment in candidate order. A match that extends the previous chunk
  // wins; otherwise the earliest unused reference position is taken.
  std::vector<bool> used(reference.size(), false);
  std::vector<long> align(candidate.size(), -1);
  long prev_ref = -2;
  for (std::size_t i = 0; i < candidate.size(); ++i) {
    long pick = -1;
    const long next = prev_ref + 1;
    if (next >= 0 && static_cast<std::size_t>(next) < reference.size() && !used[static_cast<std::size_t>(next)] &&
        reference[static_cast<std::size_t>(next)] == candidate[i]) {
      pick = next;
    } else {
      for (std::size_t j = 0; j < reference.size(); ++j) {
        if (!used[j] && reference[j] == candidate[i]) {
          pick = static_cast<long>(j);
          break;
        }
      }
    }
    if (pick >= 0) {
      used[static_cast<std::size_t>(pick)] = true;
      align[i] = pick;
      prev_ref = pick;
    } else {
      prev_ref = -2;
    }
  }

  for (std::size_t i = 0; i < candidate.size(); ++i) {
    if (align[i] < 0) continue;
    ++d.matches;
    const bool continues = i > 0 && align[i - 1] >= 0 && align[i - 1] + 1 == align[i];
    if (!continues) ++d.chunks;
  }
  if (d.matches == 0) return d;

  const auto m = static_cast<double>(d.matches);
  d.precision = m / static_cast<double>(candidate.size());
  d.recall = m / static_cast<double>(reference.size());
  d.fmean = 10.0 * d.precision * d.recall / (d.recall + 9.0 * d.precision);
  const double frag = static_cast<double>(d.chunks) / m;
  d.penalty = 0.5 * frag * frag * frag;
  d.score = d.fmean * (1.0 - d.penalty);
  return d;
}

double meteor(const Tokens& candidate, const Tokens& reference) {
  return meteor_detail(candidate, reference).score;
}

PRF embed_similarity(const Tokens& candidate, const Tokens& reference, const Embedder& embedder) {
  if (candidate.empty() || reference.empty()) return {};
  auto normalized = [&](const Tokens& toks) {
    std::vector<Eigen::VectorXd> out;
    out.reserve(toks.size());
    for (const auto& t : toks) {
      Eigen::VectorXd v = embedder(t);
      const double norm = v.norm();
      if (norm > 0.0) v /= norm;
      out.push_back(std::move(v));
    }
    return out;
  };
  const auto c = normalized(candidate);
  const auto r = normalized(reference);
  Eigen::MatrixXd sim(c.size(), r.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    for (std::size_t j = 0; j < r.size(); ++j) {
      sim(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = std::clamp(c[i].dot(r[j]), 0.0, 1.0);
    }
  }
  const double p = sim.rowwise().maxCoeff().mean();
  const double rr = sim.colwise().maxCoeff().mean();
  return PRF::from(std::clamp(p, 0.0, 1.0), std::clamp(rr, 0.0, 1.0));
}

double relative_entropy(std::span<const double> logp_policy, std::span<const double> logp_ref) {
  if (logp_policy.empty()) throw std::invalid_argument("relative_entropy: empty sample set");
  if (logp_policy.size() != logp_ref.size()) {
    throw std::invalid_argument("relative_entropy: log-prob vectors differ in length");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < logp_policy.size(); ++i) sum += logp_policy[i] - logp_ref[i];
  return sum / static_cast<double>(logp_policy.size());
}

double distinct_n(const std::vector<Tokens>& texts, int n) {
  if (n < 1) throw std::invalid_argument("distinct_n: n must be >= 1");
  std::set<std::vector<std::string_view>> unique;
  std::size_t total = 0;
  const auto un = static_cast<std::size_t>(n);
  for (const auto& t : texts) {
    if (t.size() < un) continue;
    for (std::size_t i = 0; i + un <= t.size(); ++i) {
      unique.emplace(t.begin() + static_cast<long>(i), t.begin() + static_cast<long>(i + un));
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(unique.size()) / static_cast<double>(total);
}

double RougeSelector::operator()(const Tokens& candidate, const Tokens& reference) const {
  PRF s;
  switch (order) {
    case Order::One: s = rouge_n(candidate, reference, 1); break;
    case Order::Two: s = rouge_n(candidate, reference, 2); break;
    case Order::L: s = rouge_l(candidate, reference); break;
  }
  switch (field) {
    case Field::F1: return s.f1;
    case Field::Recall: return s.recall;
    case Field::Precision: return s.precision;
  }
  return s.f1;
}

std::string RougeSelector::name() const {
  std::string out = order == Order::One ? "rouge1" : (order == Order::Two ? "rouge2" : "rougeL");
  out += field == Field::F1 ? "_f1" : (field == Field::Recall ? "_recall" : "_precision");
  return out;
}

RougeSelector RougeSelector::parse(std::string_view spec) {
  RougeSelector s;
  const auto us = spec.find('_');
  const auto ord = spec.substr(0, us);
  const auto fld = us == std::string_view::npos ? std::string_view("f1") : spec.substr(us + 1);
  if (ord == "rouge1") {
    s.order = Order::One;
  } else if (ord == "rouge2") {
    s.order = Order::Two;
  } else if (ord == "rougeL" || ord == "rougel") {
    s.order = Order::L;
  } else {
    throw ConfigError("unknown rouge order in '" + std::string(spec) + "'");
  }
  if (fld == "f1") {
    s.field = Field::F1;
  } else if (fld == "recall") {
    s.field = Field::Recall;
  } else if (fld == "precision") {
    s.field = Field::Precision;
  } else {
    throw ConfigError("unknown rouge field in '" + std::string(spec) + "'");
  }
  return s;
}

}  // namespace actgen::metrics
