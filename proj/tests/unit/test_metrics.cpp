#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "actgen/metrics.hpp"
#include "actgen/rng.hpp"

using namespace actgen;
using metrics::Tokens;

namespace {

Tokens split_words(const std::string& s) {
  Tokens out;
  std::string cur;
  for (char c : s) {
    if (c == ' ') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

double prf_f1(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

Eigen::VectorXd unit(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) x(i++) = d;
  return x;
}

}  // namespace

TEST_CASE("rouge-n hand examples") {
  const auto id = metrics::rouge_n(split_words("the cat sat"), split_words("the cat sat"), 1);
  CHECK(id.precision == 1.0);
  CHECK(id.f1 == 1.0);
  const auto r1 = metrics::rouge_n(split_words("the cat"), split_words("the cat sat on the mat"), 1);
  CHECK(r1.precision == doctest::Approx(1.0));
  CHECK(r1.recall == doctest::Approx(1.0 / 3));
  CHECK(r1.f1 == doctest::Approx(0.5));
  const auto r2 = metrics::rouge_n(split_words("the cat"), split_words("the cat sat on the mat"), 2);
  CHECK(r2.recall == doctest::Approx(0.2));
  CHECK(r2.f1 == doctest::Approx(1.0 / 3));
  const auto empty = metrics::rouge_n({}, split_words("a b"), 1);
  CHECK(empty.f1 == 0.0);
  CHECK(metrics::rouge_n(split_words("a"), split_words("a b"), 2).f1 == 0.0);
  CHECK_THROWS(metrics::rouge_n({}, {}, 3));
}

TEST_CASE("rouge-l hand examples") {
  const auto r = metrics::rouge_l(split_words("a x b y c"), split_words("a b c"));
  CHECK(r.precision == doctest::Approx(0.6));
  CHECK(r.recall == doctest::Approx(1.0));
  CHECK(r.f1 == doctest::Approx(0.75));
  CHECK(metrics::rouge_l(split_words("a b"), split_words("c d")).f1 == 0.0);
  CHECK(metrics::rouge_l(split_words("a b"), split_words("a b")).f1 == 1.0);
}

TEST_CASE("argument swap duality and PRF identity") {
  Rng rng(5);
  const Tokens alphabet = {"a", "b", "c", "d", "e"};
  for (int i = 0; i < 300; ++i) {
    Tokens x, y;
    for (std::uint64_t j = 0, n = 1 + rng.below(12); j < n; ++j) x.push_back(alphabet[rng.below(5)]);
    for (std::uint64_t j = 0, n = 1 + rng.below(12); j < n; ++j) y.push_back(alphabet[rng.below(5)]);
    for (int n : {1, 2}) {
      const auto a = metrics::rouge_n(x, y, n);
      const auto b = metrics::rouge_n(y, x, n);
      CHECK(a.precision == b.recall);
      CHECK(a.f1 == doctest::Approx(prf_f1(a.precision, a.recall)).epsilon(1e-12));
      CHECK(a.f1 <= 1.0);
    }
    const auto l1 = metrics::rouge_l(x, y);
    const auto l2 = metrics::rouge_l(y, x);
    CHECK(l1.precision == l2.recall);
  }
}

TEST_CASE("meteor closed forms") {
  const auto same = metrics::meteor_detail(split_words("a b c d"), split_words("a b c d"));
  CHECK(same.matches == 4);
  CHECK(same.chunks == 1);
  CHECK(same.score == doctest::Approx(1.0 - 0.5 / 64.0).epsilon(1e-12));
  const auto swapped = metrics::meteor_detail(split_words("c d a b"), split_words("a b c d"));
  CHECK(swapped.chunks == 2);
  CHECK(swapped.score == doctest::Approx(0.9375).epsilon(1e-12));
  CHECK(metrics::meteor(split_words("x y"), split_words("a b")) == 0.0);
  CHECK(metrics::meteor({}, split_words("a b")) == 0.0);

  // Repeated tokens: the alignment continues an adjacent chunk when it can.
  const auto rep = metrics::meteor_detail(split_words("a b a b"), split_words("a b a b"));
  CHECK(rep.chunks == 1);
}

TEST_CASE("meteor is zero exactly when nothing matches") {
  Rng rng(9);
  const Tokens alphabet = {"a", "b", "c", "d", "e", "f"};
  for (int i = 0; i < 200; ++i) {
    Tokens x, y;
    for (std::uint64_t j = 0, n = 1 + rng.below(8); j < n; ++j) x.push_back(alphabet[rng.below(6)]);
    for (std::uint64_t j = 0, n = 1 + rng.below(8); j < n; ++j) y.push_back(alphabet[rng.below(6)]);
    bool overlap = false;
    for (const auto& t : x) overlap = overlap || std::find(y.begin(), y.end(), t) != y.end();
    CHECK((metrics::meteor(x, y) > 0.0) == overlap);
  }
}

TEST_CASE("embedding similarity") {
  std::map<std::string, Eigen::VectorXd> table = {
      {"v1", unit({1, 0})}, {"v2", unit({0.5, std::sqrt(0.75)})}, {"v3", unit({0, 1})}, {"neg", unit({-1, 0})}};
  metrics::Embedder emb = [&](const std::string& t) { return table.at(t); };
  const auto same = metrics::embed_similarity({"v1", "v2"}, {"v1", "v2"}, emb);
  CHECK(same.f1 == doctest::Approx(1.0));
  CHECK(metrics::embed_similarity({"v1"}, {"v3"}, emb).f1 == doctest::Approx(0.0));
  CHECK(metrics::embed_similarity({"v1"}, {"neg"}, emb).f1 == 0.0);
  const auto half = metrics::embed_similarity({"v1"}, {"v1", "v2"}, emb);
  CHECK(half.precision == doctest::Approx(1.0));
  CHECK(half.recall == doctest::Approx(0.75));
  CHECK(half.f1 == doctest::Approx(2 * 0.75 / 1.75));
  const auto swapped = metrics::embed_similarity({"v1", "v2"}, {"v1"}, emb);
  CHECK(swapped.precision == doctest::Approx(half.recall));
  CHECK(metrics::embed_similarity({}, {"v1"}, emb).f1 == 0.0);
}

TEST_CASE("relative entropy closed forms") {
  const std::vector<double> lp = {-1.0, -2.5, -0.3};
  CHECK(metrics::relative_entropy(lp, lp) == 0.0);
  // Point mass against a uniform reference over N sequences.
  const int n = 7;
  const std::vector<double> pol(10, 0.0);
  const std::vector<double> ref(10, -std::log(n));
  CHECK(metrics::relative_entropy(pol, ref) == doctest::Approx(std::log(n)).epsilon(1e-12));
  CHECK_THROWS(metrics::relative_entropy(std::vector<double>{}, std::vector<double>{}));
  CHECK_THROWS(metrics::relative_entropy(lp, std::vector<double>{1.0}));
}

TEST_CASE("distinct-n") {
  CHECK(metrics::distinct_n({split_words("a b c d")}, 2) == 1.0);
  CHECK(metrics::distinct_n({split_words("a a a a")}, 2) == doctest::Approx(1.0 / 3));
  CHECK(metrics::distinct_n({}, 2) == 0.0);
  CHECK(metrics::distinct_n({split_words("a b"), split_words("a b")}, 2) == 0.5);
}

TEST_CASE("rouge selector") {
  const auto sel = metrics::RougeSelector::parse("rouge2_recall");
  CHECK(sel.name() == "rouge2_recall");
  CHECK(sel(split_words("the cat"), split_words("the cat sat on the mat")) == doctest::Approx(0.2));
  CHECK(metrics::RougeSelector{}.name() == "rouge1_f1");
  CHECK_THROWS(metrics::RougeSelector::parse("rouge3_f1"));
}
