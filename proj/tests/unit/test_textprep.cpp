#include <cmath>
#include <sstream>

#include "doctest.h"
#include "stressorlens/error.hpp"
#include "stressorlens/random.hpp"
#include "stressorlens/textprep.hpp"

using namespace stressorlens;
using namespace stressorlens::textprep;

namespace {

FeatureConfig unigram_config(std::size_t max_features, std::size_t min_df = 1) {
  FeatureConfig c;
  c.max_features = max_features;
  c.ngram = {1, 1};
  c.min_df = min_df;
  return c;
}

std::vector<double> dense(const SparseRow& row, std::size_t n) {
  std::vector<double> out(n, 0.0);
  for (const auto& e : row) out[e.column] = e.value;
  return out;
}

}  // namespace

TEST_CASE("tokenize lowercases, strips URLs and drops stopwords") {
  const StopWords stop = {"i", "at", "the"};
  CHECK(tokenize("I saw people MASKLESS at https://x.y today", stop) ==
        Tokens{"saw", "people", "maskless", "today"});
  CHECK(tokenize("", stop).empty());
  CHECK(tokenize("the a an", {"the", "a", "an"}).empty());
}

TEST_CASE("tokenize separators, apostrophes and short tokens") {
  CHECK(tokenize("don't-panic!! x 2020 www.cdc.gov/info ok", {}) == Tokens{"don't", "panic", "2020", "ok"});
  CHECK(tokenize("'maskless' people", {}) == Tokens{"maskless", "people"});
  CHECK(tokenize("can\xE2\x80\x99t sleep", {}) == Tokens{"can't", "sleep"});
  CHECK(tokenize("see HTTP://A.B/C?d=1 now", {}) == Tokens{"see", "now"});
  CHECK(tokenize("caf\xC3\xA9 time", {}) == Tokens{"caf", "time"});
}

TEST_CASE("extract_ngrams enumerates by n then position") {
  CHECK(extract_ngrams(Tokens{"online", "learning"}, {1, 2}) ==
        std::vector<std::string>{"online", "learning", "online learning"});
  CHECK(extract_ngrams(Tokens{"a"}, {1, 2}) == std::vector<std::string>{"a"});
  CHECK(extract_ngrams(Tokens{"no", "mask", "today"}, {2, 2}) ==
        std::vector<std::string>{"no mask", "mask today"});
  CHECK(extract_ngrams(Tokens{}, {1, 3}).empty());
}

TEST_CASE("build_vocabulary ranks by total tf-idf mass") {
  // Oracle: N = 2. "a" has df 2, count 2: idf = ln(3/3) + 1 = 1, mass 2.
  // "b" and "c" have df 1, count 1: idf = ln(3/2) + 1 = 1.405..., mass 1.405...
  // So "a" leads and the b/c tie resolves lexicographically to "b".
  const std::vector<Tokens> docs = {{"a", "b"}, {"a", "c"}};
  const auto v = build_vocabulary(docs, unigram_config(2));
  REQUIRE(v.terms == std::vector<std::string>{"a", "b"});
  CHECK(v.score[0] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(v.score[1] == doctest::Approx(std::log(1.5) + 1.0).epsilon(1e-15));
  CHECK(v.df == std::vector<std::size_t>{2, 1});
  CHECK(v.n_docs == 2);
}

TEST_CASE("include tokens occupy the leading columns regardless of score") {
  std::vector<Tokens> docs = {{"no", "mask", "grocery"}, {"grocery", "store", "grocery"},
                              {"grocery", "store"}, {"no", "mask", "store"}};
  FeatureConfig c;
  c.max_features = 3;
  c.min_df = 1;
  c.include_tokens = {"No  Mask", "absent token"};
  const auto v = build_vocabulary(docs, c);
  REQUIRE(v.size() == 3);
  CHECK(v.terms[0] == "no mask");
  CHECK_FALSE(v.find("absent token"));
}

TEST_CASE("exclude tokens never enter the vocabulary") {
  std::vector<Tokens> docs = {{"thank", "you", "thank", "you"}, {"thank", "you"}, {"worried", "thank", "you"}};
  FeatureConfig c;
  c.max_features = 10;
  c.min_df = 1;
  const auto before = build_vocabulary(docs, c);
  REQUIRE(before.find("thank you"));
  c.exclude_tokens = {"thank you"};
  const auto after = build_vocabulary(docs, c);
  CHECK_FALSE(after.find("thank you"));
  CHECK(after.find("worried"));
}

TEST_CASE("min_df filters candidates and empty candidate sets are reported") {
  const std::vector<Tokens> docs = {{"alpha", "beta"}, {"gamma", "delta"}};
  CHECK_THROWS_AS(build_vocabulary(docs, unigram_config(5, 2)), Error);
  CHECK_THROWS_AS(build_vocabulary(std::vector<Tokens>{{}, {}}, unigram_config(5)), Error);
}

TEST_CASE("FeatureConfig validation") {
  FeatureConfig c;
  c.include_tokens = {"panic"};
  c.exclude_tokens = {"panic"};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  FeatureConfig d;
  d.ngram = {2, 1};
  CHECK_THROWS_AS(d.validate(), std::invalid_argument);
  FeatureConfig e;
  e.max_features = 1;
  e.include_tokens = {"a", "b"};
  CHECK_THROWS_AS(e.validate(), std::invalid_argument);
}

TEST_CASE("count_matrix counts n-gram occurrences") {
  const std::vector<Tokens> docs = {{"a", "a", "b"}, {"zz"}, {"no", "mask", "no", "mask"}};
  auto v = std::make_shared<Vocabulary>();
  v->terms = {"a", "b", "no mask"};
  v->df = {1, 1, 1};
  v->score = {0, 0, 0};
  v->n_docs = 3;
  v->ngram = {1, 2};
  v->rebuild_index();
  const auto m = count_matrix(docs, v);
  CHECK(m.weighting == Weighting::Count);
  CHECK(dense(m.rows[0], 3) == std::vector<double>{2, 1, 0});
  CHECK(m.rows[1].empty());
  CHECK(dense(m.rows[2], 3) == std::vector<double>{0, 0, 2});
}

TEST_CASE("tfidf_matrix matches a hand-computed three-document oracle") {
  // Corpus: d0 = mask fear mask, d1 = fear home fear, d2 = mask fear lonely.
  // df: fear 3, mask 2, home 1, lonely 1 (N = 3).
  // idf: fear ln(4/4)+1 = 1, mask ln(4/3)+1 = a, home/lonely ln(4/2)+1 = b.
  // mass: fear 4, mask 3a = 3.86, home b = lonely b = 1.69 -> vocabulary [fear, mask, home].
  const std::vector<Tokens> docs = {{"mask", "fear", "mask"}, {"fear", "home", "fear"}, {"mask", "fear", "lonely"}};
  auto vocab = std::make_shared<const Vocabulary>(build_vocabulary(docs, unigram_config(3)));
  REQUIRE(vocab->terms == std::vector<std::string>{"fear", "mask", "home"});

  const double a = std::log(4.0 / 3.0) + 1.0;
  const double b = std::log(2.0) + 1.0;
  const double n0 = std::sqrt(1.0 + 4.0 * a * a);
  const double n1 = std::sqrt(4.0 + b * b);
  const double n2 = std::sqrt(1.0 + a * a);
  const double oracle[3][3] = {{1.0 / n0, 2.0 * a / n0, 0.0}, {2.0 / n1, 0.0, b / n1}, {1.0 / n2, a / n2, 0.0}};

  const auto m = tfidf_matrix(docs, vocab);
  CHECK(m.weighting == Weighting::TfIdf);
  for (std::size_t d = 0; d < 3; ++d) {
    const auto row = dense(m.rows[d], 3);
    for (std::size_t t = 0; t < 3; ++t) CHECK(std::abs(row[t] - oracle[d][t]) <= 1e-12);
  }
}

TEST_CASE("idf of a term present in every document is one") {
  CHECK(smoothed_idf(7, 7) == 1.0);
}

TEST_CASE("tf-idf rows are unit length or zero, and scale invariant") {
  Rng rng(3);
  const std::vector<std::string> words = {"mask", "fear", "home", "work", "school", "vaccine", "alone", "news"};
  std::vector<Tokens> docs;
  for (int d = 0; d < 60; ++d) {
    Tokens doc;
    const auto len = uniform_index(rng, 12);
    for (std::uint64_t i = 0; i < len; ++i) doc.push_back(words[uniform_index(rng, words.size())]);
    docs.push_back(doc);
  }
  docs.push_back({"unseen"});
  FeatureConfig c;
  c.max_features = 20;
  auto vocab = std::make_shared<const Vocabulary>(build_vocabulary(docs, c));
  CHECK(vocab->size() <= c.max_features);
  const auto m = tfidf_matrix(docs, vocab);
  for (const auto& row : m.rows) {
    double n2 = 0.0;
    for (const auto& e : row) {
      CHECK(e.value >= 0.0);
      n2 += e.value * e.value;
    }
    CHECK((row.empty() || std::abs(std::sqrt(n2) - 1.0) <= 1e-9));
  }
  CHECK(m.rows.back().empty());

  std::vector<Tokens> doubled;
  for (const auto& d : docs) {
    Tokens t = d;
    t.insert(t.end(), d.begin(), d.end());
    doubled.push_back(t);
  }
  // Doubling tokens also creates bigrams across the seam; compare on unigrams only.
  FeatureConfig uc = unigram_config(20, 2);
  auto uvocab = std::make_shared<const Vocabulary>(build_vocabulary(docs, uc));
  const auto once = tfidf_matrix(docs, uvocab);
  const auto twice = tfidf_matrix(doubled, uvocab);
  for (std::size_t d = 0; d < docs.size(); ++d) {
    REQUIRE(once.rows[d].size() == twice.rows[d].size());
    for (std::size_t i = 0; i < once.rows[d].size(); ++i) {
      CHECK(std::abs(once.rows[d][i].value - twice.rows[d][i].value) <= 1e-12);
    }
  }
}

TEST_CASE("build_vocabulary is deterministic and respects include/exclude") {
  Rng rng(5);
  const std::vector<std::string> words = {"mask", "fear", "home", "work", "school", "panic", "alone", "job"};
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Tokens> docs;
    for (int d = 0; d < 40; ++d) {
      Tokens doc;
      for (int i = 0; i < 8; ++i) doc.push_back(words[uniform_index(rng, words.size())]);
      docs.push_back(doc);
    }
    FeatureConfig c;
    c.max_features = 1 + uniform_index(rng, 15);
    c.include_tokens = {"panic"};
    c.exclude_tokens = {"mask", "fear home"};
    const auto v1 = build_vocabulary(docs, c);
    const auto v2 = build_vocabulary(docs, c);
    CHECK(v1.terms == v2.terms);
    CHECK(v1.size() <= c.max_features);
    CHECK_FALSE(v1.find("mask"));
    CHECK_FALSE(v1.find("fear home"));
    CHECK(v1.terms.front() == "panic");
    for (std::size_t i = 0; i < v1.size(); ++i) CHECK((v1.df[i] > 0 && v1.df[i] <= docs.size()));
  }
}

TEST_CASE("has_hyperlink detects URL markers case-insensitively") {
  CHECK(has_hyperlink("see https://a.b"));
  CHECK_FALSE(has_hyperlink("no links here"));
  CHECK(has_hyperlink("WWW.example.com"));
  CHECK(has_hyperlink("old HTTP://site"));
}

TEST_CASE("vocabulary csv and json round trip") {
  const std::vector<Tokens> docs = {{"a", "b"}, {"a", "c"}};
  const auto v = build_vocabulary(docs, unigram_config(3));
  std::ostringstream csv;
  write_vocabulary_csv(csv, v);
  CHECK(csv.str().rfind("term,index,df,score\na,0,2,2\n", 0) == 0);
  const auto back = vocabulary_from_json(vocabulary_to_json(v));
  CHECK(back.terms == v.terms);
  CHECK(back.score == v.score);
  CHECK(back.content_hash() == v.content_hash());
}
