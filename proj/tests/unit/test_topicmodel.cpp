#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <boost/math/special_functions/digamma.hpp>

#include "doctest.h"
#include "stressorlens/error.hpp"
#include "stressorlens/random.hpp"
#include "stressorlens/topicmodel.hpp"
#include "synthetic.hpp"

using namespace stressorlens;
using namespace stressorlens::topicmodel;
using stressorlens::textprep::DocTermMatrix;
using stressorlens::textprep::Tokens;

namespace {

std::vector<std::string> term_names(std::size_t V) {
  std::vector<std::string> t;
  for (std::size_t w = 0; w < V; ++w) t.push_back("t" + std::to_string(100 + w));
  return t;
}

std::vector<Tokens> random_docs(std::size_t N, const std::vector<std::string>& terms, std::uint64_t seed,
                                std::size_t max_len = 25) {
  Rng rng(seed);
  std::vector<Tokens> docs;
  for (std::size_t d = 0; d < N; ++d) {
    Tokens doc;
    const std::size_t len = 1 + uniform_index(rng, max_len);
    for (std::size_t i = 0; i < len; ++i) doc.push_back(terms[uniform_index(rng, terms.size())]);
    docs.push_back(doc);
  }
  return docs;
}

DocTermMatrix counts(const std::vector<Tokens>& docs, const std::vector<std::string>& terms) {
  return textprep::count_matrix(docs, testing::fixed_vocabulary(terms, docs));
}

void check_rows_normalized(const Matrix& m, double tol = 1e-9) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double s = 0.0;
    for (double v : m.row(r)) {
      CHECK(v >= 0.0);
      s += v;
    }
    CHECK(std::abs(s - 1.0) <= tol);
  }
}

// ELBO with explicit word-level responsibilities phi_dwk ∝ exp(E log theta_dk + E log beta_kw).
double explicit_elbo(const DocTermMatrix& x, const Matrix& gamma, const Matrix& lambda, double alpha,
                     double eta) {
  using boost::math::digamma;
  const std::size_t K = lambda.rows(), V = lambda.cols();
  std::vector<std::vector<double>> elog_beta(K, std::vector<double>(V));
  double total = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    double s = 0.0;
    for (std::size_t w = 0; w < V; ++w) s += lambda(k, w);
    for (std::size_t w = 0; w < V; ++w) elog_beta[k][w] = digamma(lambda(k, w)) - digamma(s);
    // E[log p(beta_k | eta)] - E[log q(beta_k)]
    total += std::lgamma(V * eta) - V * std::lgamma(eta);
    total -= std::lgamma(s);
    for (std::size_t w = 0; w < V; ++w) {
      total += (eta - 1.0) * elog_beta[k][w];
      total -= (lambda(k, w) - 1.0) * elog_beta[k][w] - std::lgamma(lambda(k, w));
    }
  }
  for (std::size_t d = 0; d < x.n_docs(); ++d) {
    double gs = 0.0;
    for (std::size_t k = 0; k < K; ++k) gs += gamma(d, k);
    std::vector<double> elog_theta(K);
    for (std::size_t k = 0; k < K; ++k) elog_theta[k] = digamma(gamma(d, k)) - digamma(gs);
    total += std::lgamma(K * alpha) - K * std::lgamma(alpha) - std::lgamma(gs);
    for (std::size_t k = 0; k < K; ++k) {
      total += (alpha - 1.0) * elog_theta[k];
      total -= (gamma(d, k) - 1.0) * elog_theta[k] - std::lgamma(gamma(d, k));
    }
    for (const auto& e : x.rows[d]) {
      std::vector<double> logits(K);
      for (std::size_t k = 0; k < K; ++k) logits[k] = elog_theta[k] + elog_beta[k][e.column];
      const double mx = *std::max_element(logits.begin(), logits.end());
      double z = 0.0;
      for (double l : logits) z += std::exp(l - mx);
      for (std::size_t k = 0; k < K; ++k) {
        const double log_phi = logits[k] - mx - std::log(z);
        total += e.value * std::exp(log_phi) * (logits[k] - log_phi);
      }
    }
  }
  return total;
}

}  // namespace

TEST_CASE("fit_vb on a random fixture: normalization and monotone bound") {
  const auto terms = term_names(40);
  const auto x = counts(random_docs(200, terms, 11), terms);
  LdaConfig c;
  c.num_topics = 5;
  c.seed = 3;
  c.elbo_rel_tol = 1e-7;
  const auto m = fit_vb(x, c);
  CHECK(m.num_topics() == 5);
  CHECK(m.num_terms() == 40);
  CHECK(m.num_docs() == 200);
  check_rows_normalized(m.topic_word);
  check_rows_normalized(m.doc_topic);
  REQUIRE(m.elbo_trace.size() >= 2);
  for (std::size_t i = 1; i < m.elbo_trace.size(); ++i) {
    CHECK(m.elbo_trace[i] >= m.elbo_trace[i - 1] - std::abs(m.elbo_trace[i - 1]) * 1e-6);
  }
}

TEST_CASE("variational_bound equals the explicit-responsibility bound") {
  const auto terms = term_names(12);
  const auto x = counts(random_docs(30, terms, 5, 10), terms);
  Rng rng(9);
  Matrix gamma(30, 3), lambda(3, 12);
  for (double& v : gamma.data()) v = 0.2 + 3.0 * uniform01(rng);
  for (double& v : lambda.data()) v = 0.1 + 5.0 * uniform01(rng);
  const double got = variational_bound(x, gamma, lambda, 0.3, 0.05);
  const double want = explicit_elbo(x, gamma, lambda, 0.3, 0.05);
  CHECK(std::abs(got - want) <= 1e-9 * std::abs(want));
}

TEST_CASE("K = 1 gives a degenerate posterior") {
  const auto terms = term_names(6);
  const auto x = counts(random_docs(20, terms, 2), terms);
  LdaConfig c;
  c.num_topics = 1;
  const auto m = fit_vb(x, c);
  double total = 0.0;
  std::vector<double> mass(6, 0.0);
  for (const auto& row : x.rows) {
    for (const auto& e : row) {
      mass[e.column] += e.value;
      total += e.value;
    }
  }
  for (std::size_t d = 0; d < m.num_docs(); ++d) CHECK(m.doc_topic(d, 0) == 1.0);
  for (std::size_t w = 0; w < 6; ++w) {
    CHECK(std::abs(m.topic_word(0, w) - (1.0 + mass[w]) / (6.0 + total)) <= 1e-12);
  }
}

TEST_CASE("identical documents get bitwise-identical theta rows") {
  const auto terms = term_names(10);
  auto docs = random_docs(40, terms, 4);
  docs.push_back(docs[7]);
  const auto x = counts(docs, terms);
  LdaConfig c;
  c.num_topics = 3;
  const auto m = fit_vb(x, c);
  const auto a = m.doc_topic.row(7);
  const auto b = m.doc_topic.row(40);
  CHECK(std::equal(a.begin(), a.end(), b.begin()));
}

TEST_CASE("fit_vb is seed-deterministic and independent of thread count") {
  const auto terms = term_names(30);
  const auto x = counts(random_docs(300, terms, 8), terms);
  LdaConfig c;
  c.num_topics = 4;
  c.seed = 21;
  c.max_iters = 30;
  c.num_threads = 1;
  const auto a = fit_vb(x, c);
  const auto b = fit_vb(x, c);
  c.num_threads = 3;
  const auto p = fit_vb(x, c);
  CHECK(a.topic_word == b.topic_word);
  CHECK(a.doc_topic == b.doc_topic);
  CHECK(a.elbo_trace == b.elbo_trace);
  CHECK(a.topic_word == p.topic_word);
  CHECK(a.doc_topic == p.doc_topic);
  c.seed = 22;
  const auto other = fit_vb(x, c);
  CHECK_FALSE(other.topic_word == a.topic_word);
}

TEST_CASE("permuting vocabulary columns permutes phi columns") {
  const auto terms = term_names(15);
  const auto docs = random_docs(80, terms, 13);
  std::vector<std::string> permuted = terms;
  std::reverse(permuted.begin(), permuted.end());
  std::rotate(permuted.begin(), permuted.begin() + 4, permuted.end());
  LdaConfig c;
  c.num_topics = 3;
  c.seed = 1;
  const auto a = fit_vb(counts(docs, terms), c);
  const auto b = fit_vb(counts(docs, permuted), c);
  for (std::size_t j = 0; j < permuted.size(); ++j) {
    const std::size_t i = static_cast<std::size_t>(std::find(terms.begin(), terms.end(), permuted[j]) - terms.begin());
    for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(a.topic_word(k, i) - b.topic_word(k, j)) <= 1e-6);
  }
  for (std::size_t d = 0; d < a.num_docs(); ++d) {
    for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(a.doc_topic(d, k) - b.doc_topic(d, k)) <= 1e-6);
  }
}

TEST_CASE("fit_vb accepts real-valued tf-idf weights") {
  const auto terms = term_names(20);
  const auto docs = random_docs(60, terms, 17);
  const auto x = textprep::tfidf_matrix(docs, testing::fixed_vocabulary(terms, docs));
  LdaConfig c;
  c.num_topics = 4;
  const auto m = fit_vb(x, c);
  check_rows_normalized(m.topic_word);
  check_rows_normalized(m.doc_topic);
}

TEST_CASE("fit_vb input errors") {
  const auto terms = term_names(3);
  const std::vector<Tokens> empty_docs = {{}, {}};
  CHECK_THROWS_AS(fit_vb(counts(empty_docs, terms), LdaConfig{}), Error);
  auto x = counts(random_docs(5, terms, 1), terms);
  x.rows[0][0].value = -1.0;
  CHECK_THROWS_AS(fit_vb(x, LdaConfig{}), Error);
  LdaConfig bad;
  bad.alpha = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  LdaConfig zero_k;
  zero_k.num_topics = 0;
  CHECK_THROWS_AS(zero_k.validate(), std::invalid_argument);
}

TEST_CASE("default priors are 1/K") {
  LdaConfig c;
  CHECK(c.num_topics == 10);
  CHECK(c.doc_prior() == 0.1);
  CHECK(c.word_prior() == 0.1);
  CHECK(c.max_iters == 200);
  CHECK(c.elbo_rel_tol == 1e-5);
}

TEST_CASE("fit_gibbs forced counts and precondition") {
  const std::vector<std::string> terms = {"a", "b"};
  const std::vector<Tokens> docs = {{"a", "a", "a"}};
  LdaConfig c;
  c.num_topics = 1;
  c.eta = 0.25;
  c.max_iters = 5;
  const auto m = fit_gibbs(counts(docs, terms), c);
  CHECK(m.doc_topic(0, 0) == 1.0);
  CHECK(std::abs(m.topic_word(0, 0) - 3.25 / 3.5) <= 1e-15);

  const auto tf = textprep::tfidf_matrix(docs, testing::fixed_vocabulary(terms, docs));
  CHECK_THROWS_AS(fit_gibbs(tf, c), Error);
  auto frac = counts(docs, terms);
  frac.rows[0][0].value = 1.5;
  CHECK_THROWS_AS(fit_gibbs(frac, c), Error);
}

TEST_CASE("fit_gibbs is deterministic and normalized") {
  const auto terms = term_names(20);
  const auto x = counts(random_docs(50, terms, 23), terms);
  LdaConfig c;
  c.num_topics = 4;
  c.seed = 5;
  c.max_iters = 20;
  const auto a = fit_gibbs(x, c);
  const auto b = fit_gibbs(x, c);
  CHECK(a.doc_topic == b.doc_topic);
  CHECK(a.topic_word == b.topic_word);
  check_rows_normalized(a.topic_word, 1e-12);
  check_rows_normalized(a.doc_topic, 1e-12);
}

TEST_CASE("planted topics are recovered by both samplers") {
  const auto pc = testing::make_planted_corpus(300, 5, 50, 60, 77);
  const auto x = textprep::count_matrix(pc.docs, testing::fixed_vocabulary(pc.terms, pc.docs));
  LdaConfig c;
  c.num_topics = 5;
  c.seed = 2;
  const auto vb = fit_vb(x, c);
  std::vector<std::vector<std::string>> top;
  for (std::size_t k = 0; k < 5; ++k) {
    std::vector<std::string> t;
    for (const auto& [term, p] : top_terms(vb, k, 10)) t.push_back(term);
    top.push_back(t);
  }
  CHECK(testing::greedy_match(top, pc).mean_precision >= 0.8);

  c.max_iters = 100;
  const auto gibbs = fit_gibbs(x, c);
  top.clear();
  for (std::size_t k = 0; k < 5; ++k) {
    std::vector<std::string> t;
    for (const auto& [term, p] : top_terms(gibbs, k, 10)) t.push_back(term);
    top.push_back(t);
  }
  const auto match = testing::greedy_match(top, pc);
  std::size_t agree = 0;
  for (std::size_t d = 0; d < pc.docs.size(); ++d) {
    agree += match.learned_to_planted[dominant_topic(gibbs.doc_topic.row(d))] == pc.dominant[d];
  }
  CHECK(static_cast<double>(agree) / static_cast<double>(pc.docs.size()) >= 0.9);
}

TEST_CASE("infer_theta reproduces training theta and handles empty rows") {
  const auto pc = testing::make_planted_corpus(120, 4, 40, 50, 31);
  const auto x = textprep::count_matrix(pc.docs, testing::fixed_vocabulary(pc.terms, pc.docs));
  LdaConfig c;
  c.num_topics = 4;
  const auto m = fit_vb(x, c);
  for (std::size_t d = 0; d < m.num_docs(); d += 7) {
    const auto r = infer_theta(m, x.rows[d]);
    CHECK_FALSE(r.fallback);
    double tv = 0.0;
    for (std::size_t k = 0; k < 4; ++k) tv += std::abs(r.theta[k] - m.doc_topic(d, k));
    CHECK(0.5 * tv < 1e-3);
    const auto again = infer_theta(m, x.rows[d]);
    CHECK(again.theta == r.theta);
  }
  const auto empty = infer_theta(m, {});
  CHECK(empty.fallback);
  CHECK(empty.theta == std::vector<double>(4, 0.25));
  CHECK_THROWS_AS(infer_theta(m, {{99, 1.0}}), Error);
}

TEST_CASE("dominant_topic breaks ties by lowest index") {
  CHECK(dominant_topic(std::vector<double>{0.2, 0.5, 0.3}) == 1);
  CHECK(dominant_topic(std::vector<double>{0.5, 0.5}) == 0);
  CHECK(dominant_topic(std::vector<double>(4, 0.25)) == 0);
}

TEST_CASE("top_terms ordering and bounds") {
  const std::vector<std::string> terms = {"a", "b"};
  const std::vector<Tokens> docs = {{"a", "a", "b"}};
  LdaConfig c;
  c.num_topics = 1;
  const auto m = fit_vb(counts(docs, terms), c);
  const auto t = top_terms(m, 0, 5);
  REQUIRE(t.size() == 2);
  CHECK(t[0].first == "a");
  CHECK(t[0].second > t[1].second);
  CHECK(top_terms(m, 0, 0).empty());
  CHECK_THROWS_AS(top_terms(m, 1, 1), Error);
}

TEST_CASE("select_review_samples picks three top-ranked and three random") {
  LdaModel m;
  m.config.num_topics = 3;
  m.doc_topic = Matrix(14, 3);
  std::vector<std::string> ids;
  for (std::size_t d = 0; d < 14; ++d) {
    ids.push_back("p" + std::to_string(d));
    // docs 0..9 are dominated by topic 2 with rising strength; 10..13 by topic 0
    if (d < 10) {
      const double v = 0.52 + 0.04 * static_cast<double>(d);
      m.doc_topic(d, 2) = v;
      m.doc_topic(d, 0) = 1.0 - v;
    } else {
      m.doc_topic(d, 0) = 0.9;
      m.doc_topic(d, 1) = 0.1;
    }
  }
  m.topic_word = Matrix(3, 1, 1.0);
  const auto sel = select_review_samples(m, 2, ids, 99);
  CHECK_FALSE(sel.flagged);
  REQUIRE(sel.samples.size() == 6);
  CHECK(sel.samples[0].post_id == "p9");
  CHECK(sel.samples[1].post_id == "p8");
  CHECK(sel.samples[2].post_id == "p7");
  std::set<std::string> seen;
  for (const auto& s : sel.samples) {
    seen.insert(s.post_id);
    CHECK(s.theta_value == m.doc_topic(s.doc, 2));
    CHECK(dominant_topic(m.doc_topic.row(s.doc)) == 2);
  }
  CHECK(seen.size() == 6);
  for (std::size_t i = 3; i < 6; ++i) CHECK(sel.samples[i].selection == SampleKind::Random);
  const auto again = select_review_samples(m, 2, ids, 99);
  for (std::size_t i = 0; i < 6; ++i) CHECK(again.samples[i].post_id == sel.samples[i].post_id);

  const auto few = select_review_samples(m, 0, ids, 1);
  CHECK(few.flagged);
  CHECK(few.samples.size() == 4);
  CHECK(few.samples[3].selection == SampleKind::Random);
  const auto none = select_review_samples(m, 1, ids, 1);
  CHECK(none.flagged);
  CHECK(none.samples.empty());
}

TEST_CASE("group_mass adds topic probabilities per group") {
  TopicGroupMap g{{"A", "B"}, {0, 0, 1}};
  CHECK(group_mass(std::vector<double>{0.2, 0.3, 0.5}, g) == std::vector<double>{0.5, 0.5});
  TopicGroupMap one{{"all"}, {0, 0, 0}};
  CHECK(std::abs(group_mass(std::vector<double>{0.2, 0.3, 0.5}, one)[0] - 1.0) <= 1e-15);
  CHECK_THROWS_AS(group_mass(std::vector<double>{1.0}, g), Error);
}

TEST_CASE("group_mass is invariant under joint topic permutation and conserves mass") {
  Rng rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t K = 2 + uniform_index(rng, 9);
    std::vector<double> theta(K);
    double s = 0.0;
    for (double& v : theta) s += (v = uniform01(rng) + 1e-3);
    for (double& v : theta) v /= s;
    auto g = TopicGroupMap::default_for(K);
    for (auto& a : g.assignment) a = uniform_index(rng, g.groups.size());
    const auto base = group_mass(theta, g);
    CHECK(std::abs(std::accumulate(base.begin(), base.end(), 0.0) - 1.0) <= 1e-9);

    std::vector<std::size_t> perm(K);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = K; i > 1; --i) std::swap(perm[i - 1], perm[uniform_index(rng, i)]);
    std::vector<double> pt(K);
    TopicGroupMap pg = g;
    for (std::size_t i = 0; i < K; ++i) {
      pt[i] = theta[perm[i]];
      pg.assignment[i] = g.assignment[perm[i]];
    }
    const auto moved = group_mass(pt, pg);
    for (std::size_t i = 0; i < base.size(); ++i) CHECK(std::abs(moved[i] - base[i]) <= 1e-12);
  }
}

TEST_CASE("default group map covers every topic") {
  const auto g = TopicGroupMap::default_for(10);
  CHECK(g.groups.size() == 6);
  CHECK(g.groups[0] == "Fear of coronavirus");
  CHECK_NOTHROW(g.validate(10));
  CHECK_THROWS_AS(g.validate(9), std::invalid_argument);
  auto bad = g;
  bad.assignment[3] = 6;
  CHECK_THROWS_AS(bad.validate(10), std::invalid_argument);
}
