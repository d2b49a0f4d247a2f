#include <cmath>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "stressorlens/error.hpp"
#include "stressorlens/flairclf.hpp"
#include "stressorlens/random.hpp"
#include "synthetic.hpp"

using namespace stressorlens;
using namespace stressorlens::flairclf;
using corpus::FlairSource;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale) {
  Matrix m(r, c);
  for (double& v : m.data()) v = scale * (2.0 * uniform01(rng) - 1.0);
  return m;
}

// Separable toy set: feature c is an indicator for class c, plus small noise.
void separable(std::size_t n, Matrix& x, std::vector<FlairGroup>& y, std::uint64_t seed) {
  Rng rng(seed);
  x = Matrix(n, 6);
  y.clear();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % 4;
    x(i, c) = 1.0;
    x(i, 4) = 0.1 * uniform01(rng);
    x(i, 5) = 0.1 * uniform01(rng);
    y.push_back(kClasses[c]);
  }
}

// Independent extended-precision objective used as the finite-difference oracle.
long double reference_objective(const Matrix& w, const Matrix& x, const std::vector<std::size_t>& y, long double l2) {
  const std::size_t C = w.rows(), D = x.cols();
  long double total = 0.0L;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    std::vector<long double> s(C);
    for (std::size_t c = 0; c < C; ++c) {
      s[c] = w(c, D);
      for (std::size_t j = 0; j < D; ++j) s[c] += static_cast<long double>(w(c, j)) * x(i, j);
    }
    long double z = 0.0L;
    for (long double v : s) z += std::exp(v);
    total += std::log(z) - s[y[i]];
  }
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t j = 0; j < D; ++j) total += 0.5L * l2 * static_cast<long double>(w(c, j)) * w(c, j);
  }
  return total / static_cast<long double>(x.rows());
}

LogRegModel fixed_model() {
  LogRegModel m;
  m.weights = Matrix(4, 3);
  const double w[4][3] = {{0.5, -1.0, 0.1}, {0.0, 2.0, -0.3}, {-0.7, 0.4, 0.0}, {1.2, 0.0, 0.2}};
  for (std::size_t c = 0; c < 4; ++c) {
    for (std::size_t j = 0; j < 3; ++j) m.weights(c, j) = w[c][j];
  }
  return m;
}

}  // namespace

TEST_CASE("analytic gradient matches central finite differences") {
  Rng rng(17);
  const FeatureLayout layout;
  const Matrix x = random_matrix(5, layout.dim(), rng, 1.0);
  const Matrix w0 = random_matrix(4, layout.dim() + 1, rng, 0.3);
  const std::vector<std::size_t> y = {0, 3, 1, 2, 1};
  Matrix grad;
  const double f = objective(w0, x, y, 1.0, &grad);
  CHECK(std::abs(f - static_cast<double>(reference_objective(w0, x, y, 1.0L))) <= 1e-12);
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t i = 0; i < w0.data().size(); ++i) {
    Matrix plus = w0, minus = w0;
    plus.data()[i] += h;
    minus.data()[i] -= h;
    const double fd = static_cast<double>((reference_objective(plus, x, y, 1.0L) -
                                           reference_objective(minus, x, y, 1.0L)) /
                                          (2.0L * h));
    const double an = grad.data()[i];
    worst = std::max(worst, std::abs(fd - an) / std::max(1e-12, std::max(std::abs(fd), std::abs(an))));
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("objective with zero weights is log C") {
  Matrix x(3, 2, 1.0);
  const std::vector<std::size_t> y = {0, 1, 2};
  CHECK(std::abs(objective(Matrix(4, 3), x, y, 1.0, nullptr) - std::log(4.0)) <= 1e-15);
}

TEST_CASE("separable four-class set is learned") {
  Matrix x;
  std::vector<FlairGroup> y;
  separable(200, x, y, 3);
  const auto m = train(x, y, TrainConfig{});
  CHECK(m.epochs_run <= 500);
  CHECK(accuracy(m, x, y) >= 0.95);
  for (std::size_t i = 1; i < m.loss_trace.size(); ++i) CHECK(m.loss_trace[i] <= m.loss_trace[i - 1] + 1e-15);
}

TEST_CASE("stronger regularization shrinks weights") {
  Matrix x;
  std::vector<FlairGroup> y;
  separable(80, x, y, 4);
  TrainConfig weak, strong;
  weak.l2 = 0.1;
  strong.l2 = 1.0;
  const auto norm = [](const LogRegModel& m) {
    double s = 0.0;
    for (std::size_t c = 0; c < m.weights.rows(); ++c) {
      for (std::size_t j = 0; j < m.dim(); ++j) s += m.weights(c, j) * m.weights(c, j);
    }
    return s;
  };
  CHECK(norm(train(x, y, strong)) < norm(train(x, y, weak)));
}

TEST_CASE("training errors") {
  Matrix x(4, 2, 1.0);
  const std::vector<FlairGroup> one(4, FlairGroup::Experience);
  CHECK_THROWS_AS(train(x, one, TrainConfig{}), Error);
  std::vector<FlairGroup> other = {FlairGroup::Experience, FlairGroup::Other, FlairGroup::Experience,
                                   FlairGroup::NewsResources};
  CHECK_THROWS_AS(train(x, other, TrainConfig{}), Error);
  Matrix big(4, 2, 1e3);
  const std::vector<FlairGroup> y = {FlairGroup::Experience, FlairGroup::NewsResources, FlairGroup::Experience,
                                     FlairGroup::NewsResources};
  TrainConfig hot;
  hot.learning_rate = 1e300;
  hot.l2 = 1e10;
  CHECK_THROWS_WITH_AS(train(big, y, hot), doctest::Contains("learning rate"), Error);
}

TEST_CASE("predict_proba matches a hand-computed softmax") {
  const auto m = fixed_model();
  const std::vector<double> row = {0.3, -0.2};
  // Scores: w_c0*0.3 + w_c1*(-0.2) + bias
  const double s[4] = {0.5 * 0.3 + 0.2 + 0.1, 0.0 - 0.4 - 0.3, -0.21 - 0.08, 0.36 + 0.2};
  double z = 0.0;
  for (double v : s) z += std::exp(v);
  const auto p = predict_proba(m, row);
  for (std::size_t c = 0; c < 4; ++c) CHECK(std::abs(p[c] - std::exp(s[c]) / z) <= 1e-12);
  CHECK(predict(m, row) == FlairGroup::Experience);
  CHECK_THROWS_AS(predict_proba(m, std::vector<double>{1.0}), Error);
}

TEST_CASE("predict_proba is uniform for zero weights and shift invariant") {
  LogRegModel zero;
  zero.weights = Matrix(4, 4);
  CHECK(predict_proba(zero, std::vector<double>{1, 2, 3}) == std::vector<double>(4, 0.25));

  auto m = fixed_model();
  const std::vector<double> row = {1.5, 0.7};
  const auto before = predict_proba(m, row);
  for (std::size_t c = 0; c < 4; ++c) m.weights(c, 2) += 40.0;
  const auto after = predict_proba(m, row);
  for (std::size_t c = 0; c < 4; ++c) CHECK(std::abs(before[c] - after[c]) <= 1e-12);

  Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    const std::vector<double> r = {10 * uniform01(rng) - 5, 10 * uniform01(rng) - 5};
    const auto p = predict_proba(m, r);
    CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) <= 1e-9);
    for (double v : p) CHECK(v > 0.0);
  }
}

TEST_CASE("impute_flairs fills only unlabelled posts with the argmax class") {
  const auto m = fixed_model();
  std::vector<corpus::CleanPost> posts = {
      testing::make_post("a", 1600000000, "x", FlairGroup::NewsResources, FlairSource::Labelled),
      testing::make_post("b", 1600000000, "x", FlairGroup::Unlabelled, FlairSource::Unlabelled),
      testing::make_post("c", 1600000000, "x", FlairGroup::Unlabelled, FlairSource::Unlabelled),
      testing::make_post("d", 1600000000, "x", FlairGroup::Unlabelled, FlairSource::Unlabelled),
  };
  Matrix x(4, 2);
  const double rows[4][2] = {{5.0, 5.0}, {0.0, 3.0}, {3.0, 0.0}, {-3.0, 0.0}};
  for (std::size_t i = 0; i < 4; ++i) {
    x(i, 0) = rows[i][0];
    x(i, 1) = rows[i][1];
  }
  const auto out = impute_flairs(posts, m, x);
  CHECK(out[0].flair_group == FlairGroup::NewsResources);
  CHECK(out[0].flair_source == FlairSource::Labelled);
  // Oracle argmax: row (0,3): scores {-2.9, 5.7, 1.2, 0.2} -> DiscussionQuestions.
  CHECK(out[1].flair_group == FlairGroup::DiscussionQuestions);
  // (3,0): {1.6, -0.3, -2.1, 3.8} -> Experience.  (-3,0): {-1.4, -0.3, 2.1, -3.4} -> NewsResources.
  CHECK(out[2].flair_group == FlairGroup::Experience);
  CHECK(out[3].flair_group == FlairGroup::NewsResources);
  for (std::size_t i = 1; i < 4; ++i) CHECK(out[i].flair_source == FlairSource::Predicted);

  std::vector<corpus::CleanPost> labelled(posts.begin(), posts.begin() + 1);
  const auto same = impute_flairs(labelled, m, Matrix(1, 2));
  CHECK(same[0].flair_group == labelled[0].flair_group);
  CHECK(same[0].flair_source == FlairSource::Labelled);
}

TEST_CASE("support subset selection") {
  std::vector<corpus::CleanPost> posts = {
      testing::make_post("a", 1, "x", FlairGroup::MentalHealthSupport, FlairSource::Labelled),
      testing::make_post("b", 1, "x", FlairGroup::MentalHealthSupport, FlairSource::Predicted),
      testing::make_post("c", 1, "x", FlairGroup::DiscussionQuestions, FlairSource::Predicted),
      testing::make_post("d", 1, "x", FlairGroup::Experience, FlairSource::Labelled),
  };
  const auto s = select_support_subset(posts);
  REQUIRE(s.size() == 2);
  CHECK(s[0].id == "a");
  CHECK(s[1].id == "b");
  posts.push_back(testing::make_post("e", 1, "x", FlairGroup::Unlabelled, FlairSource::Unlabelled));
  CHECK_THROWS_AS(select_support_subset(posts), Error);

  std::ostringstream os;
  write_flair_counts_csv(os, posts);
  CHECK(os.str().find("group,labelled,predicted,unlabelled,total\n") == 0);
  CHECK(os.str().find("MentalHealthSupport,1,1,0,2\n") != std::string::npos);
}

TEST_CASE("assemble_features places theta, tf-idf and hyperlink columns") {
  topicmodel::LdaModel lda;
  lda.config.num_topics = 2;
  lda.topic_word = Matrix(2, 3, 1.0 / 3.0);
  lda.doc_topic = Matrix(2, 2);
  lda.doc_topic(0, 0) = 0.25;
  lda.doc_topic(0, 1) = 0.75;
  lda.doc_topic(1, 0) = 1.0;
  textprep::DocTermMatrix tf;
  tf.weighting = textprep::Weighting::TfIdf;
  auto v = std::make_shared<textprep::Vocabulary>();
  v->terms = {"a", "b", "c"};
  v->rebuild_index();
  tf.vocabulary = v;
  tf.rows = {{{1, 0.6}, {2, 0.8}}, {}};
  const std::vector<corpus::CleanPost> posts = {testing::make_post("p", 1, "see https://x.y"),
                                               testing::make_post("q", 1, "nothing")};
  const FeatureLayout layout{2, 3};
  const Matrix x = assemble_features(posts, lda, tf, layout);
  REQUIRE(x.cols() == 6);
  const std::vector<double> r0 = {0.25, 0.75, 0.0, 0.6, 0.8, 1.0};
  const std::vector<double> r1 = {1.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  CHECK(std::equal(r0.begin(), r0.end(), x.row(0).begin()));
  CHECK(std::equal(r1.begin(), r1.end(), x.row(1).begin()));
  CHECK(FeatureLayout{}.dim() == 211);
  CHECK_THROWS_AS(assemble_features(posts, lda, tf, FeatureLayout{}), Error);
}

TEST_CASE("classifier files round trip") {
  Matrix x;
  std::vector<FlairGroup> y;
  separable(40, x, y, 9);
  const auto m = train(x, y, TrainConfig{});
  const auto back = model_from_files(model_to_files(m));
  CHECK(back.weights == m.weights);
  CHECK(back.classes == m.classes);
  CHECK(back.epochs_run == m.epochs_run);
  for (std::size_t i = 0; i < x.rows(); ++i) CHECK(predict(back, x.row(i)) == predict(m, x.row(i)));
}
