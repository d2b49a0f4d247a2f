#include <benchmark/benchmark.h>

#include "stressorlens/flairclf.hpp"
#include "stressorlens/lexicon.hpp"
#include "stressorlens/random.hpp"
#include "stressorlens/textprep.hpp"
#include "stressorlens/topicmodel.hpp"
#include "stressorlens/trends.hpp"
#include "synthetic.hpp"

using namespace stressorlens;

namespace {

const testing::PlantedCorpus& planted(std::size_t docs) {
  static std::map<std::size_t, testing::PlantedCorpus> cache;
  auto it = cache.find(docs);
  if (it == cache.end()) it = cache.emplace(docs, testing::make_planted_corpus(docs, 10, 300, 80, 1)).first;
  return it->second;
}

std::vector<std::string> planted_text(std::size_t docs) {
  std::vector<std::string> out;
  for (const auto& d : planted(docs).docs) {
    std::string s;
    for (const auto& t : d) s += t + ' ';
    out.push_back(s + "https://example.com people are wearing no masks at the grocery store");
  }
  return out;
}

void BM_Tokenize(benchmark::State& state) {
  const auto texts = planted_text(static_cast<std::size_t>(state.range(0)));
  const textprep::StopWords stop = {"the", "at", "are"};
  std::size_t bytes = 0;
  for (const auto& t : texts) bytes += t.size();
  for (auto _ : state) {
    for (const auto& t : texts) benchmark::DoNotOptimize(textprep::tokenize(t, stop));
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * bytes));
}
BENCHMARK(BM_Tokenize)->Arg(1000);

void BM_BuildVocabularyAndTfidf(benchmark::State& state) {
  const auto& docs = planted(static_cast<std::size_t>(state.range(0))).docs;
  textprep::FeatureConfig c;
  c.max_features = 300;
  for (auto _ : state) {
    auto v = std::make_shared<const textprep::Vocabulary>(textprep::build_vocabulary(docs, c));
    benchmark::DoNotOptimize(textprep::tfidf_matrix(docs, v));
  }
}
BENCHMARK(BM_BuildVocabularyAndTfidf)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_FitVb(benchmark::State& state) {
  const auto& pc = planted(static_cast<std::size_t>(state.range(0)));
  const auto x = textprep::count_matrix(pc.docs, testing::fixed_vocabulary(pc.terms, pc.docs));
  topicmodel::LdaConfig c;
  c.num_topics = 10;
  c.max_iters = 20;
  c.elbo_rel_tol = 0.0;
  for (auto _ : state) benchmark::DoNotOptimize(topicmodel::fit_vb(x, c));
}
BENCHMARK(BM_FitVb)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_FitGibbs(benchmark::State& state) {
  const auto& pc = planted(static_cast<std::size_t>(state.range(0)));
  const auto x = textprep::count_matrix(pc.docs, testing::fixed_vocabulary(pc.terms, pc.docs));
  topicmodel::LdaConfig c;
  c.num_topics = 10;
  c.max_iters = 20;
  for (auto _ : state) benchmark::DoNotOptimize(topicmodel::fit_gibbs(x, c));
}
BENCHMARK(BM_FitGibbs)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_ClassifierEpochs(benchmark::State& state) {
  Rng rng(3);
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const flairclf::FeatureLayout layout;
  Matrix x(n, layout.dim());
  for (double& v : x.data()) v = uniform01(rng);
  std::vector<corpus::FlairGroup> y;
  for (std::size_t i = 0; i < n; ++i) y.push_back(flairclf::kClasses[i % 4]);
  flairclf::TrainConfig c;
  c.max_epochs = 50;
  c.tolerance = 0.0;
  for (auto _ : state) benchmark::DoNotOptimize(flairclf::train(x, y, c));
}
BENCHMARK(BM_ClassifierEpochs)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_LexiconAnnotate(benchmark::State& state) {
  const auto texts = planted_text(static_cast<std::size_t>(state.range(0)));
  std::vector<corpus::CleanPost> posts;
  for (std::size_t i = 0; i < texts.size(); ++i) posts.push_back(testing::make_post(std::to_string(i), 1588291200, texts[i]));
  const auto lex = lexicon::default_lexicon();
  for (auto _ : state) benchmark::DoNotOptimize(lexicon::annotate_corpus(posts, lex));
}
BENCHMARK(BM_LexiconAnnotate)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_MonthlyTrend(benchmark::State& state) {
  Rng rng(9);
  const std::size_t n = static_cast<std::size_t>(state.range(0)), K = 20;
  std::vector<corpus::CleanPost> posts;
  Matrix theta(n, K);
  for (std::size_t i = 0; i < n; ++i) {
    posts.push_back(testing::make_post(std::to_string(i), 1577836800 + static_cast<std::int64_t>(uniform_index(rng, 540)) * 86400, "x"));
    for (std::size_t k = 0; k < K; ++k) theta(i, k) = 1.0 / K;
  }
  const auto map = topicmodel::TopicGroupMap::default_for(K);
  for (auto _ : state) benchmark::DoNotOptimize(trends::lda_monthly_sum(posts, theta, map));
}
BENCHMARK(BM_MonthlyTrend)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
