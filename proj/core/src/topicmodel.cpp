#include "stressorlens/topicmodel.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <thread>

#include <boost/math/special_functions/digamma.hpp>

#include "stressorlens/error.hpp"
#include "stressorlens/random.hpp"

namespace stressorlens::topicmodel {
namespace {

using textprep::DocTermMatrix;
using textprep::SparseRow;

// Documents per work block. Partial sums are reduced in block order, so results
// are independent of the thread count.
constexpr std::size_t kBlockSize = 128;
// Per-document E-step: training passes warm-start from the previous gamma, the final
// pass and inference run to a much tighter tolerance.
constexpr double kTrainInnerTol = 1e-6;
constexpr std::size_t kTrainInnerIters = 300;
constexpr double kFinalInnerTol = 1e-10;
constexpr std::size_t kFinalInnerIters = 2000;
constexpr double kNormFloor = 1e-100;

double digamma(double x) { return boost::math::digamma(x); }

std::size_t resolve_threads(std::size_t requested, std::size_t blocks) {
  std::size_t t = requested ? requested : std::max<std::size_t>(1, std::thread::hardware_concurrency());
  return std::max<std::size_t>(1, std::min(t, blocks));
}

template <class Fn>
void for_each_block(std::size_t n_items, std::size_t threads, Fn&& fn) {
  const std::size_t blocks = (n_items + kBlockSize - 1) / kBlockSize;
  threads = resolve_threads(threads, blocks);
  if (threads <= 1) {
    for (std::size_t b = 0; b < blocks; ++b) fn(b, b * kBlockSize, std::min(n_items, (b + 1) * kBlockSize));
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t b = next++; b < blocks; b = next++) {
        fn(b, b * kBlockSize, std::min(n_items, (b + 1) * kBlockSize));
      }
    });
  }
  for (auto& th : pool) th.join();
}

// exp(E[log beta_kw]) under Dirichlet(lambda_k).
Matrix exp_dirichlet_expectation(const Matrix& lambda) {
  Matrix out(lambda.rows(), lambda.cols());
  for (std::size_t k = 0; k < lambda.rows(); ++k) {
    const auto row = lambda.row(k);
    const double psi_total = digamma(std::accumulate(row.begin(), row.end(), 0.0));
    for (std::size_t w = 0; w < lambda.cols(); ++w) out(k, w) = std::exp(digamma(row[w]) - psi_total);
  }
  return out;
}

void exp_dirichlet_expectation(std::span<const double> gamma, std::span<double> out) {
  const double psi_total = digamma(std::accumulate(gamma.begin(), gamma.end(), 0.0));
  for (std::size_t k = 0; k < gamma.size(); ++k) out[k] = std::exp(digamma(gamma[k]) - psi_total);
}

double row_mass(const SparseRow& row) {
  double s = 0.0;
  for (const auto& e : row) s += e.value;
  return s;
}

void init_gamma(std::span<double> gamma, double alpha, double mass) {
  std::fill(gamma.begin(), gamma.end(), alpha + mass / static_cast<double>(gamma.size()));
}

// Coordinate ascent on one document's gamma. When `sstats` is given, adds the
// document's expected topic-word counts (responsibilities times weights).
void e_step_doc(const SparseRow& row, std::span<double> gamma, const Matrix& exp_elog_beta,
                double alpha, double tol, std::size_t max_iters, Matrix* sstats) {
  const std::size_t K = gamma.size();
  std::vector<double> exp_theta(K), next(K), norm(row.size());
  exp_dirichlet_expectation(gamma, exp_theta);
  const auto compute_norm = [&] {
    for (std::size_t j = 0; j < row.size(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < K; ++k) s += exp_theta[k] * exp_elog_beta(k, row[j].column);
      norm[j] = s + kNormFloor;
    }
  };
  if (row.empty()) {
    std::fill(gamma.begin(), gamma.end(), alpha);
    return;
  }
  for (std::size_t it = 0; it < max_iters; ++it) {
    compute_norm();
    double change = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      double acc = 0.0;
      for (std::size_t j = 0; j < row.size(); ++j) {
        acc += row[j].value * exp_elog_beta(k, row[j].column) / norm[j];
      }
      next[k] = alpha + exp_theta[k] * acc;
      change += std::abs(next[k] - gamma[k]);
    }
    std::copy(next.begin(), next.end(), gamma.begin());
    exp_dirichlet_expectation(gamma, exp_theta);
    if (change / static_cast<double>(K) < tol) break;
  }
  if (sstats) {
    compute_norm();
    for (std::size_t j = 0; j < row.size(); ++j) {
      const auto w = row[j].column;
      const double scale = row[j].value / norm[j];
      for (std::size_t k = 0; k < K; ++k) (*sstats)(k, w) += exp_theta[k] * exp_elog_beta(k, w) * scale;
    }
  }
}

void validate_matrix(const DocTermMatrix& x) {
  if (x.n_docs() == 0 || x.n_terms() == 0) throw Error("topic model: empty document-term matrix");
  bool any = false;
  for (const auto& row : x.rows) {
    for (const auto& e : row) {
      if (!(e.value >= 0.0) || !std::isfinite(e.value)) {
        throw Error("topic model: matrix entries must be finite and nonnegative");
      }
      if (e.column >= x.n_terms()) throw Error("topic model: column index out of range");
      any = any || e.value > 0.0;
    }
  }
  if (!any) throw Error("topic model: all-zero document-term matrix");
}

Matrix normalize_rows(const Matrix& m) {
  Matrix out = m;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    const double s = std::accumulate(row.begin(), row.end(), 0.0);
    for (double& v : row) v /= s;
  }
  return out;
}

// Initial topic-word parameters: noise in [0.5, 1.5) keyed by (seed, topic, term text),
// plus the term profile of one seed document per topic. Seed documents are drawn
// k-means++ style (squared distance between L1-normalized rows), so topics start
// spread over the corpus. Nothing depends on column order.
Matrix init_lambda(const DocTermMatrix& x, std::size_t K, std::uint64_t seed) {
  const auto& vocab = *x.vocabulary;
  const std::size_t V = vocab.size();
  const std::size_t N = x.n_docs();
  Matrix lambda(K, V);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t w = 0; w < V; ++w) {
      const std::uint64_t h = splitmix64(seed ^ splitmix64(k + 1) ^ fnv1a64(vocab.terms[w]));
      lambda(k, w) = 0.5 + static_cast<double>(h >> 11) * 0x1.0p-53;
    }
  }
  if (K == 1) return lambda;

  double total = 0.0;
  std::vector<double> norm2(N, 0.0);
  for (std::size_t d = 0; d < N; ++d) {
    const double m = row_mass(x.rows[d]);
    total += m;
    for (const auto& e : x.rows[d]) norm2[d] += (e.value / m) * (e.value / m);
    if (m <= 0.0) norm2[d] = 0.0;
  }
  // Squared distance between document d and a dense normalized profile.
  const auto dist = [&](std::size_t d, const std::vector<double>& c, double c_norm2) {
    const double m = row_mass(x.rows[d]);
    if (m <= 0.0) return 0.0;
    double dot = 0.0;
    for (const auto& e : x.rows[d]) dot += (e.value / m) * c[e.column];
    return std::max(0.0, norm2[d] + c_norm2 - 2.0 * dot);
  };

  Rng rng(splitmix64(seed ^ 0x5eed5eedULL));
  std::vector<std::size_t> nonempty;
  for (std::size_t d = 0; d < N; ++d) {
    if (row_mass(x.rows[d]) > 0.0) nonempty.push_back(d);
  }
  const auto profile_of = [&](std::size_t d, std::vector<double>& profile) {
    std::fill(profile.begin(), profile.end(), 0.0);
    const double m = row_mass(x.rows[d]);
    double p2 = 0.0;
    for (const auto& e : x.rows[d]) profile[e.column] += e.value / m;
    for (double v : profile) p2 += v * v;
    return p2;
  };
  // Greedy k-means++: several D^2-weighted candidates per step, keep the one that
  // leaves the smallest total distance.
  const std::size_t candidates = 2 + static_cast<std::size_t>(std::log(static_cast<double>(K)));
  std::vector<double> closest(N, std::numeric_limits<double>::infinity());
  std::vector<double> profile(V), trial(N), best_closest(N);
  const double weight = 0.1 * total / static_cast<double>(K);
  for (std::size_t k = 0; k < K; ++k) {
    std::size_t pick = nonempty[uniform_index(rng, nonempty.size())];
    if (k > 0) {
      double sum = 0.0;
      for (std::size_t d = 0; d < N; ++d) sum += closest[d];
      if (!(sum > 0.0)) break;
      double best_potential = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < candidates; ++c) {
        const double u = uniform01(rng) * sum;
        double acc = 0.0;
        std::size_t cand = N;
        for (std::size_t d = 0; d < N; ++d) {
          acc += closest[d];
          if (closest[d] > 0.0 && u < acc) {
            cand = d;
            break;
          }
        }
        if (cand == N) {
          for (std::size_t d = N; d-- > 0;) {
            if (closest[d] > 0.0) {
              cand = d;
              break;
            }
          }
        }
        const double p2 = profile_of(cand, profile);
        double potential = 0.0;
        for (std::size_t d = 0; d < N; ++d) {
          trial[d] = std::min(closest[d], dist(d, profile, p2));
          potential += trial[d];
        }
        if (potential < best_potential) {
          best_potential = potential;
          pick = cand;
          best_closest = trial;
        }
      }
      closest = best_closest;
    }
    const double p2 = profile_of(pick, profile);
    for (std::size_t w = 0; w < V; ++w) lambda(k, w) += weight * profile[w];
    if (k == 0) {
      for (std::size_t d = 0; d < N; ++d) closest[d] = dist(d, profile, p2);
    }
  }
  return lambda;
}

LdaModel make_model(const DocTermMatrix& x, const LdaConfig& config, Inference method) {
  LdaModel model;
  model.config = config;
  model.method = method;
  model.vocabulary = x.vocabulary;
  model.topic_names.assign(config.num_topics, std::nullopt);
  model.group_map = TopicGroupMap::default_for(config.num_topics);
  return model;
}

}  // namespace

void LdaConfig::validate() const {
  if (num_topics < 1) throw std::invalid_argument("LDA: number of topics must be >= 1");
  if (!(doc_prior() > 0.0)) throw std::invalid_argument("LDA: alpha must be > 0");
  if (!(word_prior() > 0.0)) throw std::invalid_argument("LDA: eta must be > 0");
  if (!(elbo_rel_tol >= 0.0)) throw std::invalid_argument("LDA: elbo_rel_tol must be >= 0");
}

nlohmann::json config_to_json(const LdaConfig& c) {
  return {{"num_topics", c.num_topics},     {"alpha", c.doc_prior()},
          {"eta", c.word_prior()},          {"max_iters", c.max_iters},
          {"elbo_rel_tol", c.elbo_rel_tol}, {"seed", c.seed}};
}

LdaConfig config_from_json(const nlohmann::json& j) {
  LdaConfig c;
  c.num_topics = j.at("num_topics").get<std::size_t>();
  c.alpha = j.at("alpha").get<double>();
  c.eta = j.at("eta").get<double>();
  c.max_iters = j.at("max_iters").get<std::size_t>();
  c.elbo_rel_tol = j.at("elbo_rel_tol").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

std::vector<std::string> default_group_names() {
  return {"Fear of coronavirus",
          "Educational and occupational problems",
          "Family problems",
          "Problems related to social environment",
          "Mental health symptoms",
          "Uncertainty on development of pandemic"};
}

TopicGroupMap TopicGroupMap::default_for(std::size_t num_topics) {
  TopicGroupMap m;
  m.groups = default_group_names();
  m.assignment.resize(num_topics);
  for (std::size_t k = 0; k < num_topics; ++k) m.assignment[k] = k % m.groups.size();
  return m;
}

void TopicGroupMap::validate(std::size_t num_topics) const {
  if (groups.empty()) throw std::invalid_argument("group map: at least one group required");
  if (assignment.size() != num_topics) {
    throw std::invalid_argument("group map: assignment must cover all " +
                                std::to_string(num_topics) + " topics");
  }
  for (std::size_t k = 0; k < assignment.size(); ++k) {
    if (assignment[k] >= groups.size()) {
      throw std::invalid_argument("group map: topic " + std::to_string(k) +
                                  " assigned to nonexistent group");
    }
  }
}

double variational_bound(const DocTermMatrix& x, const Matrix& gamma, const Matrix& lambda,
                         double alpha, double eta) {
  const std::size_t K = lambda.rows();
  const std::size_t V = lambda.cols();
  const Matrix exp_elog_beta = exp_dirichlet_expectation(lambda);

  const std::size_t blocks = (x.n_docs() + kBlockSize - 1) / kBlockSize;
  std::vector<double> partial(blocks, 0.0);
  const double doc_const = std::lgamma(K * alpha) - K * std::lgamma(alpha);
  for_each_block(x.n_docs(), 0, [&](std::size_t b, std::size_t lo, std::size_t hi) {
    std::vector<double> exp_theta(K);
    double acc = 0.0;
    for (std::size_t d = lo; d < hi; ++d) {
      const auto g = gamma.row(d);
      exp_dirichlet_expectation(g, exp_theta);
      for (const auto& e : x.rows[d]) {
        double s = 0.0;
        for (std::size_t k = 0; k < K; ++k) s += exp_theta[k] * exp_elog_beta(k, e.column);
        acc += e.value * std::log(s + kNormFloor);
      }
      const double g_sum = std::accumulate(g.begin(), g.end(), 0.0);
      const double psi_sum = digamma(g_sum);
      for (std::size_t k = 0; k < K; ++k) {
        acc += (alpha - g[k]) * (digamma(g[k]) - psi_sum) + std::lgamma(g[k]);
      }
      acc += doc_const - std::lgamma(g_sum);
    }
    partial[b] = acc;
  });
  double bound = 0.0;
  for (double p : partial) bound += p;

  for (std::size_t k = 0; k < K; ++k) {
    const auto l = lambda.row(k);
    const double l_sum = std::accumulate(l.begin(), l.end(), 0.0);
    const double psi_sum = digamma(l_sum);
    for (std::size_t w = 0; w < V; ++w) {
      bound += (eta - l[w]) * (digamma(l[w]) - psi_sum) + std::lgamma(l[w]);
    }
    bound += std::lgamma(V * eta) - V * std::lgamma(eta) - std::lgamma(l_sum);
  }
  return bound;
}

LdaModel fit_vb(const DocTermMatrix& x, const LdaConfig& config) {
  config.validate();
  validate_matrix(x);
  const std::size_t K = config.num_topics;
  const std::size_t V = x.n_terms();
  const std::size_t N = x.n_docs();
  const double alpha = config.doc_prior();
  const double eta = config.word_prior();

  LdaModel model = make_model(x, config, Inference::VariationalBayes);
  Matrix lambda = init_lambda(x, K, config.seed);
  Matrix gamma(N, K);
  for (std::size_t d = 0; d < N; ++d) init_gamma(gamma.row(d), alpha, row_mass(x.rows[d]));

  const std::size_t blocks = (N + kBlockSize - 1) / kBlockSize;
  for (std::size_t it = 0; it < config.max_iters; ++it) {
    const Matrix exp_elog_beta = exp_dirichlet_expectation(lambda);
    std::vector<Matrix> partial(blocks);
    for_each_block(N, config.num_threads, [&](std::size_t b, std::size_t lo, std::size_t hi) {
      Matrix sstats(K, V);
      for (std::size_t d = lo; d < hi; ++d) {
        e_step_doc(x.rows[d], gamma.row(d), exp_elog_beta, alpha, kTrainInnerTol, kTrainInnerIters,
                   &sstats);
      }
      partial[b] = std::move(sstats);
    });
    Matrix next(K, V, eta);
    for (const Matrix& p : partial) {
      for (std::size_t i = 0; i < next.data().size(); ++i) next.data()[i] += p.data()[i];
    }
    lambda = std::move(next);

    const double bound = variational_bound(x, gamma, lambda, alpha, eta);
    if (!std::isfinite(bound)) {
      throw Error("fit_vb: evidence lower bound became non-finite at iteration " +
                  std::to_string(it) + " (numerical failure)");
    }
    model.elbo_trace.push_back(bound);
    const std::size_t n = model.elbo_trace.size();
    if (n >= 2) {
      const double prev = model.elbo_trace[n - 2];
      if (std::abs(bound - prev) <= config.elbo_rel_tol * std::abs(prev)) break;
    }
  }

  // Final theta: same cold start as infer_theta, so reported theta is what inference
  // against the converged topics returns.
  const Matrix exp_elog_beta = exp_dirichlet_expectation(lambda);
  for_each_block(N, config.num_threads, [&](std::size_t, std::size_t lo, std::size_t hi) {
    for (std::size_t d = lo; d < hi; ++d) {
      init_gamma(gamma.row(d), alpha, row_mass(x.rows[d]));
      e_step_doc(x.rows[d], gamma.row(d), exp_elog_beta, alpha, kFinalInnerTol, kFinalInnerIters,
                 nullptr);
    }
  });

  model.topic_word = normalize_rows(lambda);
  model.topic_word_concentration = std::move(lambda);
  model.doc_topic = normalize_rows(gamma);
  return model;
}

LdaModel fit_gibbs(const DocTermMatrix& x, const LdaConfig& config) {
  config.validate();
  if (x.weighting != textprep::Weighting::Count) {
    throw Error("fit_gibbs: requires a Count-weighted matrix; use fit_vb for TF-IDF weights");
  }
  validate_matrix(x);
  const std::size_t K = config.num_topics;
  const std::size_t V = x.n_terms();
  const std::size_t N = x.n_docs();
  const double alpha = config.doc_prior();
  const double eta = config.word_prior();

  std::vector<std::uint32_t> words;
  std::vector<std::size_t> offsets{0};
  for (const auto& row : x.rows) {
    for (const auto& e : row) {
      if (e.value != std::floor(e.value)) {
        throw Error("fit_gibbs: non-integer count; use fit_vb for real-valued weights");
      }
      words.insert(words.end(), static_cast<std::size_t>(e.value), e.column);
    }
    offsets.push_back(words.size());
  }

  Rng rng(config.seed);
  std::vector<std::uint32_t> z(words.size());
  std::vector<std::uint32_t> n_dk(N * K, 0), n_kw(K * V, 0), n_k(K, 0);
  for (std::size_t d = 0; d < N; ++d) {
    for (std::size_t i = offsets[d]; i < offsets[d + 1]; ++i) {
      const auto k = static_cast<std::uint32_t>(uniform_index(rng, K));
      z[i] = k;
      ++n_dk[d * K + k];
      ++n_kw[k * V + words[i]];
      ++n_k[k];
    }
  }

  const double v_eta = static_cast<double>(V) * eta;
  std::vector<double> cumulative(K);
  for (std::size_t sweep = 0; sweep < config.max_iters; ++sweep) {
    for (std::size_t d = 0; d < N; ++d) {
      for (std::size_t i = offsets[d]; i < offsets[d + 1]; ++i) {
        const std::uint32_t w = words[i];
        std::uint32_t k = z[i];
        --n_dk[d * K + k];
        --n_kw[k * V + w];
        --n_k[k];
        double total = 0.0;
        for (std::size_t t = 0; t < K; ++t) {
          total += (n_dk[d * K + t] + alpha) * (n_kw[t * V + w] + eta) / (n_k[t] + v_eta);
          cumulative[t] = total;
        }
        const double u = uniform01(rng) * total;
        k = static_cast<std::uint32_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) -
                                       cumulative.begin());
        if (k >= K) k = static_cast<std::uint32_t>(K - 1);
        z[i] = k;
        ++n_dk[d * K + k];
        ++n_kw[k * V + w];
        ++n_k[k];
      }
    }
  }

  LdaModel model = make_model(x, config, Inference::CollapsedGibbs);
  model.doc_topic = Matrix(N, K);
  for (std::size_t d = 0; d < N; ++d) {
    const double n_d = static_cast<double>(offsets[d + 1] - offsets[d]);
    for (std::size_t k = 0; k < K; ++k) {
      model.doc_topic(d, k) = (n_dk[d * K + k] + alpha) / (n_d + K * alpha);
    }
  }
  model.topic_word_concentration = Matrix(K, V);
  model.topic_word = Matrix(K, V);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t w = 0; w < V; ++w) {
      model.topic_word_concentration(k, w) = n_kw[k * V + w] + eta;
      model.topic_word(k, w) = (n_kw[k * V + w] + eta) / (n_k[k] + v_eta);
    }
  }
  return model;
}

ThetaInference infer_theta(const LdaModel& model, const SparseRow& row) {
  const std::size_t K = model.num_topics();
  ThetaInference out;
  for (const auto& e : row) {
    if (e.column >= model.num_terms()) throw Error("infer_theta: column outside model vocabulary");
    if (!(e.value >= 0.0)) throw Error("infer_theta: negative weight");
  }
  if (row_mass(row) <= 0.0) {
    out.theta.assign(K, 1.0 / static_cast<double>(K));
    out.fallback = true;
    return out;
  }
  const double alpha = model.config.doc_prior();
  const Matrix exp_elog_beta = exp_dirichlet_expectation(model.topic_word_concentration);
  std::vector<double> gamma(K);
  init_gamma(gamma, alpha, row_mass(row));
  e_step_doc(row, gamma, exp_elog_beta, alpha, kFinalInnerTol, kFinalInnerIters, nullptr);
  const double s = std::accumulate(gamma.begin(), gamma.end(), 0.0);
  out.theta.resize(K);
  for (std::size_t k = 0; k < K; ++k) out.theta[k] = gamma[k] / s;
  return out;
}

std::size_t dominant_topic(std::span<const double> theta) {
  if (theta.empty()) throw Error("dominant_topic: empty distribution");
  return static_cast<std::size_t>(std::max_element(theta.begin(), theta.end()) - theta.begin());
}

std::vector<std::pair<std::string, double>> top_terms(const LdaModel& model, std::size_t topic,
                                                      std::size_t n) {
  if (topic >= model.num_topics()) throw Error("top_terms: topic index out of range");
  const auto phi = model.topic_word.row(topic);
  const auto& terms = model.vocabulary->terms;
  std::vector<std::size_t> order(phi.size());
  std::iota(order.begin(), order.end(), 0);
  n = std::min(n, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (phi[a] != phi[b]) return phi[a] > phi[b];
                      return terms[a] < terms[b];
                    });
  std::vector<std::pair<std::string, double>> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.emplace_back(terms[order[i]], phi[order[i]]);
  return out;
}

ReviewSelection select_review_samples(const LdaModel& model, std::size_t topic,
                                      std::span<const std::string> post_ids, std::uint64_t seed) {
  if (topic >= model.num_topics()) throw Error("select_review_samples: topic index out of range");
  if (post_ids.size() != model.num_docs()) {
    throw Error("select_review_samples: one post id per modeled document required");
  }
  std::vector<std::size_t> members;
  for (std::size_t d = 0; d < model.num_docs(); ++d) {
    if (dominant_topic(model.doc_topic.row(d)) == topic) members.push_back(d);
  }
  ReviewSelection out;
  out.flagged = members.size() < 6;
  if (members.empty()) return out;

  std::vector<std::size_t> ranked = members;
  std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
    return model.doc_topic(a, topic) > model.doc_topic(b, topic);
  });
  const std::size_t n_top = std::min<std::size_t>(3, ranked.size());
  const auto make = [&](std::size_t d, SampleKind kind) {
    return ReviewSample{topic, d, post_ids[d], model.doc_topic(d, topic), kind};
  };
  for (std::size_t i = 0; i < n_top; ++i) out.samples.push_back(make(ranked[i], SampleKind::TopRanked));

  std::vector<std::size_t> rest(ranked.begin() + static_cast<std::ptrdiff_t>(n_top), ranked.end());
  std::sort(rest.begin(), rest.end());
  Rng rng(seed);
  const std::size_t n_random = std::min<std::size_t>(3, rest.size());
  for (std::size_t i = 0; i < n_random; ++i) {
    const std::size_t j = i + uniform_index(rng, rest.size() - i);
    std::swap(rest[i], rest[j]);
    out.samples.push_back(make(rest[i], SampleKind::Random));
  }
  return out;
}

std::vector<double> group_mass(std::span<const double> theta, const TopicGroupMap& map) {
  if (map.assignment.size() != theta.size()) {
    throw Error("group_mass: group map does not cover every topic");
  }
  std::vector<double> out(map.groups.size(), 0.0);
  for (std::size_t k = 0; k < theta.size(); ++k) out.at(map.assignment[k]) += theta[k];
  return out;
}

FileSet model_to_files(const LdaModel& model, const std::string& prefix) {
  nlohmann::json names = nlohmann::json::array();
  for (const auto& n : model.topic_names) names.push_back(n ? nlohmann::json(*n) : nlohmann::json());
  nlohmann::ordered_json manifest;
  manifest["format"] = "stressorlens.lda";
  manifest["version"] = 1;
  manifest["method"] = model.method == Inference::VariationalBayes ? "vb" : "gibbs";
  manifest["config"] = config_to_json(model.config);
  manifest["num_topics"] = model.num_topics();
  manifest["num_terms"] = model.num_terms();
  manifest["num_docs"] = model.num_docs();
  manifest["topic_names"] = names;
  manifest["group_map"] = {{"groups", model.group_map.groups},
                           {"assignment", model.group_map.assignment}};
  manifest["elbo_trace"] = model.elbo_trace;
  manifest["vocabulary_hash"] = model.vocabulary ? model.vocabulary->content_hash() : "";
  return {
      {prefix + "_manifest.json", manifest.dump(2) + "\n"},
      {prefix + "_topic_word.bin", encode_matrix(model.topic_word_concentration)},
      {prefix + "_doc_topic.bin", encode_matrix(model.doc_topic)},
  };
}

LdaModel model_from_files(const FileSet& files,
                          std::shared_ptr<const textprep::Vocabulary> vocabulary,
                          const std::string& prefix) {
  const auto get = [&](const std::string& name) -> const std::string& {
    auto it = files.find(name);
    if (it == files.end()) throw Error("LDA model: missing " + name);
    return it->second;
  };
  const auto manifest = nlohmann::json::parse(get(prefix + "_manifest.json"));
  if (manifest.at("format") != "stressorlens.lda") throw Error("LDA model: unexpected manifest format");
  if (!vocabulary || manifest.at("vocabulary_hash").get<std::string>() != vocabulary->content_hash()) {
    throw IntegrityError("LDA model: vocabulary hash does not match the stored vocabulary");
  }
  LdaModel model;
  model.config = config_from_json(manifest.at("config"));
  model.method = manifest.at("method") == "gibbs" ? Inference::CollapsedGibbs : Inference::VariationalBayes;
  model.vocabulary = std::move(vocabulary);
  model.topic_word_concentration = decode_matrix(get(prefix + "_topic_word.bin"));
  model.doc_topic = decode_matrix(get(prefix + "_doc_topic.bin"));
  if (model.topic_word_concentration.rows() != model.config.num_topics ||
      model.topic_word_concentration.cols() != model.vocabulary->size() ||
      model.doc_topic.cols() != model.config.num_topics) {
    throw Error("LDA model: matrix shapes disagree with manifest");
  }
  model.topic_word = normalize_rows(model.topic_word_concentration);
  model.elbo_trace = manifest.at("elbo_trace").get<std::vector<double>>();
  for (const auto& n : manifest.at("topic_names")) {
    model.topic_names.push_back(n.is_null() ? std::nullopt : std::optional<std::string>(n.get<std::string>()));
  }
  model.group_map.groups = manifest.at("group_map").at("groups").get<std::vector<std::string>>();
  model.group_map.assignment = manifest.at("group_map").at("assignment").get<std::vector<std::size_t>>();
  model.group_map.validate(model.num_topics());
  if (model.topic_names.size() != model.num_topics()) throw Error("LDA model: topic name count mismatch");
  return model;
}

}  // namespace stressorlens::topicmodel
