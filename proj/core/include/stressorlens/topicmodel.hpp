#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "stressorlens/matrix.hpp"
#include "stressorlens/matrix_io.hpp"
#include "stressorlens/textprep.hpp"

namespace stressorlens::topicmodel {

struct LdaConfig {
  std::size_t num_topics = 10;
  std::optional<double> alpha;  // doc-topic prior, 1/K when unset
  std::optional<double> eta;    // topic-word prior, 1/K when unset
  std::size_t max_iters = 200;
  double elbo_rel_tol = 1e-5;
  std::uint64_t seed = 0;
  std::size_t num_threads = 0;  // 0: hardware concurrency; results do not depend on it

  double doc_prior() const { return alpha.value_or(1.0 / static_cast<double>(num_topics)); }
  double word_prior() const { return eta.value_or(1.0 / static_cast<double>(num_topics)); }
  void validate() const;  // throws std::invalid_argument
};

nlohmann::json config_to_json(const LdaConfig& c);
LdaConfig config_from_json(const nlohmann::json& j);

// The six topic groups analysts converged on for pandemic stressors.
std::vector<std::string> default_group_names();

struct TopicGroupMap {
  std::vector<std::string> groups;
  std::vector<std::size_t> assignment;  // topic -> group index

  // Default groups with topic k assigned to group k mod G.
  static TopicGroupMap default_for(std::size_t num_topics);
  void validate(std::size_t num_topics) const;  // throws std::invalid_argument
  bool operator==(const TopicGroupMap&) const = default;
};

enum class Inference { VariationalBayes, CollapsedGibbs };

struct LdaModel {
  LdaConfig config;
  Inference method = Inference::VariationalBayes;
  std::shared_ptr<const textprep::Vocabulary> vocabulary;
  // Dirichlet parameters of each topic's word distribution (K x V). For Gibbs fits
  // these are the posterior counts n_kw + eta.
  Matrix topic_word_concentration;
  Matrix topic_word;  // phi, K x V, rows sum to 1
  Matrix doc_topic;   // theta, N x K, rows sum to 1
  std::vector<double> elbo_trace;
  std::vector<std::optional<std::string>> topic_names;
  TopicGroupMap group_map;

  std::size_t num_topics() const noexcept { return topic_word.rows(); }
  std::size_t num_terms() const noexcept { return topic_word.cols(); }
  std::size_t num_docs() const noexcept { return doc_topic.rows(); }
};

// Batch mean-field variational Bayes over nonnegative real weights.
LdaModel fit_vb(const textprep::DocTermMatrix& x, const LdaConfig& config);

// Collapsed Gibbs sampling; requires an integer count matrix.
LdaModel fit_gibbs(const textprep::DocTermMatrix& x, const LdaConfig& config);

// Evidence lower bound with the word-level responsibilities optimized out.
double variational_bound(const textprep::DocTermMatrix& x, const Matrix& gamma,
                         const Matrix& lambda, double alpha, double eta);

struct ThetaInference {
  std::vector<double> theta;
  bool fallback = false;  // empty row: uniform distribution returned
};

// Document-level variational updates with the topics held fixed.
ThetaInference infer_theta(const LdaModel& model, const textprep::SparseRow& row);

// Argmax, lowest index on ties.
std::size_t dominant_topic(std::span<const double> theta);

std::vector<std::pair<std::string, double>> top_terms(const LdaModel& model, std::size_t topic,
                                                      std::size_t n);

enum class SampleKind { TopRanked, Random };

struct ReviewSample {
  std::size_t topic = 0;
  std::size_t doc = 0;  // row in doc_topic
  std::string post_id;
  double theta_value = 0.0;
  SampleKind selection = SampleKind::TopRanked;
};

struct ReviewSelection {
  std::vector<ReviewSample> samples;
  bool flagged = false;  // fewer than six documents with this dominant topic
};

// Three highest-theta documents whose dominant topic is `topic`, plus three drawn
// uniformly without replacement from the rest of that set.
ReviewSelection select_review_samples(const LdaModel& model, std::size_t topic,
                                      std::span<const std::string> post_ids,
                                      std::uint64_t seed);

std::vector<double> group_mass(std::span<const double> theta, const TopicGroupMap& map);

// Snapshot layout: <prefix>_manifest.json plus <prefix>_topic_word.bin (concentration)
// and <prefix>_doc_topic.bin.
FileSet model_to_files(const LdaModel& model, const std::string& prefix = "lda");
LdaModel model_from_files(const FileSet& files,
                          std::shared_ptr<const textprep::Vocabulary> vocabulary,
                          const std::string& prefix = "lda");

}  // namespace stressorlens::topicmodel
