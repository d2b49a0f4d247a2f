#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "stressorlens/corpus.hpp"
#include "stressorlens/matrix.hpp"
#include "stressorlens/matrix_io.hpp"
#include "stressorlens/textprep.hpp"
#include "stressorlens/topicmodel.hpp"

namespace stressorlens::flairclf {

using corpus::CleanPost;
using corpus::FlairGroup;

// Column layout of a feature row: [theta | tf-idf | hyperlink].
struct FeatureLayout {
  std::size_t lda = 10;
  std::size_t tfidf = 200;
  std::size_t dim() const noexcept { return lda + tfidf + 1; }
};

inline constexpr std::array<FlairGroup, 4> kClasses = {
    FlairGroup::MentalHealthSupport, FlairGroup::DiscussionQuestions, FlairGroup::NewsResources,
    FlairGroup::Experience};

// One row per post. `lda` rows and `tfidf` rows must be aligned with `posts`.
Matrix assemble_features(std::span<const CleanPost> posts, const topicmodel::LdaModel& lda,
                         const textprep::DocTermMatrix& tfidf, FeatureLayout layout = {});

struct TrainConfig {
  double learning_rate = 0.1;
  double l2 = 1.0;
  std::size_t max_epochs = 500;
  double tolerance = 1e-6;
  std::uint64_t seed = 0;  // reserved; full-batch descent from zero weights is deterministic
};

struct LogRegModel {
  std::vector<FlairGroup> classes{kClasses.begin(), kClasses.end()};
  Matrix weights;  // C x (D + 1), bias in the last column
  TrainConfig config;
  std::vector<double> loss_trace;
  std::size_t epochs_run = 0;

  std::size_t dim() const noexcept { return weights.cols() ? weights.cols() - 1 : 0; }
};

// Objective (1/N) * (sum_i cross_entropy_i + l2/2 * sum_c |w_c|^2), bias unpenalized.
// Returns the objective and writes its gradient (same shape as weights).
double objective(const Matrix& weights, const Matrix& features, std::span<const std::size_t> labels,
                 double l2, Matrix* gradient);

// Full-batch gradient descent. Throws Error on fewer than two classes, labels outside
// the four modeled groups, or a non-finite loss.
LogRegModel train(const Matrix& features, std::span<const FlairGroup> labels,
                  const TrainConfig& config);

std::vector<double> class_scores(const LogRegModel& model, std::span<const double> row);
std::vector<double> predict_proba(const LogRegModel& model, std::span<const double> row);
FlairGroup predict(const LogRegModel& model, std::span<const double> row);

double accuracy(const LogRegModel& model, const Matrix& features, std::span<const FlairGroup> labels);

// Unlabelled posts receive the argmax class with source Predicted; others untouched.
std::vector<CleanPost> impute_flairs(std::span<const CleanPost> posts, const LogRegModel& model,
                                     const Matrix& features);

// Posts in the MentalHealthSupport group. Throws Error if any post is still Unlabelled.
std::vector<CleanPost> select_support_subset(std::span<const CleanPost> posts);

// group,labelled,predicted,unlabelled,total
void write_flair_counts_csv(std::ostream& out, std::span<const CleanPost> posts);

FileSet model_to_files(const LogRegModel& model);
LogRegModel model_from_files(const FileSet& files);

}  // namespace stressorlens::flairclf
