#include "stressorlens/flairclf.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>

#include "json.hpp"
#include "stressorlens/csv.hpp"
#include "stressorlens/error.hpp"

namespace stressorlens::flairclf {
namespace {

std::size_t class_index(const std::vector<FlairGroup>& classes, FlairGroup g) {
  auto it = std::find(classes.begin(), classes.end(), g);
  if (it == classes.end()) {
    throw Error("flair classifier: label " + std::string(corpus::to_string(g)) +
                " is not one of the modeled classes");
  }
  return static_cast<std::size_t>(it - classes.begin());
}

void softmax_inplace(std::span<double> scores) {
  const double top = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (double& s : scores) {
    s = std::exp(s - top);
    sum += s;
  }
  for (double& s : scores) s /= sum;
}

}  // namespace

Matrix assemble_features(std::span<const CleanPost> posts, const topicmodel::LdaModel& lda,
                         const textprep::DocTermMatrix& tfidf, FeatureLayout layout) {
  if (lda.num_topics() != layout.lda) {
    throw Error("assemble_features: expected a " + std::to_string(layout.lda) + "-topic model, got " +
                std::to_string(lda.num_topics()));
  }
  if (tfidf.n_terms() != layout.tfidf) {
    throw Error("assemble_features: expected " + std::to_string(layout.tfidf) +
                " tf-idf columns, got " + std::to_string(tfidf.n_terms()));
  }
  if (tfidf.weighting != textprep::Weighting::TfIdf) {
    throw Error("assemble_features: tf-idf matrix required");
  }
  if (lda.num_docs() != posts.size() || tfidf.n_docs() != posts.size()) {
    throw Error("assemble_features: theta and tf-idf rows must align with posts");
  }
  Matrix out(posts.size(), layout.dim());
  for (std::size_t i = 0; i < posts.size(); ++i) {
    const auto theta = lda.doc_topic.row(i);
    std::copy(theta.begin(), theta.end(), out.row(i).begin());
    for (const auto& e : tfidf.rows[i]) out(i, layout.lda + e.column) = e.value;
    out(i, layout.lda + layout.tfidf) = textprep::has_hyperlink(posts[i].text) ? 1.0 : 0.0;
  }
  return out;
}

double objective(const Matrix& weights, const Matrix& features, std::span<const std::size_t> labels,
                 double l2, Matrix* gradient) {
  const std::size_t C = weights.rows();
  const std::size_t D = features.cols();
  const std::size_t N = features.rows();
  if (weights.cols() != D + 1) throw Error("objective: weight/feature dimension mismatch");
  if (labels.size() != N || N == 0) throw Error("objective: one label per row required");
  if (gradient) *gradient = Matrix(C, D + 1);

  std::vector<double> p(C);
  double loss = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const auto x = features.row(i);
    for (std::size_t c = 0; c < C; ++c) {
      double s = weights(c, D);
      for (std::size_t j = 0; j < D; ++j) s += weights(c, j) * x[j];
      p[c] = s;
    }
    const double top = *std::max_element(p.begin(), p.end());
    double z = 0.0;
    for (double s : p) z += std::exp(s - top);
    loss += top + std::log(z) - p[labels[i]];
    if (gradient) {
      softmax_inplace(p);
      for (std::size_t c = 0; c < C; ++c) {
        const double r = p[c] - (labels[i] == c ? 1.0 : 0.0);
        auto g = gradient->row(c);
        for (std::size_t j = 0; j < D; ++j) g[j] += r * x[j];
        g[D] += r;
      }
    }
  }
  double penalty = 0.0;
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t j = 0; j < D; ++j) penalty += weights(c, j) * weights(c, j);
  }
  const double inv_n = 1.0 / static_cast<double>(N);
  if (gradient) {
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t j = 0; j <= D; ++j) {
        double g = (*gradient)(c, j);
        if (j < D) g += l2 * weights(c, j);
        (*gradient)(c, j) = g * inv_n;
      }
    }
  }
  return (loss + 0.5 * l2 * penalty) * inv_n;
}

LogRegModel train(const Matrix& features, std::span<const FlairGroup> labels,
                  const TrainConfig& config) {
  if (features.rows() != labels.size()) throw Error("train: one label per feature row required");
  LogRegModel model;
  model.config = config;
  std::vector<std::size_t> y(labels.size());
  std::set<std::size_t> distinct;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    y[i] = class_index(model.classes, labels[i]);
    distinct.insert(y[i]);
  }
  if (distinct.size() < 2) throw Error("train: at least two distinct classes are required");

  model.weights = Matrix(model.classes.size(), features.cols() + 1);
  Matrix grad;
  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    const double loss = objective(model.weights, features, y, config.l2, &grad);
    if (!std::isfinite(loss)) {
      throw Error("train: loss diverged at epoch " + std::to_string(epoch) +
                  "; lower the learning rate");
    }
    model.loss_trace.push_back(loss);
    model.epochs_run = epoch + 1;
    double max_abs = 0.0;
    for (double g : grad.data()) max_abs = std::max(max_abs, std::abs(g));
    if (max_abs < config.tolerance) break;
    for (std::size_t i = 0; i < grad.data().size(); ++i) {
      model.weights.data()[i] -= config.learning_rate * grad.data()[i];
    }
  }
  return model;
}

std::vector<double> class_scores(const LogRegModel& model, std::span<const double> row) {
  const std::size_t D = model.dim();
  if (row.size() != D) {
    throw Error("predict: expected " + std::to_string(D) + " features, got " + std::to_string(row.size()));
  }
  std::vector<double> s(model.weights.rows());
  for (std::size_t c = 0; c < s.size(); ++c) {
    double acc = model.weights(c, D);
    for (std::size_t j = 0; j < D; ++j) acc += model.weights(c, j) * row[j];
    s[c] = acc;
  }
  return s;
}

std::vector<double> predict_proba(const LogRegModel& model, std::span<const double> row) {
  auto s = class_scores(model, row);
  softmax_inplace(s);
  return s;
}

FlairGroup predict(const LogRegModel& model, std::span<const double> row) {
  const auto p = predict_proba(model, row);
  return model.classes[static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin())];
}

double accuracy(const LogRegModel& model, const Matrix& features, std::span<const FlairGroup> labels) {
  if (labels.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predict(model, features.row(i)) == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

std::vector<CleanPost> impute_flairs(std::span<const CleanPost> posts, const LogRegModel& model,
                                     const Matrix& features) {
  if (features.rows() != posts.size()) throw Error("impute_flairs: one feature row per post required");
  std::vector<CleanPost> out(posts.begin(), posts.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].flair_group != FlairGroup::Unlabelled) continue;
    out[i].flair_group = predict(model, features.row(i));
    out[i].flair_source = corpus::FlairSource::Predicted;
  }
  return out;
}

std::vector<CleanPost> select_support_subset(std::span<const CleanPost> posts) {
  std::vector<CleanPost> out;
  for (const auto& p : posts) {
    if (p.flair_group == FlairGroup::Unlabelled) {
      throw Error("select_support_subset: post " + p.id + " is unlabelled; run flair imputation first");
    }
    if (p.flair_group == FlairGroup::MentalHealthSupport) out.push_back(p);
  }
  return out;
}

void write_flair_counts_csv(std::ostream& out, std::span<const CleanPost> posts) {
  csv::write_row(out, {"group", "labelled", "predicted", "unlabelled", "total"});
  for (FlairGroup g : corpus::kAllFlairGroups) {
    std::size_t by_source[3] = {0, 0, 0};
    for (const auto& p : posts) {
      if (p.flair_group == g) ++by_source[static_cast<std::size_t>(p.flair_source)];
    }
    csv::write_row(out, {std::string(corpus::to_string(g)), std::to_string(by_source[0]),
                         std::to_string(by_source[1]), std::to_string(by_source[2]),
                         std::to_string(by_source[0] + by_source[1] + by_source[2])});
  }
}

FileSet model_to_files(const LogRegModel& model) {
  nlohmann::ordered_json manifest;
  manifest["format"] = "stressorlens.logreg";
  manifest["version"] = 1;
  std::vector<std::string> classes;
  for (auto c : model.classes) classes.emplace_back(corpus::to_string(c));
  manifest["classes"] = classes;
  manifest["train_config"] = {{"learning_rate", model.config.learning_rate},
                              {"l2", model.config.l2},
                              {"max_epochs", model.config.max_epochs},
                              {"tolerance", model.config.tolerance},
                              {"seed", model.config.seed}};
  manifest["epochs_run"] = model.epochs_run;
  manifest["final_loss"] = model.loss_trace.empty() ? 0.0 : model.loss_trace.back();
  return {{"clf_manifest.json", manifest.dump(2) + "\n"}, {"clf_weights.bin", encode_matrix(model.weights)}};
}

LogRegModel model_from_files(const FileSet& files) {
  auto m = files.find("clf_manifest.json");
  auto w = files.find("clf_weights.bin");
  if (m == files.end() || w == files.end()) throw Error("classifier: missing model files");
  const auto manifest = nlohmann::json::parse(m->second);
  LogRegModel model;
  model.classes.clear();
  for (const auto& c : manifest.at("classes")) model.classes.push_back(corpus::parse_flair_group(c.get<std::string>()));
  const auto& tc = manifest.at("train_config");
  model.config = {tc.at("learning_rate").get<double>(), tc.at("l2").get<double>(),
                  tc.at("max_epochs").get<std::size_t>(), tc.at("tolerance").get<double>(),
                  tc.at("seed").get<std::uint64_t>()};
  model.epochs_run = manifest.at("epochs_run").get<std::size_t>();
  model.weights = decode_matrix(w->second);
  if (model.weights.rows() != model.classes.size()) throw Error("classifier: weight rows != classes");
  return model;
}

}  // namespace stressorlens::flairclf
