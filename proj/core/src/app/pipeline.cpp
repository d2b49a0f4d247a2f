#include "stressorlens/app/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "stressorlens/csv.hpp"
#include "stressorlens/error.hpp"
#include "stressorlens/random.hpp"

namespace stressorlens::app {
namespace {

using corpus::CleanPost;
using corpus::FlairGroup;
using corpus::FlairSource;

constexpr const char* kCurationFile = "curation.json";

textprep::StopWords stopwords_for(const PipelineConfig& c) {
  return c.stopwords_path.empty() ? textprep::StopWords{} : textprep::load_stopwords(c.stopwords_path);
}

std::vector<textprep::Tokens> tokenize_all(std::span<const CleanPost> posts, const textprep::StopWords& stop) {
  std::vector<textprep::Tokens> out;
  out.reserve(posts.size());
  for (const auto& p : posts) out.push_back(textprep::tokenize(p.text, stop));
  return out;
}

std::string fmt(double v) { return csv::format_double(v); }

std::string features_json(const textprep::FeatureConfig& f) {
  std::vector<std::string> exclude(f.exclude_tokens.begin(), f.exclude_tokens.end());
  nlohmann::ordered_json j;
  j["max_features"] = f.max_features;
  j["ngram_min"] = f.ngram.min;
  j["ngram_max"] = f.ngram.max;
  j["min_df"] = f.min_df;
  j["include"] = f.include_tokens;
  j["exclude"] = exclude;
  return j.dump(2) + "\n";
}

std::string top_terms_csv(const topicmodel::LdaModel& m) {
  std::ostringstream os;
  csv::write_row(os, {"topic", "rank", "term", "probability"});
  for (std::size_t k = 0; k < m.num_topics(); ++k) {
    const auto terms = topicmodel::top_terms(m, k, 10);
    for (std::size_t r = 0; r < terms.size(); ++r) {
      csv::write_row(os, {std::to_string(k), std::to_string(r + 1), terms[r].first, fmt(terms[r].second)});
    }
  }
  return os.str();
}

void put_lda(FileSet& files, const topicmodel::LdaModel& m) {
  for (auto& [name, bytes] : topicmodel::model_to_files(m, artifact::kLdaPrefix)) files[name] = std::move(bytes);
}

std::vector<CleanPost> subset_posts(const FileSet& files) {
  const auto imputed = decode_posts(require(files, artifact::kImputedPosts));
  const auto ids = decode_ids(require(files, artifact::kSubset));
  std::unordered_map<std::string, const CleanPost*> by_id;
  for (const auto& p : imputed) by_id.emplace(p.id, &p);
  std::vector<CleanPost> out;
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw Error("subset post " + id + " is missing from the imputed corpus");
    out.push_back(*it->second);
  }
  return out;
}

}  // namespace

std::string format_summary(const Summary& s) {
  std::string out;
  for (const auto& [k, v] : s) {
    if (!out.empty()) out += ' ';
    out += k + "=";
    const bool quote = v.empty() || v.find_first_of(" \t\"=") != std::string::npos;
    if (!quote) {
      out += v;
      continue;
    }
    out += '"';
    for (char c : v) {
      if (c == '"' || c == '\\') out += '\\';
      out += c;
    }
    out += '"';
  }
  return out;
}

std::optional<FeatureCuration> read_curation(const fs::path& run_dir) {
  const auto path = run_dir / kCurationFile;
  if (!fs::exists(path)) return std::nullopt;
  const auto j = nlohmann::json::parse(read_file(path));
  FeatureCuration c;
  c.include = j.at("include").get<std::vector<std::string>>();
  const auto ex = j.at("exclude").get<std::vector<std::string>>();
  c.exclude.insert(ex.begin(), ex.end());
  return c;
}

void write_curation(const fs::path& run_dir, const FeatureCuration& c) {
  nlohmann::ordered_json j;
  j["include"] = c.include;
  j["exclude"] = std::vector<std::string>(c.exclude.begin(), c.exclude.end());
  fs::create_directories(run_dir);
  const auto temp = run_dir / (std::string(kCurationFile) + ".tmp");
  write_file(temp, j.dump(2) + "\n");
  fs::rename(temp, run_dir / kCurationFile);
}

textprep::FeatureConfig effective_features(const PipelineConfig& config,
                                           const std::optional<FeatureCuration>& curation) {
  textprep::FeatureConfig f = config.features;
  if (curation) {
    f.include_tokens = curation->include;
    f.exclude_tokens = curation->exclude;
  }
  return f;
}

StageOutput run_ingest(const PipelineConfig& config) {
  if (config.corpus_path.empty()) throw Error("ingest: corpus_path is not configured");
  const auto loaded = corpus::load_corpus(config.corpus_path);
  const auto posts = corpus::clean(loaded.posts);
  const auto counts = corpus::flair_counts(posts);

  StageOutput out;
  out.stage = Stage::Ingest;
  out.warnings = loaded.messages;
  nlohmann::ordered_json report;
  report["raw"] = loaded.posts.size();
  report["malformed"] = loaded.malformed;
  report["duplicates"] = loaded.duplicates;
  report["clean"] = posts.size();
  report["removed"] = loaded.posts.size() - posts.size();
  nlohmann::ordered_json groups;
  for (FlairGroup g : corpus::kAllFlairGroups) groups[std::string(corpus::to_string(g))] = counts[static_cast<std::size_t>(g)];
  report["flair_groups"] = groups;
  report["messages"] = loaded.messages;
  out.files[artifact::kPosts] = encode_posts(posts);
  out.files[artifact::kIngestReport] = report.dump(2) + "\n";
  out.summary = {{"raw", std::to_string(loaded.posts.size())},
                 {"clean", std::to_string(posts.size())},
                 {"removed", std::to_string(loaded.posts.size() - posts.size())},
                 {"malformed", std::to_string(loaded.malformed)},
                 {"duplicates", std::to_string(loaded.duplicates)},
                 {"unlabelled", std::to_string(counts[static_cast<std::size_t>(FlairGroup::Unlabelled)])}};
  return out;
}

StageOutput run_train(const PipelineConfig& config, const FileSet& parent,
                      const textprep::FeatureConfig& features) {
  const auto posts = corpus::drop_other(decode_posts(require(parent, artifact::kPosts)));
  if (posts.empty()) throw Error("train: no posts to model");
  const auto docs = tokenize_all(posts, stopwords_for(config));
  auto vocab = std::make_shared<const textprep::Vocabulary>(textprep::build_vocabulary(docs, features));
  const auto x = textprep::tfidf_matrix(docs, vocab);
  auto model = topicmodel::fit_vb(x, config.lda);
  if (has(parent, artifact::kLdaManifest)) {
    const auto previous = load_lda(parent);
    if (previous.num_topics() == model.num_topics()) model.group_map = previous.group_map;
  }

  StageOutput out;
  out.stage = Stage::Train;
  std::ostringstream vcsv;
  textprep::write_vocabulary_csv(vcsv, *vocab);
  out.files[artifact::kVocabulary] = textprep::vocabulary_to_json(*vocab).dump() + "\n";
  out.files[artifact::kVocabularyCsv] = vcsv.str();
  out.files[artifact::kFeatures] = features_json(features);
  std::vector<std::string> ids;
  for (const auto& p : posts) ids.push_back(p.id);
  out.files[artifact::kLdaPosts] = encode_ids(ids);
  out.files[artifact::kTopTerms] = top_terms_csv(model);
  put_lda(out.files, model);
  out.summary = {{"docs", std::to_string(posts.size())},
                 {"terms", std::to_string(vocab->size())},
                 {"topics", std::to_string(model.num_topics())},
                 {"iterations", std::to_string(model.elbo_trace.size())},
                 {"elbo", fmt(model.elbo_trace.empty() ? 0.0 : model.elbo_trace.back())}};
  return out;
}

StageOutput run_impute(const PipelineConfig& config, const FileSet& parent) {
  const auto posts = corpus::drop_other(decode_posts(require(parent, artifact::kPosts)));
  const auto all = decode_posts(require(parent, artifact::kPosts));
  const flairclf::FeatureLayout layout;
  const auto docs = tokenize_all(posts, stopwords_for(config));

  textprep::FeatureConfig fc;
  fc.max_features = layout.tfidf;
  fc.ngram = config.features.ngram;
  fc.min_df = config.features.min_df;
  auto vocab = std::make_shared<const textprep::Vocabulary>(textprep::build_vocabulary(docs, fc));
  if (vocab->size() != layout.tfidf) {
    throw Error("impute-flairs: corpus yields only " + std::to_string(vocab->size()) +
                " candidate terms; the classifier needs " + std::to_string(layout.tfidf));
  }
  const auto x_tfidf = textprep::tfidf_matrix(docs, vocab);
  topicmodel::LdaConfig lc;
  lc.num_topics = layout.lda;
  lc.max_iters = config.lda.max_iters;
  lc.elbo_rel_tol = config.lda.elbo_rel_tol;
  lc.seed = config.lda.seed;
  lc.num_threads = config.lda.num_threads;
  const auto lda = topicmodel::fit_vb(x_tfidf, lc);
  const Matrix features = flairclf::assemble_features(posts, lda, x_tfidf, layout);

  // Optional holdout: a deterministic hash of the post id picks the held-out rows.
  std::vector<std::size_t> labelled, train_rows, test_rows;
  for (std::size_t i = 0; i < posts.size(); ++i) {
    if (posts[i].flair_source != FlairSource::Labelled) continue;
    labelled.push_back(i);
    const double u = static_cast<double>(splitmix64(fnv1a64(posts[i].id) ^ config.classifier.seed) >> 11) * 0x1.0p-53;
    (u < config.holdout ? test_rows : train_rows).push_back(i);
  }
  const auto gather = [&](const std::vector<std::size_t>& rows, Matrix& x, std::vector<FlairGroup>& y) {
    x = Matrix(rows.size(), features.cols());
    y.clear();
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto src = features.row(rows[r]);
      std::copy(src.begin(), src.end(), x.row(r).begin());
      y.push_back(posts[rows[r]].flair_group);
    }
  };
  Matrix x_all;
  std::vector<FlairGroup> y_all;
  gather(labelled, x_all, y_all);

  StageOutput out;
  out.stage = Stage::ImputeFlairs;
  nlohmann::ordered_json report;
  std::optional<double> holdout_accuracy;
  if (!test_rows.empty() && !train_rows.empty()) {
    Matrix xt, xh;
    std::vector<FlairGroup> yt, yh;
    gather(train_rows, xt, yt);
    gather(test_rows, xh, yh);
    const auto held = flairclf::train(xt, yt, config.classifier);
    holdout_accuracy = flairclf::accuracy(held, xh, yh);
    report["holdout_posts"] = test_rows.size();
  }
  const auto model = flairclf::train(x_all, y_all, config.classifier);
  const double train_accuracy = flairclf::accuracy(model, x_all, y_all);
  const auto imputed = flairclf::impute_flairs(posts, model, features);

  std::size_t predicted = 0;
  for (const auto& p : imputed) predicted += p.flair_source == FlairSource::Predicted;
  std::vector<CleanPost> reported = imputed;
  for (const auto& p : all) {
    if (p.flair_group == FlairGroup::Other) reported.push_back(p);
  }
  std::ostringstream counts;
  flairclf::write_flair_counts_csv(counts, reported);

  report["labelled"] = labelled.size();
  report["predicted"] = predicted;
  report["epochs"] = model.epochs_run;
  report["final_loss"] = model.loss_trace.empty() ? 0.0 : model.loss_trace.back();
  report["train_accuracy"] = train_accuracy;
  report["holdout_accuracy"] = holdout_accuracy ? nlohmann::ordered_json(*holdout_accuracy) : nlohmann::ordered_json();

  out.files[artifact::kClfVocabulary] = textprep::vocabulary_to_json(*vocab).dump() + "\n";
  for (auto& [name, bytes] : topicmodel::model_to_files(lda, artifact::kClfLdaPrefix)) out.files[name] = std::move(bytes);
  for (auto& [name, bytes] : flairclf::model_to_files(model)) out.files[name] = std::move(bytes);
  out.files[artifact::kClfReport] = report.dump(2) + "\n";
  out.files[artifact::kImputedPosts] = encode_posts(imputed);
  out.files[artifact::kFlairCounts] = counts.str();
  out.summary = {{"labelled", std::to_string(labelled.size())},
                 {"predicted", std::to_string(predicted)},
                 {"epochs", std::to_string(model.epochs_run)},
                 {"train_accuracy", fmt(train_accuracy)}};
  if (holdout_accuracy) out.summary.emplace_back("holdout_accuracy", fmt(*holdout_accuracy));
  return out;
}

StageOutput run_subset(const PipelineConfig&, const FileSet& parent) {
  const auto imputed = decode_posts(require(parent, artifact::kImputedPosts));
  const auto subset = flairclf::select_support_subset(imputed);
  std::vector<std::string> ids;
  std::size_t labelled = 0;
  for (const auto& p : subset) {
    ids.push_back(p.id);
    labelled += p.flair_source == FlairSource::Labelled;
  }
  StageOutput out;
  out.stage = Stage::Subset;
  out.files[artifact::kSubset] = encode_ids(ids);
  out.summary = {{"subset", std::to_string(subset.size())},
                 {"labelled", std::to_string(labelled)},
                 {"predicted", std::to_string(subset.size() - labelled)}};
  return out;
}

StageOutput run_lexicon_label(const PipelineConfig& config, const FileSet& parent) {
  const auto posts = subset_posts(parent);
  const auto lex = config.lexicon_path.empty() ? lexicon::default_lexicon() : lexicon::load_lexicon(config.lexicon_path);
  const auto ann = lexicon::annotate_corpus(posts, lex);
  std::ostringstream os;
  lexicon::write_annotations_csv(os, ann, lex);
  std::size_t matched = 0;
  for (const auto& a : ann) matched += !a.topics.empty();

  StageOutput out;
  out.stage = Stage::LexiconLabel;
  out.files[artifact::kLexicon] = lexicon::lexicon_to_json(lex).dump(2) + "\n";
  out.files[artifact::kAnnotations] = os.str();
  out.summary = {{"posts", std::to_string(posts.size())},
                 {"matched", std::to_string(matched)},
                 {"topics", std::to_string(lex.topics.size())}};
  return out;
}

bool trends_ready(const FileSet& files) {
  for (const char* f : {artifact::kLdaManifest, artifact::kImputedPosts, artifact::kSubset, artifact::kAnnotations,
                        artifact::kLexicon}) {
    if (!has(files, f)) return false;
  }
  return true;
}

StageOutput run_trends(const PipelineConfig& config, const FileSet& parent) {
  const auto model = load_lda(parent);
  const auto posts = subset_posts(parent);
  const auto ann = load_annotations(parent);
  const auto lex = load_lexicon_artifact(parent);
  const auto lda_ids = decode_ids(require(parent, artifact::kLdaPosts));

  std::unordered_map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < lda_ids.size(); ++i) row_of.emplace(lda_ids[i], i);
  Matrix theta(posts.size(), model.num_topics());
  for (std::size_t i = 0; i < posts.size(); ++i) {
    auto it = row_of.find(posts[i].id);
    if (it == row_of.end()) throw Error("trends: subset post " + posts[i].id + " has no topic distribution");
    const auto src = model.doc_topic.row(it->second);
    std::copy(src.begin(), src.end(), theta.row(i).begin());
  }

  auto lda_series = trends::lda_monthly_sum(posts, theta, model.group_map);
  auto lex_series = trends::lexicon_monthly_count(posts, ann, lex.labels());
  std::optional<trends::ExternalSeries> external;
  StageOutput out;
  out.stage = Stage::Trends;
  if (!config.external_csv_path.empty()) {
    external = trends::load_external_csv(config.external_csv_path, config.locations);
    out.warnings = external->warnings;
  }
  const auto pairs = trends::default_method_pairs();
  const auto bundle = trends::make_dashboard(std::move(lda_series), std::move(lex_series), std::move(external), pairs);
  out.files[artifact::kTrends] = trends::dashboard_to_json(bundle).dump(2) + "\n";
  out.summary = {{"posts", std::to_string(posts.size())},
                 {"months", std::to_string(bundle.lda.months.size())},
                 {"first", bundle.lda.months.empty() ? "" : bundle.lda.months.front().str()},
                 {"last", bundle.lda.months.empty() ? "" : bundle.lda.months.back().str()},
                 {"external", bundle.external ? "yes" : "no"}};
  return out;
}

FileSet apply_stage(const FileSet& parent, const StageOutput& out) { return derive_files(parent, out.stage, out.files); }

FileSet publish_retrain(const PipelineConfig& config, const FileSet& base, const StageOutput& train) {
  FileSet files = derive_files(base, Stage::Train, train.files);
  if (has(base, artifact::kLdaManifest)) {
    auto model = load_lda(files);
    const auto previous = load_lda(base);
    if (previous.num_topics() == model.num_topics()) {
      model.group_map = previous.group_map;
      put_lda(files, model);
    }
  }
  if (trends_ready(files)) files = apply_stage(files, run_trends(config, files));
  return files;
}

FileSet with_topic_name(const PipelineConfig&, const FileSet& files, std::size_t topic,
                        std::optional<std::string> name) {
  auto model = load_lda(files);
  if (topic >= model.num_topics()) throw Error("topic " + std::to_string(topic) + " does not exist");
  model.topic_names[topic] = std::move(name);
  FileSet out = files;
  put_lda(out, model);
  return out;
}

FileSet with_group_map(const PipelineConfig& config, const FileSet& files, const topicmodel::TopicGroupMap& groups) {
  auto model = load_lda(files);
  groups.validate(model.num_topics());
  model.group_map = groups;
  FileSet out = files;
  put_lda(out, model);
  if (trends_ready(out)) out = apply_stage(out, run_trends(config, out));
  return out;
}

StageRun run_stage(SnapshotStore& store, const PipelineConfig& config, Stage stage, std::optional<SnapshotId> from) {
  if (!from) from = store.latest();
  FileSet parent;
  if (from) parent = store.read(*from).files;
  else if (stage != Stage::Ingest) {
    throw MissingArtifactError(artifact::kPosts, "no snapshots in " + store.run_dir().string() + "; run `ingest` first");
  }
  StageRun run;
  switch (stage) {
    case Stage::Ingest: run.output = run_ingest(config); break;
    case Stage::Train: run.output = run_train(config, parent, effective_features(config, read_curation(store.run_dir()))); break;
    case Stage::ImputeFlairs: run.output = run_impute(config, parent); break;
    case Stage::Subset: run.output = run_subset(config, parent); break;
    case Stage::LexiconLabel: run.output = run_lexicon_label(config, parent); break;
    case Stage::Trends: run.output = run_trends(config, parent); break;
  }
  run.snapshot = store.write(apply_stage(parent, run.output), from, std::string(stage_name(stage)), config.hash());
  run.output.summary.insert(run.output.summary.begin(), {"snapshot", std::to_string(run.snapshot)});
  run.output.summary.insert(run.output.summary.begin(), {"stage", std::string(stage_name(stage))});
  return run;
}

}  // namespace stressorlens::app
