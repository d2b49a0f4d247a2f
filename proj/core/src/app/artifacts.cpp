#include "stressorlens/app/artifacts.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "stressorlens/error.hpp"

namespace stressorlens::app {

std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::Ingest: return "ingest";
    case Stage::Train: return "train";
    case Stage::ImputeFlairs: return "impute-flairs";
    case Stage::Subset: return "subset";
    case Stage::LexiconLabel: return "lexicon-label";
    case Stage::Trends: return "trends";
  }
  return "?";
}

const std::vector<std::string>& stage_files(Stage s) {
  using namespace artifact;
  static const std::map<Stage, std::vector<std::string>> files = {
      {Stage::Ingest, {kPosts, kIngestReport}},
      {Stage::Train,
       {kVocabulary, kVocabularyCsv, kFeatures, kLdaManifest, kLdaTopicWord, kLdaDocTopic, kLdaPosts, kTopTerms}},
      {Stage::ImputeFlairs,
       {kClfVocabulary, kClfLdaManifest, kClfLdaTopicWord, kClfLdaDocTopic, kClfManifest, kClfWeights, kClfReport,
        kImputedPosts, kFlairCounts}},
      {Stage::Subset, {kSubset}},
      {Stage::LexiconLabel, {kLexicon, kAnnotations}},
      {Stage::Trends, {kTrends}},
  };
  return files.at(s);
}

std::vector<Stage> downstream_of(Stage s) {
  switch (s) {
    case Stage::Ingest:
      return {Stage::Train, Stage::ImputeFlairs, Stage::Subset, Stage::LexiconLabel, Stage::Trends};
    case Stage::Train: return {Stage::Trends};
    case Stage::ImputeFlairs: return {Stage::Subset, Stage::LexiconLabel, Stage::Trends};
    case Stage::Subset: return {Stage::LexiconLabel, Stage::Trends};
    case Stage::LexiconLabel: return {Stage::Trends};
    case Stage::Trends: return {};
  }
  return {};
}

FileSet derive_files(const FileSet& parent, Stage stage, const FileSet& outputs) {
  FileSet out = parent;
  auto stale = downstream_of(stage);
  stale.push_back(stage);
  for (Stage s : stale) {
    for (const auto& f : stage_files(s)) out.erase(f);
  }
  for (const auto& [name, bytes] : outputs) out[name] = bytes;
  return out;
}

namespace {

Stage producer_of(const std::string& name) {
  for (Stage s : {Stage::Ingest, Stage::Train, Stage::ImputeFlairs, Stage::Subset, Stage::LexiconLabel,
                  Stage::Trends}) {
    const auto& f = stage_files(s);
    if (std::find(f.begin(), f.end(), name) != f.end()) return s;
  }
  throw Error("unknown artifact '" + name + "'");
}

std::string describe(Stage s) {
  switch (s) {
    case Stage::Ingest: return "cleaned corpus";
    case Stage::Train: return "LDA model";
    case Stage::ImputeFlairs: return "flair classifier output";
    case Stage::Subset: return "support subset";
    case Stage::LexiconLabel: return "lexicon annotations";
    case Stage::Trends: return "trend series";
  }
  return "artifact";
}

}  // namespace

bool has(const FileSet& files, const std::string& name) { return files.count(name) != 0; }

const std::string& require(const FileSet& files, const std::string& name) {
  auto it = files.find(name);
  if (it == files.end()) {
    const Stage s = producer_of(name);
    throw MissingArtifactError(name, "missing " + describe(s) + " (" + name + "); run `" +
                                         std::string(stage_name(s)) + "` first");
  }
  return it->second;
}

std::string encode_posts(std::span<const corpus::CleanPost> posts) {
  std::ostringstream os;
  corpus::write_clean_jsonl(os, posts);
  return os.str();
}

std::vector<corpus::CleanPost> decode_posts(const std::string& bytes) {
  std::istringstream is(bytes);
  return corpus::read_clean_jsonl(is);
}

std::string encode_ids(const std::vector<std::string>& ids) { return nlohmann::json(ids).dump() + "\n"; }

std::vector<std::string> decode_ids(const std::string& bytes) {
  return nlohmann::json::parse(bytes).get<std::vector<std::string>>();
}

std::shared_ptr<const textprep::Vocabulary> load_vocabulary(const FileSet& files, const std::string& name) {
  return std::make_shared<const textprep::Vocabulary>(
      textprep::vocabulary_from_json(nlohmann::json::parse(require(files, name))));
}

topicmodel::LdaModel load_lda(const FileSet& files) {
  require(files, artifact::kLdaManifest);
  return topicmodel::model_from_files(files, load_vocabulary(files), artifact::kLdaPrefix);
}

lexicon::Lexicon load_lexicon_artifact(const FileSet& files) {
  return lexicon::lexicon_from_json(nlohmann::ordered_json::parse(require(files, artifact::kLexicon)));
}

std::vector<lexicon::LexiconAnnotation> load_annotations(const FileSet& files) {
  std::istringstream is(require(files, artifact::kAnnotations));
  return lexicon::read_annotations_csv(is);
}

trends::DashboardBundle load_trends(const FileSet& files) {
  return trends::dashboard_from_json(nlohmann::json::parse(require(files, artifact::kTrends)));
}

}  // namespace stressorlens::app
