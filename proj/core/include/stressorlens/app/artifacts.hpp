#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "stressorlens/corpus.hpp"
#include "stressorlens/flairclf.hpp"
#include "stressorlens/lexicon.hpp"
#include "stressorlens/matrix_io.hpp"
#include "stressorlens/textprep.hpp"
#include "stressorlens/topicmodel.hpp"
#include "stressorlens/trends.hpp"

namespace stressorlens::app {

// Pipeline stages in dependency order.
enum class Stage { Ingest, Train, ImputeFlairs, Subset, LexiconLabel, Trends };
std::string_view stage_name(Stage s);      // CLI spelling, e.g. "impute-flairs"
const std::vector<std::string>& stage_files(Stage s);
// Stages whose outputs become stale when `s` reruns (not including `s`).
std::vector<Stage> downstream_of(Stage s);

namespace artifact {
inline constexpr const char* kPosts = "posts.jsonl";
inline constexpr const char* kIngestReport = "ingest_report.json";
inline constexpr const char* kVocabulary = "vocabulary.json";
inline constexpr const char* kVocabularyCsv = "vocabulary.csv";
inline constexpr const char* kFeatures = "features.json";
inline constexpr const char* kLdaPrefix = "lda";
inline constexpr const char* kLdaManifest = "lda_manifest.json";
inline constexpr const char* kLdaTopicWord = "lda_topic_word.bin";
inline constexpr const char* kLdaDocTopic = "lda_doc_topic.bin";
inline constexpr const char* kLdaPosts = "lda_posts.json";
inline constexpr const char* kTopTerms = "top_terms.csv";
inline constexpr const char* kClfVocabulary = "clf_vocabulary.json";
inline constexpr const char* kClfLdaPrefix = "clf_lda";
inline constexpr const char* kClfLdaManifest = "clf_lda_manifest.json";
inline constexpr const char* kClfLdaTopicWord = "clf_lda_topic_word.bin";
inline constexpr const char* kClfLdaDocTopic = "clf_lda_doc_topic.bin";
inline constexpr const char* kClfManifest = "clf_manifest.json";
inline constexpr const char* kClfWeights = "clf_weights.bin";
inline constexpr const char* kClfReport = "clf_report.json";
inline constexpr const char* kImputedPosts = "posts_imputed.jsonl";
inline constexpr const char* kFlairCounts = "flair_counts.csv";
inline constexpr const char* kSubset = "subset_ids.json";
inline constexpr const char* kLexicon = "lexicon.json";
inline constexpr const char* kAnnotations = "annotations.csv";
inline constexpr const char* kTrends = "trends.json";
}  // namespace artifact

// Child snapshot contents: `parent` minus everything produced by `stage` and its
// downstream stages, plus `outputs`.
FileSet derive_files(const FileSet& parent, Stage stage, const FileSet& outputs);

// Throws MissingArtifactError naming the file and the stage that produces it.
const std::string& require(const FileSet& files, const std::string& name);
bool has(const FileSet& files, const std::string& name);

std::string encode_posts(std::span<const corpus::CleanPost> posts);
std::vector<corpus::CleanPost> decode_posts(const std::string& bytes);
std::string encode_ids(const std::vector<std::string>& ids);
std::vector<std::string> decode_ids(const std::string& bytes);

std::shared_ptr<const textprep::Vocabulary> load_vocabulary(const FileSet& files,
                                                            const std::string& name = artifact::kVocabulary);
topicmodel::LdaModel load_lda(const FileSet& files);
lexicon::Lexicon load_lexicon_artifact(const FileSet& files);
std::vector<lexicon::LexiconAnnotation> load_annotations(const FileSet& files);
trends::DashboardBundle load_trends(const FileSet& files);

}  // namespace stressorlens::app
