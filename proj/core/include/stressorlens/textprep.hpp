#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"

namespace stressorlens::textprep {

using Tokens = std::vector<std::string>;
using StopWords = std::unordered_set<std::string>;

struct NgramRange {
  std::size_t min = 1;
  std::size_t max = 2;
  bool operator==(const NgramRange&) const = default;
};

struct FeatureConfig {
  std::size_t max_features = 300;
  NgramRange ngram{1, 2};
  std::size_t min_df = 2;
  StopWords stopwords;
  std::vector<std::string> include_tokens;  // ordered, pinned to the leading columns
  std::set<std::string> exclude_tokens;

  // Throws std::invalid_argument naming the violated constraint.
  void validate() const;
};

// Lowercases and collapses whitespace so curated tokens compare equal to n-gram terms.
std::string normalize_term(std::string_view term);

// Lowercase; URLs removed; [a-z0-9'] runs become tokens with surrounding
// apostrophes stripped; tokens shorter than 2 characters and stopwords dropped.
Tokens tokenize(std::string_view text, const StopWords& stopwords);

// Contiguous n-grams for each n in range (all unigrams first, then bigrams, ...).
std::vector<std::string> extract_ngrams(std::span<const std::string> tokens, NgramRange range);

// One word per line; blank lines and lines starting with '#' ignored.
StopWords load_stopwords(const std::filesystem::path& path);

// Smoothed inverse document frequency: ln((1 + n_docs) / (1 + df)) + 1.
double smoothed_idf(std::size_t df, std::size_t n_docs);

struct Vocabulary {
  std::vector<std::string> terms;
  std::vector<std::size_t> df;      // documents containing each term
  std::vector<double> score;        // total tf-idf mass at selection time
  std::size_t n_docs = 0;           // corpus size the statistics came from
  NgramRange ngram;
  std::unordered_map<std::string, std::size_t> index;

  std::size_t size() const noexcept { return terms.size(); }
  std::optional<std::size_t> find(std::string_view term) const;
  double idf(std::size_t column) const { return smoothed_idf(df[column], n_docs); }

  void rebuild_index();
  // Stable content hash over terms, df and ngram range.
  std::string content_hash() const;
};

// Candidates are n-grams with df >= min_df minus exclusions, ranked by total tf-idf
// mass (ties lexicographic). Include tokens present in the corpus come first in their
// given order. Throws Error when nothing survives filtering.
Vocabulary build_vocabulary(std::span<const Tokens> docs, const FeatureConfig& config);

void write_vocabulary_csv(std::ostream& out, const Vocabulary& vocab);
nlohmann::json vocabulary_to_json(const Vocabulary& vocab);
Vocabulary vocabulary_from_json(const nlohmann::json& j);

enum class Weighting { Count, TfIdf };

struct SparseEntry {
  std::uint32_t column = 0;
  double value = 0.0;
  bool operator==(const SparseEntry&) const = default;
};
using SparseRow = std::vector<SparseEntry>;  // sorted by column

struct DocTermMatrix {
  std::shared_ptr<const Vocabulary> vocabulary;
  Weighting weighting = Weighting::Count;
  std::vector<SparseRow> rows;

  std::size_t n_docs() const noexcept { return rows.size(); }
  std::size_t n_terms() const noexcept { return vocabulary ? vocabulary->size() : 0; }
};

DocTermMatrix count_matrix(std::span<const Tokens> docs, std::shared_ptr<const Vocabulary> vocab);
// tf = raw count, idf from the vocabulary's statistics, rows L2-normalized.
DocTermMatrix tfidf_matrix(std::span<const Tokens> docs, std::shared_ptr<const Vocabulary> vocab);

bool has_hyperlink(std::string_view text);

}  // namespace stressorlens::textprep
