#include "stressorlens/textprep.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <stdexcept>

#include "stressorlens/csv.hpp"
#include "stressorlens/error.hpp"
#include "stressorlens/hashing.hpp"

namespace stressorlens::textprep {
namespace {

bool is_token_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '\'';
}

bool starts_with_url(std::string_view s) {
  return s.starts_with("http://") || s.starts_with("https://") || s.starts_with("www.");
}

std::string lowercase_ascii(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    const unsigned char c = static_cast<unsigned char>(text[i]);
    // U+2019 RIGHT SINGLE QUOTATION MARK is a common apostrophe in user text.
    if (c == 0xE2 && i + 2 < text.size() && static_cast<unsigned char>(text[i + 1]) == 0x80 &&
        static_cast<unsigned char>(text[i + 2]) == 0x99) {
      out.push_back('\'');
      i += 2;
      continue;
    }
    out.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
  }
  return out;
}

// Per-document n-gram occurrence counts restricted to the vocabulary.
SparseRow count_row(const Tokens& doc, const Vocabulary& vocab) {
  std::map<std::uint32_t, double> counts;
  for (const auto& term : extract_ngrams(doc, vocab.ngram)) {
    if (auto col = vocab.find(term)) counts[static_cast<std::uint32_t>(*col)] += 1.0;
  }
  SparseRow row;
  row.reserve(counts.size());
  for (const auto& [col, n] : counts) row.push_back({col, n});
  return row;
}

}  // namespace

void FeatureConfig::validate() const {
  if (ngram.min < 1 || ngram.min > ngram.max) {
    throw std::invalid_argument("ngram range must satisfy 1 <= ngram_min <= ngram_max");
  }
  if (max_features < 1) throw std::invalid_argument("max_features must be positive");
  if (min_df < 1) throw std::invalid_argument("min_df must be positive");
  if (max_features < include_tokens.size()) {
    throw std::invalid_argument("max_features is smaller than the include list");
  }
  for (const auto& t : include_tokens) {
    if (exclude_tokens.count(t)) {
      throw std::invalid_argument("token '" + t + "' is in both include and exclude lists");
    }
  }
}

std::string normalize_term(std::string_view term) {
  std::string out;
  bool pending_space = false;
  for (char c : term) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

Tokens tokenize(std::string_view text, const StopWords& stopwords) {
  const std::string lowered = lowercase_ascii(text);
  std::string_view s = lowered;
  Tokens tokens;
  std::size_t i = 0;
  while (i < s.size()) {
    if (starts_with_url(s.substr(i))) {
      while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
      continue;
    }
    if (!is_token_char(s[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && is_token_char(s[j]) && !(j > i && starts_with_url(s.substr(j)))) ++j;
    std::string_view tok = s.substr(i, j - i);
    i = j;
    while (!tok.empty() && tok.front() == '\'') tok.remove_prefix(1);
    while (!tok.empty() && tok.back() == '\'') tok.remove_suffix(1);
    if (tok.size() < 2) continue;
    std::string word(tok);
    if (stopwords.count(word)) continue;
    tokens.push_back(std::move(word));
  }
  return tokens;
}

std::vector<std::string> extract_ngrams(std::span<const std::string> tokens, NgramRange range) {
  std::vector<std::string> out;
  for (std::size_t n = range.min; n <= range.max; ++n) {
    if (n == 0 || n > tokens.size()) continue;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
      std::string gram = tokens[i];
      for (std::size_t k = 1; k < n; ++k) {
        gram.push_back(' ');
        gram += tokens[i + k];
      }
      out.push_back(std::move(gram));
    }
  }
  return out;
}

StopWords load_stopwords(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read stopword list '" + path.string() + "'");
  StopWords words;
  std::string line;
  while (std::getline(in, line)) {
    const std::string w = normalize_term(line);
    if (w.empty() || w.front() == '#') continue;
    words.insert(w);
  }
  return words;
}

double smoothed_idf(std::size_t df, std::size_t n_docs) {
  return std::log((1.0 + static_cast<double>(n_docs)) / (1.0 + static_cast<double>(df))) + 1.0;
}

std::optional<std::size_t> Vocabulary::find(std::string_view term) const {
  auto it = index.find(std::string(term));
  if (it == index.end()) return std::nullopt;
  return it->second;
}

void Vocabulary::rebuild_index() {
  index.clear();
  for (std::size_t i = 0; i < terms.size(); ++i) index.emplace(terms[i], i);
}

std::string Vocabulary::content_hash() const {
  std::string blob = std::to_string(ngram.min) + ":" + std::to_string(ngram.max) + ":" +
                     std::to_string(n_docs) + "\n";
  for (std::size_t i = 0; i < terms.size(); ++i) {
    blob += terms[i] + '\t' + std::to_string(df[i]) + '\n';
  }
  return sha256_hex(blob);
}

Vocabulary build_vocabulary(std::span<const Tokens> docs, const FeatureConfig& config) {
  config.validate();
  const bool any_tokens =
      std::any_of(docs.begin(), docs.end(), [](const Tokens& d) { return !d.empty(); });
  if (!any_tokens) throw Error("build_vocabulary: corpus has no nonempty document");

  // Ordered map keeps iteration deterministic.
  std::map<std::string, std::pair<std::size_t, std::size_t>> stats;  // term -> (df, total count)
  for (const auto& doc : docs) {
    std::map<std::string, std::size_t> local;
    for (auto& gram : extract_ngrams(doc, config.ngram)) ++local[std::move(gram)];
    for (const auto& [term, n] : local) {
      auto& s = stats[term];
      s.first += 1;
      s.second += n;
    }
  }

  const std::size_t n_docs = docs.size();
  const auto mass = [&](const std::pair<std::size_t, std::size_t>& s) {
    return static_cast<double>(s.second) * smoothed_idf(s.first, n_docs);
  };

  Vocabulary vocab;
  vocab.n_docs = n_docs;
  vocab.ngram = config.ngram;
  std::set<std::string> pinned;
  for (const auto& raw : config.include_tokens) {
    const std::string term = normalize_term(raw);
    auto it = stats.find(term);
    if (it == stats.end() || pinned.count(term)) continue;
    pinned.insert(term);
    vocab.terms.push_back(term);
    vocab.df.push_back(it->second.first);
    vocab.score.push_back(mass(it->second));
  }

  std::set<std::string> excluded;
  for (const auto& t : config.exclude_tokens) excluded.insert(normalize_term(t));

  struct Candidate {
    const std::string* term;
    std::size_t df;
    double score;
  };
  std::vector<Candidate> candidates;
  std::size_t eligible = 0;
  for (const auto& [term, s] : stats) {
    if (s.first < config.min_df || excluded.count(term)) continue;
    ++eligible;
    if (pinned.count(term)) continue;
    candidates.push_back({&term, s.first, mass(s)});
  }
  if (eligible == 0 && vocab.terms.empty()) {
    throw Error(
        "build_vocabulary: no candidate terms survive min_df and exclude filtering; relax "
        "min_df or shorten the exclude list");
  }

  const std::size_t room = config.max_features - vocab.terms.size();
  const std::size_t take = std::min(room, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take),
                    candidates.end(), [](const Candidate& a, const Candidate& b) {
                      if (a.score != b.score) return a.score > b.score;
                      return *a.term < *b.term;
                    });
  for (std::size_t i = 0; i < take; ++i) {
    vocab.terms.push_back(*candidates[i].term);
    vocab.df.push_back(candidates[i].df);
    vocab.score.push_back(candidates[i].score);
  }
  vocab.rebuild_index();
  return vocab;
}

void write_vocabulary_csv(std::ostream& out, const Vocabulary& vocab) {
  csv::write_row(out, {"term", "index", "df", "score"});
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    csv::write_row(out, {vocab.terms[i], std::to_string(i), std::to_string(vocab.df[i]),
                         csv::format_double(vocab.score[i])});
  }
}

nlohmann::json vocabulary_to_json(const Vocabulary& vocab) {
  return {
      {"terms", vocab.terms},
      {"df", vocab.df},
      {"score", vocab.score},
      {"n_docs", vocab.n_docs},
      {"ngram_min", vocab.ngram.min},
      {"ngram_max", vocab.ngram.max},
  };
}

Vocabulary vocabulary_from_json(const nlohmann::json& j) {
  Vocabulary v;
  v.terms = j.at("terms").get<std::vector<std::string>>();
  v.df = j.at("df").get<std::vector<std::size_t>>();
  v.score = j.at("score").get<std::vector<double>>();
  v.n_docs = j.at("n_docs").get<std::size_t>();
  v.ngram = {j.at("ngram_min").get<std::size_t>(), j.at("ngram_max").get<std::size_t>()};
  if (v.df.size() != v.terms.size() || v.score.size() != v.terms.size()) {
    throw Error("vocabulary: column arrays differ in length");
  }
  v.rebuild_index();
  if (v.index.size() != v.terms.size()) throw Error("vocabulary: duplicate terms");
  return v;
}

DocTermMatrix count_matrix(std::span<const Tokens> docs, std::shared_ptr<const Vocabulary> vocab) {
  if (!vocab || vocab->size() == 0) throw Error("count_matrix: empty vocabulary");
  DocTermMatrix m;
  m.weighting = Weighting::Count;
  m.rows.reserve(docs.size());
  for (const auto& doc : docs) m.rows.push_back(count_row(doc, *vocab));
  m.vocabulary = std::move(vocab);
  return m;
}

DocTermMatrix tfidf_matrix(std::span<const Tokens> docs, std::shared_ptr<const Vocabulary> vocab) {
  if (!vocab || vocab->size() == 0) throw Error("tfidf_matrix: empty vocabulary");
  DocTermMatrix m;
  m.weighting = Weighting::TfIdf;
  m.rows.reserve(docs.size());
  for (const auto& doc : docs) {
    SparseRow row = count_row(doc, *vocab);
    double norm2 = 0.0;
    for (auto& e : row) {
      e.value *= vocab->idf(e.column);
      norm2 += e.value * e.value;
    }
    if (norm2 > 0.0) {
      const double norm = std::sqrt(norm2);
      for (auto& e : row) e.value /= norm;
    }
    m.rows.push_back(std::move(row));
  }
  m.vocabulary = std::move(vocab);
  return m;
}

bool has_hyperlink(std::string_view text) {
  const std::string lowered = lowercase_ascii(text);
  return lowered.find("http://") != std::string::npos ||
         lowered.find("https://") != std::string::npos ||
         lowered.find("www.") != std::string::npos;
}

}  // namespace stressorlens::textprep
