#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "stressorlens/corpus.hpp"

namespace stressorlens::lexicon {

// An entry is a sequence of 1..3 lowercase tokens.
using Entry = std::vector<std::string>;

struct Lexicon {
  std::string name;
  std::vector<std::pair<std::string, std::vector<Entry>>> topics;  // ordered by label insertion

  std::vector<std::string> labels() const;
  // Tokenizes `text` like post text; duplicate entries within a topic are ignored.
  void add_entry(const std::string& label, std::string_view text);
};

// The pandemic stressor lexicon: five topics, entries pre-tokenized.
Lexicon default_lexicon();

// {"name": ..., "topics": {"label": ["entry", ...], ...}}; topic order preserved.
Lexicon lexicon_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json lexicon_to_json(const Lexicon& lex);
Lexicon load_lexicon(const std::filesystem::path& path);

// Single tokens match on equality. Multiword entries match when their tokens occur
// in order with at most one unrelated token between consecutive entry tokens.
bool entry_matches(std::span<const std::string> tokens, const Entry& entry);

// Matched topic labels in lexicon order. Text is tokenized without stopword removal.
std::vector<std::string> match_post(std::string_view text, const Lexicon& lex);

struct LexiconAnnotation {
  std::string post_id;
  std::vector<std::string> topics;
  bool operator==(const LexiconAnnotation&) const = default;
};

std::vector<LexiconAnnotation> annotate_corpus(std::span<const corpus::CleanPost> posts,
                                               const Lexicon& lex);

// Wide format: post_id followed by one 0/1 column per lexicon topic.
void write_annotations_csv(std::ostream& out, std::span<const LexiconAnnotation> annotations,
                           const Lexicon& lex);
std::vector<LexiconAnnotation> read_annotations_csv(std::istream& in);

}  // namespace stressorlens::lexicon
