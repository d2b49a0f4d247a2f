#include "stressorlens/lexicon.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include "stressorlens/csv.hpp"
#include "stressorlens/error.hpp"
#include "stressorlens/textprep.hpp"

namespace stressorlens::lexicon {
namespace {

const textprep::StopWords& no_stopwords() {
  static const textprep::StopWords empty;
  return empty;
}

bool match_from(std::span<const std::string> tokens, std::size_t pos, const Entry& entry,
                std::size_t k) {
  if (k == entry.size()) return true;
  for (std::size_t step = 1; step <= 2; ++step) {
    const std::size_t next = pos + step;
    if (next < tokens.size() && tokens[next] == entry[k] && match_from(tokens, next, entry, k + 1)) {
      return true;
    }
  }
  return false;
}

bool matches_any(std::span<const std::string> tokens, const std::vector<Entry>& entries) {
  return std::any_of(entries.begin(), entries.end(),
                     [&](const Entry& e) { return entry_matches(tokens, e); });
}

}  // namespace

std::vector<std::string> Lexicon::labels() const {
  std::vector<std::string> out;
  for (const auto& [label, entries] : topics) out.push_back(label);
  return out;
}

void Lexicon::add_entry(const std::string& label, std::string_view text) {
  Entry entry = textprep::tokenize(text, no_stopwords());
  if (entry.empty() || entry.size() > 3) {
    throw Error("lexicon entry '" + std::string(text) + "' must tokenize to 1..3 tokens");
  }
  auto it = std::find_if(topics.begin(), topics.end(), [&](const auto& t) { return t.first == label; });
  if (it == topics.end()) {
    topics.emplace_back(label, std::vector<Entry>{});
    it = std::prev(topics.end());
  }
  if (std::find(it->second.begin(), it->second.end(), entry) == it->second.end()) {
    it->second.push_back(std::move(entry));
  }
}

Lexicon default_lexicon() {
  Lexicon lex;
  lex.name = "covid19-stressors";
  const std::vector<std::pair<std::string, std::vector<std::string>>> table = {
      {"Education Problems", {"college", "online learning", "class", "semester", "freshman"}},
      {"Occupation Problems",
       {"lost job", "unemployed", "laid off", "income", "money", "quit job", "career"}},
      {"Lonely",
       {"social interaction", "interact", "connection", "lonely", "friendless", "feel alone",
        "loneliness", "friendless", "social life", "friendship", "socialize", "make friends",
        "new friends", "disconnected"}},
      {"Fear of coronavirus",
       {"no mask", "without mask", "maskless", "unmasked", "grocery", "panic", "precautions",
        "coworker", "cough", "exposed", "wash", "temperature", "OCD"}},
      {"Pandemic Development",
       {"forever", "permanent", "back normal", "new normal", "ever end", "never ending", "endless",
        "lose hope", "normal life"}},
  };
  for (const auto& [label, entries] : table) {
    for (const auto& e : entries) lex.add_entry(label, e);
  }
  return lex;
}

Lexicon lexicon_from_json(const nlohmann::ordered_json& j) {
  Lexicon lex;
  lex.name = j.value("name", std::string("lexicon"));
  const auto& topics = j.at("topics");
  if (!topics.is_object()) throw Error("lexicon: 'topics' must be an object");
  for (const auto& [label, entries] : topics.items()) {
    if (!entries.is_array()) throw Error("lexicon: topic '" + label + "' must list entries");
    lex.topics.emplace_back(label, std::vector<Entry>{});
    for (const auto& e : entries) lex.add_entry(label, e.get<std::string>());
  }
  return lex;
}

nlohmann::ordered_json lexicon_to_json(const Lexicon& lex) {
  nlohmann::ordered_json topics = nlohmann::ordered_json::object();
  for (const auto& [label, entries] : lex.topics) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& e : entries) {
      std::string s;
      for (const auto& t : e) s += (s.empty() ? "" : " ") + t;
      arr.push_back(s);
    }
    topics[label] = arr;
  }
  return {{"name", lex.name}, {"topics", topics}};
}

Lexicon load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read lexicon '" + path.string() + "'");
  try {
    return lexicon_from_json(nlohmann::ordered_json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error("lexicon '" + path.string() + "': " + e.what());
  }
}

bool entry_matches(std::span<const std::string> tokens, const Entry& entry) {
  if (entry.empty()) return false;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] == entry[0] && match_from(tokens, i, entry, 1)) return true;
  }
  return false;
}

std::vector<std::string> match_post(std::string_view text, const Lexicon& lex) {
  const auto tokens = textprep::tokenize(text, no_stopwords());
  std::vector<std::string> out;
  for (const auto& [label, entries] : lex.topics) {
    if (matches_any(tokens, entries)) out.push_back(label);
  }
  return out;
}

std::vector<LexiconAnnotation> annotate_corpus(std::span<const corpus::CleanPost> posts,
                                               const Lexicon& lex) {
  std::vector<LexiconAnnotation> out;
  out.reserve(posts.size());
  for (const auto& p : posts) out.push_back({p.id, match_post(p.text, lex)});
  return out;
}

void write_annotations_csv(std::ostream& out, std::span<const LexiconAnnotation> annotations,
                           const Lexicon& lex) {
  std::vector<std::string> header{"post_id"};
  const auto labels = lex.labels();
  header.insert(header.end(), labels.begin(), labels.end());
  csv::write_row(out, header);
  for (const auto& a : annotations) {
    std::vector<std::string> row{a.post_id};
    for (const auto& label : labels) {
      row.push_back(std::find(a.topics.begin(), a.topics.end(), label) != a.topics.end() ? "1" : "0");
    }
    csv::write_row(out, row);
  }
}

std::vector<LexiconAnnotation> read_annotations_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error("annotations: missing header");
  const auto header = csv::split_record(line);
  if (header.empty() || header[0] != "post_id") throw Error("annotations: first column must be post_id");
  std::vector<LexiconAnnotation> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = csv::split_record(line);
    if (fields.size() != header.size()) throw Error("annotations: ragged row for " + fields[0]);
    LexiconAnnotation a{fields[0], {}};
    for (std::size_t i = 1; i < fields.size(); ++i) {
      if (fields[i] == "1") a.topics.push_back(header[i]);
      else if (fields[i] != "0") throw Error("annotations: matched flag must be 0 or 1");
    }
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace stressorlens::lexicon
