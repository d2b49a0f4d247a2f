#include "stressorlens/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"
#include "stressorlens/error.hpp"

namespace stressorlens::corpus {
namespace {

using nlohmann::json;

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string normalize_flair(std::string_view raw) {
  std::string out;
  bool pending_space = false;
  for (char c : trim(raw)) {
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

const std::unordered_map<std::string, FlairGroup>& flair_table() {
  static const std::unordered_map<std::string, FlairGroup> table = {
      {"support", FlairGroup::MentalHealthSupport},
      {"trigger warning", FlairGroup::MentalHealthSupport},
      {"questions", FlairGroup::DiscussionQuestions},
      {"discussion", FlairGroup::DiscussionQuestions},
      {"discussions", FlairGroup::DiscussionQuestions},
      {"vaccines are safe", FlairGroup::DiscussionQuestions},
      {"good news", FlairGroup::NewsResources},
      {"resources", FlairGroup::NewsResources},
      {"news", FlairGroup::NewsResources},
      {"firsthand account", FlairGroup::Experience},
      {"biosafety request", FlairGroup::Experience},
      {"the answer is no", FlairGroup::Other},
      {"misinformation-debunked", FlairGroup::Other},
      {"misinformation debunked", FlairGroup::Other},
      {"desperate mod", FlairGroup::Other},
      {"deperate mod", FlairGroup::Other},
  };
  return table;
}

bool is_tombstone(std::string_view s) {
  s = trim(s);
  return s == "[removed]" || s == "[deleted]";
}

std::optional<std::string> optional_string(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw json::type_error::create(302, std::string(key) + " is not a string", nullptr);
  return it->get<std::string>();
}

RawPost parse_raw(const std::string& line) {
  const json obj = json::parse(line);
  if (!obj.is_object()) throw Error("record is not a JSON object");
  RawPost post;
  const auto& id = obj.at("id");
  if (!id.is_string() || id.get_ref<const std::string&>().empty()) throw Error("id must be a nonempty string");
  post.id = id.get<std::string>();

  const auto& ts = obj.at("created_utc");
  if (ts.is_number_integer()) {
    post.created_utc = ts.get<std::int64_t>();
  } else if (ts.is_number_float() && ts.get<double>() == static_cast<double>(static_cast<std::int64_t>(ts.get<double>()))) {
    post.created_utc = static_cast<std::int64_t>(ts.get<double>());
  } else {
    throw Error("created_utc must be an integer");
  }
  if (post.created_utc <= 0) throw Error("created_utc must be positive");

  const auto& title = obj.at("title");
  if (!title.is_string()) throw Error("title must be a string");
  post.title = title.get<std::string>();
  post.body = optional_string(obj, "selftext").value_or("");
  post.flair = optional_string(obj, "link_flair_text");
  post.permalink = optional_string(obj, "permalink");
  return post;
}

}  // namespace

std::string_view to_string(FlairGroup g) {
  switch (g) {
    case FlairGroup::MentalHealthSupport: return "MentalHealthSupport";
    case FlairGroup::DiscussionQuestions: return "DiscussionQuestions";
    case FlairGroup::NewsResources: return "NewsResources";
    case FlairGroup::Experience: return "Experience";
    case FlairGroup::Other: return "Other";
    case FlairGroup::Unlabelled: return "Unlabelled";
  }
  return "Unlabelled";
}

FlairGroup parse_flair_group(std::string_view name) {
  for (FlairGroup g : kAllFlairGroups) {
    if (to_string(g) == name) return g;
  }
  throw Error("unknown flair group '" + std::string(name) + "'");
}

std::string_view to_string(FlairSource s) {
  switch (s) {
    case FlairSource::Labelled: return "Labelled";
    case FlairSource::Predicted: return "Predicted";
    case FlairSource::Unlabelled: return "Unlabelled";
  }
  return "Unlabelled";
}

FlairSource parse_flair_source(std::string_view name) {
  for (FlairSource s : {FlairSource::Labelled, FlairSource::Predicted, FlairSource::Unlabelled}) {
    if (to_string(s) == name) return s;
  }
  throw Error("unknown flair source '" + std::string(name) + "'");
}

LoadResult load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read corpus file '" + path.string() + "'");
  return load_corpus(in);
}

LoadResult load_corpus(std::istream& in) {
  LoadResult result;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    RawPost post;
    try {
      post = parse_raw(line);
    } catch (const std::exception& e) {
      ++result.malformed;
      result.messages.push_back("line " + std::to_string(line_no) + ": " + e.what());
      continue;
    }
    if (!seen.insert(post.id).second) {
      ++result.duplicates;
      result.messages.push_back("line " + std::to_string(line_no) + ": duplicate id " + post.id);
      continue;
    }
    result.posts.push_back(std::move(post));
  }
  if (in.bad()) throw Error("I/O error while reading corpus");
  return result;
}

FlairGroup map_flair(std::optional<std::string_view> flair) {
  if (!flair) return FlairGroup::Unlabelled;
  const auto& table = flair_table();
  auto it = table.find(normalize_flair(*flair));
  return it == table.end() ? FlairGroup::Unlabelled : it->second;
}

std::vector<CleanPost> clean(std::span<const RawPost> posts) {
  std::vector<CleanPost> out;
  out.reserve(posts.size());
  for (const RawPost& raw : posts) {
    if (is_tombstone(raw.title) || is_tombstone(raw.body)) continue;
    std::string text = raw.title;
    text += ' ';
    text += raw.body;
    text = std::string(trim(text));
    if (text.empty() || is_tombstone(text)) continue;

    CleanPost post;
    post.id = raw.id;
    post.created_utc = raw.created_utc;
    post.month = YearMonth::from_unix(raw.created_utc);
    post.text = std::move(text);
    post.flair = raw.flair;
    post.flair_group = map_flair(raw.flair ? std::optional<std::string_view>(*raw.flair) : std::nullopt);
    post.flair_source =
        post.flair_group == FlairGroup::Unlabelled ? FlairSource::Unlabelled : FlairSource::Labelled;
    out.push_back(std::move(post));
  }
  return out;
}

std::vector<CleanPost> drop_other(std::span<const CleanPost> posts) {
  std::vector<CleanPost> out;
  std::copy_if(posts.begin(), posts.end(), std::back_inserter(out),
               [](const CleanPost& p) { return p.flair_group != FlairGroup::Other; });
  return out;
}

std::array<std::size_t, kFlairGroupCount> flair_counts(std::span<const CleanPost> posts) {
  std::array<std::size_t, kFlairGroupCount> counts{};
  for (const auto& p : posts) ++counts[static_cast<std::size_t>(p.flair_group)];
  return counts;
}

void write_clean_jsonl(std::ostream& out, std::span<const CleanPost> posts) {
  for (const auto& p : posts) {
    nlohmann::ordered_json obj;
    obj["id"] = p.id;
    obj["timestamp"] = format_rfc3339(p.created_utc);
    obj["month"] = p.month.str();
    obj["text"] = p.text;
    obj["flair_group"] = to_string(p.flair_group);
    obj["flair_source"] = to_string(p.flair_source);
    if (p.flair) obj["flair"] = *p.flair;
    out << obj.dump() << '\n';
  }
}

std::vector<CleanPost> read_clean_jsonl(std::istream& in) {
  std::vector<CleanPost> posts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const json obj = json::parse(line);
      CleanPost p;
      p.id = obj.at("id").get<std::string>();
      p.created_utc = parse_rfc3339(obj.at("timestamp").get<std::string>());
      p.month = YearMonth::parse(obj.at("month").get<std::string>());
      if (p.month != YearMonth::from_unix(p.created_utc)) throw Error("month disagrees with timestamp");
      p.text = obj.at("text").get<std::string>();
      p.flair_group = parse_flair_group(obj.at("flair_group").get<std::string>());
      p.flair_source = parse_flair_source(obj.at("flair_source").get<std::string>());
      if (auto it = obj.find("flair"); it != obj.end() && it->is_string()) p.flair = it->get<std::string>();
      posts.push_back(std::move(p));
    } catch (const std::exception& e) {
      throw Error("cleaned corpus line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return posts;
}

}  // namespace stressorlens::corpus
