#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stressorlens/month.hpp"

namespace stressorlens::corpus {

// One submission as exported from the Pushshift submission endpoint.
struct RawPost {
  std::string id;
  std::int64_t created_utc = 0;
  std::string title;
  std::string body;  // "selftext"
  std::optional<std::string> flair;  // "link_flair_text"
  std::optional<std::string> permalink;

  bool operator==(const RawPost&) const = default;
};

// Coarse flair taxonomy used as classifier classes.
enum class FlairGroup {
  MentalHealthSupport,
  DiscussionQuestions,
  NewsResources,
  Experience,
  Other,
  Unlabelled,
};
inline constexpr std::size_t kFlairGroupCount = 6;
inline constexpr std::array<FlairGroup, kFlairGroupCount> kAllFlairGroups = {
    FlairGroup::MentalHealthSupport, FlairGroup::DiscussionQuestions, FlairGroup::NewsResources,
    FlairGroup::Experience,          FlairGroup::Other,               FlairGroup::Unlabelled};

std::string_view to_string(FlairGroup g);
FlairGroup parse_flair_group(std::string_view name);  // inverse of to_string; throws on unknown

// Where a post's flair group came from. Unlabelled posts await imputation.
enum class FlairSource { Labelled, Predicted, Unlabelled };
std::string_view to_string(FlairSource s);
FlairSource parse_flair_source(std::string_view name);

struct CleanPost {
  std::string id;
  std::int64_t created_utc = 0;
  YearMonth month;
  std::string text;  // trimmed "title body"
  std::optional<std::string> flair;  // raw flair text, kept for provenance
  FlairGroup flair_group = FlairGroup::Unlabelled;
  FlairSource flair_source = FlairSource::Unlabelled;

  bool operator==(const CleanPost&) const = default;
};

struct LoadResult {
  std::vector<RawPost> posts;
  std::size_t malformed = 0;
  std::size_t duplicates = 0;
  std::vector<std::string> messages;  // one per skipped line

  std::size_t warnings() const noexcept { return malformed + duplicates; }
};

// Reads a JSON-lines export. Throws Error if the file cannot be opened; malformed
// lines and repeated ids are skipped and tallied.
LoadResult load_corpus(const std::filesystem::path& path);
LoadResult load_corpus(std::istream& in);

// Case-insensitive, whitespace-collapsed lookup of a raw flair string.
FlairGroup map_flair(std::optional<std::string_view> flair);

// Drops removed/deleted/empty posts and assigns flair groups.
std::vector<CleanPost> clean(std::span<const RawPost> posts);

// Posts that take part in modeling: everything except the Other group.
std::vector<CleanPost> drop_other(std::span<const CleanPost> posts);

// Count per FlairGroup, indexed by the enum's underlying value.
std::array<std::size_t, kFlairGroupCount> flair_counts(std::span<const CleanPost> posts);

// Cleaned-corpus JSON-lines: id, timestamp (RFC 3339), month, text, flair_group,
// flair_source, and flair when present.
void write_clean_jsonl(std::ostream& out, std::span<const CleanPost> posts);
std::vector<CleanPost> read_clean_jsonl(std::istream& in);

}  // namespace stressorlens::corpus
