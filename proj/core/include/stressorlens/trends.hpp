#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "stressorlens/corpus.hpp"
#include "stressorlens/lexicon.hpp"
#include "stressorlens/matrix.hpp"
#include "stressorlens/month.hpp"
#include "stressorlens/topicmodel.hpp"

namespace stressorlens::trends {

enum class Source { LdaMass, LexiconCount };
std::string_view to_string(Source s);
Source parse_source(std::string_view s);

// Month x label values over a contiguous month range.
struct TrendSeries {
  Source source = Source::LdaMass;
  std::vector<YearMonth> months;
  std::vector<std::string> labels;
  Matrix values;

  std::optional<std::size_t> label_index(std::string_view label) const;
  bool operator==(const TrendSeries&) const = default;
};

// value(m, g) = sum over posts in month m of the group mass of their theta row.
// `theta` rows align with `posts`.
TrendSeries lda_monthly_sum(std::span<const corpus::CleanPost> posts, const Matrix& theta,
                            const topicmodel::TopicGroupMap& groups);

// value(m, t) = posts in month m whose annotation contains topic t.
TrendSeries lexicon_monthly_count(std::span<const corpus::CleanPost> posts,
                                  std::span<const lexicon::LexiconAnnotation> annotations,
                                  const std::vector<std::string>& topics);

struct Proportions {
  TrendSeries series;
  std::vector<YearMonth> empty_months;  // all-zero rows, left as zeros
};
Proportions monthly_proportions(const TrendSeries& series);

// Epidemic counts summed over a set of locations, one value per month.
struct ExternalSeries {
  std::vector<std::string> locations;
  std::vector<YearMonth> months;
  std::vector<double> total_cases;
  std::vector<double> new_cases;
  std::vector<double> people_vaccinated;
  std::vector<YearMonth> carried_forward;  // months filled without a direct observation
  std::vector<std::string> warnings;

  bool operator==(const ExternalSeries& o) const {
    return locations == o.locations && months == o.months && total_cases == o.total_cases &&
           new_cases == o.new_cases && people_vaccinated == o.people_vaccinated &&
           carried_forward == o.carried_forward;
  }
};

std::vector<std::string> default_locations();  // United States, United Kingdom, Canada

// OWID-style daily CSV. Per location and month: last non-missing observation of the
// cumulative columns and the sum of new_cases; then summed over locations. Throws
// Error when a required column is missing.
ExternalSeries load_external_csv(const std::filesystem::path& path,
                                 const std::vector<std::string>& locations);
ExternalSeries load_external_csv(std::istream& in, const std::vector<std::string>& locations);

// Reindexes onto `months`. Months without data carry cumulative columns forward and
// set new_cases to 0; such months are listed in carried_forward.
ExternalSeries align_external(const ExternalSeries& series, std::span<const YearMonth> months);

// Pearson product-moment correlation. Throws Error on length mismatch, fewer than two
// points, or zero variance.
double pearson(std::span<const double> a, std::span<const double> b);

struct Correlation {
  std::string lda_label;
  std::string lexicon_label;
  std::optional<double> r;
  std::string error;
  std::size_t n_months = 0;
};

std::vector<std::pair<std::string, std::string>> default_method_pairs();

// Pearson r per (LDA group, lexicon topic) pair over the months both series cover.
// A failing pair records its error and does not stop the others.
std::vector<Correlation> compare_methods(const TrendSeries& lda, const TrendSeries& lex,
                                         std::span<const std::pair<std::string, std::string>> pairs);

void write_series_csv(std::ostream& out, const TrendSeries& series);

struct DashboardBundle {
  TrendSeries lda;
  TrendSeries lexicon;
  Proportions lda_proportions;
  Proportions lexicon_proportions;
  std::optional<ExternalSeries> external;  // aligned to lda.months
  std::vector<Correlation> correlations;
};

DashboardBundle make_dashboard(TrendSeries lda, TrendSeries lex,
                               std::optional<ExternalSeries> external,
                               std::span<const std::pair<std::string, std::string>> pairs);

inline constexpr int kDashboardSchemaVersion = 1;
nlohmann::ordered_json series_to_json(const TrendSeries& s);
TrendSeries series_from_json(const nlohmann::json& j);
nlohmann::ordered_json external_to_json(const ExternalSeries& e);
ExternalSeries external_from_json(const nlohmann::json& j);
nlohmann::ordered_json correlations_to_json(std::span<const Correlation> table);
nlohmann::ordered_json dashboard_to_json(const DashboardBundle& bundle);
DashboardBundle dashboard_from_json(const nlohmann::json& j);

// Writes trends_lda.csv, trends_lexicon.csv, proportions.csv, external.csv and
// dashboard.json into `dir` (created if needed).
void export_dashboard(const DashboardBundle& bundle, const std::filesystem::path& dir);

}  // namespace stressorlens::trends
