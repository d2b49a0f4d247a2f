#include "stressorlens/trends.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

#include "stressorlens/csv.hpp"
#include "stressorlens/error.hpp"
#include "stressorlens/matrix_io.hpp"

namespace stressorlens::trends {
namespace {

std::vector<YearMonth> post_months(std::span<const corpus::CleanPost> posts) {
  if (posts.empty()) return {};
  auto [lo, hi] = std::minmax_element(posts.begin(), posts.end(),
                                      [](const auto& a, const auto& b) { return a.month < b.month; });
  return month_range(lo->month, hi->month);
}

std::size_t month_offset(const std::vector<YearMonth>& months, YearMonth m) {
  return static_cast<std::size_t>(std::lower_bound(months.begin(), months.end(), m) - months.begin());
}

std::optional<double> parse_number(const std::string& s, bool& bad) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    bad = true;
    return std::nullopt;
  }
  return v;
}

std::vector<std::string> month_strings(const std::vector<YearMonth>& months) {
  std::vector<std::string> out;
  for (auto m : months) out.push_back(m.str());
  return out;
}

std::vector<YearMonth> parse_months(const nlohmann::json& j) {
  std::vector<YearMonth> out;
  for (const auto& m : j) out.push_back(YearMonth::parse(m.get<std::string>()));
  return out;
}

}  // namespace

std::string_view to_string(Source s) { return s == Source::LdaMass ? "lda" : "lexicon"; }

Source parse_source(std::string_view s) {
  if (s == "lda") return Source::LdaMass;
  if (s == "lexicon") return Source::LexiconCount;
  throw Error("unknown trend source '" + std::string(s) + "'");
}

std::optional<std::size_t> TrendSeries::label_index(std::string_view label) const {
  auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) return std::nullopt;
  return static_cast<std::size_t>(it - labels.begin());
}

TrendSeries lda_monthly_sum(std::span<const corpus::CleanPost> posts, const Matrix& theta,
                            const topicmodel::TopicGroupMap& groups) {
  if (theta.rows() != posts.size()) throw Error("lda_monthly_sum: one theta row per post required");
  TrendSeries s;
  s.source = Source::LdaMass;
  s.months = post_months(posts);
  s.labels = groups.groups;
  s.values = Matrix(s.months.size(), s.labels.size());
  for (std::size_t i = 0; i < posts.size(); ++i) {
    const auto mass = topicmodel::group_mass(theta.row(i), groups);
    auto row = s.values.row(month_offset(s.months, posts[i].month));
    for (std::size_t g = 0; g < mass.size(); ++g) row[g] += mass[g];
  }
  return s;
}

TrendSeries lexicon_monthly_count(std::span<const corpus::CleanPost> posts,
                                  std::span<const lexicon::LexiconAnnotation> annotations,
                                  const std::vector<std::string>& topics) {
  if (annotations.size() != posts.size()) {
    throw Error("lexicon_monthly_count: one annotation per post required");
  }
  TrendSeries s;
  s.source = Source::LexiconCount;
  s.months = post_months(posts);
  s.labels = topics;
  s.values = Matrix(s.months.size(), s.labels.size());
  for (std::size_t i = 0; i < posts.size(); ++i) {
    if (annotations[i].post_id != posts[i].id) {
      throw Error("lexicon_monthly_count: annotation order does not match posts at " + posts[i].id);
    }
    auto row = s.values.row(month_offset(s.months, posts[i].month));
    for (const auto& t : annotations[i].topics) {
      if (auto k = s.label_index(t)) row[*k] += 1.0;
    }
  }
  return s;
}

Proportions monthly_proportions(const TrendSeries& series) {
  Proportions p{series, {}};
  for (std::size_t m = 0; m < p.series.values.rows(); ++m) {
    auto row = p.series.values.row(m);
    double total = 0.0;
    for (double v : row) total += v;
    if (total > 0.0) {
      for (double& v : row) v /= total;
    } else {
      p.empty_months.push_back(p.series.months[m]);
    }
  }
  return p;
}

std::vector<std::string> default_locations() {
  return {"United States", "United Kingdom", "Canada"};
}

ExternalSeries load_external_csv(const std::filesystem::path& path,
                                 const std::vector<std::string>& locations) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read external series '" + path.string() + "'");
  return load_external_csv(in, locations);
}

ExternalSeries load_external_csv(std::istream& in, const std::vector<std::string>& locations) {
  std::string line;
  if (!std::getline(in, line)) throw Error("external series: empty file");
  const auto header = csv::split_record(line);
  const auto column = [&](const char* name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(std::string("external series: missing required column '") + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_date = column("date"), c_loc = column("location"),
                    c_total = column("total_cases"), c_new = column("new_cases"),
                    c_vacc = column("people_vaccinated");

  struct Obs {
    int y;
    unsigned m, d;
    std::optional<double> total, fresh, vacc;
  };
  ExternalSeries out;
  out.locations = locations;
  std::vector<std::vector<Obs>> per_location(locations.size());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = csv::split_record(line);
    const std::size_t need = std::max({c_date, c_loc, c_total, c_new, c_vacc});
    if (f.size() <= need) {
      out.warnings.push_back("line " + std::to_string(line_no) + ": too few fields, skipped");
      continue;
    }
    auto loc = std::find(locations.begin(), locations.end(), f[c_loc]);
    if (loc == locations.end()) continue;
    Obs o{};
    if (!parse_iso_date(f[c_date], o.y, o.m, o.d)) {
      out.warnings.push_back("line " + std::to_string(line_no) + ": unparseable date '" + f[c_date] + "', skipped");
      continue;
    }
    bool bad = false;
    o.total = parse_number(f[c_total], bad);
    o.fresh = parse_number(f[c_new], bad);
    o.vacc = parse_number(f[c_vacc], bad);
    if (bad) out.warnings.push_back("line " + std::to_string(line_no) + ": unparseable number read as missing");
    per_location[static_cast<std::size_t>(loc - locations.begin())].push_back(o);
  }

  std::optional<YearMonth> first, last;
  for (auto& obs : per_location) {
    std::stable_sort(obs.begin(), obs.end(), [](const Obs& a, const Obs& b) {
      return std::tie(a.y, a.m, a.d) < std::tie(b.y, b.m, b.d);
    });
    for (const auto& o : obs) {
      const YearMonth ym{o.y, o.m};
      if (!first || ym < *first) first = ym;
      if (!last || ym > *last) last = ym;
    }
  }
  if (!first) return out;

  out.months = month_range(*first, *last);
  const std::size_t M = out.months.size();
  out.total_cases.assign(M, 0.0);
  out.new_cases.assign(M, 0.0);
  out.people_vaccinated.assign(M, 0.0);
  for (const auto& obs : per_location) {
    std::vector<std::optional<double>> total(M), vacc(M);
    for (const auto& o : obs) {
      const std::size_t m = month_offset(out.months, {o.y, o.m});
      if (o.total) total[m] = o.total;
      if (o.vacc) vacc[m] = o.vacc;
      if (o.fresh) out.new_cases[m] += *o.fresh;
    }
    double carry_total = 0.0, carry_vacc = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
      carry_total = total[m].value_or(carry_total);
      carry_vacc = vacc[m].value_or(carry_vacc);
      out.total_cases[m] += carry_total;
      out.people_vaccinated[m] += carry_vacc;
    }
  }
  for (std::size_t m = 1; m < M; ++m) {
    if (out.total_cases[m] < out.total_cases[m - 1]) {
      out.warnings.push_back("total_cases decreases from " + out.months[m - 1].str() + " to " +
                             out.months[m].str() + "; input may be malformed");
    }
  }
  return out;
}

ExternalSeries align_external(const ExternalSeries& series, std::span<const YearMonth> months) {
  ExternalSeries out;
  out.locations = series.locations;
  out.warnings = series.warnings;
  out.months.assign(months.begin(), months.end());
  for (const YearMonth m : months) {
    auto it = std::lower_bound(series.months.begin(), series.months.end(), m);
    const bool exact = it != series.months.end() && *it == m;
    if (exact) {
      const auto i = static_cast<std::size_t>(it - series.months.begin());
      out.total_cases.push_back(series.total_cases[i]);
      out.new_cases.push_back(series.new_cases[i]);
      out.people_vaccinated.push_back(series.people_vaccinated[i]);
      continue;
    }
    out.carried_forward.push_back(m);
    if (it == series.months.begin()) {
      out.total_cases.push_back(0.0);
      out.people_vaccinated.push_back(0.0);
    } else {
      const auto i = static_cast<std::size_t>(it - series.months.begin()) - 1;
      out.total_cases.push_back(series.total_cases[i]);
      out.people_vaccinated.push_back(series.people_vaccinated[i]);
    }
    out.new_cases.push_back(0.0);
  }
  return out;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("pearson: series lengths differ");
  if (a.size() < 2) throw Error("pearson: at least two points required");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) throw Error("pearson: zero variance, correlation undefined");
  const double r = sab / std::sqrt(saa * sbb);
  return std::clamp(r, -1.0, 1.0);
}

std::vector<std::pair<std::string, std::string>> default_method_pairs() {
  return {{"Fear of coronavirus", "Fear of coronavirus"},
          {"Uncertainty on development of pandemic", "Pandemic Development"}};
}

std::vector<Correlation> compare_methods(const TrendSeries& lda, const TrendSeries& lex,
                                         std::span<const std::pair<std::string, std::string>> pairs) {
  std::vector<std::size_t> rows_a, rows_b;
  for (std::size_t i = 0; i < lda.months.size(); ++i) {
    auto it = std::lower_bound(lex.months.begin(), lex.months.end(), lda.months[i]);
    if (it != lex.months.end() && *it == lda.months[i]) {
      rows_a.push_back(i);
      rows_b.push_back(static_cast<std::size_t>(it - lex.months.begin()));
    }
  }
  std::vector<Correlation> out;
  for (const auto& [a_label, b_label] : pairs) {
    Correlation c{a_label, b_label, std::nullopt, {}, rows_a.size()};
    const auto ia = lda.label_index(a_label);
    const auto ib = lex.label_index(b_label);
    if (!ia) {
      c.error = "unknown LDA group '" + a_label + "'";
    } else if (!ib) {
      c.error = "unknown lexicon topic '" + b_label + "'";
    } else {
      std::vector<double> xa, xb;
      for (std::size_t i = 0; i < rows_a.size(); ++i) {
        xa.push_back(lda.values(rows_a[i], *ia));
        xb.push_back(lex.values(rows_b[i], *ib));
      }
      try {
        c.r = pearson(xa, xb);
      } catch (const Error& e) {
        c.error = e.what();
      }
    }
    out.push_back(std::move(c));
  }
  return out;
}

void write_series_csv(std::ostream& out, const TrendSeries& series) {
  std::vector<std::string> header{"month"};
  header.insert(header.end(), series.labels.begin(), series.labels.end());
  csv::write_row(out, header);
  for (std::size_t m = 0; m < series.months.size(); ++m) {
    std::vector<std::string> row{series.months[m].str()};
    for (double v : series.values.row(m)) row.push_back(csv::format_double(v));
    csv::write_row(out, row);
  }
}

DashboardBundle make_dashboard(TrendSeries lda, TrendSeries lex, std::optional<ExternalSeries> external,
                               std::span<const std::pair<std::string, std::string>> pairs) {
  DashboardBundle b;
  b.correlations = compare_methods(lda, lex, pairs);
  b.lda_proportions = monthly_proportions(lda);
  b.lexicon_proportions = monthly_proportions(lex);
  if (external) b.external = align_external(*external, lda.months);
  b.lda = std::move(lda);
  b.lexicon = std::move(lex);
  return b;
}

nlohmann::ordered_json series_to_json(const TrendSeries& s) {
  nlohmann::ordered_json j;
  j["source"] = to_string(s.source);
  j["months"] = month_strings(s.months);
  j["labels"] = s.labels;
  auto values = nlohmann::ordered_json::array();
  for (std::size_t m = 0; m < s.values.rows(); ++m) {
    const auto row = s.values.row(m);
    values.push_back(std::vector<double>(row.begin(), row.end()));
  }
  j["values"] = values;
  return j;
}

TrendSeries series_from_json(const nlohmann::json& j) {
  TrendSeries s;
  s.source = parse_source(j.at("source").get<std::string>());
  s.months = parse_months(j.at("months"));
  s.labels = j.at("labels").get<std::vector<std::string>>();
  s.values = Matrix(s.months.size(), s.labels.size());
  const auto& values = j.at("values");
  if (values.size() != s.months.size()) throw Error("series: row count differs from months");
  for (std::size_t m = 0; m < s.months.size(); ++m) {
    const auto row = values[m].get<std::vector<double>>();
    if (row.size() != s.labels.size()) throw Error("series: ragged values row");
    std::copy(row.begin(), row.end(), s.values.row(m).begin());
  }
  return s;
}

nlohmann::ordered_json external_to_json(const ExternalSeries& e) {
  nlohmann::ordered_json j;
  j["locations"] = e.locations;
  j["months"] = month_strings(e.months);
  j["total_cases"] = e.total_cases;
  j["new_cases"] = e.new_cases;
  j["people_vaccinated"] = e.people_vaccinated;
  j["carried_forward"] = month_strings(e.carried_forward);
  j["warnings"] = e.warnings;
  return j;
}

ExternalSeries external_from_json(const nlohmann::json& j) {
  ExternalSeries e;
  e.locations = j.at("locations").get<std::vector<std::string>>();
  e.months = parse_months(j.at("months"));
  e.total_cases = j.at("total_cases").get<std::vector<double>>();
  e.new_cases = j.at("new_cases").get<std::vector<double>>();
  e.people_vaccinated = j.at("people_vaccinated").get<std::vector<double>>();
  e.carried_forward = parse_months(j.at("carried_forward"));
  if (j.contains("warnings")) e.warnings = j.at("warnings").get<std::vector<std::string>>();
  return e;
}

nlohmann::ordered_json correlations_to_json(std::span<const Correlation> table) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& c : table) {
    nlohmann::ordered_json row;
    row["lda_group"] = c.lda_label;
    row["lexicon_topic"] = c.lexicon_label;
    row["r"] = c.r ? nlohmann::ordered_json(*c.r) : nlohmann::ordered_json();
    row["n_months"] = c.n_months;
    row["error"] = c.error.empty() ? nlohmann::ordered_json() : nlohmann::ordered_json(c.error);
    arr.push_back(row);
  }
  return arr;
}

nlohmann::ordered_json dashboard_to_json(const DashboardBundle& b) {
  nlohmann::ordered_json j;
  j["schema_version"] = kDashboardSchemaVersion;
  j["months"] = month_strings(b.lda.months);
  j["lda"] = series_to_json(b.lda);
  j["lexicon"] = series_to_json(b.lexicon);
  auto lp = series_to_json(b.lda_proportions.series);
  lp["empty_months"] = month_strings(b.lda_proportions.empty_months);
  auto xp = series_to_json(b.lexicon_proportions.series);
  xp["empty_months"] = month_strings(b.lexicon_proportions.empty_months);
  j["proportions"] = {{"lda", lp}, {"lexicon", xp}};
  j["external"] = b.external ? external_to_json(*b.external) : nlohmann::ordered_json();
  j["correlations"] = correlations_to_json(b.correlations);
  return j;
}

DashboardBundle dashboard_from_json(const nlohmann::json& j) {
  if (j.at("schema_version").get<int>() != kDashboardSchemaVersion) {
    throw Error("dashboard: unsupported schema_version");
  }
  DashboardBundle b;
  b.lda = series_from_json(j.at("lda"));
  b.lexicon = series_from_json(j.at("lexicon"));
  const auto& props = j.at("proportions");
  b.lda_proportions = {series_from_json(props.at("lda")), parse_months(props.at("lda").at("empty_months"))};
  b.lexicon_proportions = {series_from_json(props.at("lexicon")),
                           parse_months(props.at("lexicon").at("empty_months"))};
  if (!j.at("external").is_null()) b.external = external_from_json(j.at("external"));
  for (const auto& row : j.at("correlations")) {
    Correlation c;
    c.lda_label = row.at("lda_group").get<std::string>();
    c.lexicon_label = row.at("lexicon_topic").get<std::string>();
    if (!row.at("r").is_null()) c.r = row.at("r").get<double>();
    c.n_months = row.at("n_months").get<std::size_t>();
    if (!row.at("error").is_null()) c.error = row.at("error").get<std::string>();
    b.correlations.push_back(std::move(c));
  }
  return b;
}

void export_dashboard(const DashboardBundle& b, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("export_dashboard: cannot create '" + dir.string() + "': " + ec.message());

  std::ostringstream lda, lex, props, ext;
  write_series_csv(lda, b.lda);
  write_series_csv(lex, b.lexicon);

  std::vector<std::string> header{"month"};
  for (const auto& l : b.lda_proportions.series.labels) header.push_back("lda:" + l);
  for (const auto& l : b.lexicon_proportions.series.labels) header.push_back("lexicon:" + l);
  csv::write_row(props, header);
  const auto& lp = b.lda_proportions.series;
  const auto& xp = b.lexicon_proportions.series;
  for (std::size_t m = 0; m < lp.months.size(); ++m) {
    std::vector<std::string> row{lp.months[m].str()};
    for (double v : lp.values.row(m)) row.push_back(csv::format_double(v));
    auto it = std::lower_bound(xp.months.begin(), xp.months.end(), lp.months[m]);
    const bool present = it != xp.months.end() && *it == lp.months[m];
    for (std::size_t t = 0; t < xp.labels.size(); ++t) {
      row.push_back(present ? csv::format_double(xp.values(static_cast<std::size_t>(it - xp.months.begin()), t))
                            : "0");
    }
    csv::write_row(props, row);
  }

  csv::write_row(ext, {"month", "total_cases", "new_cases", "people_vaccinated", "carried_forward"});
  if (b.external) {
    const auto& e = *b.external;
    for (std::size_t m = 0; m < e.months.size(); ++m) {
      const bool carried = std::find(e.carried_forward.begin(), e.carried_forward.end(), e.months[m]) !=
                           e.carried_forward.end();
      csv::write_row(ext, {e.months[m].str(), csv::format_double(e.total_cases[m]),
                           csv::format_double(e.new_cases[m]), csv::format_double(e.people_vaccinated[m]),
                           carried ? "1" : "0"});
    }
  }

  write_file(dir / "trends_lda.csv", lda.str());
  write_file(dir / "trends_lexicon.csv", lex.str());
  write_file(dir / "proportions.csv", props.str());
  write_file(dir / "external.csv", ext.str());
  write_file(dir / "dashboard.json", dashboard_to_json(b).dump(2) + "\n");
}

}  // namespace stressorlens::trends
