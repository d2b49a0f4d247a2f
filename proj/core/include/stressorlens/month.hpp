#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace stressorlens {

// Calendar month key, rendered as YYYY-MM.
struct YearMonth {
  int year = 1970;
  unsigned month = 1;  // 1..12

  auto operator<=>(const YearMonth&) const = default;

  YearMonth next() const;
  std::string str() const;

  static YearMonth from_unix(std::int64_t seconds);  // UTC
  static YearMonth parse(std::string_view key);      // throws on malformed input
};

// Every month from first to last inclusive.
std::vector<YearMonth> month_range(YearMonth first, YearMonth last);

// RFC 3339 UTC timestamp ("2020-03-01T00:00:00Z") for seconds since epoch.
std::string format_rfc3339(std::int64_t seconds);
// Inverse of format_rfc3339; accepts a trailing "Z" or "+00:00" only.
std::int64_t parse_rfc3339(std::string_view text);

// Parses an ISO date "YYYY-MM-DD"; returns false if malformed or out of range.
bool parse_iso_date(std::string_view text, int& year, unsigned& month, unsigned& day);

}  // namespace stressorlens
