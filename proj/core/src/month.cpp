#include "stressorlens/month.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>

#include "stressorlens/error.hpp"

namespace stressorlens {
namespace {

bool parse_uint(std::string_view text, unsigned& out) {
  if (text.empty()) return false;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

bool parse_int(std::string_view text, int& out) {
  if (text.empty()) return false;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

}  // namespace

YearMonth YearMonth::next() const {
  return month == 12 ? YearMonth{year + 1, 1} : YearMonth{year, month + 1};
}

std::string YearMonth::str() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u", year, month);
  return buf;
}

YearMonth YearMonth::from_unix(std::int64_t seconds) {
  using namespace std::chrono;
  const sys_seconds tp{std::chrono::seconds{seconds}};
  const year_month_day ymd{floor<days>(tp)};
  return {static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month())};
}

YearMonth YearMonth::parse(std::string_view key) {
  int y = 0;
  unsigned m = 0;
  if (key.size() != 7 || key[4] != '-' || !parse_int(key.substr(0, 4), y) ||
      !parse_uint(key.substr(5, 2), m) || m < 1 || m > 12) {
    throw Error("malformed month key '" + std::string(key) + "', expected YYYY-MM");
  }
  return {y, m};
}

std::vector<YearMonth> month_range(YearMonth first, YearMonth last) {
  std::vector<YearMonth> out;
  for (YearMonth m = first; m <= last; m = m.next()) out.push_back(m);
  return out;
}

std::string format_rfc3339(std::int64_t seconds) {
  using namespace std::chrono;
  const sys_seconds tp{std::chrono::seconds{seconds}};
  const auto day = floor<days>(tp);
  const year_month_day ymd{day};
  const hh_mm_ss hms{tp - day};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

bool parse_iso_date(std::string_view text, int& year, unsigned& month, unsigned& day) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return false;
  if (!parse_int(text.substr(0, 4), year) || !parse_uint(text.substr(5, 2), month) ||
      !parse_uint(text.substr(8, 2), day)) {
    return false;
  }
  using namespace std::chrono;
  return year_month_day{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}}
      .ok();
}

std::int64_t parse_rfc3339(std::string_view text) {
  int y = 0;
  unsigned mo = 0, d = 0, h = 0, mi = 0, s = 0;
  std::string_view rest = text.size() > 19 ? text.substr(19) : std::string_view{};
  const bool ok = text.size() >= 20 && parse_iso_date(text.substr(0, 10), y, mo, d) &&
                  text[10] == 'T' && text[13] == ':' && text[16] == ':' &&
                  parse_uint(text.substr(11, 2), h) && parse_uint(text.substr(14, 2), mi) &&
                  parse_uint(text.substr(17, 2), s) && h < 24 && mi < 60 && s < 61 &&
                  (rest == "Z" || rest == "+00:00");
  if (!ok) throw Error("malformed RFC 3339 timestamp '" + std::string(text) + "'");
  using namespace std::chrono;
  const sys_days day = year_month_day{std::chrono::year{y}, std::chrono::month{mo}, std::chrono::day{d}};
  return duration_cast<std::chrono::seconds>(day.time_since_epoch()).count() + h * 3600 + mi * 60 + s;
}

}  // namespace stressorlens
