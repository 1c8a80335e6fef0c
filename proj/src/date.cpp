#include "loadsynth/date.hpp"

#include <charconv>
#include <cstdio>

#include "loadsynth/errors.hpp"

namespace loadsynth {

using namespace std::chrono;

namespace {

bool parse_uint(std::string_view s, int& out) {
  if (s.empty()) return false;
  for (char c : s)
    if (c < '0' || c > '9') return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace

Date parse_date(std::string_view text) {
  int y = 0, m = 0, d = 0;
  if (text.size() != 10 || text[4] != '-' || text[7] != '-' || !parse_uint(text.substr(0, 4), y) ||
      !parse_uint(text.substr(5, 2), m) || !parse_uint(text.substr(8, 2), d)) {
    throw ValidationError("invalid date '" + std::string(text) + "', expected YYYY-MM-DD");
  }
  Date date{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
  if (!date.ok()) throw ValidationError("invalid calendar date '" + std::string(text) + "'");
  return date;
}

std::string format_date(Date date) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date.year()), static_cast<unsigned>(date.month()),
                static_cast<unsigned>(date.day()));
  return buf;
}

Date add_days(Date date, int n) { return Date{sys_days{date} + days{n}}; }

int days_between(Date from, Date to) { return static_cast<int>((sys_days{to} - sys_days{from}).count()); }

unsigned month_index(Date date) { return static_cast<unsigned>(date.month()) - 1; }

unsigned weekday_index(Date date) { return weekday{sys_days{date}}.iso_encoding() - 1; }

unsigned day_of_year(Date date) {
  const Date jan1{date.year(), January, day{1}};
  return static_cast<unsigned>(days_between(jan1, date)) + 1;
}

}  // namespace loadsynth
