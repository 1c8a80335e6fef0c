#include <bitset>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "loadsynth/data.hpp"

namespace loadsynth::data {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool two_digits(std::string_view s, int& out) {
  if (s.size() != 2 || s[0] < '0' || s[0] > '9' || s[1] < '0' || s[1] > '9') return false;
  out = (s[0] - '0') * 10 + (s[1] - '0');
  return true;
}

// Returns false on anything that is not a half-hour wall-clock timestamp.
bool parse_timestamp(std::string_view ts, Date& date, std::size_t& slot) {
  if (ts.size() < 16 || (ts[10] != 'T' && ts[10] != ' ') || ts[13] != ':') return false;
  try {
    date = parse_date(ts.substr(0, 10));
  } catch (const ValidationError&) {
    return false;
  }
  int hour = 0, minute = 0, second = 0;
  if (!two_digits(ts.substr(11, 2), hour) || !two_digits(ts.substr(14, 2), minute)) return false;
  std::string_view rest = ts.substr(16);
  if (!rest.empty() && rest.front() == ':') {
    if (rest.size() < 3 || !two_digits(rest.substr(1, 2), second)) return false;
    rest.remove_prefix(3);
  }
  if (rest == "Z") {
    rest = {};
  } else if (!rest.empty()) {
    int oh = 0, om = 0;
    if (rest.size() != 6 || (rest[0] != '+' && rest[0] != '-') || rest[3] != ':' || !two_digits(rest.substr(1, 2), oh) ||
        !two_digits(rest.substr(4, 2), om)) {
      return false;
    }
  }
  if (hour > 23 || (minute != 0 && minute != 30) || second != 0) return false;
  slot = static_cast<std::size_t>(hour * 2 + minute / 30);
  return true;
}

// Finite, non-negative readings only.
bool parse_reading(std::string_view s, double& out) {
  if (s.empty()) return false;
  // std::from_chars for double is unavailable on some toolchains; strtod on a copy.
  std::string copy(s);
  char* end = nullptr;
  out = std::strtod(copy.c_str(), &end);
  return end == copy.c_str() + copy.size() && std::isfinite(out) && out >= 0.0;
}

struct DayAccumulator {
  DayValues values{};
  std::bitset<kSlotsPerDay> seen;
};

std::string describe_lines(const std::vector<std::size_t>& lines) {
  std::ostringstream out;
  const std::size_t shown = std::min<std::size_t>(lines.size(), 10);
  for (std::size_t i = 0; i < shown; ++i) out << (i ? ", " : "") << lines[i];
  if (lines.size() > shown) out << ", ... (" << lines.size() << " total)";
  return out.str();
}

}  // namespace

std::size_t profile_count(const ProfileMap& profiles) {
  std::size_t n = 0;
  for (const auto& [id, days] : profiles) n += days.size();
  return n;
}

IngestResult ingest_csv(std::istream& in) {
  IngestResult result;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) return result;
  ++line_no;
  if (!line.empty() && static_cast<unsigned char>(line[0]) == 0xEF && line.size() >= 3) line.erase(0, 3);  // UTF-8 BOM
  if (trim(line) != "customer_id,timestamp,kwh") {
    throw CsvParseError("line 1: expected header 'customer_id,timestamp,kwh'", {1});
  }

  std::map<std::string, std::map<Date, DayAccumulator>> grouped;
  std::vector<std::size_t> malformed;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view row = trim(line);
    if (row.empty()) continue;
    const auto c1 = row.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : row.find(',', c1 + 1);
    if (c2 == std::string_view::npos || row.find(',', c2 + 1) != std::string_view::npos) {
      malformed.push_back(line_no);
      continue;
    }
    const std::string_view id = trim(row.substr(0, c1));
    const std::string_view ts = trim(row.substr(c1 + 1, c2 - c1 - 1));
    const std::string_view kwh = trim(row.substr(c2 + 1));
    Date date;
    std::size_t slot = 0;
    double value = 0.0;
    if (id.empty() || !parse_timestamp(ts, date, slot) || !parse_reading(kwh, value)) {
      malformed.push_back(line_no);
      continue;
    }
    DayAccumulator& day = grouped[std::string(id)][date];
    if (day.seen.test(slot)) {
      throw ValidationError("line " + std::to_string(line_no) + ": duplicate reading for customer '" + std::string(id) +
                            "' at " + std::string(ts));
    }
    day.seen.set(slot);
    day.values[slot] = value;
    ++result.readings_read;
  }
  if (!malformed.empty()) {
    throw CsvParseError("malformed rows at line(s) " + describe_lines(malformed), std::move(malformed));
  }

  for (auto& [id, days] : grouped) {
    auto& out = result.profiles[id];
    for (auto& [date, acc] : days) {
      if (acc.seen.all()) {
        out.push_back({id, date, acc.values});
      } else {
        const std::size_t have = acc.seen.count();
        result.readings_dropped += have;
        result.dropped.push_back({id, date, "missing " + std::to_string(kSlotsPerDay - have) + " of 48 readings"});
      }
    }
    if (out.empty()) result.profiles.erase(id);
  }
  return result;
}

IngestResult ingest_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open input file " + path.string());
  return ingest_csv(in);
}

std::string format_timestamp(Date date, std::size_t slot) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%sT%02zu:%02zu:00", format_date(date).c_str(), slot / 2, (slot % 2) * 30);
  return buf;
}

void write_profile_rows(std::ostream& out, std::span<const DailyProfile> profiles) {
  char value[64];
  for (const auto& p : profiles) {
    for (std::size_t s = 0; s < kSlotsPerDay; ++s) {
      std::snprintf(value, sizeof value, "%.17g", p.values[s]);
      out << p.customer_id << ',' << format_timestamp(p.date, s) << ',' << value << '\n';
    }
  }
}

void write_profiles_csv(std::ostream& out, const ProfileMap& profiles) {
  out << "customer_id,timestamp,kwh\n";
  for (const auto& [id, days] : profiles) write_profile_rows(out, days);
}

void write_profiles_csv(const std::filesystem::path& path, const ProfileMap& profiles) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_profiles_csv(out, profiles);
}

void write_drop_report(std::ostream& out, std::span<const DropRecord> dropped) {
  out << "customer_id,date,reason\n";
  for (const auto& d : dropped) out << d.customer_id << ',' << format_date(d.date) << ',' << d.reason << '\n';
}

}  // namespace loadsynth::data
