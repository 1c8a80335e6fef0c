#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "loadsynth/data.hpp"

using namespace loadsynth;
using namespace loadsynth::data;

namespace {

void add_day(std::ostream& out, const std::string& id, const std::string& date, std::size_t slots = 48, double value = 0.5) {
  for (std::size_t s = 0; s < slots; ++s) {
    out << id << ',' << format_timestamp(parse_date(date), s) << ',' << value + 0.01 * static_cast<double>(s) << '\n';
  }
}

IngestResult ingest_text(const std::string& text) {
  std::istringstream in(text);
  return ingest_csv(in);
}

std::vector<DailyProfile> constant_days(const std::vector<double>& levels) {
  std::vector<DailyProfile> days;
  Date d = parse_date("2013-01-01");
  for (double v : levels) {
    DailyProfile p{"X", d, {}};
    p.values.fill(v);
    days.push_back(p);
    d = add_days(d, 1);
  }
  return days;
}

}  // namespace

TEST_CASE("ingestion: completeness rule") {
  std::ostringstream csv;
  csv << "customer_id,timestamp,kwh\n";
  add_day(csv, "A", "2013-03-01");
  add_day(csv, "A", "2013-03-02");
  add_day(csv, "A", "2013-03-03", 47);
  const IngestResult r = ingest_text(csv.str());
  REQUIRE(r.profiles.count("A") == 1);
  CHECK(r.profiles.at("A").size() == 2);
  REQUIRE(r.dropped.size() == 1);
  CHECK(format_date(r.dropped[0].date) == "2013-03-03");
  CHECK(r.dropped[0].reason == "missing 1 of 48 readings");
  CHECK(r.readings_read == 48 * 3 - 1);
  CHECK(r.readings_read == 48 * profile_count(r.profiles) + r.readings_dropped);
  CHECK(r.profiles.at("A")[1].values[10] == doctest::Approx(0.6));

  std::ostringstream report;
  write_drop_report(report, r.dropped);
  CHECK(report.str() == "customer_id,date,reason\nA,2013-03-03,missing 1 of 48 readings\n");
}

TEST_CASE("ingestion: empty input") {
  for (const char* text : {"", "customer_id,timestamp,kwh\n"}) {
    const IngestResult r = ingest_text(text);
    CHECK(r.profiles.empty());
    CHECK(r.dropped.empty());
    CHECK(r.readings_read == 0);
  }
}

TEST_CASE("ingestion: a full year") {
  std::ostringstream csv;
  csv << "customer_id,timestamp,kwh\n";
  for (int d = 0; d < 365; ++d) add_day(csv, "Y", format_date(add_days(parse_date("2013-01-01"), d)));
  const IngestResult r = ingest_text(csv.str());
  CHECK(r.profiles.at("Y").size() == 365);
  CHECK(r.readings_read == 17520);
  CHECK(r.dropped.empty());
  const auto& days = r.profiles.at("Y");
  CHECK(std::is_sorted(days.begin(), days.end(), [](const auto& a, const auto& b) { return a.date < b.date; }));
}

TEST_CASE("ingestion: timestamp forms, ordering and row errors") {
  SUBCASE("shuffled rows, space separator, seconds, suffixes, BOM and CRLF") {
    std::ostringstream csv;
    csv << "\xEF\xBB\xBF" << "customer_id,timestamp,kwh\r\n";
    for (int s = 47; s >= 0; --s) {
      char ts[40];
      std::snprintf(ts, sizeof ts, "2013-05-06%c%02d:%02d%s", s % 2 ? ' ' : 'T', s / 2, (s % 2) * 30,
                    s % 3 == 0 ? ":00Z" : (s % 3 == 1 ? "+01:00" : ""));
      csv << "B," << ts << ',' << s << "\r\n";
    }
    const IngestResult r = ingest_text(csv.str());
    REQUIRE(r.profiles.at("B").size() == 1);
    for (std::size_t s = 0; s < 48; ++s) CHECK(r.profiles.at("B")[0].values[s] == static_cast<double>(s));
  }
  SUBCASE("duplicate reading is an error naming the line") {
    std::ostringstream csv;
    csv << "customer_id,timestamp,kwh\n";
    add_day(csv, "A", "2013-03-01");
    csv << "A,2013-03-01T05:30:00,1.0\n";
    try {
      ingest_text(csv.str());
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("line 50") != std::string::npos);
    }
  }
  SUBCASE("malformed rows are reported with their line numbers") {
    const std::string text =
        "customer_id,timestamp,kwh\n"
        "A,2013-03-01T00:00:00,1.0\n"
        "A,2013-03-01T00:15:00,1.0\n"  // off the half hour
        "A,2013-02-30T01:00:00,1.0\n"  // no such day
        "A,2013-03-01T01:30:00,abc\n"
        "A,2013-03-01T02:00:00\n"
        "A,2013-03-01T02:30:00,-0.5\n"
        ",2013-03-01T03:00:00,1.0\n";
    try {
      ingest_text(text);
      FAIL("expected CsvParseError");
    } catch (const CsvParseError& e) {
      CHECK(e.lines() == std::vector<std::size_t>{3, 4, 5, 6, 7, 8});
    }
  }
  SUBCASE("wrong header") { CHECK_THROWS_AS(ingest_text("id,time,value\n"), CsvParseError); }
}

TEST_CASE("profile CSV round trip") {
  const ProfileMap corpus = generate_synthetic_corpus(3, 25, 4);
  const auto path = std::filesystem::temp_directory_path() / "loadsynth_test_roundtrip.csv";
  write_profiles_csv(path, corpus);
  const IngestResult r = ingest_csv(path);
  std::filesystem::remove(path);
  CHECK(r.dropped.empty());
  REQUIRE(r.profiles.size() == 3);
  for (const auto& [id, days] : corpus) {
    const auto& back = r.profiles.at(id);
    REQUIRE(back.size() == days.size());
    for (std::size_t d = 0; d < days.size(); ++d) {
      CHECK(back[d].date == days[d].date);
      for (std::size_t s = 0; s < 48; ++s) CHECK(std::abs(back[d].values[s] - days[d].values[s]) <= 1e-9 * std::max(1.0, days[d].values[s]));
    }
  }
  CHECK_THROWS_AS(ingest_csv(std::filesystem::path("/nonexistent/loadsynth.csv")), ValidationError);
}

TEST_CASE("chronological split") {
  const ProfileMap corpus = generate_synthetic_corpus(2, 365, 1);
  ProfileMap small;
  small["S"] = std::vector<DailyProfile>(corpus.at("C000").begin(), corpus.at("C000").begin() + 10);
  small["T"] = std::vector<DailyProfile>(corpus.at("C001").begin(), corpus.at("C001").begin() + 4);
  small["Y"] = corpus.at("C001");

  const DatasetSplit split = split_dataset(small);
  CHECK(split.excluded == std::vector<std::string>{"T"});
  const auto& y = split.customers.at("Y");
  CHECK(y.train.size() == 219);
  CHECK(y.validation.size() == 73);
  CHECK(y.test.size() == 73);
  const auto& s = split.customers.at("S");
  CHECK(s.train.size() == 6);
  CHECK(s.validation.size() == 2);
  CHECK(s.test.size() == 2);
  CHECK(y.train.back().date < y.validation.front().date);
  CHECK(y.validation.back().date < y.test.front().date);
  CHECK(y.train.front().date == small["Y"].front().date);
  CHECK(y.test.back().date == small["Y"].back().date);

  CHECK_THROWS_AS(split_dataset(small, {0.6, 0.2, 0.1}), ValidationError);
  CHECK_THROWS_AS(split_dataset(small, {1.2, -0.1, -0.1}), ValidationError);
  for (std::size_t n = 5; n < 40; ++n) {
    ProfileMap m;
    m["Z"] = std::vector<DailyProfile>(corpus.at("C000").begin(), corpus.at("C000").begin() + static_cast<long>(n));
    const auto cs = split_dataset(m).customers.at("Z");
    CHECK(cs.train.size() + cs.validation.size() + cs.test.size() == n);
    CHECK(std::abs(static_cast<double>(cs.train.size()) - 0.6 * n) < 1.0);
    CHECK(std::abs(static_cast<double>(cs.validation.size()) - 0.2 * n) < 1.0);
    CHECK(std::abs(static_cast<double>(cs.test.size()) - 0.2 * n) < 1.0);
  }
}

TEST_CASE("normalization") {
  const ProfileMap corpus = generate_synthetic_corpus(2, 60, 3);
  const auto& days = corpus.at("C000");
  const NormalizationStats st = compute_stats(days);
  double total = 0;
  for (const auto& d : days) {
    const auto z = normalize(d.values, st);
    for (double v : z) total += v;
    const auto back = denormalize(z, st);
    for (std::size_t s = 0; s < 48; ++s) CHECK(std::abs(back[s] - d.values[s]) < 1e-10);
  }
  CHECK(std::abs(total / (60.0 * 48)) < 1e-10);

  const auto flat = constant_days({3.0, 3.0});
  const NormalizationStats fst = compute_stats(flat);
  CHECK(fst.std == kMinStd);
  for (double v : normalize(flat[0].values, fst)) CHECK(v == 0.0);
  CHECK_THROWS_AS(compute_stats(std::span<const DailyProfile>{}), ValidationError);
}

TEST_CASE("conditions") {
  const NormalizationStats unit{0.0, 1.0};
  const auto two = constant_days({0.0, 2.0});
  for (double v : typical_load(two, unit)) CHECK(v == 1.0);

  const auto same = constant_days({1.5, 1.5, 1.5});
  const auto t = typical_load(same, {1.0, 0.5});
  CHECK(t.size() == 48);
  for (double v : t) CHECK(v == 1.0);

  const ProfileMap corpus = generate_synthetic_corpus(2, 30, 5);
  const DatasetSplit split = split_dataset(corpus);
  const StatsMap stats = compute_stats(split);
  const Date date = parse_date("2013-12-25");
  const Condition c = build_condition(split, stats, "C001", date);
  CHECK(c.typical_load.size() == 48);
  CHECK(c.date == date);
  CHECK(c.typical_load == build_condition(split, stats, "C001", date).typical_load);
  CHECK(c.typical_load == typical_load(split.customers.at("C001").train, stats.at("C001")));
  CHECK_THROWS_AS(build_condition(split, stats, "nobody", date), ValidationError);

  CHECK_THROWS_AS(make_condition(std::vector<double>(47, 0.0), date), ValidationError);
  CHECK_THROWS_AS(make_condition(std::vector<double>(48, NAN), date), ValidationError);
  CHECK_NOTHROW(make_condition(std::vector<double>(48, 0.0), date));
}

TEST_CASE("synthetic corpus") {
  const ProfileMap a = generate_synthetic_corpus(4, 40, 17);
  const ProfileMap b = generate_synthetic_corpus(4, 40, 17);
  const ProfileMap c = generate_synthetic_corpus(4, 40, 18);
  CHECK(a.size() == 4);
  bool same = true, differs = false;
  for (const auto& [id, days] : a) {
    CHECK(days.size() == 40);
    for (std::size_t d = 0; d < days.size(); ++d) {
      same = same && days[d].values == b.at(id)[d].values;
      differs = differs || days[d].values != c.at(id)[d].values;
      for (double v : days[d].values) CHECK(v >= 0.0);
    }
  }
  CHECK(same);
  CHECK(differs);
  CHECK(a.begin()->first == "C000");
  CHECK_THROWS_AS(generate_synthetic_corpus(1, 40, 1), ValidationError);
  CHECK_THROWS_AS(generate_synthetic_corpus(2, 19, 1), ValidationError);
}

TEST_CASE("synthetic corpus: disjoint evening-peak ranges give different peak slots") {
  ShapeRanges early, late;
  early.morning_amplitude = late.morning_amplitude = {0.1, 0.2};
  early.evening_amplitude = late.evening_amplitude = {1.5, 2.0};
  early.evening_hour = {17.0, 18.0};
  late.evening_hour = {20.0, 21.0};
  Rng rng = make_rng(8);
  const CustomerShape e = draw_customer_shape(rng, early), l = draw_customer_shape(rng, late);
  const Date date = parse_date("2013-04-10");
  const auto pe = expected_profile(e, date), pl = expected_profile(l, date);
  const auto argmax = [](const DayValues& v) { return std::max_element(v.begin(), v.end()) - v.begin(); };
  CHECK(argmax(pe) <= 36);  // 18:00
  CHECK(argmax(pl) >= 39);  // 19:30
}

TEST_CASE("synthetic corpus: empirical daily totals converge to the parametric mean") {
  const std::size_t n_days = 200;
  const auto shapes = corpus_shapes(4, 23);
  const ProfileMap corpus = corpus_from_shapes(shapes, n_days, 23);
  for (std::size_t c = 0; c < shapes.size(); ++c) {
    CAPTURE(c);
    const CustomerShape& sh = shapes[c];
    const auto& days = corpus.at(synthetic_customer_id(c));
    const double k_day = std::exp(sh.day_noise * sh.day_noise);
    const double k_read = std::exp(sh.reading_noise * sh.reading_noise);
    double empirical = 0, expected = 0, variance = 0;
    for (const auto& d : days) {
      const auto mu = expected_profile(sh, d.date);
      double sum = 0, sum_sq = 0;
      for (double v : mu) sum += v, sum_sq += v * v;
      for (double v : d.values) empirical += v;
      expected += sum;
      // Var of sum_s mu_s * D * R_s with independent mean-one log-normals D and R_s.
      variance += k_day * (k_read * sum_sq + sum * sum - sum_sq) - sum * sum;
    }
    const double se = std::sqrt(variance) / n_days;
    CHECK(std::abs(empirical / n_days - expected / n_days) < 3 * se);
  }
}
