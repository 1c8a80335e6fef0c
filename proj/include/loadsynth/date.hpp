#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace loadsynth {

using Date = std::chrono::year_month_day;

// Strict YYYY-MM-DD; throws ValidationError on anything else or an invalid day.
Date parse_date(std::string_view text);
std::string format_date(Date date);

Date add_days(Date date, int days);
int days_between(Date from, Date to);

unsigned month_index(Date date);    // 0 = January
unsigned weekday_index(Date date);  // 0 = Monday .. 6 = Sunday
unsigned day_of_year(Date date);    // 1-based

}  // namespace loadsynth
