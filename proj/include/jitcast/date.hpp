#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace jitcast {

using Date = std::chrono::sys_days;
using HourStamp = std::chrono::sys_time<std::chrono::hours>;

/// "YYYY-MM-DD"; throws std::invalid_argument for malformed or non-existent dates.
Date parse_date(std::string_view text);
Date make_date(int year, unsigned month, unsigned day);
/// "YYYY-MM-DDTHH:00:00"
HourStamp parse_hour_stamp(std::string_view text);

std::string format_date(Date d);
std::string format_hour_stamp(HourStamp h);

inline Date day_of(HourStamp h) { return std::chrono::floor<std::chrono::days>(h); }

/// 0 = Monday ... 6 = Sunday.
int day_of_week(Date d);
int month_of(Date d);
int year_of(Date d);
/// 1-based day of the year.
int day_of_year(Date d);

}  // namespace jitcast
