#include "jitcast/date.hpp"

#include <charconv>
#include <cstdio>
#include <stdexcept>

namespace jitcast {

namespace {

int parse_fixed(std::string_view text, std::size_t pos, std::size_t len) {
    int value = 0;
    const char* first = text.data() + pos;
    const char* last = first + len;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) {
        throw std::invalid_argument("malformed date/time '" + std::string(text) + "'");
    }
    return value;
}

}  // namespace

Date make_date(int year, unsigned month, unsigned day) {
    const std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                                          std::chrono::day{day}};
    if (!ymd.ok()) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", year, month, day);
        throw std::invalid_argument(std::string("invalid calendar date ") + buf);
    }
    return Date{ymd};
}

Date parse_date(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
        throw std::invalid_argument("malformed date '" + std::string(text) + "', expected YYYY-MM-DD");
    }
    return make_date(parse_fixed(text, 0, 4), static_cast<unsigned>(parse_fixed(text, 5, 2)),
                     static_cast<unsigned>(parse_fixed(text, 8, 2)));
}

HourStamp parse_hour_stamp(std::string_view text) {
    if (text.size() != 19 || text[10] != 'T' || text.substr(13) != ":00:00") {
        throw std::invalid_argument("malformed timestamp '" + std::string(text) +
                                    "', expected YYYY-MM-DDTHH:00:00");
    }
    const Date d = parse_date(text.substr(0, 10));
    const int hour = parse_fixed(text, 11, 2);
    if (hour < 0 || hour > 23) {
        throw std::invalid_argument("hour out of range in '" + std::string(text) + "'");
    }
    return HourStamp{d} + std::chrono::hours{hour};
}

std::string format_date(Date d) {
    const std::chrono::year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

std::string format_hour_stamp(HourStamp h) {
    const Date d = day_of(h);
    const auto hour = (h - HourStamp{d}).count();
    char buf[16];
    std::snprintf(buf, sizeof buf, "T%02d:00:00", static_cast<int>(hour));
    return format_date(d) + buf;
}

int day_of_week(Date d) {
    return static_cast<int>(std::chrono::weekday{d}.iso_encoding()) - 1;
}

int month_of(Date d) {
    return static_cast<int>(static_cast<unsigned>(std::chrono::year_month_day{d}.month()));
}

int year_of(Date d) { return static_cast<int>(std::chrono::year_month_day{d}.year()); }

int day_of_year(Date d) {
    const std::chrono::year_month_day ymd{d};
    const Date jan1{ymd.year() / std::chrono::January / 1};
    return static_cast<int>((d - jan1).count()) + 1;
}

}  // namespace jitcast
