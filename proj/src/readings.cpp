#include "jitcast/readings.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <iterator>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

#include "jitcast/errors.hpp"

namespace jitcast::data {

namespace {

std::string_view trim_cr(std::string_view line) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
    return line;
}

}  // namespace

MeterReading parse_reading_row(std::string_view line) {
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string_view::npos || line.find(',', c2 + 1) != std::string_view::npos) {
        throw std::invalid_argument("expected 3 comma-separated fields");
    }
    MeterReading r;
    r.timestamp = parse_hour_stamp(line.substr(0, c1));
    r.customer_id = std::string(line.substr(c1 + 1, c2 - c1 - 1));
    if (r.customer_id.empty()) throw std::invalid_argument("empty customer_id");
    const std::string_view kwh = line.substr(c2 + 1);
    const char* first = kwh.data();
    const char* last = kwh.data() + kwh.size();
    auto [ptr, ec] = std::from_chars(first, last, r.kwh);
    if (ec != std::errc() || ptr != last || kwh.empty()) {
        throw std::invalid_argument("malformed kWh value '" + std::string(kwh) + "'");
    }
    if (!std::isfinite(r.kwh) || r.kwh < 0.0) {
        throw std::invalid_argument("kWh must be finite and non-negative, got '" +
                                    std::string(kwh) + "'");
    }
    return r;
}

void ReadingCollector::add(std::istream& in, const std::string& source) {
    std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    add_text(text, source);
}

void ReadingCollector::add_text(std::string_view text, const std::string& source) {
    const std::size_t source_index = sources_.size();
    sources_.push_back(source);
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool seen_header = false;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        const std::string_view line = trim_cr(text.substr(pos, end - pos));
        pos = end + 1;
        ++line_no;
        if (line.empty()) continue;
        if (line == kReadingsHeader) {
            seen_header = true;
            continue;
        }
        if (!seen_header) {
            throw ParseError(source, line_no,
                             "expected header '" + std::string(kReadingsHeader) + "'");
        }
        try {
            MeterReading r = parse_reading_row(line);
            rows_[r.customer_id].push_back({r.timestamp, r.kwh, source_index, line_no});
        } catch (const std::invalid_argument& e) {
            throw ParseError(source, line_no, e.what());
        }
    }
    if (!seen_header) throw ParseError(source, 1, "missing header");
}

ReadingGroups ReadingCollector::finish() {
    ReadingGroups out;
    for (auto& [id, rows] : rows_) {
        std::stable_sort(rows.begin(), rows.end(),
                         [](const Pending& a, const Pending& b) { return a.timestamp < b.timestamp; });
        std::vector<HourlyValue> values;
        values.reserve(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (i > 0 && rows[i].timestamp == rows[i - 1].timestamp) {
                throw ParseError(sources_[rows[i].source_index], rows[i].line,
                                 "duplicate reading for customer " + id + " at " +
                                     format_hour_stamp(rows[i].timestamp));
            }
            values.push_back({rows[i].timestamp, rows[i].kwh});
        }
        out.emplace(id, std::move(values));
    }
    rows_.clear();
    sources_.clear();
    return out;
}

ReadingGroups parse_readings(std::istream& in, const std::string& source) {
    ReadingCollector c;
    c.add(in, source);
    return c.finish();
}

void CleaningRules::validate() const {
    if (!(low_usage_mean_kwh >= 0.0) || !(max_hourly_kwh > low_usage_mean_kwh)) {
        throw std::invalid_argument(
            "cleaning rules require max_hourly_kwh > low_usage_mean_kwh >= 0");
    }
}

std::string CleaningReport::to_json() const {
    nlohmann::ordered_json j;
    j["customers_in"] = customers_in;
    j["entries_in"] = entries_in;
    j["rules"]["max_hourly_kwh"]["entries_removed"] = entries_removed_high_usage;
    j["rules"]["low_usage"]["customers_removed"] = customers_removed_low_usage;
    j["rules"]["continuity"]["customers_removed"] = customers_removed_continuity;
    j["customers_retained"] = customers_retained;
    return j.dump(2);
}

long long longest_gap_hours(std::span<const HourlyValue> readings) {
    long long worst = 0;
    for (std::size_t i = 1; i < readings.size(); ++i) {
        const long long missing = (readings[i].timestamp - readings[i - 1].timestamp).count() - 1;
        worst = std::max(worst, missing);
    }
    return worst;
}

CleaningResult clean_customers(const ReadingGroups& groups, const CleaningRules& rules) {
    rules.validate();
    CleaningResult result;
    CleaningReport& rep = result.report;
    rep.customers_in = groups.size();
    for (const auto& [id, readings] : groups) {
        rep.entries_in += readings.size();
        std::vector<HourlyValue> kept;
        kept.reserve(readings.size());
        double total = 0.0;
        for (const auto& r : readings) {
            if (r.kwh > rules.max_hourly_kwh) {
                ++rep.entries_removed_high_usage;
                continue;
            }
            kept.push_back(r);
            total += r.kwh;
        }
        const double mean = kept.empty() ? 0.0 : total / static_cast<double>(kept.size());
        if (kept.empty() || mean < rules.low_usage_mean_kwh) {
            ++rep.customers_removed_low_usage;
            continue;
        }
        if (rules.require_continuity && longest_gap_hours(kept) >= 24) {
            ++rep.customers_removed_continuity;
            continue;
        }
        result.retained.emplace(id, std::move(kept));
    }
    rep.customers_retained = result.retained.size();
    return result;
}

DailySeries daily_aggregate(const std::string& customer_id, std::span<const HourlyValue> readings) {
    if (readings.empty()) {
        throw std::invalid_argument("daily_aggregate: no readings for customer " + customer_id);
    }
    struct DayAcc {
        Date day;
        double total = 0.0;
        int count = 0;
    };
    std::vector<DayAcc> days;
    for (const auto& r : readings) {
        const Date d = day_of(r.timestamp);
        if (days.empty() || days.back().day != d) {
            if (!days.empty() && d < days.back().day) {
                throw std::invalid_argument("daily_aggregate: readings are not sorted");
            }
            days.push_back({d});
        }
        days.back().total += r.kwh;
        days.back().count += 1;
    }
    std::size_t first = 0, last = days.size();
    while (first < last && days[first].count < 24) ++first;
    while (last > first && days[last - 1].count < 24) --last;
    if (first == last) {
        throw std::invalid_argument("daily_aggregate: customer " + customer_id +
                                    " has no complete day of readings");
    }
    DailySeries out;
    out.customer_id = customer_id;
    out.start_date = days[first].day;
    for (std::size_t i = first; i < last; ++i) {
        const auto expected = out.start_date + std::chrono::days{static_cast<int>(i - first)};
        if (days[i].day != expected) {
            throw std::invalid_argument("daily_aggregate: customer " + customer_id +
                                        " has no readings on " + format_date(expected));
        }
        out.values.push_back(days[i].total / days[i].count);
    }
    return out;
}

}  // namespace jitcast::data
