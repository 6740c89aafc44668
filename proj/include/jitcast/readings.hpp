#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "jitcast/date.hpp"

namespace jitcast::data {

/// One CSV row: kWh consumed by a customer in the hour before `timestamp`.
struct MeterReading {
    HourStamp timestamp;
    std::string customer_id;
    double kwh = 0.0;
};

struct HourlyValue {
    HourStamp timestamp;
    double kwh = 0.0;

    friend bool operator==(const HourlyValue&, const HourlyValue&) = default;
};

/// Readings per customer, each sorted by strictly increasing timestamp.
using ReadingGroups = std::map<std::string, std::vector<HourlyValue>>;

inline constexpr std::string_view kReadingsHeader = "Date_Time,customer_id,kWh";

/// Parses one "Date_Time,customer_id,kWh" data row. Throws std::invalid_argument.
MeterReading parse_reading_row(std::string_view line);

/// Accumulates rows from one or more CSV sources, then groups and sorts them.
/// A header line is required at the start of each source and tolerated again
/// mid-stream (concatenated files).
class ReadingCollector {
public:
    void add(std::istream& in, const std::string& source);
    void add_text(std::string_view text, const std::string& source);

    /// Throws ParseError on a duplicate (customer, timestamp).
    ReadingGroups finish();

private:
    struct Pending {
        HourStamp timestamp;
        double kwh;
        std::size_t source_index;
        std::size_t line;
    };
    std::vector<std::string> sources_;
    std::map<std::string, std::vector<Pending>> rows_;
};

ReadingGroups parse_readings(std::istream& in, const std::string& source = "<input>");

struct CleaningRules {
    double max_hourly_kwh = 12.0;
    double low_usage_mean_kwh = 0.05;
    bool require_continuity = true;

    /// Throws std::invalid_argument unless max_hourly_kwh > low_usage_mean_kwh >= 0.
    void validate() const;
};

struct CleaningReport {
    std::size_t customers_in = 0;
    std::size_t entries_in = 0;
    std::size_t entries_removed_high_usage = 0;
    std::size_t customers_removed_low_usage = 0;
    std::size_t customers_removed_continuity = 0;
    std::size_t customers_retained = 0;

    std::string to_json() const;
};

struct CleaningResult {
    ReadingGroups retained;
    CleaningReport report;
};

/// Applies, in order: removal of hourly entries above max_hourly_kwh; removal
/// of customers whose mean hourly kWh is below low_usage_mean_kwh; removal of
/// customers with 24 or more consecutive missing hours between two readings.
CleaningResult clean_customers(const ReadingGroups& groups, const CleaningRules& rules);

/// Longest run of missing hours between consecutive readings.
long long longest_gap_hours(std::span<const HourlyValue> readings);

struct DailySeries {
    std::string customer_id;
    Date start_date;
    std::vector<double> values;

    Date end_date() const { return start_date + std::chrono::days{static_cast<int>(values.size()) - 1}; }
    friend bool operator==(const DailySeries&, const DailySeries&) = default;
};

/// Daily mean of hourly readings. Incomplete days at either end are dropped;
/// interior days average whatever readings they have.
DailySeries daily_aggregate(const std::string& customer_id, std::span<const HourlyValue> readings);

}  // namespace jitcast::data
