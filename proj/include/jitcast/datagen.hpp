#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "jitcast/date.hpp"
#include "jitcast/readings.hpp"

namespace jitcast::gen {

/// One behavioural archetype. Hourly consumption for day d, hour h is
///   base_level * weekly_profile[dow] * (1 + annual_amplitude * sin(2*pi*doy/365))
///     * (1 + trend_per_year * years_since_start) * daily_shape[h] + N(0, noise_std)
/// clipped at zero.
struct ArchetypeSpec {
    double base_level = 1.0;
    std::array<double, 7> weekly_profile{1, 1, 1, 1, 1, 1, 1};
    double annual_amplitude = 0.0;
    double trend_per_year = 0.0;
    double noise_std = 0.0;
    std::size_t count = 1;
};

/// anomaly_rate is the per-customer probability of each injected anomaly kind:
/// a handful of hourly spikes above 12 kWh, and a gap of at least 24 missing hours.
struct GeneratorConfig {
    std::vector<ArchetypeSpec> archetypes;
    Date start_date = make_date(2019, 12, 1);
    std::size_t n_days = 730;
    std::uint64_t seed = 42;
    double anomaly_rate = 0.0;

    /// Throws std::invalid_argument on a violated invariant.
    void validate() const;
};

/// Four well-separated archetypes, 50 customers each, 730 days.
GeneratorConfig default_scenario(std::uint64_t seed = 42);

/// Normalised intra-day shape (mean 1) shared by every archetype.
const std::array<double, 24>& daily_shape();

struct Label {
    std::string customer_id;
    std::size_t archetype = 0;
};

struct GeneratedData {
    data::ReadingGroups readings;
    std::vector<Label> labels;  // in customer order
};

GeneratedData generate(const GeneratorConfig& config);

/// Writes "Date_Time,customer_id,kWh" rows, customer by customer.
void write_readings_csv(const data::ReadingGroups& readings, std::ostream& out);
void write_labels_csv(const std::vector<Label>& labels, std::ostream& out);

}  // namespace jitcast::gen
