#include "jitcast/datagen.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <random>
#include <stdexcept>

#include "jitcast/rng.hpp"

namespace jitcast::gen {

namespace {

constexpr double kSpikeFloor = 12.5;

// Box-Muller on the portable uniform source, so streams match across standard libraries.
double standard_normal(Rng& rng) {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string customer_id(std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "C%05zu", index + 1);
    return buf;
}

}  // namespace

void GeneratorConfig::validate() const {
    if (archetypes.empty()) throw std::invalid_argument("generator: no archetypes configured");
    if (n_days < 60) throw std::invalid_argument("generator: n_days must be at least 60");
    if (!(anomaly_rate >= 0.0 && anomaly_rate < 0.1)) {
        throw std::invalid_argument("generator: anomaly_rate must lie in [0, 0.1)");
    }
    for (std::size_t i = 0; i < archetypes.size(); ++i) {
        const auto& a = archetypes[i];
        const std::string where = "generator: archetype " + std::to_string(i) + ": ";
        if (!(a.base_level > 0.0)) throw std::invalid_argument(where + "base_level must be > 0");
        for (double m : a.weekly_profile)
            if (!(m > 0.0)) throw std::invalid_argument(where + "weekly multipliers must be > 0");
        if (!(a.noise_std >= 0.0)) throw std::invalid_argument(where + "noise_std must be >= 0");
        if (a.count == 0) throw std::invalid_argument(where + "count must be >= 1");
    }
}

GeneratorConfig default_scenario(std::uint64_t seed) {
    GeneratorConfig c;
    c.seed = seed;
    // Every pair differs in exactly two of: level, weekly pattern, season phase.
    constexpr std::array<double, 7> weekday_heavy{1.1, 1.1, 1.1, 1.1, 1.1, 0.75, 0.75};
    constexpr std::array<double, 7> weekend_heavy{0.9, 0.9, 0.9, 0.9, 0.9, 1.25, 1.25};
    c.archetypes = {
        {0.4, weekday_heavy, 0.3, 0.02, 0.03, 50},
        {1.0, weekend_heavy, 0.3, 0.00, 0.03, 50},
        {1.0, weekday_heavy, -0.3, 0.03, 0.03, 50},
        {0.4, weekend_heavy, -0.3, -0.01, 0.03, 50},
    };
    return c;
}

const std::array<double, 24>& daily_shape() {
    static const std::array<double, 24> shape = [] {
        std::array<double, 24> s{0.55, 0.5, 0.45, 0.45, 0.5, 0.65, 0.95, 1.3, 1.25, 1.0, 0.9, 0.9,
                                 1.0, 0.95, 0.9, 0.95, 1.1, 1.4, 1.7, 1.8, 1.6, 1.35, 1.0, 0.75};
        double total = 0.0;
        for (double v : s) total += v;
        for (double& v : s) v *= 24.0 / total;
        return s;
    }();
    return shape;
}

GeneratedData generate(const GeneratorConfig& config) {
    config.validate();
    GeneratedData out;
    const auto& shape = daily_shape();
    std::size_t index = 0;
    for (std::size_t a = 0; a < config.archetypes.size(); ++a) {
        const ArchetypeSpec& spec = config.archetypes[a];
        for (std::size_t c = 0; c < spec.count; ++c, ++index) {
            Rng rng(mix_seed(config.seed, index));
            const std::string id = customer_id(index);
            std::vector<data::HourlyValue> rows;
            rows.reserve(config.n_days * 24);
            for (std::size_t d = 0; d < config.n_days; ++d) {
                const Date day = config.start_date + std::chrono::days{static_cast<int>(d)};
                const double season =
                    1.0 + spec.annual_amplitude *
                              std::sin(2.0 * std::numbers::pi * day_of_year(day) / 365.0);
                const double trend = 1.0 + spec.trend_per_year * static_cast<double>(d) / 365.0;
                const double level = spec.base_level * spec.weekly_profile[day_of_week(day)] *
                                     season * trend;
                for (int h = 0; h < 24; ++h) {
                    double kwh = level * shape[h];
                    if (spec.noise_std > 0.0) kwh += spec.noise_std * standard_normal(rng);
                    rows.push_back({HourStamp{day} + std::chrono::hours{h}, std::max(kwh, 0.0)});
                }
            }
            if (config.anomaly_rate > 0.0) {
                if (uniform01(rng) < config.anomaly_rate) {
                    for (int s = 0; s < 3; ++s) {
                        rows[uniform_index(rng, rows.size())].kwh = kSpikeFloor + 5.0 * uniform01(rng);
                    }
                }
                if (uniform01(rng) < config.anomaly_rate) {
                    const std::size_t len = 24 + uniform_index(rng, 24);
                    const std::size_t start = 24 + uniform_index(rng, rows.size() - len - 48);
                    rows.erase(rows.begin() + static_cast<std::ptrdiff_t>(start),
                               rows.begin() + static_cast<std::ptrdiff_t>(start + len));
                }
            }
            out.readings.emplace(id, std::move(rows));
            out.labels.push_back({id, a});
        }
    }
    return out;
}

void write_readings_csv(const data::ReadingGroups& readings, std::ostream& out) {
    out << data::kReadingsHeader << '\n';
    std::string buffer;
    buffer.reserve(1 << 20);
    char line[96];
    for (const auto& [id, rows] : readings) {
        for (const auto& r : rows) {
            const std::string stamp = format_hour_stamp(r.timestamp);
            const int n = std::snprintf(line, sizeof line, "%s,%s,%.4f\n", stamp.c_str(), id.c_str(),
                                        r.kwh);
            buffer.append(line, static_cast<std::size_t>(n));
            if (buffer.size() > (1u << 20) - 128) {
                out << buffer;
                buffer.clear();
            }
        }
    }
    out << buffer;
}

void write_labels_csv(const std::vector<Label>& labels, std::ostream& out) {
    out << "customer_id,archetype\n";
    for (const auto& l : labels) out << l.customer_id << ',' << l.archetype << '\n';
}

}  // namespace jitcast::gen
