#include <doctest.h>

#include <sstream>

#include "jitcast/datagen.hpp"
#include "jitcast/readings.hpp"

using namespace jitcast;

namespace {

gen::GeneratorConfig flat_config() {
    gen::GeneratorConfig c;
    c.n_days = 60;
    c.seed = 7;
    c.archetypes = {{0.8, {1, 1, 1, 1, 1, 1, 1}, 0.0, 0.0, 0.0, 2}};
    return c;
}

}  // namespace

TEST_CASE("noise-free flat archetype repeats every day") {
    const auto data = gen::generate(flat_config());
    for (const auto& [id, rows] : data.readings) {
        REQUIRE(rows.size() == 60 * 24);
        for (std::size_t i = 24; i < rows.size(); ++i) CHECK(rows[i].kwh == rows[i - 24].kwh);
        for (std::size_t h = 0; h < 24; ++h) CHECK(rows[h].kwh == doctest::Approx(0.8 * gen::daily_shape()[h]));
    }
}

TEST_CASE("same seed gives byte-identical CSV") {
    auto cfg = gen::default_scenario(11);
    cfg.n_days = 60;
    cfg.anomaly_rate = 0.05;
    for (auto& a : cfg.archetypes) a.count = 5;
    std::ostringstream a, b, c;
    gen::write_readings_csv(gen::generate(cfg).readings, a);
    gen::write_readings_csv(gen::generate(cfg).readings, b);
    CHECK(a.str() == b.str());
    cfg.seed = 12;
    gen::write_readings_csv(gen::generate(cfg).readings, c);
    CHECK(a.str() != c.str());
}

TEST_CASE("default scenario has 200 customers and labels") {
    auto cfg = gen::default_scenario();
    cfg.n_days = 60;
    const auto data = gen::generate(cfg);
    CHECK(data.readings.size() == 200);
    CHECK(data.labels.size() == 200);
    std::ostringstream labels;
    gen::write_labels_csv(data.labels, labels);
    std::size_t lines = 0;
    for (char ch : labels.str()) lines += ch == '\n';
    CHECK(lines == 201);
    CHECK(data.labels.front().customer_id == "C00001");
    CHECK(data.labels.back().archetype == 3);
}

TEST_CASE("readings are non-negative and spikes clear the cleaning cap") {
    auto cfg = gen::default_scenario(3);
    cfg.n_days = 90;
    cfg.anomaly_rate = 0.09;
    for (auto& a : cfg.archetypes) {
        a.count = 25;
        a.noise_std = 0.5;  // large enough to hit the clip at zero
    }
    const auto data = gen::generate(cfg);
    std::size_t spikes = 0, zeros = 0;
    for (const auto& [id, rows] : data.readings) {
        for (const auto& r : rows) {
            CHECK(r.kwh >= 0.0);
            zeros += r.kwh == 0.0;
            if (r.kwh > 6.0) {
                CHECK(r.kwh > 12.0);
                ++spikes;
            }
        }
    }
    CHECK(spikes > 0);
    CHECK(zeros > 0);

    const auto cleaned = data::clean_customers(data.readings, data::CleaningRules{});
    CHECK(cleaned.report.entries_removed_high_usage == spikes);
    CHECK(cleaned.report.customers_removed_continuity > 0);
}

TEST_CASE("anomaly-free data survives cleaning") {
    auto cfg = gen::default_scenario(5);
    cfg.n_days = 60;
    const auto data = gen::generate(cfg);
    const auto cleaned = data::clean_customers(data.readings, data::CleaningRules{});
    CHECK(cleaned.report.customers_retained == 200);
    CHECK(cleaned.report.entries_removed_high_usage == 0);
}

TEST_CASE("generator config validation") {
    auto cfg = flat_config();
    cfg.n_days = 59;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = flat_config();
    cfg.anomaly_rate = 0.1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = flat_config();
    cfg.archetypes[0].weekly_profile[3] = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = flat_config();
    cfg.archetypes[0].noise_std = -1.0;
    CHECK_THROWS_AS(gen::generate(cfg), std::invalid_argument);
}
