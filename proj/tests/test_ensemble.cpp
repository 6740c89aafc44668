#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "jitcast/ensemble.hpp"
#include "jitcast/errors.hpp"
#include "jitcast/evaluation.hpp"
#include "support/fixtures.hpp"

using namespace jitcast;
using namespace jitcast::jit;
using jitcast::testing::smooth_series;
using jitcast::testing::tiny_ensemble_config;

namespace {

struct Fixture {
    JitEnsembleConfig config = tiny_ensemble_config();
    data::FeatureFrame frame = data::build_feature_frame(smooth_series(120), 0, 80);
    std::vector<train::WindowSample> windows = train::make_windows(frame, config.layout());
};

// window_id -> stage -> offset -> value, parsed back from the exported log.
using ParsedLog = std::map<std::size_t, std::map<std::size_t, std::map<std::size_t, double>>>;

ParsedLog parse_log(const std::string& text) {
    ParsedLog log;
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    CHECK(line == "window_id,stage,offset,value");
    while (std::getline(in, line)) {
        std::size_t w, j, k;
        char c1, c2, c3;
        std::istringstream row(line);
        row >> w >> c1 >> j >> c2 >> k >> c3;
        std::string value;
        row >> value;
        log[w][j][k] = std::stod(value);
    }
    return log;
}

}  // namespace

TEST_CASE("build_ensemble") {
    JitEnsembleConfig cfg;
    cfg.model.d_model = 8;
    cfg.model.d_ff = 8;
    const auto e = build_ensemble(cfg, 5);
    REQUIRE(e.stages.size() == 7);
    for (std::size_t j = 1; j <= 7; ++j) CHECK(cfg.decoder_len(j) == 6 + j);
    CHECK(build_ensemble(cfg, 5).stages == e.stages);
    CHECK_FALSE(e.stages[0] == e.stages[1]);
    cfg.n_models = 1;
    CHECK(build_ensemble(cfg, 5).stages.size() == 1);
    cfg.n_models = 0;
    CHECK_THROWS_AS(build_ensemble(cfg, 5), std::invalid_argument);
}

TEST_CASE("average_predictions examples") {
    CascadeState s(7);
    s.record_stage(std::vector<double>{10.0});
    CHECK(s.average_predictions(2, 1) == 10.0);
    s.record_stage(std::vector<double>{12.0, 8.0});
    CHECK(s.average_predictions(3, 1) == 11.0);
    s.record_stage(std::vector<double>{0.5, 10.0, 3.0});
    CHECK(s.average_predictions(4, 2) == 9.0);
    CHECK(s.average_predictions(4, 1) == doctest::Approx((10.0 + 12.0 + 0.5) / 3.0).epsilon(1e-15));
    CHECK_THROWS_AS(s.average_predictions(3, 3), std::out_of_range);
    CHECK_THROWS_AS(s.average_predictions(5, 1), std::out_of_range);
    CHECK_THROWS_AS(s.average_predictions(2, 0), std::out_of_range);
    CHECK_THROWS_AS(s.record_stage(std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("decoder_input_for grows by one forecast row per stage") {
    Fixture f;
    const auto& w = f.windows[3];
    const auto& tr = f.frame.transforms;
    CascadeState s(7);
    const Tensor d1 = decoder_input_for(1, w.observed, s, w.last_observed, tr);
    CHECK(d1 == w.observed);
    s.record_stage(std::vector<double>{0.25});
    const Tensor d2 = decoder_input_for(2, w.observed, s, w.last_observed, tr);
    REQUIRE(d2.rows() == 8);
    CHECK(d2(7, 0) == 0.25);
    const auto expect = tr.model_row_from_scaled(0.25, w.last_observed + std::chrono::days{1});
    CHECK(d2(7, 1) == expect[1]);
    CHECK(d2(7, 2) == expect[2]);
    s.record_stage(std::vector<double>{0.75, -0.5});
    const Tensor d3 = decoder_input_for(3, w.observed, s, w.last_observed, tr);
    REQUIRE(d3.rows() == 9);
    CHECK(d3(7, 0) == 0.5);
    CHECK(d3(8, 0) == -0.5);
    CHECK_THROWS_AS(decoder_input_for(4, w.observed, s, w.last_observed, tr), std::out_of_range);
}

TEST_CASE("cascade structure and the averaging oracle") {
    Fixture f;
    const auto e = build_ensemble(f.config, 11);
    std::ostringstream log;
    write_prediction_log_header(log);
    std::vector<ForecastResult> results;
    for (std::size_t w = 0; w < 4; ++w) {
        const auto& win = f.windows[w * 7];
        results.push_back(cascade_predict(e, win.encoder, win.observed, win.last_observed, f.frame.transforms));
        write_prediction_log(log, w, results.back());
    }
    const auto parsed = parse_log(log.str());
    for (std::size_t w = 0; w < results.size(); ++w) {
        const auto& r = results[w];
        REQUIRE(r.stage_outputs.size() == 7);
        for (std::size_t j = 1; j <= 7; ++j) {
            CHECK(r.stage_outputs[j - 1].size() == 6 + j);
            CHECK(parsed.at(w).at(j).size() == j);
        }
        CHECK(r.final_scaled.size() == 7);
        CHECK(r.final_kwh.size() == 7);
        for (std::size_t k = 1; k <= 7; ++k) CHECK(r.state.history(k).size() == 8 - k);
        CHECK(r.final_scaled[6] == parsed.at(w).at(7).at(7));
        for (std::size_t j = 2; j <= 8; ++j) {
            for (std::size_t k = 1; k < j; ++k) {
                double brute = 0.0;
                for (std::size_t i = k; i < j; ++i) brute += parsed.at(w).at(i).at(k);
                brute /= static_cast<double>(j - k);
                CHECK(std::abs(r.state.average_predictions(j, k) - brute) <= 1e-12);
            }
        }
        for (std::size_t k = 1; k <= 7; ++k)
            CHECK(r.final_kwh[k - 1] == f.frame.transforms.sma7.inverse(r.final_scaled[k - 1]));
    }
    const auto& win = f.windows[0];
    const auto again = cascade_predict(e, win.encoder, win.observed, win.last_observed, f.frame.transforms);
    CHECK(again.final_scaled == results[0].final_scaled);
    CHECK(again.stage_outputs == results[0].stage_outputs);
}

TEST_CASE("single-stage cascade is a plain one-day transformer") {
    Fixture f;
    f.config.n_models = 1;
    const auto e = build_ensemble(f.config, 3);
    const auto& win = f.windows[5];
    const auto r = cascade_predict(e, win.encoder, win.observed, win.last_observed, f.frame.transforms);
    REQUIRE(r.final_scaled.size() == 1);
    const auto plain = e.stages[0].predict(win.encoder, win.observed);
    CHECK(r.final_scaled[0] == plain[6]);

    // The same weights run as the 13-row baseline agree at offset 1 only.
    const auto vanilla =
        eval::vanilla_forecast(e.stages[0], win.encoder, win.observed, 7, win.last_observed, f.frame.transforms);
    CHECK(vanilla.size() == 7);
    CHECK(vanilla[0] == r.final_scaled[0]);
    CHECK(vanilla[1] != r.final_scaled[0]);
}

TEST_CASE("non-finite stage output names the stage") {
    Fixture f;
    auto e = build_ensemble(f.config, 3);
    auto& p = e.stages[2].parameters();
    p[p.index_of("head.b")].value.fill(std::numeric_limits<double>::infinity());
    const auto& win = f.windows[0];
    try {
        cascade_predict(e, win.encoder, win.observed, win.last_observed, f.frame.transforms);
        FAIL("expected NumericError");
    } catch (const NumericError& err) {
        CHECK(std::string(err.what()).find("stage 3") != std::string::npos);
    }
}

TEST_CASE("cascade trainer enforces order and feeds frozen predictions forward") {
    Fixture f;
    auto e = build_ensemble(f.config, 21);
    std::span<const train::WindowSample> all(f.windows);
    CascadeTrainer trainer(e, all.subspan(0, 12), all.subspan(40, 4), f.frame.transforms);
    trainer.enable_input_log(true);
    train::TrainConfig tc;
    tc.epochs = 30;
    tc.batch_size = 4;
    tc.learning_rate = 3e-3;
    CHECK_THROWS_AS(trainer.train_stage(2, tc), std::logic_error);

    const auto h1 = trainer.train_stage(1, tc);
    CHECK(h1.train_loss.size() == 30);
    CHECK(h1.train_loss.back() < h1.train_loss.front());
    const auto stage1 = e.stages[0];

    const auto h2 = trainer.train_stage(2, tc);
    CHECK(h2.train_loss.back() < h2.train_loss.front());
    CHECK(e.stages[0] == stage1);
    std::size_t audited = 0;
    for (const auto& entry : trainer.input_log()) {
        if (entry.stage != 2) continue;
        const auto& win = f.windows[entry.window];
        REQUIRE(entry.decoder_input.rows() == 8);
        const double predicted = stage1.predict(win.encoder, win.observed)[6];
        CHECK(entry.decoder_input(7, 0) == predicted);
        CHECK(entry.decoder_input(7, 0) != win.target_at(1, 7));
        ++audited;
    }
    CHECK(audited == 12);
    CHECK(trainer.next_stage() == 3);
}
