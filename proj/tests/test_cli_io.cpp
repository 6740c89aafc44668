#include <doctest.h>

#include <bit>
#include <cstring>
#include <json.hpp>
#include <span>
#include <sstream>

#include "jitcast/checkpoint.hpp"
#include "jitcast/cli.hpp"
#include "jitcast/config.hpp"
#include "jitcast/evaluation.hpp"
#include "support/fixtures.hpp"
#include "support/tempdir.hpp"

using namespace jitcast;
using namespace jitcast::io;
using jitcast::testing::slurp;
using jitcast::testing::smooth_series;
using jitcast::testing::TempDir;
using jitcast::testing::tiny_ensemble_config;
using jitcast::testing::write_text;

namespace {

struct CheckpointFixture {
    jit::JitEnsembleConfig config = tiny_ensemble_config();
    data::DailySeries series = smooth_series(120);
    data::FeatureFrame frame = data::build_feature_frame(series, 0, 80);
    std::vector<train::WindowSample> windows = train::make_windows(frame, config.layout());
    ClusterCheckpoint checkpoint;

    CheckpointFixture() {
        checkpoint.cluster = 2;
        checkpoint.seed = 99;
        checkpoint.ensemble = jit::build_ensemble(config, 17);
        checkpoint.vanilla = model::Transformer::initialize(config.model, 18);
        checkpoint.transforms = frame.transforms;
        checkpoint.series = series;
        checkpoint.centroids = Tensor::from_rows({{0.1, -0.2, 1.0 / 3.0}, {2.5, 1e-300, -7.0}});
        checkpoint.split_fractions = {0.7, 0.2, 0.1};
    }

    std::string bytes() const {
        std::ostringstream out;
        save_checkpoint(checkpoint, out);
        return out.str();
    }
};

bool same_bits(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
    return true;
}

std::size_t header_length(const std::string& bytes) {
    std::uint64_t n;
    std::memcpy(&n, bytes.data() + 8, 8);
    return static_cast<std::size_t>(n);
}

struct CliRun {
    int code;
    std::string out, err;
};

CliRun cli(std::vector<std::string> args, const char* env_seed = nullptr) {
    args.insert(args.begin(), "jitcast");
    std::ostringstream out, err;
    const int code = run_cli(args, out, err, env_seed);
    return {code, out.str(), err.str()};
}

// Two archetypes, three customers each, small cascade: a full pipeline in seconds.
constexpr const char* kTinyConfig = R"(# tiny
seed = 5
gen.n_days = 200
archetype.0.base_level = 0.4
archetype.0.weekly_profile = 1.1,1.1,1.1,1.1,1.1,0.75,0.75
archetype.0.noise_std = 0.02
archetype.0.count = 3
archetype.1.base_level = 1.2
archetype.1.weekly_profile = 0.9,0.9,0.9,0.9,0.9,1.25,1.25
archetype.1.noise_std = 0.02
archetype.1.count = 3
cluster.k_max = 4
model.d_model = 4
model.n_heads = 2
model.d_ff = 8
model.n_encoder_layers = 1
model.n_decoder_layers = 1
model.residual_output = true
train.epochs = 1
train.batch_size = 16
train.learning_rate = 0.001
)";

std::size_t count_lines(const std::string& text) {
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST_SUITE("cli-io") {
    TEST_CASE("checkpoint round trip reproduces parameters and forecasts bit for bit") {
        CheckpointFixture f;
        const auto loaded = load_checkpoint_bytes(f.bytes());
        CHECK(loaded.cluster == 2);
        CHECK(loaded.seed == 99);
        CHECK(loaded.ensemble.config == f.config);
        REQUIRE(loaded.ensemble.stages.size() == 7);
        for (std::size_t j = 0; j < 7; ++j) CHECK(loaded.ensemble.stages[j] == f.checkpoint.ensemble.stages[j]);
        REQUIRE(loaded.vanilla.has_value());
        CHECK(*loaded.vanilla == *f.checkpoint.vanilla);
        CHECK(loaded.transforms == f.checkpoint.transforms);
        CHECK(loaded.series == f.series);
        CHECK(same_bits(loaded.centroids.values(), f.checkpoint.centroids.values()));
        CHECK(loaded.split_fractions == f.checkpoint.split_fractions);

        for (const auto& w : f.windows) {
            const auto before = jit::cascade_predict(f.checkpoint.ensemble, w.encoder, w.observed, w.last_observed,
                                                     f.checkpoint.transforms);
            const auto after = jit::cascade_predict(loaded.ensemble, w.encoder, w.observed, w.last_observed,
                                                    loaded.transforms);
            CHECK(same_bits(before.final_kwh, after.final_kwh));
            CHECK(same_bits(before.final_scaled, after.final_scaled));
        }
        // Saving the loaded state gives the same bytes.
        std::ostringstream again;
        save_checkpoint(loaded, again);
        CHECK(again.str() == f.bytes());
    }

    TEST_CASE("checkpoint without baseline or centroids") {
        CheckpointFixture f;
        f.checkpoint.vanilla.reset();
        f.checkpoint.centroids = Tensor{};
        const auto loaded = load_checkpoint_bytes(f.bytes());
        CHECK_FALSE(loaded.vanilla.has_value());
        CHECK(loaded.centroids.empty());
    }

    TEST_CASE("checkpoint file save is atomic and loadable") {
        CheckpointFixture f;
        TempDir dir("ckpt");
        const auto path = dir / "m.ckpt";
        save_checkpoint(f.checkpoint, path);
        CHECK_FALSE(std::filesystem::exists(dir / "m.ckpt.tmp"));
        CHECK(slurp(path) == f.bytes());
        CHECK(load_checkpoint(path).ensemble.stages[3] == f.checkpoint.ensemble.stages[3]);
        CHECK_THROWS_AS(load_checkpoint(dir / "absent.ckpt"), std::runtime_error);
    }

    TEST_CASE("truncated checkpoints raise the truncation error") {
        CheckpointFixture f;
        const std::string bytes = f.bytes();
        const std::size_t header_end = 16 + header_length(bytes);
        for (std::size_t cut : {std::size_t{12}, std::size_t{16}, header_end - 1, header_end, header_end + 7,
                                bytes.size() - 1}) {
            CAPTURE(cut);
            CHECK_THROWS_AS(load_checkpoint_bytes(bytes.substr(0, cut)), TruncatedCheckpointError);
        }
    }

    TEST_CASE("a bumped format version is rejected explicitly") {
        CheckpointFixture f;
        std::string bytes = f.bytes();
        const auto pos = bytes.find("\"format_version\":1");
        REQUIRE(pos != std::string::npos);
        bytes[pos + std::strlen("\"format_version\":")] = '2';
        CHECK_THROWS_AS(load_checkpoint_bytes(bytes), VersionMismatchError);
        try {
            load_checkpoint_bytes(bytes);
        } catch (const VersionMismatchError& e) {
            CHECK(std::string(e.what()).find("format_version 2") != std::string::npos);
        }
    }

    TEST_CASE("corrupt headers and blocks are distinguished from truncation") {
        CheckpointFixture f;
        const std::string good = f.bytes();
        std::string bad_magic = good;
        bad_magic[0] = 'X';
        CHECK_THROWS_AS(load_checkpoint_bytes(bad_magic), CorruptHeaderError);

        std::string bad_json = good;
        bad_json[16] = '[';
        CHECK_THROWS_AS(load_checkpoint_bytes(bad_json), CorruptHeaderError);

        std::string flipped = good;
        flipped[good.size() - 3] ^= 0x10;
        CHECK_THROWS_AS(load_checkpoint_bytes(flipped), CorruptHeaderError);

        CHECK_THROWS_AS(load_checkpoint_bytes(good + "x"), CorruptHeaderError);
        CHECK_THROWS_AS(load_checkpoint_bytes("short"), CorruptHeaderError);

        // All three kinds share a base class.
        CHECK_THROWS_AS(load_checkpoint_bytes(good.substr(0, 20)), CheckpointError);
    }

    TEST_CASE("forecast_from_checkpoint matches the window forecast") {
        CheckpointFixture f;
        f.checkpoint.transforms = f.frame.transforms;
        for (std::size_t i : {std::size_t{0}, f.windows.size() / 2, f.windows.size() - 1}) {
            const auto& w = f.windows[i];
            const auto expected = jit::cascade_predict(f.checkpoint.ensemble, w.encoder, w.observed,
                                                       w.last_observed, f.checkpoint.transforms);
            const auto got = forecast_from_checkpoint(f.checkpoint, w.last_observed + std::chrono::days{1});
            CHECK(same_bits(expected.final_kwh, got.result.final_kwh));
            REQUIRE(got.dates.size() == 7);
            CHECK(got.dates.front() == w.last_observed + std::chrono::days{1});
            CHECK(got.dates.back() == w.last_observed + std::chrono::days{7});
        }
        // The series end is the latest usable origin; one day earlier than the
        // first full window is too early.
        CHECK_NOTHROW(forecast_from_checkpoint(f.checkpoint, f.series.end_date() + std::chrono::days{1}));
        CHECK_THROWS_AS(forecast_from_checkpoint(f.checkpoint, f.series.end_date() + std::chrono::days{2}),
                        std::invalid_argument);
        CHECK_THROWS_AS(forecast_from_checkpoint(f.checkpoint, f.windows[0].last_observed), std::invalid_argument);
    }

    TEST_CASE("run config parsing") {
        std::istringstream in("# comment\nseed = 9  # trailing\n\nmodel.d_model = 16\ntrain.vanilla = false\n"
                              "grid.learning_rate = 0.001, 0.01\n");
        const auto c = parse_run_config(in);
        CHECK(c.seed == 9);
        CHECK(c.generator_config().seed == 9);
        CHECK(c.train_config().seed == 9);
        CHECK(c.kmeans_options().seed == 9);
        CHECK(c.ensemble.model.d_model == 16);
        CHECK_FALSE(c.train_vanilla);
        CHECK(c.grid.learning_rate == std::vector<double>{0.001, 0.01});
        CHECK(c.grid.enabled());
        // Untouched keys keep their defaults.
        CHECK(c.training.epochs == 150);
        CHECK(c.ensemble.n_models == 7);
        CHECK(c.generator.archetypes.size() == 4);
    }

    TEST_CASE("run config errors name the line") {
        auto error_of = [](const std::string& text) {
            std::istringstream in(text);
            try {
                parse_run_config(in, "f.cfg");
            } catch (const ConfigError& e) {
                return std::string(e.what());
            }
            return std::string("no error");
        };
        CHECK(error_of("seed = 1\nmodel.dmodel = 4\n").find("f.cfg:2: unknown key 'model.dmodel'") == 0);
        CHECK(error_of("seed = 1\nseed = 2\n").find("duplicate key") != std::string::npos);
        CHECK(error_of("train.epochs = ten\n").find("f.cfg:1:") == 0);
        CHECK(error_of("model.residual_output = yes\n").find("true or false") != std::string::npos);
        CHECK(error_of("just words\n").find("expected key = value") != std::string::npos);
        CHECK(error_of("model.n_heads = 3\n") != "no error");
        CHECK(error_of("train.learning_rate = nan\n") != "no error");
        CHECK(error_of("archetype.0.count = 2\narchetype.2.count = 2\n").find("archetype indices") != std::string::npos);
        CHECK(error_of("archetype.0.weekly_profile = 1,1\n").find("7 values") != std::string::npos);
        CHECK(error_of("archetype.0.colour = 1\n").find("unknown key") != std::string::npos);
    }

    TEST_CASE("formatted run config parses back to the same document") {
        std::istringstream in(kTinyConfig);
        const auto c = parse_run_config(in);
        CHECK(c.generator.archetypes.size() == 2);
        CHECK(c.generator.archetypes[1].base_level == 1.2);
        CHECK(c.generator.archetypes[1].weekly_profile[6] == 1.25);
        const auto text = format_run_config(c);
        std::istringstream again(text);
        CHECK(format_run_config(parse_run_config(again)) == text);
    }

    TEST_CASE("seed precedence: flag, environment, config") {
        CHECK(resolve_seed(1, nullptr, std::nullopt) == 1);
        CHECK(resolve_seed(1, "", std::nullopt) == 1);
        CHECK(resolve_seed(1, "2", std::nullopt) == 2);
        CHECK(resolve_seed(1, "2", 3) == 3);
        CHECK_THROWS_AS(resolve_seed(1, "-4", std::nullopt), ConfigError);
    }

    TEST_CASE("usage errors exit 2 with usage text") {
        auto none = cli({});
        CHECK(none.code == 2);
        CHECK(none.err.find("generate") != std::string::npos);

        auto unknown = cli({"forecast"});
        CHECK(unknown.code == 2);

        TempDir dir("cli_usage");
        auto missing_config = cli({"generate", "--out", dir.path().string()});
        CHECK(missing_config.code == 2);
        CHECK(missing_config.err.find("--config") != std::string::npos);
        CHECK(missing_config.err.find("Usage") != std::string::npos);

        write_text(dir / "c.cfg", "seed = 1\n");
        auto unknown_flag = cli({"generate", "--config", (dir / "c.cfg").string(), "--colour", "red"});
        CHECK(unknown_flag.code == 2);
        auto bad_seed = cli({"generate", "--config", (dir / "c.cfg").string(), "--seed", "x"});
        CHECK(bad_seed.code == 2);

        auto predict_missing = cli({"predict", "--checkpoint", "m.ckpt"});
        CHECK(predict_missing.code == 2);

        auto help = cli({"--help"});
        CHECK(help.code == 0);
        CHECK(help.out.find("predict") != std::string::npos);
    }

    TEST_CASE("runtime errors exit 1 with one line and create nothing") {
        TempDir dir("cli_fail");
        const auto out = dir / "out";
        write_text(dir / "bad.cfg", "seed = 1\nnot.a.key = 3\n");
        auto bad = cli({"generate", "--config", (dir / "bad.cfg").string(), "--out", out.string()});
        CHECK(bad.code == 1);
        CHECK(count_lines(bad.err) == 1);
        CHECK(bad.err.find("not.a.key") != std::string::npos);
        CHECK_FALSE(std::filesystem::exists(out));

        write_text(dir / "ok.cfg", kTinyConfig);
        for (const char* cmd : {"ingest", "cluster", "preprocess", "train", "evaluate", "report"}) {
            CAPTURE(cmd);
            auto r = cli({cmd, "--config", (dir / "ok.cfg").string(), "--out", out.string()});
            CHECK(r.code == 1);
            CHECK(count_lines(r.err) == 1);
            CHECK_FALSE(std::filesystem::exists(out));
        }
        auto p = cli({"predict", "--checkpoint", (dir / "none.ckpt").string(), "--horizon-date", "2020-01-01"});
        CHECK(p.code == 1);

        // A malformed input file fails validation before anything is written.
        std::filesystem::create_directories(dir / "in");
        write_text(dir / "in" / "cluster_series.csv", "cluster,date,kwh\n0,2020-01-01,1.0\n0,2020-01-03,1.0\n");
        auto gap = cli({"preprocess", "--config", (dir / "ok.cfg").string(), "--data", (dir / "in").string(),
                        "--out", out.string()});
        CHECK(gap.code == 1);
        CHECK(gap.err.find("consecutive") != std::string::npos);
        CHECK_FALSE(std::filesystem::exists(out));
    }

    TEST_CASE("end-to-end pipeline is reproducible") {
        TempDir dir("cli_e2e");
        write_text(dir / "tiny.cfg", kTinyConfig);
        const auto cfg = (dir / "tiny.cfg").string();
        auto pipeline = [&](const std::filesystem::path& out, const char* env) {
            for (const char* cmd : {"generate", "ingest", "cluster", "preprocess", "train", "evaluate", "report"}) {
                CAPTURE(cmd);
                const auto r = cli({cmd, "--config", cfg, "--out", out.string()}, env);
                REQUIRE(r.code == 0);
            }
        };
        const auto a = dir / "a", b = dir / "b";
        pipeline(a, nullptr);
        pipeline(b, nullptr);
        CHECK(slurp(a / "metrics.csv") == slurp(b / "metrics.csv"));
        CHECK(slurp(a / "predictions.csv") == slurp(b / "predictions.csv"));
        CHECK(slurp(a / "models" / "cluster_0.ckpt") == slurp(b / "models" / "cluster_0.ckpt"));

        const auto model = nlohmann::json::parse(slurp(a / "cluster_model.json"));
        const std::size_t k = model.at("k");
        CHECK(k == 2);
        CHECK(model.at("adjusted_rand_index").get<double>() == doctest::Approx(1.0));

        // Report shape: k_max elbow rows, one MAE row per (cluster, model, lead day).
        CHECK(count_lines(slurp(a / "report" / "elbow.csv")) == 1 + 4);
        CHECK(count_lines(slurp(a / "report" / "mae_by_lead_day.csv")) == 1 + k * 3 * 7);
        CHECK(slurp(a / "report" / "mae_by_lead_day.csv") == slurp(a / "metrics.csv"));
        const auto summary = slurp(a / "report" / "summary.json");
        REQUIRE(cli({"report", "--config", cfg, "--out", a.string()}).code == 0);
        CHECK(slurp(a / "report" / "summary.json") == summary);

        // metrics.csv agrees with the predictions export.
        const auto metrics = slurp(a / "metrics.csv");
        CHECK(metrics.rfind("cluster,model,lead_day,mae_kwh,n_windows\n", 0) == 0);

        // predict: seven dated rows starting at the horizon date.
        const auto last = std::string(slurp(a / "cluster_series.csv"));
        const auto last_line = last.substr(last.rfind('\n', last.size() - 2) + 1);
        const Date end = parse_date(last_line.substr(last_line.find(',') + 1, 10));
        const auto horizon = format_date(end + std::chrono::days{1});
        auto p = cli({"predict", "--checkpoint", (a / "models" / "cluster_1.ckpt").string(), "--horizon-date", horizon,
                      "--stage-log", (a / "stages.csv").string()});
        REQUIRE(p.code == 0);
        CHECK(count_lines(p.out) == 8);
        CHECK(p.out.rfind("date,lead_day,kwh\n" + horizon + ",1,", 0) == 0);
        // Stage i retains i predictions: 1 + 2 + ... + 7.
        CHECK(count_lines(slurp(a / "stages.csv")) == 1 + 28);

        // The environment seed changes the data; the flag beats the environment.
        const auto c = dir / "c", d = dir / "d";
        REQUIRE(cli({"generate", "--config", cfg, "--out", c.string()}, "11").code == 0);
        REQUIRE(cli({"generate", "--config", cfg, "--out", d.string(), "--seed", "11"}, "12").code == 0);
        CHECK(slurp(c / "readings.csv") == slurp(d / "readings.csv"));
        CHECK(slurp(c / "readings.csv") != slurp(a / "readings.csv"));
        CHECK(slurp(c / "run.cfg").find("seed = 11\n") == 0);
    }
}
