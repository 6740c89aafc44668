#include "jitcast/cli.hpp"

#include <CLI11.hpp>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <optional>
#include <sstream>

#include "jitcast/checkpoint.hpp"
#include "jitcast/clustering.hpp"
#include "jitcast/config.hpp"
#include "jitcast/datagen.hpp"
#include "jitcast/errors.hpp"
#include "jitcast/evaluation.hpp"
#include "jitcast/rng.hpp"

namespace jitcast::io {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

constexpr const char* kDailyHeader = "customer_id,date,kwh";
constexpr const char* kClusterSeriesHeader = "cluster,date,kwh";
constexpr const char* kElbowHeader = "k,inertia";
constexpr const char* kMetricsHeader = "cluster,model,lead_day,mae_kwh,n_windows";
constexpr const char* kPredictionsHeader = "cluster,window_id,lead_day,y_true,y_pred,model";

// ---------------------------------------------------------------- files

/// Outputs are staged in memory and written only after the whole command has
/// succeeded, so a failing command leaves no partial artifacts.
class Outputs {
public:
    void add(fs::path path, std::string contents) { files_.emplace_back(std::move(path), std::move(contents)); }

    void commit() const {
        for (const auto& [path, contents] : files_) {
            if (path.has_parent_path()) fs::create_directories(path.parent_path());
            auto tmp = path;
            tmp += ".tmp";
            {
                std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
                f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
                if (!f) throw std::runtime_error("cannot write " + path.string());
            }
            fs::rename(tmp, path);
        }
    }

    const std::vector<std::pair<fs::path, std::string>>& files() const { return files_; }

private:
    std::vector<std::pair<fs::path, std::string>> files_;
};

std::string read_file(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::vector<std::string> split_fields(std::string_view line) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        const auto comma = line.find(',', pos);
        out.emplace_back(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

struct CsvRow {
    std::size_t line = 0;
    std::vector<std::string> fields;
};

std::vector<CsvRow> read_csv(const fs::path& path, std::string_view header) {
    std::istringstream in(read_file(path));
    std::string line;
    std::getline(in, line);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != header) throw ParseError(path.string(), 1, "expected header '" + std::string(header) + "'");
    const std::size_t columns = split_fields(header).size();
    std::vector<CsvRow> rows;
    std::size_t n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_fields(line);
        if (fields.size() != columns) {
            throw ParseError(path.string(), n,
                             "expected " + std::to_string(columns) + " fields, got " + std::to_string(fields.size()));
        }
        rows.push_back({n, std::move(fields)});
    }
    return rows;
}

double real_field(const fs::path& path, const CsvRow& row, std::size_t i) {
    const auto& t = row.fields[i];
    double v = 0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || p != t.data() + t.size() || t.empty() || !std::isfinite(v))
        throw ParseError(path.string(), row.line, "bad number '" + t + "'");
    return v;
}

long long int_field(const fs::path& path, const CsvRow& row, std::size_t i) {
    const auto& t = row.fields[i];
    long long v = 0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || p != t.data() + t.size() || t.empty())
        throw ParseError(path.string(), row.line, "bad integer '" + t + "'");
    return v;
}

Date date_field(const fs::path& path, const CsvRow& row, std::size_t i) {
    try {
        return parse_date(row.fields[i]);
    } catch (const std::exception& e) {
        throw ParseError(path.string(), row.line, e.what());
    }
}

/// Rows grouped by key (in first-appearance order) into gap-free daily series.
template <class Key, class KeyOf>
std::vector<std::pair<Key, data::DailySeries>> read_daily(const fs::path& path, std::string_view header, KeyOf key_of) {
    std::vector<std::pair<Key, data::DailySeries>> out;
    for (const auto& row : read_csv(path, header)) {
        const Key key = key_of(row);
        const Date day = date_field(path, row, 1);
        const double kwh = real_field(path, row, 2);
        if (out.empty() || out.back().first != key) {
            for (const auto& [k, s] : out)
                if (k == key) throw ParseError(path.string(), row.line, "rows for one series must be contiguous");
            out.push_back({key, data::DailySeries{row.fields[0], day, {}}});
        } else if (day != out.back().second.end_date() + std::chrono::days{1}) {
            throw ParseError(path.string(), row.line, "dates must be consecutive within a series");
        }
        out.back().second.values.push_back(kwh);
    }
    if (out.empty()) throw ParseError(path.string(), 1, "no data rows");
    return out;
}

std::string daily_csv(const std::vector<data::DailySeries>& series) {
    std::ostringstream out;
    out << kDailyHeader << '\n';
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.values.size(); ++i)
            out << s.customer_id << ',' << format_date(s.start_date + std::chrono::days{static_cast<int>(i)}) << ','
                << eval::format_double(s.values[i]) << '\n';
    return out.str();
}

std::vector<data::DailySeries> read_daily_csv(const fs::path& path) {
    std::vector<data::DailySeries> out;
    for (auto& [id, s] : read_daily<std::string>(path, kDailyHeader, [](const CsvRow& r) { return r.fields[0]; }))
        out.push_back(std::move(s));
    return out;
}

/// Cluster-average series indexed by cluster id 0..k-1.
std::vector<data::DailySeries> read_cluster_series(const fs::path& path) {
    auto groups = read_daily<long long>(path, kClusterSeriesHeader,
                                        [&](const CsvRow& r) { return int_field(path, r, 0); });
    std::vector<data::DailySeries> out;
    for (std::size_t c = 0; c < groups.size(); ++c) {
        if (groups[c].first != static_cast<long long>(c))
            throw ParseError(path.string(), 2, "cluster ids must run 0..k-1 in order");
        groups[c].second.customer_id = "cluster" + std::to_string(c);
        out.push_back(std::move(groups[c].second));
    }
    return out;
}

std::string checkpoint_name(std::size_t cluster) { return "cluster_" + std::to_string(cluster) + ".ckpt"; }

std::string one_line(std::string s) {
    for (auto& ch : s)
        if (ch == '\n' || ch == '\r') ch = ' ';
    return s;
}

// ---------------------------------------------------------------- commands

struct Context {
    RunConfig config;
    fs::path out_dir;
    fs::path data_dir;
    std::ostream& out;
    std::ostream& log;
};

struct Ingested {
    std::vector<data::DailySeries> series;
    data::CleaningReport report;
};

Ingested ingest_readings(const std::vector<fs::path>& inputs, const data::CleaningRules& rules) {
    data::ReadingCollector collector;
    for (const auto& path : inputs) {
        std::ifstream f(path);
        if (!f) throw std::runtime_error("cannot read " + path.string());
        collector.add(f, path.string());
    }
    auto cleaned = data::clean_customers(collector.finish(), rules);
    Ingested out;
    out.report = cleaned.report;
    for (const auto& [id, readings] : cleaned.retained) {
        auto s = data::daily_aggregate(id, readings);
        if (!s.values.empty()) out.series.push_back(std::move(s));
    }
    if (out.series.empty()) throw std::runtime_error("no customer survived cleaning");
    return out;
}

void cmd_generate(Context& ctx, Outputs& outputs) {
    const auto data = gen::generate(ctx.config.generator_config());
    std::ostringstream readings, labels;
    gen::write_readings_csv(data.readings, readings);
    gen::write_labels_csv(data.labels, labels);
    outputs.add(ctx.out_dir / "readings.csv", readings.str());
    outputs.add(ctx.out_dir / "labels.csv", labels.str());
    outputs.add(ctx.out_dir / "run.cfg", format_run_config(ctx.config));
    ctx.log << "generate: " << data.labels.size() << " customers, " << ctx.config.generator.n_days << " days\n";
}

std::vector<fs::path> reading_inputs(const Context& ctx, const std::vector<std::string>& explicit_inputs) {
    std::vector<fs::path> inputs(explicit_inputs.begin(), explicit_inputs.end());
    if (inputs.empty()) inputs.push_back(ctx.data_dir / "readings.csv");
    return inputs;
}

void stage_ingest(const Context& ctx, const Ingested& ingested, Outputs& outputs) {
    outputs.add(ctx.out_dir / "daily.csv", daily_csv(ingested.series));
    outputs.add(ctx.out_dir / "cleaning_report.json", ingested.report.to_json() + "\n");
}

void cmd_ingest(Context& ctx, Outputs& outputs, const std::vector<std::string>& inputs) {
    const auto ingested = ingest_readings(reading_inputs(ctx, inputs), ctx.config.cleaning);
    stage_ingest(ctx, ingested, outputs);
    ctx.log << "ingest: " << ingested.report.customers_retained << " of " << ingested.report.customers_in
            << " customers retained\n";
}

void cmd_cluster(Context& ctx, Outputs& outputs) {
    std::vector<data::DailySeries> series;
    if (fs::exists(ctx.data_dir / "daily.csv")) {
        series = read_daily_csv(ctx.data_dir / "daily.csv");
    } else {
        auto ingested = ingest_readings(reading_inputs(ctx, {}), ctx.config.cleaning);
        stage_ingest(ctx, ingested, outputs);
        series = std::move(ingested.series);
    }
    const auto& cs = ctx.config.clustering;
    const auto built = cluster::build_profile_vectors(series, cs.min_days);
    if (built.profiles.size() < 2) throw std::runtime_error("fewer than 2 customers have enough days to cluster");
    const Tensor points = cluster::standardize_blocks(cluster::profile_matrix(built.profiles));
    auto options = ctx.config.kmeans_options();
    const auto curve = cluster::elbow_curve(points, cs.k_max, options);
    options.k = cs.k == 0 ? curve.selected_k : cs.k;
    const auto model = cluster::kmeans(points, options);

    std::map<std::string, const data::DailySeries*> by_id;
    for (const auto& s : series) by_id[s.customer_id] = &s;
    std::vector<std::vector<data::DailySeries>> members(model.k);
    std::ostringstream assignments;
    assignments << "customer_id,cluster\n";
    for (std::size_t i = 0; i < built.profiles.size(); ++i) {
        const auto& id = built.profiles[i].customer_id;
        members[static_cast<std::size_t>(model.labels[i])].push_back(*by_id.at(id));
        assignments << id << ',' << model.labels[i] << '\n';
    }
    std::ostringstream averages;
    averages << kClusterSeriesHeader << '\n';
    for (std::size_t c = 0; c < model.k; ++c) {
        const auto avg = eval::cluster_average(members[c], "cluster" + std::to_string(c));
        for (std::size_t i = 0; i < avg.values.size(); ++i)
            averages << c << ',' << format_date(avg.start_date + std::chrono::days{static_cast<int>(i)}) << ','
                     << eval::format_double(avg.values[i]) << '\n';
    }
    std::ostringstream elbow;
    elbow << kElbowHeader << '\n';
    for (const auto& [k, value] : curve.points) elbow << k << ',' << eval::format_double(value) << '\n';

    json centroids = json::array();
    for (std::size_t c = 0; c < model.k; ++c) {
        json row = json::array();
        for (std::size_t d = 0; d < model.centroids.cols(); ++d) row.push_back(model.centroids(c, d));
        centroids.push_back(row);
    }
    json summary = {{"k", model.k},
                    {"selected_by", cs.k == 0 ? "elbow" : "config"},
                    {"elbow_k", curve.selected_k},
                    {"inertia", model.inertia},
                    {"seed", model.seed},
                    {"n_init", model.n_init},
                    {"customers", built.profiles.size()},
                    {"skipped", built.skipped},
                    {"centroids", centroids}};
    if (const auto labels_path = ctx.data_dir / "labels.csv"; fs::exists(labels_path)) {
        std::map<std::string, int> truth;
        for (const auto& row : read_csv(labels_path, "customer_id,archetype"))
            truth[row.fields[0]] = static_cast<int>(int_field(labels_path, row, 1));
        std::vector<int> a, b;
        for (std::size_t i = 0; i < built.profiles.size(); ++i) {
            if (auto it = truth.find(built.profiles[i].customer_id); it != truth.end()) {
                a.push_back(model.labels[i]);
                b.push_back(it->second);
            }
        }
        if (!a.empty()) summary["adjusted_rand_index"] = cluster::adjusted_rand_index(a, b);
    }
    outputs.add(ctx.out_dir / "clusters.csv", assignments.str());
    outputs.add(ctx.out_dir / "cluster_series.csv", averages.str());
    outputs.add(ctx.out_dir / "elbow.csv", elbow.str());
    outputs.add(ctx.out_dir / "cluster_model.json", summary.dump(2) + "\n");
    ctx.log << "cluster: k = " << model.k << " (" << summary["selected_by"].get<std::string>() << "), "
            << built.profiles.size() << " customers\n";
}

eval::PreparedSeries prepare(const data::DailySeries& series, const jit::JitEnsembleConfig& ensemble,
                             const std::array<double, 3>& fractions) {
    return eval::prepare_series(series, ensemble.layout(), fractions[0], fractions[1], fractions[2]);
}

std::array<double, 3> fractions_of(const train::TrainConfig& t) {
    return {t.train_fraction, t.val_fraction, t.test_fraction};
}

void cmd_preprocess(Context& ctx, Outputs& outputs) {
    const auto series = read_cluster_series(ctx.data_dir / "cluster_series.csv");
    std::ostringstream features;
    features << "cluster,date,sma7_kwh,day_of_week,month,year,sma7_scaled,day_of_week_scaled,context_reduced\n";
    json summary = json::array();
    for (std::size_t c = 0; c < series.size(); ++c) {
        const auto p = prepare(series[c], ctx.config.ensemble, fractions_of(ctx.config.training));
        const auto& f = p.frame;
        for (std::size_t i = 0; i < f.size(); ++i) {
            const auto& cal = f.calendar[i];
            features << c << ',' << format_date(f.date_at(i)) << ',' << eval::format_double(f.sma7[i]) << ','
                     << cal.day_of_week << ',' << cal.month << ',' << cal.year << ','
                     << eval::format_double(f.model_rows[i][0]) << ',' << eval::format_double(f.model_rows[i][1])
                     << ',' << eval::format_double(f.model_rows[i][2]) << '\n';
        }
        const auto& t = f.transforms;
        summary.push_back({{"cluster", c},
                           {"days", f.size()},
                           {"windows", {{"train", p.split.train.size()},
                                        {"val", p.split.val.size()},
                                        {"test", p.split.test.size()},
                                        {"purged", p.purged}}},
                           {"sma7", {{"median", t.sma7.median}, {"iqr", t.sma7.iqr}}},
                           {"day_of_week", {{"mean", t.day_of_week.mean}, {"std", t.day_of_week.std}}},
                           {"pca", {{"axis", t.pca.axis}, {"explained_variance_ratio", t.pca.explained_variance_ratio}}}});
    }
    outputs.add(ctx.out_dir / "features.csv", features.str());
    outputs.add(ctx.out_dir / "transforms.json", summary.dump(2) + "\n");
    ctx.log << "preprocess: " << series.size() << " cluster series\n";
}

Tensor read_centroids(const fs::path& path, std::size_t expected_k) {
    json j;
    try {
        j = json::parse(read_file(path));
        const auto& rows = j.at("centroids");
        if (rows.size() != expected_k) throw std::runtime_error("centroid count does not match cluster_series.csv");
        const std::size_t d = rows.at(0).size();
        Tensor t = Tensor::matrix(expected_k, d);
        for (std::size_t c = 0; c < expected_k; ++c)
            for (std::size_t i = 0; i < d; ++i) t(c, i) = rows.at(c).at(i).get<double>();
        return t;
    } catch (const json::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

struct Candidate {
    std::size_t d_model, n_heads;
    double learning_rate;
};

/// Stage-1 validation loss for every grid point; returns the best model config
/// and learning rate (first on ties).
std::pair<model::ModelConfig, double> grid_search(const RunConfig& config, std::size_t cluster,
                                                  const eval::PreparedSeries& p, std::ostream& csv, std::ostream& log) {
    const auto& base = config.ensemble.model;
    const auto& g = config.grid;
    const auto d_values = g.d_model.empty() ? std::vector<std::size_t>{base.d_model} : g.d_model;
    const auto h_values = g.n_heads.empty() ? std::vector<std::size_t>{base.n_heads} : g.n_heads;
    const auto lr_values = g.learning_rate.empty() ? std::vector<double>{config.training.learning_rate} : g.learning_rate;
    std::optional<std::pair<model::ModelConfig, double>> best;
    double best_loss = 0;
    for (auto d : d_values)
        for (auto h : h_values)
            for (auto lr : lr_values) {
                auto ens = config.ensemble;
                ens.model.d_model = d;
                ens.model.n_heads = h;
                ens.model.d_ff = std::max<std::size_t>(1, base.d_ff * d / base.d_model);
                if (d % h != 0) continue;
                auto tc = config.train_config();
                tc.epochs = g.epochs;
                tc.learning_rate = lr;
                auto ensemble = jit::build_ensemble(ens, mix_seed(config.seed, cluster));
                jit::CascadeTrainer trainer(ensemble, p.split.train, p.split.val, p.frame.transforms);
                const auto h1 = trainer.train_stage(1, tc);
                const double loss = h1.val_loss.at(h1.best_epoch);
                csv << cluster << ',' << d << ',' << h << ',' << eval::format_double(lr) << ','
                    << eval::format_double(loss) << '\n';
                log << "grid: cluster " << cluster << " d_model " << d << " heads " << h << " lr " << lr
                    << " val " << loss << '\n';
                if (!best || loss < best_loss) {
                    best = {ens.model, lr};
                    best_loss = loss;
                }
            }
    if (!best) throw std::runtime_error("grid search: no candidate has d_model divisible by n_heads");
    return *best;
}

void cmd_train(Context& ctx, Outputs& outputs) {
    const auto series = read_cluster_series(ctx.data_dir / "cluster_series.csv");
    const Tensor centroids = read_centroids(ctx.data_dir / "cluster_model.json", series.size());
    const auto& config = ctx.config;
    std::ostringstream loss_csv, grid_csv;
    loss_csv << "cluster,model,stage,epoch,train_loss,val_loss\n";
    grid_csv << "cluster,d_model,n_heads,learning_rate,val_loss\n";
    auto log_history = [&](std::size_t c, const char* name, std::size_t stage, const train::TrainHistory& h) {
        for (std::size_t e = 0; e < h.train_loss.size(); ++e)
            loss_csv << c << ',' << name << ',' << stage << ',' << e + 1 << ',' << eval::format_double(h.train_loss[e])
                     << ',' << (e < h.val_loss.size() ? eval::format_double(h.val_loss[e]) : "") << '\n';
    };
    for (std::size_t c = 0; c < series.size(); ++c) {
        const auto p = prepare(series[c], config.ensemble, fractions_of(config.training));
        auto ens_config = config.ensemble;
        auto tc = config.train_config();
        if (config.grid.enabled()) {
            std::tie(ens_config.model, tc.learning_rate) = grid_search(config, c, p, grid_csv, ctx.log);
        }
        ClusterCheckpoint ckpt;
        ckpt.cluster = static_cast<int>(c);
        ckpt.seed = config.seed;
        ckpt.ensemble = jit::build_ensemble(ens_config, mix_seed(config.seed, c));
        ckpt.transforms = p.frame.transforms;
        ckpt.series = series[c];
        ckpt.centroids = centroids;
        ckpt.split_fractions = fractions_of(tc);
        jit::CascadeTrainer trainer(ckpt.ensemble, p.split.train, p.split.val, p.frame.transforms);
        for (std::size_t j = 1; j <= ens_config.n_models; ++j) {
            const auto t0 = std::chrono::steady_clock::now();
            const auto h = trainer.train_stage(j, tc);
            log_history(c, eval::kJitModel, j, h);
            ctx.log << "train: cluster " << c << " stage " << j << "/" << ens_config.n_models << " train "
                    << h.train_loss.back() << " best val "
                    << (h.val_loss.empty() ? h.train_loss[h.best_epoch] : h.val_loss[h.best_epoch]) << " ("
                    << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s)\n";
        }
        if (config.train_vanilla) {
            auto vanilla = model::Transformer::initialize(ens_config.model, mix_seed(config.seed, 1000 + c));
            const auto layout = ens_config.layout();
            const auto tr = eval::vanilla_examples(p.split.train, layout, p.frame.transforms);
            const auto va = eval::vanilla_examples(p.split.val, layout, p.frame.transforms);
            const auto h = train::train_loop(vanilla, tr, va, tc);
            log_history(c, eval::kVanillaModel, 0, h);
            ctx.log << "train: cluster " << c << " vanilla best val " << h.val_loss[h.best_epoch] << '\n';
            ckpt.vanilla = std::move(vanilla);
        }
        std::ostringstream bytes;
        save_checkpoint(ckpt, bytes);
        outputs.add(ctx.out_dir / "models" / checkpoint_name(c), bytes.str());
    }
    outputs.add(ctx.out_dir / "training_log.csv", loss_csv.str());
    if (config.grid.enabled()) outputs.add(ctx.out_dir / "grid_search.csv", grid_csv.str());
}

void cmd_evaluate(Context& ctx, Outputs& outputs) {
    const auto series = read_cluster_series(ctx.data_dir / "cluster_series.csv");
    std::vector<ClusterCheckpoint> checkpoints;
    std::vector<eval::PreparedSeries> prepared;
    checkpoints.reserve(series.size());
    prepared.reserve(series.size());
    for (std::size_t c = 0; c < series.size(); ++c) {
        const auto path = ctx.data_dir / "models" / checkpoint_name(c);
        checkpoints.push_back(load_checkpoint(path));
        const auto& ckpt = checkpoints.back();
        if (ckpt.cluster != static_cast<int>(c) || !(ckpt.series == series[c]))
            throw std::runtime_error(path.string() + " does not belong to cluster " + std::to_string(c) +
                                     " of cluster_series.csv");
        prepared.push_back(prepare(ckpt.series, ckpt.ensemble.config, ckpt.split_fractions));
        if (!(prepared.back().frame.transforms == ckpt.transforms))
            throw std::runtime_error(path.string() + ": stored transforms do not match its series");
    }
    std::vector<eval::ClusterEvaluation> jobs;
    for (std::size_t c = 0; c < series.size(); ++c) {
        const auto& ckpt = checkpoints[c];
        jobs.push_back({static_cast<int>(c), &ckpt.ensemble, ckpt.vanilla ? &*ckpt.vanilla : nullptr,
                        &ckpt.transforms, prepared[c].split.test});
    }
    const auto report = eval::evaluate(jobs);
    std::ostringstream metrics, predictions;
    eval::write_metrics_csv(report, metrics);
    eval::write_predictions_csv(report, predictions);
    outputs.add(ctx.out_dir / "metrics.csv", metrics.str());
    outputs.add(ctx.out_dir / "predictions.csv", predictions.str());
    for (std::size_t c = 0; c < series.size(); ++c) {
        ctx.log << "evaluate: cluster " << c << " lead-1 MAE " << eval::kJitModel << ' '
                << report.cell(static_cast<int>(c), eval::kJitModel, 1).mae_kwh << ' ' << eval::kPersistenceModel
                << ' ' << report.cell(static_cast<int>(c), eval::kPersistenceModel, 1).mae_kwh << '\n';
    }
}

void cmd_report(Context& ctx, Outputs& outputs) {
    const auto elbow_path = ctx.data_dir / "elbow.csv";
    const auto metrics_path = ctx.data_dir / "metrics.csv";
    const auto predictions_path = ctx.data_dir / "predictions.csv";
    const auto elbow = read_csv(elbow_path, kElbowHeader);
    const auto series = read_cluster_series(ctx.data_dir / "cluster_series.csv");
    const auto metrics = read_csv(metrics_path, kMetricsHeader);
    const auto predictions = read_csv(predictions_path, kPredictionsHeader);

    std::ostringstream elbow_out, averages, mae, preds;
    elbow_out << kElbowHeader << '\n';
    for (const auto& row : elbow)
        elbow_out << int_field(elbow_path, row, 0) << ',' << eval::format_double(real_field(elbow_path, row, 1)) << '\n';
    averages << kClusterSeriesHeader << '\n';
    for (std::size_t c = 0; c < series.size(); ++c)
        for (std::size_t i = 0; i < series[c].values.size(); ++i)
            averages << c << ',' << format_date(series[c].start_date + std::chrono::days{static_cast<int>(i)}) << ','
                     << eval::format_double(series[c].values[i]) << '\n';

    // cluster -> model -> lead day -> mae
    std::map<long long, std::map<std::string, std::map<long long, double>>> table;
    mae << kMetricsHeader << '\n';
    for (const auto& row : metrics) {
        const auto cluster = int_field(metrics_path, row, 0);
        const auto lead = int_field(metrics_path, row, 2);
        const double value = real_field(metrics_path, row, 3);
        if (!table[cluster][row.fields[1]].emplace(lead, value).second)
            throw ParseError(metrics_path.string(), row.line, "duplicate (cluster, model, lead_day)");
        mae << cluster << ',' << row.fields[1] << ',' << lead << ',' << eval::format_double(value) << ','
            << int_field(metrics_path, row, 4) << '\n';
    }
    preds << kPredictionsHeader << '\n';
    for (const auto& row : predictions)
        preds << int_field(predictions_path, row, 0) << ',' << int_field(predictions_path, row, 1) << ','
              << int_field(predictions_path, row, 2) << ',' << eval::format_double(real_field(predictions_path, row, 3))
              << ',' << eval::format_double(real_field(predictions_path, row, 4)) << ',' << row.fields[5] << '\n';

    json clusters = json::array();
    for (const auto& [cluster, models] : table) {
        json entry = {{"cluster", cluster}};
        json means = json::object();
        for (const auto& [name, leads] : models) {
            double sum = 0;
            std::size_t n = 0;
            for (long long k = 1; k <= 3; ++k)
                if (auto it = leads.find(k); it != leads.end()) sum += it->second, ++n;
            if (n) means[name] = sum / static_cast<double>(n);
        }
        entry["mean_mae_lead_1_3"] = means;
        json lead1 = json::object();
        for (const auto& [name, leads] : models)
            if (auto it = leads.find(1); it != leads.end()) lead1[name] = it->second;
        entry["mae_lead_1"] = lead1;
        clusters.push_back(entry);
    }
    json summary = {{"elbow_points", elbow.size()}, {"clusters", series.size()}, {"per_cluster", clusters}};
    const auto dir = ctx.out_dir / "report";
    outputs.add(dir / "elbow.csv", elbow_out.str());
    outputs.add(dir / "cluster_averages.csv", averages.str());
    outputs.add(dir / "mae_by_lead_day.csv", mae.str());
    outputs.add(dir / "predictions.csv", preds.str());
    outputs.add(dir / "summary.json", summary.dump(2) + "\n");
    ctx.log << "report: " << metrics.size() << " MAE rows, " << predictions.size() << " prediction rows\n";
}

void cmd_predict(std::ostream& out, const std::string& checkpoint_path, const std::string& horizon,
                 const std::string& out_path, const std::string& log_path) {
    Date horizon_date;
    try {
        horizon_date = parse_date(horizon);
    } catch (const std::exception& e) {
        throw std::runtime_error("--horizon-date: " + std::string(e.what()));
    }
    const auto ckpt = load_checkpoint(checkpoint_path);
    const auto forecast = forecast_from_checkpoint(ckpt, horizon_date);
    std::ostringstream csv;
    csv << "date,lead_day,kwh\n";
    for (std::size_t k = 0; k < forecast.dates.size(); ++k)
        csv << format_date(forecast.dates[k]) << ',' << k + 1 << ','
            << eval::format_double(forecast.result.final_kwh[k]) << '\n';
    Outputs outputs;
    if (!log_path.empty()) {
        std::ostringstream stage_log;
        jit::write_prediction_log_header(stage_log);
        jit::write_prediction_log(stage_log, 0, forecast.result);
        outputs.add(log_path, stage_log.str());
    }
    if (out_path.empty()) {
        outputs.commit();
        out << csv.str();
    } else {
        outputs.add(out_path, csv.str());
        outputs.commit();
    }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const char* env_seed) {
    CLI::App app{"jitcast: cluster-wise day-ahead load forecasting with a cascade of transformers", "jitcast"};
    app.require_subcommand(1);
    app.fallthrough(false);

    std::string config_path, out_dir = ".", data_dir;
    std::optional<std::uint64_t> seed_flag;
    std::string seed_text;
    std::vector<std::string> inputs;
    std::string checkpoint_path, horizon, predict_out, stage_log;

    auto pipeline = [&](const std::string& name, const std::string& about) {
        auto* sub = app.add_subcommand(name, about);
        sub->add_option("--config", config_path, "run configuration (key = value)")->required();
        sub->add_option("--out", out_dir, "output directory")->capture_default_str();
        sub->add_option("--data", data_dir, "input directory (defaults to --out)");
        sub->add_option("--seed", seed_text, "seed; overrides JITCAST_SEED and the config");
        return sub;
    };
    pipeline("generate", "write synthetic hourly readings and ground-truth labels");
    auto* ingest = pipeline("ingest", "clean hourly readings and aggregate them to daily kWh");
    ingest->add_option("--input", inputs, "readings CSV (repeatable; default <data>/readings.csv)");
    pipeline("cluster", "profile customers, select k, write cluster-average series");
    pipeline("preprocess", "write the feature table and fitted transforms per cluster");
    pipeline("train", "train the cascade (and baseline) per cluster and save checkpoints");
    pipeline("evaluate", "score the test windows: metrics.csv and predictions.csv");
    pipeline("report", "collect plot-ready CSV/JSON files under <out>/report");
    auto* predict = app.add_subcommand("predict", "seven-day forecast from a checkpoint");
    predict->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    predict->add_option("--horizon-date", horizon, "first forecast day, YYYY-MM-DD")->required();
    predict->add_option("--out", predict_out, "output CSV (default stdout)");
    predict->add_option("--stage-log", stage_log, "per-stage prediction log CSV");

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "jitcast: " << one_line(e.what()) << '\n' << app.help();
        return 2;
    }

    try {
        auto* sub = app.get_subcommands().front();
        const std::string name = sub->get_name();
        if (name == "predict") {
            cmd_predict(out, checkpoint_path, horizon, predict_out, stage_log);
            return 0;
        }
        if (!seed_text.empty()) {
            try {
                seed_flag = parse_seed(seed_text);
            } catch (const ConfigError& e) {
                err << "jitcast: --seed: " << e.what() << '\n' << app.help();
                return 2;
            }
        }
        Context ctx{load_run_config(config_path), out_dir, data_dir.empty() ? out_dir : data_dir, out, err};
        ctx.config.seed = resolve_seed(ctx.config.seed, env_seed, seed_flag);
        ctx.config.generator.seed = ctx.config.seed;
        ctx.config.validate();

        Outputs outputs;
        if (name == "generate") cmd_generate(ctx, outputs);
        else if (name == "ingest") cmd_ingest(ctx, outputs, inputs);
        else if (name == "cluster") cmd_cluster(ctx, outputs);
        else if (name == "preprocess") cmd_preprocess(ctx, outputs);
        else if (name == "train") cmd_train(ctx, outputs);
        else if (name == "evaluate") cmd_evaluate(ctx, outputs);
        else if (name == "report") cmd_report(ctx, outputs);
        outputs.commit();
        return 0;
    } catch (const std::exception& e) {
        err << "jitcast: error: " << one_line(e.what()) << '\n';
        return 1;
    }
}

int run_cli(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return run_cli(args, std::cout, std::cerr, std::getenv("JITCAST_SEED"));
}

}  // namespace jitcast::io
