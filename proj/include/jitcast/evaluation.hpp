#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "jitcast/ensemble.hpp"
#include "jitcast/features.hpp"
#include "jitcast/readings.hpp"
#include "jitcast/transformer.hpp"
#include "jitcast/windows.hpp"

namespace jitcast::eval {

inline constexpr const char* kJitModel = "jittrans";
inline constexpr const char* kVanillaModel = "vanilla";
inline constexpr const char* kPersistenceModel = "persistence";

/// (1/n) sum |p - a|. Throws on length mismatch or empty input.
double mae(std::span<const double> predictions, std::span<const double> actuals);

/// `horizon` copies of the last observed value.
std::vector<double> persistence_forecast(std::span<const double> observed, std::size_t horizon = 7);

/// Decoder input for the single-pass baseline: observed rows, then horizon - 1
/// rows carrying the last observed SMA_7 with each future day's calendar.
Tensor vanilla_decoder_input(const Tensor& observed, std::size_t horizon, Date last_observed,
                             const data::FeatureTransforms& transforms);

/// Scaled forecasts for offsets 1..horizon from one pass of `model`.
std::vector<double> vanilla_forecast(const model::Transformer& model, const Tensor& encoder, const Tensor& observed,
                                     std::size_t horizon, Date last_observed,
                                     const data::FeatureTransforms& transforms);

/// Training examples for the baseline: all target_len days as targets.
std::vector<train::Example> vanilla_examples(std::span<const train::WindowSample> windows,
                                             const train::WindowLayout& layout,
                                             const data::FeatureTransforms& transforms);

struct ClusterEvaluation {
    int cluster = 0;
    const jit::JitEnsemble* ensemble = nullptr;
    const model::Transformer* vanilla = nullptr;  // optional
    const data::FeatureTransforms* transforms = nullptr;
    std::span<const train::WindowSample> test;
};

struct MaeCell {
    int cluster = 0;
    std::string model;
    std::size_t lead_day = 0;
    double mae_kwh = 0.0;
    std::size_t n_windows = 0;
};

struct PredictionRow {
    int cluster = 0;
    std::size_t window_id = 0;  // start day index of the window
    std::size_t lead_day = 0;
    double y_true = 0.0;
    double y_pred = 0.0;
    std::string model;
};

struct MetricsReport {
    std::vector<MaeCell> cells;  // cluster, then model (jittrans, vanilla, persistence), then lead day
    std::vector<PredictionRow> predictions;

    /// Throws std::out_of_range when absent.
    const MaeCell& cell(int cluster, const std::string& model, std::size_t lead_day) const;
    double mean_mae(int cluster, const std::string& model, std::size_t first_lead, std::size_t last_lead) const;
};

/// Cascade, baseline and persistence forecasts for every test window, in kWh.
/// Windows are forecast in parallel; rows are emitted in window order.
MetricsReport evaluate(std::span<const ClusterEvaluation> clusters);

void write_metrics_csv(const MetricsReport& report, std::ostream& out);
void write_predictions_csv(const MetricsReport& report, std::ostream& out);

/// Shortest round-trip decimal form of v.
std::string format_double(double v);

/// Day-by-day mean of the member series over the union of their dates.
/// Throws when a day has no member or the members are empty.
data::DailySeries cluster_average(std::span<const data::DailySeries> members, const std::string& id);

struct PreparedSeries {
    data::FeatureFrame frame;  // transforms fit on training days only
    train::Split split;
    std::size_t purged = 0;
};

/// Windows, chronological split, purge of training windows overlapping held-out
/// ones, then transforms fit on the days the remaining training windows cover.
PreparedSeries prepare_series(const data::DailySeries& series, const train::WindowLayout& layout,
                              double train_fraction = 0.8, double val_fraction = 0.1, double test_fraction = 0.1);

}  // namespace jitcast::eval
