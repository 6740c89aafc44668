#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "jitcast/date.hpp"
#include "jitcast/readings.hpp"

namespace jitcast::data {

/// Trailing moving average; the first window-1 days average the available prefix.
std::vector<double> sma(std::span<const double> series, std::size_t window = 7);

struct CalendarRow {
    int day_of_week = 0;  // 0 = Monday
    int month = 1;
    int year = 0;

    friend bool operator==(const CalendarRow&, const CalendarRow&) = default;
};

std::vector<CalendarRow> calendar_features(Date start, std::size_t n_days);
/// Validates the start date first; throws std::invalid_argument for e.g. 2021-02-29.
std::vector<CalendarRow> calendar_features(int year, unsigned month, unsigned day,
                                           std::size_t n_days);

/// Quantile of sorted data using linear interpolation between order statistics
/// (position q * (n - 1)).
double quantile_sorted(std::span<const double> sorted, double q);

struct RobustScaler {
    double median = 0.0;
    double iqr = 1.0;

    /// Throws DegenerateScaleError when the interquartile range is zero.
    static RobustScaler fit(std::span<const double> values);
    double transform(double x) const { return (x - median) / iqr; }
    double inverse(double z) const { return z * iqr + median; }
    std::vector<double> transform(std::span<const double> xs) const;
};

/// z-score with the population standard deviation.
struct StandardScaler {
    double mean = 0.0;
    double std = 1.0;

    static StandardScaler fit(std::span<const double> values);
    double transform(double x) const { return (x - mean) / std; }
    double inverse(double z) const { return z * std + mean; }
    std::vector<double> transform(std::span<const double> xs) const;
};

using Row3 = std::array<double, 3>;

/// Leading principal axis of 3-column data.
struct PcaModel {
    Row3 mean{};
    Row3 axis{};
    Row3 eigenvalues{};  // descending, population covariance
    double explained_variance_ratio = 0.0;

    double project(const Row3& row) const;
};

/// Eigen-decomposition of a symmetric 3x3 matrix by cyclic Jacobi rotations.
/// Eigenvalues are returned in descending order; vectors[i] pairs with values[i].
struct SymmetricEigen3 {
    Row3 values{};
    std::array<Row3, 3> vectors{};
};
SymmetricEigen3 symmetric_eigen3(const std::array<Row3, 3>& m);

/// Centers rows by their column means, then takes the dominant covariance
/// eigenvector, oriented so its first non-zero component is positive.
/// Throws std::invalid_argument for fewer than 2 rows or zero variance.
PcaModel fit_pca(std::span<const Row3> rows);

/// Fitted per-feature transforms: robust scaling of SMA_7, standard scaling of
/// day_of_week, and the context feature (standard-scaled (SMA_7, day_of_week,
/// month) projected onto its first principal axis).
struct FeatureTransforms {
    RobustScaler sma7;
    StandardScaler day_of_week;
    std::array<StandardScaler, 3> context;
    PcaModel pca;

    static FeatureTransforms fit(std::span<const double> sma7_kwh,
                                 std::span<const CalendarRow> calendar);

    double context_reduced(double sma7_kwh, int day_of_week, int month) const;
    /// Model input row: (scaled SMA_7, scaled day_of_week, context_reduced).
    Row3 model_row(double sma7_kwh, int day_of_week, int month) const;
    /// Model row for a day whose SMA_7 is only known in scaled units (a forecast).
    Row3 model_row_from_scaled(double sma7_scaled, Date day) const;

    friend bool operator==(const FeatureTransforms&, const FeatureTransforms&);
};

/// Per-day feature table for one series.
struct FeatureFrame {
    Date start_date;
    std::vector<double> sma7;  // kWh
    std::vector<CalendarRow> calendar;
    std::vector<double> context_reduced;
    std::vector<Row3> model_rows;
    FeatureTransforms transforms;

    std::size_t size() const noexcept { return sma7.size(); }
    Date date_at(std::size_t i) const { return start_date + std::chrono::days{static_cast<int>(i)}; }
};

/// Computes SMA_7 and calendar features for the whole series, fits the
/// transforms on days [fit_begin, fit_end) only, and applies them everywhere.
FeatureFrame build_feature_frame(const DailySeries& series, std::size_t fit_begin,
                                 std::size_t fit_end);

/// Applies already-fitted transforms (e.g. loaded from a checkpoint).
FeatureFrame build_feature_frame(const DailySeries& series, const FeatureTransforms& transforms);

}  // namespace jitcast::data
