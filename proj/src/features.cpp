#include "jitcast/features.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "jitcast/errors.hpp"

namespace jitcast::data {

std::vector<double> sma(std::span<const double> series, std::size_t window) {
    if (window == 0) throw std::invalid_argument("sma: window must be at least 1");
    if (series.empty()) throw std::invalid_argument("sma: empty series");
    std::vector<double> out(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) {
        const std::size_t begin = i + 1 >= window ? i + 1 - window : 0;
        double total = 0.0;
        for (std::size_t j = begin; j <= i; ++j) total += series[j];
        out[i] = total / static_cast<double>(i + 1 - begin);
    }
    return out;
}

std::vector<CalendarRow> calendar_features(Date start, std::size_t n_days) {
    std::vector<CalendarRow> rows(n_days);
    for (std::size_t i = 0; i < n_days; ++i) {
        const Date d = start + std::chrono::days{static_cast<int>(i)};
        rows[i] = {day_of_week(d), month_of(d), year_of(d)};
    }
    return rows;
}

std::vector<CalendarRow> calendar_features(int year, unsigned month, unsigned day,
                                           std::size_t n_days) {
    return calendar_features(make_date(year, month, day), n_days);
}

double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw std::invalid_argument("quantile of empty data");
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

RobustScaler RobustScaler::fit(std::span<const double> values) {
    if (values.size() < 2) throw std::invalid_argument("robust scaler needs at least 2 values");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    RobustScaler s;
    s.median = quantile_sorted(sorted, 0.5);
    s.iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    if (!(s.iqr > 0.0)) throw DegenerateScaleError("robust scaler: interquartile range is zero");
    return s;
}

std::vector<double> RobustScaler::transform(std::span<const double> xs) const {
    std::vector<double> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = transform(xs[i]);
    return out;
}

StandardScaler StandardScaler::fit(std::span<const double> values) {
    if (values.size() < 2) throw std::invalid_argument("standard scaler needs at least 2 values");
    StandardScaler s;
    double total = 0.0;
    for (double v : values) total += v;
    s.mean = total / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size()));
    if (!(s.std > 0.0)) throw DegenerateScaleError("standard scaler: standard deviation is zero");
    return s;
}

std::vector<double> StandardScaler::transform(std::span<const double> xs) const {
    std::vector<double> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = transform(xs[i]);
    return out;
}

double PcaModel::project(const Row3& row) const {
    double acc = 0.0;
    for (int c = 0; c < 3; ++c) acc += (row[c] - mean[c]) * axis[c];
    return acc;
}

SymmetricEigen3 symmetric_eigen3(const std::array<Row3, 3>& input) {
    std::array<Row3, 3> a = input;
    std::array<Row3, 3> v{};
    for (int i = 0; i < 3; ++i) v[i][i] = 1.0;

    for (int sweep = 0; sweep < 64; ++sweep) {
        const double off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        const double diag = a[0][0] * a[0][0] + a[1][1] * a[1][1] + a[2][2] * a[2][2];
        if (off <= 1e-30 * diag || off == 0.0) break;
        for (int p = 0; p < 2; ++p) {
            for (int q = p + 1; q < 3; ++q) {
                if (a[p][q] == 0.0) continue;
                const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < 3; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (int k = 0; k < 3; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for (int k = 0; k < 3; ++k) {
                    const double vkp = v[k][p], vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }

    std::array<int, 3> order{0, 1, 2};
    std::sort(order.begin(), order.end(), [&](int x, int y) { return a[x][x] > a[y][y]; });
    SymmetricEigen3 out;
    for (int i = 0; i < 3; ++i) {
        out.values[i] = a[order[i]][order[i]];
        for (int k = 0; k < 3; ++k) out.vectors[i][k] = v[k][order[i]];
    }
    return out;
}

PcaModel fit_pca(std::span<const Row3> rows) {
    if (rows.size() < 2) throw std::invalid_argument("fit_pca: need at least 2 rows");
    const double n = static_cast<double>(rows.size());
    PcaModel model;
    for (const auto& r : rows)
        for (int c = 0; c < 3; ++c) model.mean[c] += r[c];
    for (double& m : model.mean) m /= n;

    std::array<Row3, 3> cov{};
    for (const auto& r : rows) {
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) cov[i][j] += (r[i] - model.mean[i]) * (r[j] - model.mean[j]);
    }
    for (auto& row : cov)
        for (double& v : row) v /= n;

    const double total = cov[0][0] + cov[1][1] + cov[2][2];
    if (!(total > 0.0)) throw std::invalid_argument("fit_pca: input has zero variance (rank 0)");

    const SymmetricEigen3 eig = symmetric_eigen3(cov);
    model.eigenvalues = eig.values;
    model.axis = eig.vectors[0];
    double norm = 0.0;
    for (double c : model.axis) norm += c * c;
    norm = std::sqrt(norm);
    for (double& c : model.axis) c /= norm;
    for (double c : model.axis) {
        if (std::abs(c) > 1e-12) {
            if (c < 0) {
                for (double& x : model.axis) x = -x;
            }
            break;
        }
    }
    double eig_total = 0.0;
    for (double l : eig.values) eig_total += std::max(l, 0.0);
    model.explained_variance_ratio = std::max(eig.values[0], 0.0) / eig_total;
    return model;
}

FeatureTransforms FeatureTransforms::fit(std::span<const double> sma7_kwh,
                                         std::span<const CalendarRow> calendar) {
    if (sma7_kwh.size() != calendar.size()) {
        throw std::invalid_argument("FeatureTransforms::fit: feature columns differ in length");
    }
    FeatureTransforms t;
    t.sma7 = RobustScaler::fit(sma7_kwh);
    std::vector<double> dow(calendar.size()), month(calendar.size());
    for (std::size_t i = 0; i < calendar.size(); ++i) {
        dow[i] = calendar[i].day_of_week;
        month[i] = calendar[i].month;
    }
    t.day_of_week = StandardScaler::fit(dow);
    t.context[0] = StandardScaler::fit(sma7_kwh);
    t.context[1] = StandardScaler::fit(dow);
    t.context[2] = StandardScaler::fit(month);
    std::vector<Row3> block(calendar.size());
    for (std::size_t i = 0; i < calendar.size(); ++i) {
        block[i] = {t.context[0].transform(sma7_kwh[i]), t.context[1].transform(dow[i]),
                    t.context[2].transform(month[i])};
    }
    t.pca = fit_pca(block);
    return t;
}

double FeatureTransforms::context_reduced(double sma7_kwh, int dow, int month) const {
    const Row3 scaled{context[0].transform(sma7_kwh), context[1].transform(dow),
                      context[2].transform(month)};
    return pca.project(scaled);
}

Row3 FeatureTransforms::model_row(double sma7_kwh, int dow, int month) const {
    return {sma7.transform(sma7_kwh), day_of_week.transform(dow),
            context_reduced(sma7_kwh, dow, month)};
}

Row3 FeatureTransforms::model_row_from_scaled(double sma7_scaled, Date day) const {
    const double kwh = sma7.inverse(sma7_scaled);
    const int dow = jitcast::day_of_week(day);
    return {sma7_scaled, day_of_week.transform(dow), context_reduced(kwh, dow, month_of(day))};
}

bool operator==(const FeatureTransforms& a, const FeatureTransforms& b) {
    auto same_std = [](const StandardScaler& x, const StandardScaler& y) {
        return x.mean == y.mean && x.std == y.std;
    };
    return a.sma7.median == b.sma7.median && a.sma7.iqr == b.sma7.iqr &&
           same_std(a.day_of_week, b.day_of_week) && same_std(a.context[0], b.context[0]) &&
           same_std(a.context[1], b.context[1]) && same_std(a.context[2], b.context[2]) &&
           a.pca.mean == b.pca.mean && a.pca.axis == b.pca.axis &&
           a.pca.eigenvalues == b.pca.eigenvalues &&
           a.pca.explained_variance_ratio == b.pca.explained_variance_ratio;
}

namespace {

FeatureFrame frame_skeleton(const DailySeries& series) {
    if (series.values.empty()) throw std::invalid_argument("feature frame: empty series");
    FeatureFrame f;
    f.start_date = series.start_date;
    f.sma7 = sma(series.values, 7);
    f.calendar = calendar_features(series.start_date, series.values.size());
    return f;
}

void apply_transforms(FeatureFrame& f) {
    f.context_reduced.resize(f.size());
    f.model_rows.resize(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        const auto& cal = f.calendar[i];
        f.model_rows[i] = f.transforms.model_row(f.sma7[i], cal.day_of_week, cal.month);
        f.context_reduced[i] = f.model_rows[i][2];
    }
}

}  // namespace

FeatureFrame build_feature_frame(const DailySeries& series, std::size_t fit_begin,
                                 std::size_t fit_end) {
    FeatureFrame f = frame_skeleton(series);
    if (fit_begin >= fit_end || fit_end > f.size()) {
        throw std::invalid_argument("feature frame: fit range [" + std::to_string(fit_begin) + ", " +
                                    std::to_string(fit_end) + ") invalid for " +
                                    std::to_string(f.size()) + " days");
    }
    f.transforms = FeatureTransforms::fit(
        std::span<const double>(f.sma7).subspan(fit_begin, fit_end - fit_begin),
        std::span<const CalendarRow>(f.calendar).subspan(fit_begin, fit_end - fit_begin));
    apply_transforms(f);
    return f;
}

FeatureFrame build_feature_frame(const DailySeries& series, const FeatureTransforms& transforms) {
    FeatureFrame f = frame_skeleton(series);
    f.transforms = transforms;
    apply_transforms(f);
    return f;
}

}  // namespace jitcast::data
