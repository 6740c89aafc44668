#include "jitcast/evaluation.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <ostream>
#include <stdexcept>

namespace jitcast::eval {

double mae(std::span<const double> p, std::span<const double> a) {
    if (p.size() != a.size()) {
        throw std::invalid_argument("mae: " + std::to_string(p.size()) + " predictions vs " +
                                    std::to_string(a.size()) + " actuals");
    }
    if (p.empty()) throw std::invalid_argument("mae: empty input");
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) total += std::abs(p[i] - a[i]);
    return total / static_cast<double>(p.size());
}

std::vector<double> persistence_forecast(std::span<const double> observed, std::size_t horizon) {
    if (observed.empty()) throw std::invalid_argument("persistence_forecast: no observed values");
    return std::vector<double>(horizon, observed.back());
}

Tensor vanilla_decoder_input(const Tensor& observed, std::size_t horizon, Date last_observed,
                             const data::FeatureTransforms& transforms) {
    const std::size_t n_obs = observed.rows();
    Tensor rows = Tensor::matrix(n_obs + horizon - 1, 3);
    std::copy(observed.values().begin(), observed.values().end(), rows.values().begin());
    const double last = observed(n_obs - 1, 0);
    for (std::size_t m = 1; m < horizon; ++m) {
        const auto r = transforms.model_row_from_scaled(last, last_observed + std::chrono::days{static_cast<int>(m)});
        for (std::size_t c = 0; c < 3; ++c) rows(n_obs + m - 1, c) = r[c];
    }
    return rows;
}

std::vector<double> vanilla_forecast(const model::Transformer& model, const Tensor& encoder, const Tensor& observed,
                                     std::size_t horizon, Date last_observed,
                                     const data::FeatureTransforms& transforms) {
    const auto out =
        model.predict(encoder, vanilla_decoder_input(observed, horizon, last_observed, transforms));
    const auto first = static_cast<std::ptrdiff_t>(observed.rows() - 1);
    return {out.begin() + first, out.begin() + first + static_cast<std::ptrdiff_t>(horizon)};
}

std::vector<train::Example> vanilla_examples(std::span<const train::WindowSample> windows,
                                             const train::WindowLayout& layout,
                                             const data::FeatureTransforms& transforms) {
    std::vector<train::Example> out;
    out.reserve(windows.size());
    for (const auto& w : windows) {
        train::Example ex{w.encoder, vanilla_decoder_input(w.observed, layout.horizon, w.last_observed, transforms),
                          Tensor::matrix(layout.target_len(), 1)};
        for (std::size_t i = 0; i < layout.target_len(); ++i) ex.target(i, 0) = w.targets[i];
        out.push_back(std::move(ex));
    }
    return out;
}

const MaeCell& MetricsReport::cell(int cluster, const std::string& model, std::size_t lead_day) const {
    for (const auto& c : cells)
        if (c.cluster == cluster && c.model == model && c.lead_day == lead_day) return c;
    throw std::out_of_range("metrics: no cell for cluster " + std::to_string(cluster) + ", model " + model +
                            ", lead day " + std::to_string(lead_day));
}

double MetricsReport::mean_mae(int cluster, const std::string& model, std::size_t first, std::size_t last) const {
    double total = 0.0;
    for (std::size_t d = first; d <= last; ++d) total += cell(cluster, model, d).mae_kwh;
    return total / static_cast<double>(last - first + 1);
}

MetricsReport evaluate(std::span<const ClusterEvaluation> clusters) {
    MetricsReport report;
    for (const auto& c : clusters) {
        if (!c.ensemble || !c.transforms) throw std::invalid_argument("evaluate: cluster without a trained ensemble");
        if (c.test.empty()) {
            throw std::invalid_argument("evaluate: cluster " + std::to_string(c.cluster) + " has no test windows");
        }
        const auto& cfg = c.ensemble->config;
        const std::size_t horizon = cfg.n_models, n_obs = cfg.base_decoder_len;
        const std::size_t n = c.test.size();
        std::vector<std::vector<double>> jit_kwh(n), van_kwh(n);
        const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic)
        for (long long i = 0; i < count; ++i) {
            const auto w = static_cast<std::size_t>(i);
            const auto& win = c.test[w];
            jit_kwh[w] = jit::cascade_predict(*c.ensemble, win.encoder, win.observed, win.last_observed, *c.transforms)
                             .final_kwh;
            if (c.vanilla) {
                for (double v : vanilla_forecast(*c.vanilla, win.encoder, win.observed, horizon, win.last_observed,
                                                 *c.transforms))
                    van_kwh[w].push_back(c.transforms->sma7.inverse(v));
            }
        }
        std::vector<std::string> models{kJitModel};
        if (c.vanilla) models.push_back(kVanillaModel);
        models.push_back(kPersistenceModel);
        for (const auto& model : models) {
            for (std::size_t lead = 1; lead <= horizon; ++lead) {
                std::vector<double> pred, truth;
                for (std::size_t w = 0; w < n; ++w) {
                    const auto& win = c.test[w];
                    double p = 0.0;
                    if (model == kJitModel) p = jit_kwh[w][lead - 1];
                    else if (model == kVanillaModel) p = van_kwh[w][lead - 1];
                    else p = win.targets_kwh[n_obs - 2];  // last observed day
                    pred.push_back(p);
                    truth.push_back(win.target_kwh_at(lead, n_obs));
                }
                report.cells.push_back({c.cluster, model, lead, mae(pred, truth), n});
            }
        }
        for (std::size_t w = 0; w < n; ++w) {
            const auto& win = c.test[w];
            for (const auto& model : models) {
                for (std::size_t lead = 1; lead <= horizon; ++lead) {
                    double p = 0.0;
                    if (model == kJitModel) p = jit_kwh[w][lead - 1];
                    else if (model == kVanillaModel) p = van_kwh[w][lead - 1];
                    else p = win.targets_kwh[n_obs - 2];
                    report.predictions.push_back({c.cluster, win.start, lead, win.target_kwh_at(lead, n_obs), p, model});
                }
            }
        }
    }
    return report;
}

std::string format_double(double v) {
    char buf[32];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

void write_metrics_csv(const MetricsReport& report, std::ostream& out) {
    out << "cluster,model,lead_day,mae_kwh,n_windows\n";
    for (const auto& c : report.cells)
        out << c.cluster << ',' << c.model << ',' << c.lead_day << ',' << format_double(c.mae_kwh) << ','
            << c.n_windows << '\n';
}

void write_predictions_csv(const MetricsReport& report, std::ostream& out) {
    out << "cluster,window_id,lead_day,y_true,y_pred,model\n";
    for (const auto& r : report.predictions)
        out << r.cluster << ',' << r.window_id << ',' << r.lead_day << ',' << format_double(r.y_true) << ','
            << format_double(r.y_pred) << ',' << r.model << '\n';
}

data::DailySeries cluster_average(std::span<const data::DailySeries> members, const std::string& id) {
    if (members.empty()) throw std::invalid_argument("cluster_average: cluster '" + id + "' has no members");
    Date first = members[0].start_date, last = members[0].end_date();
    for (const auto& m : members) {
        if (m.values.empty()) continue;
        first = std::min(first, m.start_date);
        last = std::max(last, m.end_date());
    }
    const auto days = static_cast<std::size_t>((last - first).count() + 1);
    std::vector<double> sum(days, 0.0), count(days, 0.0);
    for (const auto& m : members) {
        const auto offset = static_cast<std::size_t>((m.start_date - first).count());
        for (std::size_t i = 0; i < m.values.size(); ++i) {
            sum[offset + i] += m.values[i];
            count[offset + i] += 1;
        }
    }
    data::DailySeries out{id, first, std::vector<double>(days)};
    for (std::size_t d = 0; d < days; ++d) {
        if (count[d] == 0) {
            throw std::invalid_argument("cluster_average: no member of '" + id + "' covers " +
                                        format_date(first + std::chrono::days{static_cast<int>(d)}));
        }
        out.values[d] = sum[d] / count[d];
    }
    return out;
}

PreparedSeries prepare_series(const data::DailySeries& series, const train::WindowLayout& layout,
                              double train_fraction, double val_fraction, double test_fraction) {
    // Window placement does not depend on the fitted transforms, so a
    // provisional fit over all days locates the training extent first.
    const auto provisional = data::build_feature_frame(series, 0, series.values.size());
    auto probe = train::split_chronological(train::make_windows(provisional, layout), train_fraction, val_fraction,
                                            test_fraction);
    train::purge_overlap(probe, layout);
    const std::size_t extent = train::training_day_extent(probe, layout);

    PreparedSeries p;
    p.frame = data::build_feature_frame(series, 0, extent);
    p.split = train::split_chronological(train::make_windows(p.frame, layout), train_fraction, val_fraction,
                                         test_fraction);
    p.purged = train::purge_overlap(p.split, layout);
    return p;
}

}  // namespace jitcast::eval
