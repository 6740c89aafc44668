#include "jitcast/ensemble.hpp"

#include <charconv>
#include <ostream>
#include <stdexcept>
#include <string>

#include "jitcast/errors.hpp"
#include "jitcast/rng.hpp"

namespace jitcast::jit {

void JitEnsembleConfig::validate() const {
    if (n_models == 0) throw std::invalid_argument("ensemble config: n_models must be >= 1");
    if (encoder_len == 0) throw std::invalid_argument("ensemble config: encoder_len must be >= 1");
    if (base_decoder_len < 2) throw std::invalid_argument("ensemble config: base_decoder_len must be >= 2");
    if (model.input_feature_dim != 3) {
        throw std::invalid_argument("ensemble config: input_feature_dim must be 3 (sma7, day_of_week, context)");
    }
    model.validate();
}

JitEnsemble build_ensemble(const JitEnsembleConfig& config, std::uint64_t seed) {
    config.validate();
    JitEnsemble e{config, {}};
    for (std::size_t j = 1; j <= config.n_models; ++j)
        e.stages.push_back(model::Transformer::initialize(config.model, mix_seed(seed, j)));
    return e;
}

CascadeState::CascadeState(std::size_t n_offsets)
    : history_(n_offsets), prefix_(n_offsets, std::vector<double>{0.0}) {}

void CascadeState::record_stage(std::span<const double> values) {
    const std::size_t j = stages_done_ + 1;
    if (j > history_.size()) throw std::logic_error("cascade state: all stages already recorded");
    if (values.size() != j) {
        throw std::invalid_argument("cascade state: stage " + std::to_string(j) + " must record " +
                                    std::to_string(j) + " offsets, got " + std::to_string(values.size()));
    }
    for (std::size_t k = 1; k <= j; ++k) {
        history_[k - 1].push_back(values[k - 1]);
        prefix_[k - 1].push_back(prefix_[k - 1].back() + values[k - 1]);
    }
    stages_done_ = j;
}

const std::vector<double>& CascadeState::history(std::size_t k) const {
    if (k == 0 || k > history_.size()) throw std::out_of_range("cascade state: offset " + std::to_string(k));
    return history_[k - 1];
}

double CascadeState::average_predictions(std::size_t j, std::size_t k) const {
    if (k == 0 || k >= j) {
        throw std::out_of_range("average_predictions: need 1 <= k < j, got j=" + std::to_string(j) +
                                ", k=" + std::to_string(k));
    }
    if (k > history_.size() || j - 1 > stages_done_) {
        throw std::out_of_range("average_predictions: stages " + std::to_string(k) + ".." +
                                std::to_string(j - 1) + " not all recorded (have " +
                                std::to_string(stages_done_) + ")");
    }
    const std::size_t terms = j - k;
    return prefix_[k - 1][terms] / static_cast<double>(terms);
}

Tensor decoder_input_for(std::size_t stage, const Tensor& observed, const CascadeState& state,
                         Date last_observed, const data::FeatureTransforms& transforms) {
    if (stage == 0) throw std::invalid_argument("decoder_input_for: stages are 1-based");
    if (observed.cols() != 3 || observed.rows() == 0) {
        throw ShapeError("decoder_input_for: observed rows " + shape_string(observed.shape()) + " must be n x 3");
    }
    Tensor rows = Tensor::matrix(observed.rows() + stage - 1, 3);
    std::copy(observed.values().begin(), observed.values().end(), rows.values().begin());
    for (std::size_t m = 1; m < stage; ++m) {
        const data::Row3 r = transforms.model_row_from_scaled(state.average_predictions(stage, m),
                                                              last_observed + std::chrono::days{static_cast<int>(m)});
        for (std::size_t c = 0; c < 3; ++c) rows(observed.rows() + m - 1, c) = r[c];
    }
    return rows;
}

namespace {

// Output position p forecasts the day after decoder row p; offsets start at the
// position of the last observed row.
void record_outputs(CascadeState& state, std::span<const double> outputs, std::size_t observed_len,
                    std::size_t stage) {
    state.record_stage(outputs.subspan(observed_len - 1, stage));
}

std::vector<double> run_stage(const model::Transformer& m, const Tensor& encoder, const Tensor& decoder,
                              std::size_t stage) {
    auto out = m.predict(encoder, decoder);
    for (double v : out)
        if (!std::isfinite(v)) throw NumericError("cascade: stage " + std::to_string(stage) + " produced a non-finite value");
    return out;
}

}  // namespace

ForecastResult cascade_predict(const JitEnsemble& ensemble, const Tensor& encoder, const Tensor& observed,
                               Date last_observed, const data::FeatureTransforms& transforms) {
    const auto& cfg = ensemble.config;
    if (ensemble.stages.size() != cfg.n_models) {
        throw std::invalid_argument("cascade_predict: ensemble has " + std::to_string(ensemble.stages.size()) +
                                    " stages, config says " + std::to_string(cfg.n_models));
    }
    if (encoder.rows() != cfg.encoder_len || observed.rows() != cfg.base_decoder_len) {
        throw ShapeError("cascade_predict: expected " + std::to_string(cfg.encoder_len) + " encoder and " +
                         std::to_string(cfg.base_decoder_len) + " observed rows, got " +
                         std::to_string(encoder.rows()) + " and " + std::to_string(observed.rows()));
    }
    ForecastResult r{{}, CascadeState(cfg.n_models), {}, {}};
    for (std::size_t j = 1; j <= cfg.n_models; ++j) {
        const Tensor dec = decoder_input_for(j, observed, r.state, last_observed, transforms);
        r.stage_outputs.push_back(run_stage(ensemble.stages[j - 1], encoder, dec, j));
        record_outputs(r.state, r.stage_outputs.back(), cfg.base_decoder_len, j);
    }
    for (std::size_t k = 1; k <= cfg.n_models; ++k) {
        r.final_scaled.push_back(r.state.average_predictions(cfg.n_models + 1, k));
        r.final_kwh.push_back(transforms.sma7.inverse(r.final_scaled.back()));
    }
    return r;
}

void write_prediction_log_header(std::ostream& out) { out << "window_id,stage,offset,value\n"; }

void write_prediction_log(std::ostream& out, std::size_t window_id, const ForecastResult& result) {
    char buf[32];
    const std::size_t n = result.state.n_offsets();
    for (std::size_t j = 1; j <= result.state.stages_done(); ++j) {
        for (std::size_t k = 1; k <= j && k <= n; ++k) {
            const double v = result.state.history(k)[j - k];
            const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
            out << window_id << ',' << j << ',' << k << ',' << std::string_view(buf, static_cast<std::size_t>(end - buf))
                << '\n';
        }
    }
}

CascadeTrainer::CascadeTrainer(JitEnsemble& ensemble, std::span<const train::WindowSample> train_windows,
                               std::span<const train::WindowSample> val_windows,
                               const data::FeatureTransforms& transforms)
    : ensemble_(ensemble),
      train_(train_windows),
      val_(val_windows),
      transforms_(transforms),
      train_states_(train_windows.size(), CascadeState(ensemble.config.n_models)),
      val_states_(val_windows.size(), CascadeState(ensemble.config.n_models)) {
    ensemble.config.validate();
    if (train_windows.empty()) throw std::invalid_argument("cascade trainer: no training windows");
}

std::vector<train::Example> CascadeTrainer::examples_for(std::size_t stage,
                                                         std::span<const train::WindowSample> windows,
                                                         const std::vector<CascadeState>& states, bool log) {
    const std::size_t len = ensemble_.config.decoder_len(stage);
    std::vector<train::Example> out;
    out.reserve(windows.size());
    for (std::size_t w = 0; w < windows.size(); ++w) {
        const auto& win = windows[w];
        if (win.targets.size() < len) {
            throw std::invalid_argument("cascade trainer: window has " + std::to_string(win.targets.size()) +
                                        " targets, stage " + std::to_string(stage) + " needs " + std::to_string(len));
        }
        train::Example ex{win.encoder, decoder_input_for(stage, win.observed, states[w], win.last_observed, transforms_),
                          Tensor::matrix(len, 1)};
        for (std::size_t i = 0; i < len; ++i) ex.target(i, 0) = win.targets[i];
        if (log) input_log_.push_back({stage, w, ex.decoder});
        out.push_back(std::move(ex));
    }
    return out;
}

void CascadeTrainer::advance(std::size_t stage, std::span<const train::WindowSample> windows,
                             std::vector<CascadeState>& states) {
    const auto& m = ensemble_.stages[stage - 1];
    const std::size_t observed_len = ensemble_.config.base_decoder_len;
    std::vector<std::vector<double>> outs(windows.size());
    const auto n = static_cast<long long>(windows.size());
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < n; ++i) {
        const auto w = static_cast<std::size_t>(i);
        const Tensor dec = decoder_input_for(stage, windows[w].observed, states[w], windows[w].last_observed, transforms_);
        outs[w] = run_stage(m, windows[w].encoder, dec, stage);
    }
    for (std::size_t w = 0; w < windows.size(); ++w) record_outputs(states[w], outs[w], observed_len, stage);
}

train::TrainHistory CascadeTrainer::train_stage(std::size_t stage, const train::TrainConfig& config) {
    if (stage != next_stage()) {
        throw std::logic_error("cascade trainer: stage " + std::to_string(stage) + " requested but stage " +
                               std::to_string(next_stage()) + " is next");
    }
    if (stage > ensemble_.config.n_models) throw std::logic_error("cascade trainer: all stages trained");
    const auto train_set = examples_for(stage, train_, train_states_, log_inputs_);
    const auto val_set = examples_for(stage, val_, val_states_, false);
    train::TrainConfig stage_config = config;
    stage_config.seed = mix_seed(config.seed, stage);
    auto history = train::train_loop(ensemble_.stages[stage - 1], train_set, val_set, stage_config);
    advance(stage, train_, train_states_);
    advance(stage, val_, val_states_);
    trained_ = stage;
    return history;
}

}  // namespace jitcast::jit
