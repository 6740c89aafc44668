#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "jitcast/date.hpp"
#include "jitcast/features.hpp"
#include "jitcast/tensor.hpp"
#include "jitcast/training.hpp"
#include "jitcast/transformer.hpp"
#include "jitcast/windows.hpp"

namespace jitcast::jit {

struct JitEnsembleConfig {
    std::size_t n_models = 7;
    std::size_t encoder_len = 30;
    std::size_t base_decoder_len = 7;
    model::ModelConfig model;

    /// Decoder rows for stage j (1-based): base_decoder_len + j - 1.
    std::size_t decoder_len(std::size_t stage) const { return base_decoder_len + stage - 1; }
    train::WindowLayout layout() const { return {encoder_len, base_decoder_len, n_models}; }
    void validate() const;

    friend bool operator==(const JitEnsembleConfig&, const JitEnsembleConfig&) = default;
};

struct JitEnsemble {
    JitEnsembleConfig config;
    std::vector<model::Transformer> stages;  // stages[j - 1] is stage j
};

/// Stage j is initialized from mix_seed(seed, j).
JitEnsemble build_ensemble(const JitEnsembleConfig& config, std::uint64_t seed);

/// Per-offset stage predictions. history(k)[i] is the prediction of stage k + i
/// for offset k; running sums make prefix means O(1).
class CascadeState {
public:
    explicit CascadeState(std::size_t n_offsets = 0);

    std::size_t n_offsets() const noexcept { return history_.size(); }
    /// Stages recorded so far.
    std::size_t stages_done() const noexcept { return stages_done_; }
    /// Records stage j = stages_done() + 1, which predicts offsets 1..j.
    void record_stage(std::span<const double> offsets_1_to_j);
    const std::vector<double>& history(std::size_t k) const;

    /// Mean of stage predictions for offset k over stages k..j-1 (1 <= k < j).
    /// Throws std::out_of_range when a needed stage has not been recorded.
    double average_predictions(std::size_t j, std::size_t k) const;

private:
    std::vector<std::vector<double>> history_;
    std::vector<std::vector<double>> prefix_;  // prefix_[k-1][n] = sum of first n entries
    std::size_t stages_done_ = 0;
};

/// Observed rows followed by one row per earlier offset m = 1..j-1, whose SMA_7
/// channel is average_predictions(j, m) and whose calendar/context channels
/// are derived from day last_observed + m.
Tensor decoder_input_for(std::size_t stage, const Tensor& observed, const CascadeState& state,
                         Date last_observed, const data::FeatureTransforms& transforms);

struct ForecastResult {
    std::vector<std::vector<double>> stage_outputs;  // full output sequence of each stage
    CascadeState state;
    std::vector<double> final_scaled;  // offset k = mean over stages k..n_models
    std::vector<double> final_kwh;
};

/// Runs stages 1..n in order. A non-finite stage output throws NumericError naming the stage.
ForecastResult cascade_predict(const JitEnsemble& ensemble, const Tensor& encoder, const Tensor& observed,
                               Date last_observed, const data::FeatureTransforms& transforms);

/// Appends "window_id,stage,offset,value" rows (no header) for every retained stage prediction.
void write_prediction_log(std::ostream& out, std::size_t window_id, const ForecastResult& result);
void write_prediction_log_header(std::ostream& out);

struct StageLog {
    std::size_t stage = 0;
    std::size_t window = 0;
    Tensor decoder_input;
};

/// Trains stages strictly in order. Decoder inputs of stage j come from the
/// frozen stages < j run on the same windows; targets are the days after the
/// first observed day up to offset j.
class CascadeTrainer {
public:
    CascadeTrainer(JitEnsemble& ensemble, std::span<const train::WindowSample> train_windows,
                   std::span<const train::WindowSample> val_windows, const data::FeatureTransforms& transforms);

    std::size_t next_stage() const noexcept { return trained_ + 1; }
    /// Throws std::logic_error unless stage == next_stage().
    train::TrainHistory train_stage(std::size_t stage, const train::TrainConfig& config);

    /// Keeps every decoder input built for training when enabled.
    void enable_input_log(bool on) { log_inputs_ = on; }
    const std::vector<StageLog>& input_log() const noexcept { return input_log_; }
    const std::vector<CascadeState>& train_states() const noexcept { return train_states_; }

private:
    std::vector<train::Example> examples_for(std::size_t stage, std::span<const train::WindowSample> windows,
                                             const std::vector<CascadeState>& states, bool log);
    void advance(std::size_t stage, std::span<const train::WindowSample> windows,
                 std::vector<CascadeState>& states);

    JitEnsemble& ensemble_;
    std::span<const train::WindowSample> train_;
    std::span<const train::WindowSample> val_;
    const data::FeatureTransforms& transforms_;
    std::vector<CascadeState> train_states_, val_states_;
    std::size_t trained_ = 0;
    bool log_inputs_ = false;
    std::vector<StageLog> input_log_;
};

}  // namespace jitcast::jit
