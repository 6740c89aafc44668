#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "jitcast/date.hpp"
#include "jitcast/features.hpp"
#include "jitcast/tensor.hpp"

namespace jitcast::train {

/// Day layout of one sample: encoder days, then an observed week that shares
/// the encoder's last day, then the forecast horizon.
struct WindowLayout {
    std::size_t encoder_len = 30;
    std::size_t observed_len = 7;
    std::size_t horizon = 7;

    /// Consecutive days covered by one sample (43 by default).
    std::size_t span() const { return encoder_len + observed_len - 1 + horizon; }
    /// Target days following the first observed day (13 by default).
    std::size_t target_len() const { return observed_len - 1 + horizon; }
    void validate() const;
};

struct WindowSample {
    std::size_t start = 0;     // index of the first encoder day in the frame
    Date last_observed;        // forecast origin; offset k is this day + k
    Tensor encoder;            // encoder_len x 3
    Tensor observed;           // observed_len x 3
    std::vector<double> targets;      // scaled SMA_7 for the target_len days after the first observed day
    std::vector<double> targets_kwh;  // same days in kWh

    /// Scaled / kWh target at forecast offset k (1-based).
    double target_at(std::size_t k, std::size_t observed_len) const { return targets[observed_len - 2 + k]; }
    double target_kwh_at(std::size_t k, std::size_t observed_len) const {
        return targets_kwh[observed_len - 2 + k];
    }
};

/// One sample per start day with stride 1: frame.size() - span + 1 samples.
std::vector<WindowSample> make_windows(const data::FeatureFrame& frame, const WindowLayout& layout = {});

struct Split {
    std::vector<WindowSample> train, val, test;
};

/// Contiguous blocks in time order; val and test sizes are floor(n * fraction),
/// the remainder goes to train. Throws if any block would be empty.
Split split_chronological(std::vector<WindowSample> samples, double train_fraction = 0.8,
                          double val_fraction = 0.1, double test_fraction = 0.1);

/// Drops training samples whose day span reaches the first validation or test
/// sample's first day. Returns the number dropped; throws if none would remain.
std::size_t purge_overlap(Split& split, const WindowLayout& layout);

/// Number of days [0, n) needed to cover every training sample.
std::size_t training_day_extent(const Split& split, const WindowLayout& layout);

}  // namespace jitcast::train
