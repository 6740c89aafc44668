#include "jitcast/windows.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace jitcast::train {

void WindowLayout::validate() const {
    if (encoder_len == 0 || observed_len < 2 || horizon == 0) {
        throw std::invalid_argument("window layout: encoder_len >= 1, observed_len >= 2, horizon >= 1 required");
    }
}

std::vector<WindowSample> make_windows(const data::FeatureFrame& frame, const WindowLayout& layout) {
    layout.validate();
    const std::size_t span = layout.span();
    if (frame.size() < span) {
        throw std::invalid_argument("make_windows: series has " + std::to_string(frame.size()) +
                                    " days, at least " + std::to_string(span) + " required");
    }
    auto rows = [&](std::size_t first, std::size_t count) {
        Tensor t = Tensor::matrix(count, 3);
        for (std::size_t r = 0; r < count; ++r)
            for (std::size_t c = 0; c < 3; ++c) t(r, c) = frame.model_rows[first + r][c];
        return t;
    };
    std::vector<WindowSample> out;
    out.reserve(frame.size() - span + 1);
    for (std::size_t s = 0; s + span <= frame.size(); ++s) {
        WindowSample w;
        w.start = s;
        const std::size_t first_observed = s + layout.encoder_len - 1;
        w.last_observed = frame.date_at(first_observed + layout.observed_len - 1);
        w.encoder = rows(s, layout.encoder_len);
        w.observed = rows(first_observed, layout.observed_len);
        for (std::size_t d = 1; d <= layout.target_len(); ++d) {
            w.targets.push_back(frame.model_rows[first_observed + d][0]);
            w.targets_kwh.push_back(frame.sma7[first_observed + d]);
        }
        out.push_back(std::move(w));
    }
    return out;
}

Split split_chronological(std::vector<WindowSample> samples, double train_fraction, double val_fraction,
                          double test_fraction) {
    if (!(train_fraction > 0 && val_fraction > 0 && test_fraction > 0) ||
        std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9) {
        throw std::invalid_argument("split_chronological: fractions must be positive and sum to 1");
    }
    const std::size_t n = samples.size();
    const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * val_fraction + 1e-9));
    const auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * test_fraction + 1e-9));
    if (n_val == 0 || n_test == 0 || n_val + n_test >= n) {
        throw std::invalid_argument("split_chronological: " + std::to_string(n) +
                                    " samples leave an empty split");
    }
    const std::size_t n_train = n - n_val - n_test;
    Split s;
    auto it = std::make_move_iterator(samples.begin());
    s.train.assign(it, it + static_cast<std::ptrdiff_t>(n_train));
    s.val.assign(it + static_cast<std::ptrdiff_t>(n_train), it + static_cast<std::ptrdiff_t>(n_train + n_val));
    s.test.assign(it + static_cast<std::ptrdiff_t>(n_train + n_val), std::make_move_iterator(samples.end()));
    return s;
}

std::size_t purge_overlap(Split& split, const WindowLayout& layout) {
    std::size_t first_held_out = static_cast<std::size_t>(-1);
    if (!split.val.empty()) first_held_out = std::min(first_held_out, split.val.front().start);
    if (!split.test.empty()) first_held_out = std::min(first_held_out, split.test.front().start);
    const std::size_t before = split.train.size();
    std::erase_if(split.train, [&](const WindowSample& w) { return w.start + layout.span() > first_held_out; });
    if (split.train.empty()) throw std::invalid_argument("purge_overlap: no training samples left");
    return before - split.train.size();
}

std::size_t training_day_extent(const Split& split, const WindowLayout& layout) {
    if (split.train.empty()) throw std::invalid_argument("training_day_extent: empty training split");
    return split.train.back().start + layout.span();
}

}  // namespace jitcast::train
