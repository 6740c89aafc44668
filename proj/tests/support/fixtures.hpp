#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "jitcast/ensemble.hpp"
#include "jitcast/features.hpp"
#include "jitcast/readings.hpp"

namespace jitcast::testing {

/// Weekly pattern on a slow seasonal swing; no noise.
inline data::DailySeries smooth_series(std::size_t n, double level = 1.0, Date start = make_date(2021, 3, 1)) {
    data::DailySeries s{"s", start, {}};
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i);
        s.values.push_back(level * (1.0 + 0.3 * std::sin(2.0 * std::numbers::pi * t / 120.0)) *
                           (1.0 + 0.1 * std::cos(2.0 * std::numbers::pi * t / 7.0)));
    }
    return s;
}

inline jit::JitEnsembleConfig tiny_ensemble_config(std::size_t encoder_len = 10) {
    jit::JitEnsembleConfig c;
    c.encoder_len = encoder_len;
    c.model.d_model = 8;
    c.model.n_heads = 2;
    c.model.d_ff = 16;
    c.model.n_encoder_layers = 1;
    c.model.n_decoder_layers = 1;
    return c;
}

}  // namespace jitcast::testing
