#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "jitcast/parameters.hpp"
#include "jitcast/tensor.hpp"

namespace jitcast {

struct AdamState {
    std::size_t step_count = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::vector<Tensor> first_moment;
    std::vector<Tensor> second_moment;
};

/// Zeroed moments shaped like `params`.
AdamState make_adam_state(const ParameterSet& params, double beta1 = 0.9, double beta2 = 0.999,
                          double epsilon = 1e-8);

/// One bias-corrected Adam update. Gradients are validated before anything
/// is modified: a NaN/inf gradient throws NumericError and leaves params and
/// state untouched.
void adam_step(ParameterSet& params, std::span<const Tensor> grads, AdamState& state, double lr);

}  // namespace jitcast
