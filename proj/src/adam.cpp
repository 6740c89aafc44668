#include "jitcast/adam.hpp"

#include <cmath>
#include <string>

#include "jitcast/errors.hpp"

namespace jitcast {

AdamState make_adam_state(const ParameterSet& params, double beta1, double beta2,
                          double epsilon) {
    AdamState s;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.epsilon = epsilon;
    for (const auto& p : params) {
        s.first_moment.emplace_back(p.value.shape(), 0.0);
        s.second_moment.emplace_back(p.value.shape(), 0.0);
    }
    return s;
}

void adam_step(ParameterSet& params, std::span<const Tensor> grads, AdamState& state, double lr) {
    if (!(lr > 0.0)) throw std::invalid_argument("adam_step: learning rate must be positive");
    if (grads.size() != params.size() || state.first_moment.size() != params.size() ||
        state.second_moment.size() != params.size()) {
        throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameters but " +
                         std::to_string(grads.size()) + " gradients / " +
                         std::to_string(state.first_moment.size()) + " moment buffers");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (grads[i].size() != params[i].value.size() ||
            state.first_moment[i].size() != params[i].value.size()) {
            throw ShapeError("adam_step: gradient shape " + shape_string(grads[i].shape()) +
                             " does not match parameter '" + params[i].name + "' " +
                             shape_string(params[i].value.shape()));
        }
        if (!grads[i].all_finite()) {
            throw NumericError("adam_step: non-finite gradient for parameter '" + params[i].name +
                               "' at step " + std::to_string(state.step_count + 1));
        }
    }

    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = params[i].value;
        Tensor& m = state.first_moment[i];
        Tensor& v = state.second_moment[i];
        const Tensor& g = grads[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
            const double m_hat = m[j] / bc1;
            const double v_hat = v[j] / bc2;
            p[j] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
        }
    }
}

}  // namespace jitcast
