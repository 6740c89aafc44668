#pragma once

// Central finite-difference oracle for tape gradients. Test-only: it evaluates
// the forward graph with plain value perturbations and never touches backward().

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "jitcast/autodiff.hpp"
#include "jitcast/tensor.hpp"

namespace jitcast::testing {

using GraphBuilder = std::function<ad::Var(ad::Tape&, std::span<const ad::Var>)>;

/// Relative error with an absolute floor so that vanishing gradients compare
/// on an absolute scale (1e-6) instead of amplifying round-off.
inline double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    return std::abs(analytic - numeric) / denom;
}

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t checked = 0;
    std::string worst;
};

inline double evaluate(const GraphBuilder& build, const std::vector<Tensor>& inputs) {
    ad::Tape tape;
    std::vector<ad::Var> vars;
    for (const auto& t : inputs) vars.push_back(tape.constant(t));
    return build(tape, vars).value().item();
}

inline GradCheckResult check_gradients(const GraphBuilder& build, std::vector<Tensor> inputs,
                                       double eps = 1e-5,
                                       std::vector<std::string> names = {}) {
    ad::Tape tape;
    std::vector<ad::Var> vars;
    for (const auto& t : inputs) vars.push_back(tape.variable(t));
    ad::Var loss = build(tape, vars);
    tape.backward(loss);

    GradCheckResult result;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const Tensor analytic = tape.grad(vars[i]);
        for (std::size_t j = 0; j < inputs[i].size(); ++j) {
            const double saved = inputs[i][j];
            inputs[i][j] = saved + eps;
            const double up = evaluate(build, inputs);
            inputs[i][j] = saved - eps;
            const double down = evaluate(build, inputs);
            inputs[i][j] = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double err = relative_error(analytic[j], numeric);
            ++result.checked;
            if (err > result.max_relative_error) {
                result.max_relative_error = err;
                result.worst = (i < names.size() ? names[i] : "input " + std::to_string(i)) + "[" +
                               std::to_string(j) + "] analytic=" + std::to_string(analytic[j]) +
                               " numeric=" + std::to_string(numeric);
            }
        }
    }
    return result;
}

inline Tensor random_tensor(std::size_t rows, std::size_t cols, unsigned seed, double lo = -1.0,
                            double hi = 1.0) {
    Tensor t = Tensor::matrix(rows, cols);
    std::uint64_t state = seed * 0x9E3779B97F4A7C15ULL + 1;
    for (double& v : t.values()) {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        v = lo + (hi - lo) * static_cast<double>(state >> 11) * 0x1.0p-53;
    }
    return t;
}

}  // namespace jitcast::testing
