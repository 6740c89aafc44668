#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "jitcast/autodiff.hpp"
#include "jitcast/rng.hpp"
#include "jitcast/tensor.hpp"

namespace jitcast {

struct Parameter {
    std::string name;
    Tensor value;

    friend bool operator==(const Parameter&, const Parameter&) = default;
};

/// Ordered, named collection of trainable tensors.
class ParameterSet {
public:
    std::size_t add(std::string name, Tensor value);

    std::size_t size() const noexcept { return items_.size(); }
    std::size_t scalar_count() const noexcept;
    Parameter& operator[](std::size_t i) { return items_[i]; }
    const Parameter& operator[](std::size_t i) const { return items_[i]; }
    auto begin() { return items_.begin(); }
    auto end() { return items_.end(); }
    auto begin() const { return items_.begin(); }
    auto end() const { return items_.end(); }

    /// Index of the parameter called `name`; throws std::out_of_range.
    std::size_t index_of(const std::string& name) const;

    /// Records every parameter on `tape`, as variables or (for inference) constants.
    std::vector<ad::Var> bind(ad::Tape& tape, bool trainable) const;

    friend bool operator==(const ParameterSet&, const ParameterSet&) = default;

private:
    std::vector<Parameter> items_;
};

/// Uniform in +-1/sqrt(fan_in), with fan_in = rows for a weight matrix.
Tensor init_uniform(std::size_t rows, std::size_t cols, Rng& rng);

}  // namespace jitcast
