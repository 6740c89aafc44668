#include "jitcast/parameters.hpp"

#include <cmath>
#include <stdexcept>

namespace jitcast {

std::size_t ParameterSet::add(std::string name, Tensor value) {
    items_.push_back({std::move(name), std::move(value)});
    return items_.size() - 1;
}

std::size_t ParameterSet::scalar_count() const noexcept {
    std::size_t n = 0;
    for (const auto& p : items_) n += p.value.size();
    return n;
}

std::size_t ParameterSet::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < items_.size(); ++i)
        if (items_[i].name == name) return i;
    throw std::out_of_range("no parameter named '" + name + "'");
}

std::vector<ad::Var> ParameterSet::bind(ad::Tape& tape, bool trainable) const {
    std::vector<ad::Var> vars;
    vars.reserve(items_.size());
    for (const auto& p : items_) {
        vars.push_back(trainable ? tape.variable(p.value) : tape.constant(p.value));
    }
    return vars;
}

Tensor init_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
    Tensor t = Tensor::matrix(rows, cols);
    for (double& v : t.values()) v = uniform(rng, -bound, bound);
    return t;
}

}  // namespace jitcast
