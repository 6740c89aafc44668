#include "jitcast/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "jitcast/errors.hpp"

namespace jitcast {

namespace {

std::size_t element_count(const Shape& shape) {
    if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
    for (auto d : shape) {
        if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape));
    }
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

std::string shape_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
    data_.assign(element_count(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
    if (element_count(shape_) != data_.size()) {
        throw ShapeError("shape " + shape_string(shape_) + " does not match " +
                         std::to_string(data_.size()) + " values");
    }
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, double fill) {
    return Tensor({rows, cols}, fill);
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> values;
    values.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw ShapeError("ragged rows in Tensor::from_rows");
        values.insert(values.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(values));
}

Tensor Tensor::row(std::vector<double> values) {
    const std::size_t n = values.size();
    return Tensor({1, n}, std::move(values));
}

Tensor Tensor::scalar(double value) { return Tensor({1, 1}, value); }

std::span<const double> Tensor::row_span(std::size_t r) const {
    return std::span<const double>(data_).subspan(r * cols(), cols());
}

std::span<double> Tensor::row_span(std::size_t r) {
    return std::span<double>(data_).subspan(r * cols(), cols());
}

double Tensor::item() const {
    if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape_));
    return data_[0];
}

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

}  // namespace jitcast
