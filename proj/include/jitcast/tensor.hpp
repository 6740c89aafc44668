#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace jitcast {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

/// Dense row-major block of doubles. Rank-1 tensors behave as a single row
/// wherever a matrix view is needed.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Tensor row(std::vector<double> values);
    static Tensor scalar(double value);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }
    std::size_t rows() const noexcept {
        if (shape_.size() < 2) return shape_.empty() ? 0 : 1;
        return data_.size() / shape_.back();
    }
    std::size_t cols() const noexcept { return shape_.empty() ? 0 : shape_.back(); }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }
    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    std::span<const double> row_span(std::size_t r) const;
    std::span<double> row_span(std::size_t r);

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    double item() const;
    bool all_finite() const noexcept;
    bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }
    void fill(double value);

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

}  // namespace jitcast
