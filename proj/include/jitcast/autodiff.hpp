#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "jitcast/tensor.hpp"

namespace jitcast::ad {

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
    bool requires_grad() const;
};

/// Disallowed (query, key) pairs for masked softmax; true = masked.
class Mask {
public:
    Mask() = default;
    Mask(std::size_t rows, std::size_t cols, bool fill = false);

    static Mask causal(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool operator()(std::size_t r, std::size_t c) const { return bits_[r * cols_ + c] != 0; }
    void set(std::size_t r, std::size_t c, bool masked) { bits_[r * cols_ + c] = masked ? 1 : 0; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<unsigned char> bits_;
};

/// Linear record of forward operations. Nodes are appended in evaluation
/// order, so walking the record backwards is a reverse topological order.
/// A tape has a single owner and must not be shared while recording.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, std::size_t self)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var variable(Tensor value);
    Var constant(Tensor value);

    /// Appends an op result. `backward` is only kept when some parent needs a gradient.
    Var record(Tensor value, bool requires_grad, BackwardFn backward);

    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

    /// Accumulated gradient; zeros if nothing flowed into the node.
    Tensor grad(Var v) const;

    /// Gradient buffer of `id`, allocated on first use. For use inside BackwardFn.
    Tensor& grad_buffer(std::size_t id);
    const Tensor* grad_if_any(std::size_t id) const;

    /// Seeds d(loss)/d(loss) = 1 and replays the record in reverse.
    /// Throws std::logic_error for a loss that carries no gradient path.
    void backward(Var loss);

    std::size_t size() const noexcept { return nodes_.size(); }
    void clear();

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        BackwardFn backward;
    };
    std::vector<Node> nodes_;
};

Var matmul(Var a, Var b);
/// a * b^T
Var matmul_bt(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// Adds a 1 x n row to every row of an m x n matrix.
Var add_row(Var a, Var row);
Var scale(Var a, double factor);
Var relu(Var a);
Var square(Var a);
/// Row-wise softmax; masked entries get weight exactly 0.
Var softmax_rows(Var a, const Mask* mask = nullptr);
/// Row-wise (x - mean) / sqrt(var + eps) * gain + bias with population variance.
Var layer_norm(Var x, Var gain, Var bias, double eps);
Var concat_cols(std::span<const Var> parts);
Var slice_cols(Var a, std::size_t begin, std::size_t count);
Var slice_rows(Var a, std::size_t begin, std::size_t count);
/// Sum of all elements as a 1 x 1 tensor.
Var sum(Var a);
Var mean(Var a);
/// Mean squared difference against a constant target of the same size.
Var mse(Var pred, const Tensor& target);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }

/// Numerically stable softmax of a finite vector. Throws NumericError otherwise.
std::vector<double> softmax(std::span<const double> x);

}  // namespace jitcast::ad
