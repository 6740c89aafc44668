#include "jitcast/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "jitcast/errors.hpp"
#include "jitcast/kernels.hpp"

namespace jitcast::ad {

const Tensor& Var::value() const { return tape->value(id); }
bool Var::requires_grad() const { return tape->requires_grad(id); }

Mask::Mask(std::size_t rows, std::size_t cols, bool fill)
    : rows_(rows), cols_(cols), bits_(rows * cols, fill ? 1 : 0) {}

Mask Mask::causal(std::size_t n) {
    Mask m(n, n);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = r + 1; c < n; ++c) m.set(r, c, true);
    return m;
}

Var Tape::variable(Tensor value) { return record(std::move(value), true, nullptr); }

Var Tape::constant(Tensor value) { return record(std::move(value), false, nullptr); }

Var Tape::record(Tensor value, bool requires_grad, BackwardFn backward) {
    Node node;
    node.value = std::move(value);
    node.requires_grad = requires_grad;
    if (requires_grad) node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return Var{this, nodes_.size() - 1};
}

Tensor Tape::grad(Var v) const {
    const Node& n = nodes_.at(v.id);
    if (n.grad.empty()) return Tensor(n.value.shape(), 0.0);
    return n.grad;
}

Tensor& Tape::grad_buffer(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad = Tensor(n.value.shape(), 0.0);
    return n.grad;
}

const Tensor* Tape::grad_if_any(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.grad.empty() ? nullptr : &n.grad;
}

void Tape::backward(Var loss) {
    if (loss.tape != this || loss.id >= nodes_.size()) {
        throw std::logic_error("backward: loss was not recorded on this tape");
    }
    if (!nodes_[loss.id].requires_grad) {
        throw std::logic_error("backward: loss is detached (no input requires a gradient)");
    }
    if (nodes_[loss.id].value.size() != 1) {
        throw ShapeError("backward: loss must be a scalar, got " +
                         shape_string(nodes_[loss.id].value.shape()));
    }
    grad_buffer(loss.id)[0] += 1.0;
    for (std::size_t id = loss.id + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (n.backward && !n.grad.empty()) n.backward(*this, id);
    }
}

void Tape::clear() { nodes_.clear(); }

namespace {

void require_same_tape(Var a, Var b) {
    if (a.tape != b.tape) throw std::logic_error("operands recorded on different tapes");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.size() != b.size() || a.rows() != b.rows()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
    }
}

Tensor zeros_like(const Tensor& t) { return Tensor::matrix(t.rows(), t.cols()); }

}  // namespace

Var matmul(Var a, Var b) {
    require_same_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
    if (k != bv.rows()) {
        throw ShapeError("matmul: shape mismatch " + shape_string(av.shape()) + " x " +
                         shape_string(bv.shape()));
    }
    Tensor out = Tensor::matrix(m, n);
    kernels::matmul_acc(av.data(), bv.data(), out.data(), m, k, n);
    const std::size_t ia = a.id, ib = b.id;
    return a.tape->record(std::move(out), a.requires_grad() || b.requires_grad(),
                          [ia, ib, m, k, n](Tape& t, std::size_t self) {
                              const Tensor& g = *t.grad_if_any(self);
                              if (t.requires_grad(ia)) {
                                  kernels::matmul_bt_acc(g.data(), t.value(ib).data(),
                                                         t.grad_buffer(ia).data(), m, n, k);
                              }
                              if (t.requires_grad(ib)) {
                                  kernels::matmul_at_acc(t.value(ia).data(), g.data(),
                                                         t.grad_buffer(ib).data(), m, k, n);
                              }
                          });
}

Var matmul_bt(Var a, Var b) {
    require_same_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    const std::size_t m = av.rows(), k = av.cols(), n = bv.rows();
    if (k != bv.cols()) {
        throw ShapeError("matmul_bt: shape mismatch " + shape_string(av.shape()) + " x " +
                         shape_string(bv.shape()) + "^T");
    }
    Tensor out = Tensor::matrix(m, n);
    kernels::matmul_bt_acc(av.data(), bv.data(), out.data(), m, k, n);
    const std::size_t ia = a.id, ib = b.id;
    return a.tape->record(std::move(out), a.requires_grad() || b.requires_grad(),
                          [ia, ib, m, k, n](Tape& t, std::size_t self) {
                              const Tensor& g = *t.grad_if_any(self);
                              if (t.requires_grad(ia)) {
                                  kernels::matmul_acc(g.data(), t.value(ib).data(),
                                                      t.grad_buffer(ia).data(), m, n, k);
                              }
                              if (t.requires_grad(ib)) {
                                  kernels::matmul_at_acc(g.data(), t.value(ia).data(),
                                                         t.grad_buffer(ib).data(), m, n, k);
                              }
                          });
}

namespace {

template <typename Fwd, typename DA, typename DB>
Var binary_elementwise(Var a, Var b, const char* name, Fwd fwd, DA da, DB db) {
    require_same_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    require_same_shape(av, bv, name);
    Tensor out = zeros_like(av);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i], bv[i]);
    const std::size_t ia = a.id, ib = b.id;
    return a.tape->record(std::move(out), a.requires_grad() || b.requires_grad(),
                          [ia, ib, da, db](Tape& t, std::size_t self) {
                              const Tensor& g = *t.grad_if_any(self);
                              const Tensor& x = t.value(ia);
                              const Tensor& y = t.value(ib);
                              if (t.requires_grad(ia)) {
                                  Tensor& gx = t.grad_buffer(ia);
                                  for (std::size_t i = 0; i < g.size(); ++i)
                                      gx[i] += da(g[i], x[i], y[i]);
                              }
                              if (t.requires_grad(ib)) {
                                  Tensor& gy = t.grad_buffer(ib);
                                  for (std::size_t i = 0; i < g.size(); ++i)
                                      gy[i] += db(g[i], x[i], y[i]);
                              }
                          });
}

template <typename Fwd, typename Deriv>
Var unary_elementwise(Var a, Fwd fwd, Deriv deriv) {
    const Tensor& av = a.value();
    Tensor out = zeros_like(av);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i]);
    const std::size_t ia = a.id;
    return a.tape->record(std::move(out), a.requires_grad(), [ia, deriv](Tape& t, std::size_t self) {
        const Tensor& g = *t.grad_if_any(self);
        const Tensor& x = t.value(ia);
        Tensor& gx = t.grad_buffer(ia);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * deriv(x[i]);
    });
}

}  // namespace

Var add(Var a, Var b) {
    return binary_elementwise(
        a, b, "add", [](double x, double y) { return x + y; },
        [](double g, double, double) { return g; }, [](double g, double, double) { return g; });
}

Var sub(Var a, Var b) {
    return binary_elementwise(
        a, b, "sub", [](double x, double y) { return x - y; },
        [](double g, double, double) { return g; }, [](double g, double, double) { return -g; });
}

Var mul(Var a, Var b) {
    return binary_elementwise(
        a, b, "mul", [](double x, double y) { return x * y; },
        [](double g, double, double y) { return g * y; },
        [](double g, double x, double) { return g * x; });
}

Var add_row(Var a, Var row) {
    require_same_tape(a, row);
    const Tensor& av = a.value();
    const Tensor& rv = row.value();
    const std::size_t m = av.rows(), n = av.cols();
    if (rv.size() != n) {
        throw ShapeError("add_row: row " + shape_string(rv.shape()) + " does not broadcast over " +
                         shape_string(av.shape()));
    }
    Tensor out = zeros_like(av);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) out(r, c) = av(r, c) + rv[c];
    const std::size_t ia = a.id, ir = row.id;
    return a.tape->record(std::move(out), a.requires_grad() || row.requires_grad(),
                          [ia, ir, m, n](Tape& t, std::size_t self) {
                              const Tensor& g = *t.grad_if_any(self);
                              if (t.requires_grad(ia)) {
                                  Tensor& ga = t.grad_buffer(ia);
                                  for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                              }
                              if (t.requires_grad(ir)) {
                                  Tensor& gr = t.grad_buffer(ir);
                                  for (std::size_t r = 0; r < m; ++r)
                                      for (std::size_t c = 0; c < n; ++c) gr[c] += g(r, c);
                              }
                          });
}

Var scale(Var a, double factor) {
    return unary_elementwise(
        a, [factor](double x) { return factor * x; }, [factor](double) { return factor; });
}

Var relu(Var a) {
    return unary_elementwise(
        a, [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Var square(Var a) {
    return unary_elementwise(
        a, [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

std::vector<double> softmax(std::span<const double> x) {
    if (x.empty()) throw ShapeError("softmax: empty input");
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : x) {
        if (!std::isfinite(v)) throw NumericError("softmax: non-finite input");
        mx = std::max(mx, v);
    }
    std::vector<double> out(x.size());
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = std::exp(x[i] - mx);
        total += out[i];
    }
    for (double& v : out) v /= total;
    return out;
}

Var softmax_rows(Var a, const Mask* mask) {
    const Tensor& av = a.value();
    const std::size_t m = av.rows(), n = av.cols();
    if (mask && (mask->rows() != m || mask->cols() != n)) {
        throw ShapeError("softmax_rows: mask is " + std::to_string(mask->rows()) + "x" +
                         std::to_string(mask->cols()) + " but scores are " +
                         shape_string(av.shape()));
    }
    Tensor out = zeros_like(av);
    for (std::size_t r = 0; r < m; ++r) {
        double mx = -std::numeric_limits<double>::infinity();
        bool any = false;
        for (std::size_t c = 0; c < n; ++c) {
            if (mask && (*mask)(r, c)) continue;
            const double v = av(r, c);
            if (!std::isfinite(v)) throw NumericError("softmax_rows: non-finite score");
            mx = std::max(mx, v);
            any = true;
        }
        if (!any) {
            throw std::invalid_argument("softmax_rows: row " + std::to_string(r) +
                                        " is fully masked");
        }
        double total = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
            if (mask && (*mask)(r, c)) continue;
            out(r, c) = std::exp(av(r, c) - mx);
            total += out(r, c);
        }
        for (std::size_t c = 0; c < n; ++c) out(r, c) /= total;
    }
    const std::size_t ia = a.id;
    return a.tape->record(std::move(out), a.requires_grad(), [ia, m, n](Tape& t, std::size_t self) {
        const Tensor& g = *t.grad_if_any(self);
        const Tensor& y = t.value(self);
        Tensor& gx = t.grad_buffer(ia);
        for (std::size_t r = 0; r < m; ++r) {
            double dot = 0.0;
            for (std::size_t c = 0; c < n; ++c) dot += g(r, c) * y(r, c);
            for (std::size_t c = 0; c < n; ++c) gx(r, c) += y(r, c) * (g(r, c) - dot);
        }
    });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
    require_same_tape(x, gain);
    require_same_tape(x, bias);
    const Tensor& xv = x.value();
    const std::size_t m = xv.rows(), n = xv.cols();
    if (gain.value().size() != n || bias.value().size() != n) {
        throw ShapeError("layer_norm: gain/bias must have " + std::to_string(n) + " entries");
    }
    const Tensor& gv = gain.value();
    const Tensor& bv = bias.value();
    Tensor normalized = zeros_like(xv);
    std::vector<double> inv_std(m);
    Tensor out = zeros_like(xv);
    for (std::size_t r = 0; r < m; ++r) {
        double mu = 0.0;
        for (std::size_t c = 0; c < n; ++c) mu += xv(r, c);
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t c = 0; c < n; ++c) var += (xv(r, c) - mu) * (xv(r, c) - mu);
        var /= static_cast<double>(n);
        inv_std[r] = 1.0 / std::sqrt(var + eps);
        for (std::size_t c = 0; c < n; ++c) {
            normalized(r, c) = (xv(r, c) - mu) * inv_std[r];
            out(r, c) = normalized(r, c) * gv[c] + bv[c];
        }
    }
    const std::size_t ix = x.id, ig = gain.id, ib = bias.id;
    const bool rg = x.requires_grad() || gain.requires_grad() || bias.requires_grad();
    return x.tape->record(
        std::move(out), rg,
        [ix, ig, ib, m, n, normalized = std::move(normalized),
         inv_std = std::move(inv_std)](Tape& t, std::size_t self) {
            const Tensor& g = *t.grad_if_any(self);
            const Tensor& gv = t.value(ig);
            if (t.requires_grad(ig)) {
                Tensor& gg = t.grad_buffer(ig);
                for (std::size_t r = 0; r < m; ++r)
                    for (std::size_t c = 0; c < n; ++c) gg[c] += g(r, c) * normalized(r, c);
            }
            if (t.requires_grad(ib)) {
                Tensor& gb = t.grad_buffer(ib);
                for (std::size_t r = 0; r < m; ++r)
                    for (std::size_t c = 0; c < n; ++c) gb[c] += g(r, c);
            }
            if (t.requires_grad(ix)) {
                Tensor& gx = t.grad_buffer(ix);
                const double inv_n = 1.0 / static_cast<double>(n);
                for (std::size_t r = 0; r < m; ++r) {
                    double mean_d = 0.0, mean_dx = 0.0;
                    for (std::size_t c = 0; c < n; ++c) {
                        const double d = g(r, c) * gv[c];
                        mean_d += d;
                        mean_dx += d * normalized(r, c);
                    }
                    mean_d *= inv_n;
                    mean_dx *= inv_n;
                    for (std::size_t c = 0; c < n; ++c) {
                        const double d = g(r, c) * gv[c];
                        gx(r, c) += inv_std[r] * (d - mean_d - normalized(r, c) * mean_dx);
                    }
                }
            }
        });
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    Tape* tape = parts[0].tape;
    const std::size_t m = parts[0].value().rows();
    std::size_t n = 0;
    bool rg = false;
    std::vector<std::size_t> ids, offsets, widths;
    for (const Var& p : parts) {
        if (p.tape != tape) throw std::logic_error("concat_cols: operands on different tapes");
        if (p.value().rows() != m) {
            throw ShapeError("concat_cols: row mismatch " + shape_string(p.value().shape()));
        }
        ids.push_back(p.id);
        offsets.push_back(n);
        widths.push_back(p.value().cols());
        n += p.value().cols();
        rg = rg || p.requires_grad();
    }
    Tensor out = Tensor::matrix(m, n);
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const Tensor& pv = parts[i].value();
        for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < widths[i]; ++c) out(r, offsets[i] + c) = pv(r, c);
    }
    return tape->record(std::move(out), rg, [ids, offsets, widths, m](Tape& t, std::size_t self) {
        const Tensor& g = *t.grad_if_any(self);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (!t.requires_grad(ids[i])) continue;
            Tensor& gp = t.grad_buffer(ids[i]);
            for (std::size_t r = 0; r < m; ++r)
                for (std::size_t c = 0; c < widths[i]; ++c) gp(r, c) += g(r, offsets[i] + c);
        }
    });
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
    const Tensor& av = a.value();
    const std::size_t m = av.rows(), n = av.cols();
    if (count == 0 || begin + count > n) {
        throw ShapeError("slice_cols: [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") out of range for " +
                         shape_string(av.shape()));
    }
    Tensor out = Tensor::matrix(m, count);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < count; ++c) out(r, c) = av(r, begin + c);
    const std::size_t ia = a.id;
    return a.tape->record(std::move(out), a.requires_grad(),
                          [ia, begin, count, m](Tape& t, std::size_t self) {
                              const Tensor& g = *t.grad_if_any(self);
                              Tensor& ga = t.grad_buffer(ia);
                              for (std::size_t r = 0; r < m; ++r)
                                  for (std::size_t c = 0; c < count; ++c)
                                      ga(r, begin + c) += g(r, c);
                          });
}

Var slice_rows(Var a, std::size_t begin, std::size_t count) {
    const Tensor& av = a.value();
    const std::size_t n = av.cols();
    if (count == 0 || begin + count > av.rows()) {
        throw ShapeError("slice_rows: [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") out of range for " +
                         shape_string(av.shape()));
    }
    Tensor out = Tensor::matrix(count, n);
    std::copy_n(av.data() + begin * n, count * n, out.data());
    const std::size_t ia = a.id;
    return a.tape->record(std::move(out), a.requires_grad(),
                          [ia, begin, count, n](Tape& t, std::size_t self) {
                              const Tensor& g = *t.grad_if_any(self);
                              Tensor& ga = t.grad_buffer(ia);
                              for (std::size_t i = 0; i < count * n; ++i)
                                  ga[begin * n + i] += g[i];
                          });
}

Var sum(Var a) {
    const Tensor& av = a.value();
    double total = 0.0;
    for (double v : av.values()) total += v;
    const std::size_t ia = a.id;
    return a.tape->record(Tensor::scalar(total), a.requires_grad(),
                          [ia](Tape& t, std::size_t self) {
                              const double g = (*t.grad_if_any(self))[0];
                              Tensor& ga = t.grad_buffer(ia);
                              for (double& v : ga.values()) v += g;
                          });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var mse(Var pred, const Tensor& target) {
    const Tensor& pv = pred.value();
    if (pv.size() != target.size()) {
        throw ShapeError("mse: prediction has " + std::to_string(pv.size()) +
                         " values but target has " + std::to_string(target.size()));
    }
    const double inv_n = 1.0 / static_cast<double>(pv.size());
    double total = 0.0;
    for (std::size_t i = 0; i < pv.size(); ++i) {
        const double d = pv[i] - target[i];
        total += d * d;
    }
    const std::size_t ip = pred.id;
    return pred.tape->record(Tensor::scalar(total * inv_n), pred.requires_grad(),
                             [ip, target, inv_n](Tape& t, std::size_t self) {
                                 const double g = (*t.grad_if_any(self))[0];
                                 const Tensor& p = t.value(ip);
                                 Tensor& gp = t.grad_buffer(ip);
                                 for (std::size_t i = 0; i < p.size(); ++i)
                                     gp[i] += g * 2.0 * (p[i] - target[i]) * inv_n;
                             });
}

}  // namespace jitcast::ad
