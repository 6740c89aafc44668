#include "jitcast/transformer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "jitcast/errors.hpp"
#include "jitcast/rng.hpp"

namespace jitcast::model {

void ModelConfig::validate() const {
    if (d_model == 0 || n_heads == 0 || d_ff == 0 || input_feature_dim == 0) {
        throw std::invalid_argument("model config: dimensions must be positive");
    }
    if (d_model % n_heads != 0) {
        throw std::invalid_argument("model config: d_model " + std::to_string(d_model) +
                                    " is not divisible by n_heads " + std::to_string(n_heads));
    }
    if (!(layer_norm_eps > 0.0)) throw std::invalid_argument("model config: layer_norm_eps must be > 0");
}

Tensor positional_encoding(std::size_t seq_len, std::size_t d_model) {
    Tensor pe = Tensor::matrix(seq_len, d_model);
    for (std::size_t pos = 0; pos < seq_len; ++pos) {
        for (std::size_t i = 0; i < d_model; ++i) {
            const double angle = static_cast<double>(pos) /
                                 std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d_model));
            pe(pos, i) = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
        }
    }
    return pe;
}

AttentionOutput attention(ad::Var q, ad::Var k, ad::Var v, const ad::Mask* mask) {
    const Tensor& qv = q.value();
    const Tensor& kv = k.value();
    if (qv.cols() != kv.cols()) {
        throw ShapeError("attention: query " + shape_string(qv.shape()) + " and key " +
                         shape_string(kv.shape()) + " differ in key dimension");
    }
    if (kv.rows() != v.value().rows()) {
        throw ShapeError("attention: " + std::to_string(kv.rows()) + " keys but " +
                         std::to_string(v.value().rows()) + " values");
    }
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(qv.cols()));
    ad::Var weights = ad::softmax_rows(ad::scale(ad::matmul_bt(q, k), inv_sqrt_dk), mask);
    return {ad::matmul(weights, v), weights};
}

ad::Var multi_head_attention(ad::Var x_q, ad::Var x_kv, const AttentionParams& p, std::size_t n_heads,
                             const ad::Mask* mask, std::vector<ad::Var>* head_weights) {
    const std::size_t d_model = p.wq.value().cols();
    if (n_heads == 0 || d_model % n_heads != 0) {
        throw std::invalid_argument("multi_head_attention: d_model " + std::to_string(d_model) +
                                    " is not divisible by n_heads " + std::to_string(n_heads));
    }
    const std::size_t dk = d_model / n_heads;
    ad::Var q = ad::matmul(x_q, p.wq);
    ad::Var k = ad::matmul(x_kv, p.wk);
    ad::Var v = ad::matmul(x_kv, p.wv);
    if (n_heads == 1) {
        auto a = attention(q, k, v, mask);
        if (head_weights) head_weights->push_back(a.weights);
        return ad::matmul(a.output, p.wo);
    }
    std::vector<ad::Var> heads;
    heads.reserve(n_heads);
    for (std::size_t h = 0; h < n_heads; ++h) {
        auto a = attention(ad::slice_cols(q, h * dk, dk), ad::slice_cols(k, h * dk, dk),
                           ad::slice_cols(v, h * dk, dk), mask);
        if (head_weights) head_weights->push_back(a.weights);
        heads.push_back(a.output);
    }
    return ad::matmul(ad::concat_cols(heads), p.wo);
}

ad::Var ffn(ad::Var h, ad::Var w1, ad::Var b1, ad::Var w2, ad::Var b2) {
    return ad::add_row(ad::matmul(ad::relu(ad::add_row(ad::matmul(h, w1), b1)), w2), b2);
}

namespace {

struct Builder {
    ParameterSet& params;
    Rng& rng;

    std::size_t weight(const std::string& name, std::size_t rows, std::size_t cols) {
        return params.add(name, init_uniform(rows, cols, rng));
    }
    std::size_t constant(const std::string& name, std::size_t cols, double value) {
        return params.add(name, Tensor::matrix(1, cols, value));
    }
    AttentionSlots attention(const std::string& prefix, std::size_t d) {
        return {weight(prefix + ".wq", d, d), weight(prefix + ".wk", d, d), weight(prefix + ".wv", d, d),
                weight(prefix + ".wo", d, d)};
    }
    NormSlots norm(const std::string& prefix, std::size_t d) {
        return {constant(prefix + ".gain", d, 1.0), constant(prefix + ".bias", d, 0.0)};
    }
    FfnSlots ffn(const std::string& prefix, std::size_t d, std::size_t d_ff) {
        const std::size_t w1 = weight(prefix + ".w1", d, d_ff);
        const std::size_t b1 = constant(prefix + ".b1", d_ff, 0.0);
        const std::size_t w2 = weight(prefix + ".w2", d_ff, d);
        const std::size_t b2 = constant(prefix + ".b2", d, 0.0);
        return {w1, b1, w2, b2};
    }
};

AttentionParams bind_attention(std::span<const ad::Var> b, const AttentionSlots& s) {
    return {b[s.wq], b[s.wk], b[s.wv], b[s.wo]};
}

ad::Var add_norm(std::span<const ad::Var> b, ad::Var x, ad::Var sublayer, const NormSlots& s, double eps) {
    return ad::layer_norm(ad::add(x, sublayer), b[s.gain], b[s.bias], eps);
}

ad::Var apply_ffn(std::span<const ad::Var> b, ad::Var h, const FfnSlots& s) {
    return ffn(h, b[s.w1], b[s.b1], b[s.w2], b[s.b2]);
}

}  // namespace

Transformer Transformer::initialize(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    Transformer t;
    t.config_ = config;
    Rng rng(seed);
    Builder b{t.params_, rng};
    const std::size_t d = config.d_model;
    t.embed_w_ = b.weight("embed.w", config.input_feature_dim, d);
    t.embed_b_ = b.constant("embed.b", d, 0.0);
    for (std::size_t l = 0; l < config.n_encoder_layers; ++l) {
        const std::string p = "encoder." + std::to_string(l);
        EncoderLayerSlots s;
        s.self = b.attention(p + ".self", d);
        s.norm1 = b.norm(p + ".norm1", d);
        s.ffn = b.ffn(p + ".ffn", d, config.d_ff);
        s.norm2 = b.norm(p + ".norm2", d);
        t.encoder_.push_back(s);
    }
    for (std::size_t l = 0; l < config.n_decoder_layers; ++l) {
        const std::string p = "decoder." + std::to_string(l);
        DecoderLayerSlots s;
        s.self = b.attention(p + ".self", d);
        s.norm1 = b.norm(p + ".norm1", d);
        s.cross = b.attention(p + ".cross", d);
        s.norm2 = b.norm(p + ".norm2", d);
        s.ffn = b.ffn(p + ".ffn", d, config.d_ff);
        s.norm3 = b.norm(p + ".norm3", d);
        t.decoder_.push_back(s);
    }
    t.head_w_ = b.weight("head.w", d, 1);
    t.head_b_ = b.constant("head.b", 1, 0.0);
    return t;
}

Transformer Transformer::from_parameters(const ModelConfig& config, ParameterSet params) {
    Transformer t = initialize(config, 0);
    if (params.size() != t.params_.size()) {
        throw std::invalid_argument("transformer: expected " + std::to_string(t.params_.size()) +
                                    " parameter tensors, got " + std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& want = t.params_[i];
        const auto& got = params[i];
        if (want.name != got.name || want.value.shape() != got.value.shape()) {
            throw std::invalid_argument("transformer: parameter " + std::to_string(i) + " is '" + got.name +
                                        "' " + shape_string(got.value.shape()) + ", expected '" +
                                        want.name + "' " + shape_string(want.value.shape()));
        }
        if (!got.value.all_finite()) {
            throw NumericError("transformer: parameter '" + got.name + "' has non-finite values");
        }
    }
    t.params_ = std::move(params);
    return t;
}

ad::Var Transformer::embed(ad::Tape& tape, std::span<const ad::Var> b, const Tensor& features) const {
    if (features.cols() != config_.input_feature_dim || features.rows() == 0) {
        throw ShapeError("transformer: input " + shape_string(features.shape()) + " needs " +
                         std::to_string(config_.input_feature_dim) + " feature columns");
    }
    ad::Var x = tape.constant(features);
    ad::Var projected = ad::add_row(ad::matmul(x, b[embed_w_]), b[embed_b_]);
    return ad::add(projected, tape.constant(positional_encoding(features.rows(), config_.d_model)));
}

ad::Var Transformer::encode(ad::Tape& tape, std::span<const ad::Var> b, const Tensor& encoder_input) const {
    ad::Var h = embed(tape, b, encoder_input);
    const double eps = config_.layer_norm_eps;
    for (const auto& s : encoder_) {
        h = add_norm(b, h, multi_head_attention(h, h, bind_attention(b, s.self), config_.n_heads), s.norm1, eps);
        h = add_norm(b, h, apply_ffn(b, h, s.ffn), s.norm2, eps);
    }
    return h;
}

ad::Var Transformer::decode(ad::Tape& tape, std::span<const ad::Var> b, const Tensor& decoder_input,
                            ad::Var memory) const {
    ad::Var h = embed(tape, b, decoder_input);
    const ad::Mask causal = ad::Mask::causal(decoder_input.rows());
    const double eps = config_.layer_norm_eps;
    for (const auto& s : decoder_) {
        h = add_norm(b, h, multi_head_attention(h, h, bind_attention(b, s.self), config_.n_heads, &causal),
                     s.norm1, eps);
        h = add_norm(b, h, multi_head_attention(h, memory, bind_attention(b, s.cross), config_.n_heads),
                     s.norm2, eps);
        h = add_norm(b, h, apply_ffn(b, h, s.ffn), s.norm3, eps);
    }
    ad::Var out = ad::add_row(ad::matmul(h, b[head_w_]), b[head_b_]);
    if (config_.residual_output) {
        Tensor first = Tensor::matrix(decoder_input.rows(), 1);
        for (std::size_t r = 0; r < decoder_input.rows(); ++r) first(r, 0) = decoder_input(r, 0);
        out = ad::add(out, tape.constant(std::move(first)));
    }
    return out;
}

ad::Var Transformer::forward(ad::Tape& tape, std::span<const ad::Var> bound, const Tensor& encoder_input,
                             const Tensor& decoder_input) const {
    if (bound.size() != params_.size()) {
        throw std::invalid_argument("transformer: " + std::to_string(bound.size()) +
                                    " bound parameters for a model with " + std::to_string(params_.size()));
    }
    return decode(tape, bound, decoder_input, encode(tape, bound, encoder_input));
}

std::vector<double> Transformer::predict(const Tensor& encoder_input, const Tensor& decoder_input) const {
    ad::Tape tape;
    const auto bound = params_.bind(tape, false);
    const Tensor& out = forward(tape, bound, encoder_input, decoder_input).value();
    return {out.values().begin(), out.values().end()};
}

}  // namespace jitcast::model
