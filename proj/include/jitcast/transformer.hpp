#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "jitcast/autodiff.hpp"
#include "jitcast/parameters.hpp"
#include "jitcast/tensor.hpp"

namespace jitcast::model {

struct ModelConfig {
    std::size_t d_model = 32;
    std::size_t n_heads = 4;
    std::size_t d_ff = 64;
    std::size_t n_encoder_layers = 2;
    std::size_t n_decoder_layers = 2;
    std::size_t input_feature_dim = 3;
    double layer_norm_eps = 1e-12;
    /// Adds the decoder input's first channel to every output, so the network
    /// models the step from one day to the next.
    bool residual_output = false;

    std::size_t d_k() const { return d_model / n_heads; }
    /// Throws std::invalid_argument for zero dims or d_model % n_heads != 0.
    void validate() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// PE(pos, i) = sin(pos / 10000^(i/d)) for even i, cos(...) for odd i.
Tensor positional_encoding(std::size_t seq_len, std::size_t d_model);

struct AttentionOutput {
    ad::Var output;
    ad::Var weights;  // queries x keys
};

/// softmax(Q K^T / sqrt(d_k)) V with masked (query, key) pairs forced to weight 0.
AttentionOutput attention(ad::Var q, ad::Var k, ad::Var v, const ad::Mask* mask = nullptr);

struct AttentionParams {
    ad::Var wq, wk, wv, wo;
};

/// Heads are contiguous column blocks of the projected Q, K, V.
ad::Var multi_head_attention(ad::Var x_q, ad::Var x_kv, const AttentionParams& p, std::size_t n_heads,
                             const ad::Mask* mask = nullptr,
                             std::vector<ad::Var>* head_weights = nullptr);

/// relu(h W1 + b1) W2 + b2, row by row.
ad::Var ffn(ad::Var h, ad::Var w1, ad::Var b1, ad::Var w2, ad::Var b2);

/// Indices into a Transformer's ParameterSet.
struct AttentionSlots {
    std::size_t wq, wk, wv, wo;
};
struct NormSlots {
    std::size_t gain, bias;
};
struct FfnSlots {
    std::size_t w1, b1, w2, b2;
};
struct EncoderLayerSlots {
    AttentionSlots self;
    NormSlots norm1;
    FfnSlots ffn;
    NormSlots norm2;
};
struct DecoderLayerSlots {
    AttentionSlots self;
    NormSlots norm1;
    AttentionSlots cross;
    NormSlots norm2;
    FfnSlots ffn;
    NormSlots norm3;
};

/// Encoder-decoder transformer producing one scalar per decoder position.
/// Immutable during inference, so concurrent predict() calls are safe.
class Transformer {
public:
    /// Uniform +-1/sqrt(fan_in) weights, zero biases, unit layer-norm gains.
    static Transformer initialize(const ModelConfig& config, std::uint64_t seed);
    /// Adopts trained parameters; names and shapes must match the config's layout.
    static Transformer from_parameters(const ModelConfig& config, ParameterSet params);

    const ModelConfig& config() const noexcept { return config_; }
    const ParameterSet& parameters() const noexcept { return params_; }
    ParameterSet& parameters() noexcept { return params_; }

    /// Feature rows -> embedding plus positional encoding.
    ad::Var embed(ad::Tape& tape, std::span<const ad::Var> bound, const Tensor& features) const;
    ad::Var encode(ad::Tape& tape, std::span<const ad::Var> bound, const Tensor& encoder_input) const;
    /// Causally masked decoder stack and output head; returns decoder_len x 1.
    ad::Var decode(ad::Tape& tape, std::span<const ad::Var> bound, const Tensor& decoder_input,
                   ad::Var memory) const;
    ad::Var forward(ad::Tape& tape, std::span<const ad::Var> bound, const Tensor& encoder_input,
                    const Tensor& decoder_input) const;

    /// Inference on a private tape.
    std::vector<double> predict(const Tensor& encoder_input, const Tensor& decoder_input) const;

    const std::vector<EncoderLayerSlots>& encoder_slots() const noexcept { return encoder_; }
    const std::vector<DecoderLayerSlots>& decoder_slots() const noexcept { return decoder_; }

    friend bool operator==(const Transformer& a, const Transformer& b) {
        return a.config_ == b.config_ && a.params_ == b.params_;
    }

private:
    ModelConfig config_;
    ParameterSet params_;
    std::size_t embed_w_ = 0, embed_b_ = 0, head_w_ = 0, head_b_ = 0;
    std::vector<EncoderLayerSlots> encoder_;
    std::vector<DecoderLayerSlots> decoder_;
};

}  // namespace jitcast::model
