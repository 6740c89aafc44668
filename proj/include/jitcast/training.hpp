#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "jitcast/tensor.hpp"
#include "jitcast/transformer.hpp"

namespace jitcast::train {

struct TrainConfig {
    std::size_t epochs = 150;
    std::size_t batch_size = 64;
    double learning_rate = 1e-4;
    std::uint64_t seed = 0;
    double train_fraction = 0.8;
    double val_fraction = 0.1;
    double test_fraction = 0.1;

    /// Throws std::invalid_argument on a non-positive field or fractions not summing to 1.
    void validate() const;
};

/// One supervised sequence: target has one value per decoder row.
struct Example {
    Tensor encoder;
    Tensor decoder;
    Tensor target;  // decoder_len x 1
};

struct TrainHistory {
    std::vector<double> train_loss;  // mean batch loss over each epoch, weighted by batch size
    std::vector<double> val_loss;    // empty when no validation examples were given
    std::size_t best_epoch = 0;      // 0-based; weights from this epoch are kept
    std::size_t adam_steps = 0;
};

/// Per-example MSE averaged over `examples`, evaluated in parallel.
double mean_loss(const model::Transformer& model, std::span<const Example> examples);

/// Mean of per-example MSE gradients over `batch`, reduced in batch order.
/// Returns the mean loss. Both variants produce identical bits.
double batch_gradient_serial(const model::Transformer& model, std::span<const Example> examples,
                             std::span<const std::size_t> batch, std::vector<Tensor>& grads);
double batch_gradient_parallel(const model::Transformer& model, std::span<const Example> examples,
                               std::span<const std::size_t> batch, std::vector<Tensor>& grads);

/// Mini-batch Adam with a seeded shuffle per epoch. Keeps the weights of the
/// epoch with the lowest validation loss (lowest train loss without
/// validation data). A NaN loss throws NumericError naming epoch and batch.
TrainHistory train_loop(model::Transformer& model, std::span<const Example> train_set,
                        std::span<const Example> val_set, const TrainConfig& config);

}  // namespace jitcast::train
