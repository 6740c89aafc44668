#include "jitcast/training.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "jitcast/adam.hpp"
#include "jitcast/errors.hpp"
#include "jitcast/rng.hpp"

namespace jitcast::train {

void TrainConfig::validate() const {
    if (epochs == 0 || batch_size == 0) throw std::invalid_argument("train config: epochs and batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("train config: learning_rate must be > 0");
    if (!(train_fraction > 0.0 && val_fraction > 0.0 && test_fraction > 0.0)) {
        throw std::invalid_argument("train config: split fractions must be positive");
    }
    if (std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9) {
        throw std::invalid_argument("train config: split fractions must sum to 1");
    }
}

namespace {

double example_gradient(const model::Transformer& model, const Example& ex, std::vector<Tensor>& out) {
    ad::Tape tape;
    const auto bound = model.parameters().bind(tape, true);
    ad::Var loss = ad::mse(model.forward(tape, bound, ex.encoder, ex.decoder), ex.target);
    tape.backward(loss);
    out.resize(bound.size());
    for (std::size_t i = 0; i < bound.size(); ++i) out[i] = tape.grad(bound[i]);
    return loss.value().item();
}

double example_loss(const model::Transformer& model, const Example& ex) {
    ad::Tape tape;
    const auto bound = model.parameters().bind(tape, false);
    return ad::mse(model.forward(tape, bound, ex.encoder, ex.decoder), ex.target).value().item();
}

double reduce(const std::vector<std::vector<Tensor>>& per_example, const std::vector<double>& losses,
              std::vector<Tensor>& grads) {
    const double inv = 1.0 / static_cast<double>(losses.size());
    grads = per_example[0];
    for (std::size_t e = 1; e < per_example.size(); ++e)
        for (std::size_t p = 0; p < grads.size(); ++p) {
            auto dst = grads[p].values();
            const auto src = per_example[e][p].values();
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
        }
    for (auto& g : grads)
        for (double& v : g.values()) v *= inv;
    double loss = 0.0;
    for (double l : losses) loss += l;
    return loss * inv;
}

}  // namespace

double mean_loss(const model::Transformer& model, std::span<const Example> examples) {
    if (examples.empty()) throw std::invalid_argument("mean_loss: no examples");
    std::vector<double> losses(examples.size());
    const auto n = static_cast<long long>(examples.size());
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < n; ++i) losses[static_cast<std::size_t>(i)] = example_loss(model, examples[static_cast<std::size_t>(i)]);
    double total = 0.0;
    for (double l : losses) total += l;
    return total / static_cast<double>(losses.size());
}

double batch_gradient_serial(const model::Transformer& model, std::span<const Example> examples,
                             std::span<const std::size_t> batch, std::vector<Tensor>& grads) {
    std::vector<std::vector<Tensor>> per(batch.size());
    std::vector<double> losses(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) losses[b] = example_gradient(model, examples[batch[b]], per[b]);
    return reduce(per, losses, grads);
}

double batch_gradient_parallel(const model::Transformer& model, std::span<const Example> examples,
                               std::span<const std::size_t> batch, std::vector<Tensor>& grads) {
    std::vector<std::vector<Tensor>> per(batch.size());
    std::vector<double> losses(batch.size());
    const auto n = static_cast<long long>(batch.size());
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < n; ++i) {
        const auto b = static_cast<std::size_t>(i);
        losses[b] = example_gradient(model, examples[batch[b]], per[b]);
    }
    return reduce(per, losses, grads);
}

TrainHistory train_loop(model::Transformer& model, std::span<const Example> train_set,
                        std::span<const Example> val_set, const TrainConfig& config) {
    config.validate();
    if (train_set.empty()) throw std::invalid_argument("train_loop: no training examples");
    TrainHistory history;
    AdamState adam = make_adam_state(model.parameters());
    Rng rng(config.seed);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    ParameterSet best = model.parameters();
    double best_score = std::numeric_limits<double>::infinity();
    std::vector<Tensor> grads;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
        double epoch_loss = 0.0;
        for (std::size_t start = 0, batch = 0; start < order.size(); start += config.batch_size, ++batch) {
            const std::size_t len = std::min(config.batch_size, order.size() - start);
            const double loss = batch_gradient_parallel(
                model, train_set, std::span<const std::size_t>(order).subspan(start, len), grads);
            if (!std::isfinite(loss)) {
                throw NumericError("train_loop: non-finite loss at epoch " + std::to_string(epoch + 1) +
                                   ", batch " + std::to_string(batch + 1));
            }
            epoch_loss += loss * static_cast<double>(len);
            adam_step(model.parameters(), grads, adam, config.learning_rate);
            ++history.adam_steps;
        }
        history.train_loss.push_back(epoch_loss / static_cast<double>(order.size()));
        double score = history.train_loss.back();
        if (!val_set.empty()) {
            history.val_loss.push_back(mean_loss(model, val_set));
            score = history.val_loss.back();
        }
        if (!std::isfinite(score)) {
            throw NumericError("train_loop: non-finite epoch loss at epoch " + std::to_string(epoch + 1));
        }
        if (score < best_score) {
            best_score = score;
            best = model.parameters();
            history.best_epoch = epoch;
        }
    }
    model.parameters() = std::move(best);
    return history;
}

}  // namespace jitcast::train
