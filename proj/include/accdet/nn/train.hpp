#pragma once
// Mini-batch training loop. All randomness (initialization, shuffling,
// dropout) flows from sub-seeds of the given run seed, so training is
// bit-deterministic.
#include <optional>
#include <vector>

#include "accdet/nn/backward.hpp"
#include "accdet/nn/optimizer.hpp"

namespace accdet {

struct TrainConfig {
    NetworkShape shape;
    OptimizerConfig optimizer;
    double w1 = 100.0;  // crash class weight
    double w2 = 1.0;
    Index batch_size = 32;
    Index epochs = 70;
    std::optional<double> grad_clip_norm;  // off unless set

    void validate() const {
        require(batch_size >= 1, "train: batch size must be >= 1");
        require(epochs >= 0, "train: epochs must be >= 0");
        require(w1 > 0.0 && w2 > 0.0, "train: class weights must be positive");
        if (grad_clip_norm) require(*grad_clip_norm > 0.0, "train: clip norm must be positive");
        optimizer.validate();
    }
};

struct TrainResult {
    NetworkParams params;
    std::vector<double> epoch_losses;  // one entry per epoch (mean batch loss)
    double initial_loss = 0.0;         // full-set loss before any update, no dropout
};

inline TrainResult train(const TrainConfig& cfg, const std::vector<WindowSample>& windows, std::uint64_t seed) {
    cfg.validate();
    require(!windows.empty(), "train: empty dataset");
    Index positives = 0;
    for (const auto& w : windows) positives += w.label;
    require(positives > 0 && positives < static_cast<Index>(windows.size()),
            "train: need at least one sample of each class (got ", positives, " positives of ", windows.size(), ")");
    require(windows.front().values.cols() == cfg.shape.input_size, "train: window has ",
            windows.front().values.cols(), " columns, network expects ", cfg.shape.input_size);

    TrainResult result;
    result.params = make_network(cfg.shape);
    Rng init_rng(derive_seed(seed, "init"));
    init_params(result.params, init_rng);

    std::vector<Index> order(windows.size());
    for (std::size_t i = 0; i < windows.size(); ++i) order[i] = static_cast<Index>(i);

    {
        const TrainingBatch all = make_training_batch(windows, order);
        result.initial_loss = network_loss(result.params, all, cfg.w1, cfg.w2);
    }

    Optimizer optimizer(cfg.optimizer);
    Rng shuffle_rng(derive_seed(seed, "shuffle"));
    Rng dropout_rng(derive_seed(seed, "dropout"));

    for (Index epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const std::vector<Index> chunk(order.begin() + static_cast<std::ptrdiff_t>(start),
                                           order.begin() + static_cast<std::ptrdiff_t>(stop));
            const TrainingBatch batch = make_training_batch(windows, chunk);
            const DropoutMasks masks = make_dropout_masks(result.params, batch.size(), dropout_rng);
            BackwardResult back = network_backward(result.params, batch, cfg.w1, cfg.w2, &masks);
            if (cfg.grad_clip_norm) clip_gradients(back.grads, *cfg.grad_clip_norm);
            optimizer.step(result.params, back.grads);
            epoch_loss += back.loss * static_cast<double>(chunk.size());
        }
        result.epoch_losses.push_back(epoch_loss / static_cast<double>(order.size()));
    }
    return result;
}

}  // namespace accdet
