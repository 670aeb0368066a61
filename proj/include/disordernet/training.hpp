#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "disordernet/dataset.hpp"
#include "disordernet/network.hpp"
#include "disordernet/tensor.hpp"

namespace dnet {

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    double learning_rate = 0.001;
    double momentum = 0.9;
    double dropout_rate = 0.5;  // applied by the network builders
    std::uint64_t seed = 0;
    double threshold = 0.5;

    // Throws ConfigError on the first violated constraint.
    void validate() const;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double train_acc = 0.0;
    // Absent when training ran without a validation set.
    std::optional<double> val_loss;
    std::optional<double> val_acc;

    friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;

    friend bool operator==(const TrainHistory&, const TrainHistory&) = default;
};

// Per-parameter velocities, zero-initialized and shaped like the parameters.
struct MomentumState {
    std::vector<Tensor> velocity;

    static MomentumState zeros_like(const std::vector<Tensor*>& params);
};

inline constexpr double kProbabilityClamp = 1e-12;

// Binary cross-entropy with p clamped to [1e-12, 1 - 1e-12].
double bce_loss(double score, Label label);

// Classical momentum: v <- momentum * v + g; w <- w - lr * v.
void sgd_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads, MomentumState& state,
              double learning_rate, double momentum);

// Stacks the pixels of the given samples into an (N, H, W, C) batch.
Tensor stack_batch(std::span<const PatchSample> samples, std::span<const std::size_t> indices);

// Inference scores for every sample, in order.
std::vector<double> score_dataset(const Network& net, const PatchDataset& ds, std::size_t batch_size = 64);

using EpochCallback = std::function<void(const EpochRecord&)>;

// Mini-batch SGD with per-epoch seeded shuffling. The validation set is only
// scored, never trained on; pass an empty dataset to skip validation.
TrainHistory train(Network& net, const PatchDataset& train_set, const PatchDataset& val_set, const TrainConfig& cfg,
                   const EpochCallback& on_epoch = {});

// CSV with header `epoch,train_loss,train_acc,val_loss,val_acc`.
void export_history(const TrainHistory& history, const std::filesystem::path& path);
TrainHistory read_history(const std::filesystem::path& path);

}  // namespace dnet
