#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ak/dataset.hpp"
#include "ak/network.hpp"

namespace ak {

enum class LossKind { logistic };

struct TrainConfig {
    double learning_rate = 0.01;
    double momentum = 0.0;
    int batch_size = 32;
    int epochs = 10;
    // Sorted, within [0, epochs], always containing 0.
    std::vector<int> checkpoint_epochs{0};
    LossKind loss = LossKind::logistic;
    std::uint64_t seed = 0;
    std::optional<AugmentConfig> augmentation{};

    void validate() const;
};

// Frozen parameter vector after `epoch` epochs of training.
struct Checkpoint {
    int epoch = 0;
    std::vector<double> parameters;
    // Canonical ArchitectureId::name(), or "custom" for hand-built networks.
    std::string arch;
    // Training seed; not part of the checkpoint file.
    std::uint64_t seed = 0;
};

// Called after every epoch with (epoch, mean training loss over that epoch's batches).
using EpochCallback = std::function<void(int, double)>;

// Mini-batch SGD on the logistic loss of sigmoid(f(x)), one shuffle per epoch.
// Returns one checkpoint per entry of cfg.checkpoint_epochs. Training stops after the
// last checkpoint epoch, leaving `net` at that state.
std::vector<Checkpoint> train_sgd(Network& net, const Dataset& data, const TrainConfig& cfg,
                                  const EpochCallback& on_epoch = {});

// Mean logistic loss of the network on the dataset.
double mean_loss(const Network& net, const Dataset& data);

Checkpoint make_checkpoint(const Network& net, int epoch, std::uint64_t seed);

// Rebuilds the network a checkpoint was taken from; `input` must match the training data.
Network restore_network(const Checkpoint& cp, Shape input);

// "AKCP" little-endian checkpoint file.
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& cp);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace ak
