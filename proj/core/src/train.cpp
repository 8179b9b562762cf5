#include "ak/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ak/error.hpp"
#include "ak/rng.hpp"
#include "detail/binio.hpp"

namespace ak {

namespace {

constexpr std::uint64_t kShuffleStream = 0x5348;  // "SH"
constexpr std::uint64_t kAugmentStream = 0x4147;  // "AG"
constexpr std::uint32_t kCheckpointVersion = 1;

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// -log sigmoid(f) for y = 1, -log(1 - sigmoid(f)) for y = 0.
double logistic_loss(double f, int y) { return softplus(f) - (y == 1 ? f : 0.0); }

void check_training_data(const Network& net, const Dataset& data) {
    if (data.empty()) throw InputError("training set is empty");
    data.validate();
    if (data.shape() != net.input_shape()) {
        throw InputError("training images are " + data.shape().str() + " but the network expects " +
                         net.input_shape().str());
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data.labels[i] != 0 && data.labels[i] != 1) {
            throw InputError("label " + std::to_string(data.labels[i]) + " at index " + std::to_string(i) +
                             " is not in {0, 1}");
        }
    }
}

}  // namespace

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must lie in [0, 1)");
    if (batch_size < 1) throw ConfigError("batch size must be positive");
    if (epochs < 0) throw ConfigError("epochs must be non-negative");
    if (checkpoint_epochs.empty() || checkpoint_epochs.front() != 0) {
        throw ConfigError("checkpoint epochs must start with 0");
    }
    for (std::size_t i = 1; i < checkpoint_epochs.size(); ++i) {
        if (checkpoint_epochs[i] <= checkpoint_epochs[i - 1]) {
            throw ConfigError("checkpoint epochs must be strictly increasing");
        }
    }
    if (checkpoint_epochs.back() > epochs) {
        throw ConfigError("checkpoint epoch " + std::to_string(checkpoint_epochs.back()) +
                          " exceeds the number of epochs");
    }
    if (augmentation) augmentation->validate();
}

Checkpoint make_checkpoint(const Network& net, int epoch, std::uint64_t seed) {
    Checkpoint cp;
    cp.epoch = epoch;
    cp.parameters.assign(net.parameters().begin(), net.parameters().end());
    cp.arch = net.architecture() ? net.architecture()->name() : "custom";
    cp.seed = seed;
    return cp;
}

std::vector<Checkpoint> train_sgd(Network& net, const Dataset& data, const TrainConfig& cfg,
                                  const EpochCallback& on_epoch) {
    cfg.validate();
    check_training_data(net, data);

    std::vector<Checkpoint> out;
    auto next_cp = cfg.checkpoint_epochs.begin();
    if (*next_cp == 0) {
        out.push_back(make_checkpoint(net, 0, cfg.seed));
        ++next_cp;
    }

    const std::size_t n = data.size();
    const std::size_t p = net.parameter_count();
    std::vector<double> grad(p, 0.0);
    std::vector<double> velocity(cfg.momentum > 0.0 ? p : 0, 0.0);
    std::vector<std::size_t> order(n);
    rng::Engine shuffler(rng::derive(cfg.seed, kShuffleStream));
    Tape tape(net);
    Image augmented;

    for (int epoch = 1; epoch <= cfg.epochs && next_cp != cfg.checkpoint_epochs.end(); ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng::shuffle(std::span<std::size_t>(order), shuffler);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
            const double inv_batch = 1.0 / static_cast<double>(stop - start);
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t k = start; k < stop; ++k) {
                const std::size_t idx = order[k];
                const Image* x = &data.images[idx];
                if (cfg.augmentation) {
                    rng::Engine engine(rng::derive(cfg.seed, kAugmentStream + static_cast<std::uint64_t>(epoch), idx));
                    augmented = augment(*x, engine, *cfg.augmentation);
                    x = &augmented;
                }
                const double f = tape.forward(*x);
                const int y = data.labels[idx];
                loss_sum += logistic_loss(f, y);
                tape.backward((sigmoid(f) - y) * inv_batch, grad);
            }
            auto params = net.parameters();
            if (cfg.momentum > 0.0) {
                for (std::size_t j = 0; j < p; ++j) {
                    velocity[j] = cfg.momentum * velocity[j] - cfg.learning_rate * grad[j];
                    params[j] += velocity[j];
                }
            } else {
                for (std::size_t j = 0; j < p; ++j) params[j] -= cfg.learning_rate * grad[j];
            }
        }
        if (on_epoch) on_epoch(epoch, loss_sum / static_cast<double>(n));
        if (*next_cp == epoch) {
            out.push_back(make_checkpoint(net, epoch, cfg.seed));
            ++next_cp;
        }
    }
    return out;
}

double mean_loss(const Network& net, const Dataset& data) {
    check_training_data(net, data);
    Tape tape(net);
    double s = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) s += logistic_loss(tape.forward(data.images[i]), data.labels[i]);
    return s / static_cast<double>(data.size());
}

Network restore_network(const Checkpoint& cp, Shape input) {
    if (cp.arch == "custom") throw ConfigError("checkpoint of a custom network cannot be rebuilt by name");
    const ArchitectureId arch = ArchitectureId::parse(cp.arch);
    Network net(input, architecture_layers(arch, input));
    net.set_architecture(arch);
    if (cp.parameters.size() != net.parameter_count()) {
        throw ConfigError("checkpoint has " + std::to_string(cp.parameters.size()) + " parameters but " +
                          cp.arch + " on " + input.str() + " has " + std::to_string(net.parameter_count()));
    }
    net.set_parameters(cp.parameters);
    return net;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& cp) {
    detail::ByteWriter w;
    w.bytes("AKCP");
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(cp.arch.size()));
    w.bytes(cp.arch);
    w.u32(static_cast<std::uint32_t>(cp.epoch));
    w.u64(cp.parameters.size());
    for (double v : cp.parameters) w.f64(v);
    w.save(path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    detail::ByteReader r(path);
    r.expect_magic("AKCP");
    const auto version_at = r.position();
    if (r.u32() != kCheckpointVersion) throw FormatError(r.name() + ": unsupported checkpoint version", version_at);
    Checkpoint cp;
    cp.arch = r.str(r.u32());
    cp.epoch = static_cast<int>(r.u32());
    const auto count_at = r.position();
    const std::uint64_t count = r.u64();
    if (count > r.remaining() / 8) throw FormatError(r.name() + ": parameter count exceeds file size", count_at);
    cp.parameters.resize(count);
    for (auto& v : cp.parameters) v = r.f64();
    r.expect_end();
    return cp;
}

}  // namespace ak
