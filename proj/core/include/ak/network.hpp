#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ak/image.hpp"

namespace ak {

enum class ArchKind { vgg_like, mega_vgg_like, fully_connected, sum_net };
enum class Padding { same, valid };

std::string_view to_string(ArchKind kind);
ArchKind parse_arch_kind(std::string_view name);

// Named architecture plus optional width overrides.
//
// `width` is the hidden width for fully_connected / sum_net and the first-block
// channel count for the VGG family (the second block uses twice as many).
// Canonical text form: `kind` or `kind@key=value,...` with keys w, head, pad,
// e.g. `vgg_like@w=13,pad=valid`.
struct ArchitectureId {
    ArchKind kind = ArchKind::fully_connected;
    std::optional<int> width;
    std::optional<int> head_width;  // VGG family only: dense ReLU layer before the output
    std::optional<Padding> padding; // VGG family only

    int effective_width() const;
    int effective_head_width() const;
    Padding effective_padding() const;

    std::string name() const;
    static ArchitectureId parse(std::string_view text);

    friend bool operator==(const ArchitectureId&, const ArchitectureId&) = default;
};

// 3x3 (by default) convolution, channel-last; kernel stored (kh, kw, in, out) row-major.
struct Conv2D {
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 3;
    Padding padding = Padding::same;
};
// 2x2 max pool, stride 2, floor semantics on odd sizes.
struct MaxPool2 {};
struct Relu {};
struct Flatten {};
// Fully connected; kernel stored (in, out) row-major.
struct Dense {
    int in = 0;
    int out = 0;
};
// Sum of all inputs, producing one value.
struct SumAll {};

using Layer = std::variant<Conv2D, MaxPool2, Relu, Flatten, Dense, SumAll>;

std::string layer_kind(const Layer& layer);

// Layered scalar-output network with one flat parameter vector.
//
// Parameters are flattened in layer order; within a layer the weights come first,
// then the biases, each row-major. The final layer must be a Dense with one output.
class Network {
public:
    // Validates the layer stack against `input` and allocates zero parameters.
    Network(Shape input, std::vector<Layer> layers);

    Shape input_shape() const noexcept { return input_; }
    const std::vector<Layer>& layers() const noexcept { return layers_; }
    // Output shape of layer i.
    Shape layer_shape(std::size_t i) const { return shapes_.at(i); }
    // Generated name of layer i, e.g. "dense_3".
    const std::string& layer_name(std::size_t i) const { return names_.at(i); }

    std::size_t parameter_count() const noexcept { return params_.size(); }
    // Offset of layer i's block in the flat vector and its size.
    std::size_t block_offset(std::size_t i) const { return offsets_.at(i); }
    std::size_t block_size(std::size_t i) const;

    std::span<const double> parameters() const noexcept { return params_; }
    std::span<double> parameters() noexcept { return params_; }
    void set_parameters(std::span<const double> values);

    // Index of the last hidden layer (the input of the final dense layer), or
    // nullopt when the network has no hidden layer.
    std::optional<std::size_t> last_hidden_layer() const noexcept;

    const std::optional<ArchitectureId>& architecture() const noexcept { return arch_; }
    void set_architecture(ArchitectureId arch) { arch_ = std::move(arch); }

private:
    Shape input_;
    std::vector<Layer> layers_;
    std::vector<Shape> shapes_;
    std::vector<std::string> names_;
    std::vector<std::size_t> offsets_;
    std::vector<double> params_;
    std::optional<ArchitectureId> arch_;
};

// Layer stack for a named architecture (no parameters drawn).
std::vector<Layer> architecture_layers(const ArchitectureId& arch, Shape input);

// Closed-form parameter count; throws ConfigError for incompatible shapes.
std::size_t parameter_count(const ArchitectureId& arch, Shape input);

// Builds `arch` for `input` with Glorot-uniform weights and zero biases drawn from `seed`.
Network build_network(const ArchitectureId& arch, Shape input, std::uint64_t seed);

// Reusable forward/backward buffers bound to one network.
//
// Not thread-safe; use one Tape per thread. The network must outlive the tape and
// its parameters must not change between forward() and backward().
class Tape {
public:
    explicit Tape(const Network& net);

    // Evaluates the network, keeping every layer output for backward().
    double forward(const Image& image);
    // Output of layer i from the last forward().
    std::span<const double> activation(std::size_t i) const { return acts_.at(i); }
    // Adds seed * d(output)/d(theta) into `grad` (length parameter_count()).
    void backward(double seed, std::span<double> grad);

private:
    const Network* net_;
    std::vector<double> input_;
    std::vector<std::vector<double>> acts_;
    std::vector<std::vector<double>> deltas_;
    std::vector<std::vector<double>> transposed_;  // conv kernels as (kh, kw, out, in)
    std::vector<std::uint32_t> pool_index_storage_;
    std::vector<std::size_t> pool_index_offset_;
};

struct ForwardResult {
    double output = 0.0;
    // activations[i] is the output of layer i for every layer but the last (h_1 .. h_{L-1}).
    std::vector<std::vector<double>> activations;
};

ForwardResult forward(const Network& net, const Image& image);
double evaluate(const Network& net, const Image& image);
// d f(x) / d theta in the flattening order.
std::vector<double> grad_params(const Network& net, const Image& image);
// 1 iff f(x) > 0.
int predict_class(const Network& net, const Image& image);

}  // namespace ak
