#include "ak/network.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "ak/error.hpp"
#include "ak/rng.hpp"
#include "detail/vec.hpp"

namespace ak {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr int default_width(ArchKind kind) {
    switch (kind) {
        case ArchKind::vgg_like: return 26;
        case ArchKind::mega_vgg_like: return 119;
        case ArchKind::fully_connected: return 94;
        case ArchKind::sum_net: return 16;
    }
    return 0;
}

constexpr int kDefaultHeadWidth = 20;
constexpr int kFullyConnectedDepth = 4;

bool is_vgg(ArchKind kind) { return kind == ArchKind::vgg_like || kind == ArchKind::mega_vgg_like; }

int parse_int(std::string_view s, std::string_view what) {
    int v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || v <= 0) {
        throw ConfigError("invalid " + std::string(what) + " '" + std::string(s) + "'");
    }
    return v;
}

std::size_t conv_out(int n, int k, Padding p) {
    return p == Padding::same ? static_cast<std::size_t>(n) : static_cast<std::size_t>(n - k + 1);
}

}  // namespace

std::string Shape::str() const {
    return std::to_string(height) + "x" + std::to_string(width) + "x" + std::to_string(channels);
}

Image::Image(Shape s, std::vector<double> values) : shape(s), pixels(std::move(values)) {
    if (pixels.size() != s.size()) {
        throw InputError("image of shape " + s.str() + " given " + std::to_string(pixels.size()) +
                         " values");
    }
}

std::string_view to_string(ArchKind kind) {
    switch (kind) {
        case ArchKind::vgg_like: return "vgg_like";
        case ArchKind::mega_vgg_like: return "mega_vgg_like";
        case ArchKind::fully_connected: return "fully_connected";
        case ArchKind::sum_net: return "sum_net";
    }
    return "?";
}

ArchKind parse_arch_kind(std::string_view name) {
    for (ArchKind k : {ArchKind::vgg_like, ArchKind::mega_vgg_like, ArchKind::fully_connected,
                       ArchKind::sum_net}) {
        if (to_string(k) == name) return k;
    }
    throw ConfigError("unknown architecture '" + std::string(name) + "'");
}

int ArchitectureId::effective_width() const { return width.value_or(default_width(kind)); }
int ArchitectureId::effective_head_width() const { return head_width.value_or(kDefaultHeadWidth); }
Padding ArchitectureId::effective_padding() const { return padding.value_or(Padding::valid); }

std::string ArchitectureId::name() const {
    std::string out(to_string(kind));
    std::vector<std::string> opts;
    if (width) opts.push_back("w=" + std::to_string(*width));
    if (head_width) opts.push_back("head=" + std::to_string(*head_width));
    if (padding) opts.push_back(*padding == Padding::same ? "pad=same" : "pad=valid");
    for (std::size_t i = 0; i < opts.size(); ++i) out += (i == 0 ? "@" : ",") + opts[i];
    return out;
}

ArchitectureId ArchitectureId::parse(std::string_view text) {
    ArchitectureId id;
    const auto at = text.find('@');
    id.kind = parse_arch_kind(text.substr(0, at));
    if (at == std::string_view::npos) return id;
    std::string_view rest = text.substr(at + 1);
    while (!rest.empty()) {
        const auto comma = rest.find(',');
        const std::string_view item = rest.substr(0, comma);
        rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
        const auto eq = item.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("architecture option '" + std::string(item) + "' is not key=value");
        }
        const auto key = item.substr(0, eq);
        const auto value = item.substr(eq + 1);
        if (key == "w") {
            id.width = parse_int(value, "width");
        } else if (key == "head") {
            id.head_width = parse_int(value, "head width");
        } else if (key == "pad") {
            if (value == "same") id.padding = Padding::same;
            else if (value == "valid") id.padding = Padding::valid;
            else throw ConfigError("unknown padding '" + std::string(value) + "'");
        } else {
            throw ConfigError("unknown architecture option '" + std::string(key) + "'");
        }
    }
    if (!is_vgg(id.kind) && (id.head_width || id.padding)) {
        throw ConfigError("head/pad options apply only to the VGG family");
    }
    return id;
}

std::string layer_kind(const Layer& layer) {
    return std::visit(overloaded{[](const Conv2D&) { return "conv2d"; },
                                 [](const MaxPool2&) { return "max_pool"; },
                                 [](const Relu&) { return "relu"; },
                                 [](const Flatten&) { return "flatten"; },
                                 [](const Dense&) { return "dense"; },
                                 [](const SumAll&) { return "sum"; }},
                      layer);
}

Network::Network(Shape input, std::vector<Layer> layers) : input_(input), layers_(std::move(layers)) {
    if (input.height <= 0 || input.width <= 0 || input.channels <= 0) {
        throw ConfigError("input shape " + input.str() + " is empty");
    }
    if (layers_.empty()) throw ConfigError("network has no layers");

    std::size_t total = 0;
    Shape cur = input;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const std::string name = layer_kind(layers_[i]) + "_" + std::to_string(i);
        auto fail = [&](const std::string& why) -> void {
            throw ConfigError("layer " + name + ": " + why + " (input " + cur.str() + ")");
        };
        std::size_t block = 0;
        Shape next = cur;
        std::visit(overloaded{
                       [&](const Conv2D& c) {
                           if (c.in_channels != cur.channels) fail("channel mismatch");
                           if (c.kernel <= 0 || c.out_channels <= 0) fail("empty convolution");
                           if (c.padding == Padding::valid &&
                               (cur.height < c.kernel || cur.width < c.kernel)) {
                               fail("input too small for valid convolution");
                           }
                           next = {static_cast<int>(conv_out(cur.height, c.kernel, c.padding)),
                                   static_cast<int>(conv_out(cur.width, c.kernel, c.padding)),
                                   c.out_channels};
                           block = static_cast<std::size_t>(c.kernel * c.kernel) * c.in_channels *
                                       c.out_channels +
                                   c.out_channels;
                       },
                       [&](const MaxPool2&) {
                           if (cur.height < 2 || cur.width < 2) fail("input too small for 2x2 pooling");
                           next = {cur.height / 2, cur.width / 2, cur.channels};
                       },
                       [&](const Relu&) {},
                       [&](const Flatten&) { next = {1, 1, static_cast<int>(cur.size())}; },
                       [&](const Dense& d) {
                           if (static_cast<std::size_t>(d.in) != cur.size()) {
                               fail("dense expects " + std::to_string(d.in) + " inputs");
                           }
                           if (d.out <= 0) fail("empty dense layer");
                           next = {1, 1, d.out};
                           block = static_cast<std::size_t>(d.in) * d.out + d.out;
                       },
                       [&](const SumAll&) { next = {1, 1, 1}; }},
                   layers_[i]);
        names_.push_back(name);
        shapes_.push_back(next);
        offsets_.push_back(total);
        total += block;
        cur = next;
    }
    const auto* last = std::get_if<Dense>(&layers_.back());
    if (last == nullptr || last->out != 1) {
        throw ConfigError("final layer must be dense with a single output");
    }
    params_.assign(total, 0.0);
}

std::size_t Network::block_size(std::size_t i) const {
    const std::size_t end = i + 1 < offsets_.size() ? offsets_[i + 1] : params_.size();
    return end - offsets_.at(i);
}

void Network::set_parameters(std::span<const double> values) {
    if (values.size() != params_.size()) {
        throw InputError("expected " + std::to_string(params_.size()) + " parameters, got " +
                         std::to_string(values.size()));
    }
    std::copy(values.begin(), values.end(), params_.begin());
}

std::optional<std::size_t> Network::last_hidden_layer() const noexcept {
    if (layers_.size() < 2) return std::nullopt;
    return layers_.size() - 2;
}

std::vector<Layer> architecture_layers(const ArchitectureId& arch, Shape input) {
    const int w = arch.effective_width();
    std::vector<Layer> layers;
    switch (arch.kind) {
        case ArchKind::fully_connected: {
            layers.emplace_back(Flatten{});
            int in = static_cast<int>(input.size());
            for (int i = 0; i < kFullyConnectedDepth; ++i) {
                layers.emplace_back(Dense{in, w});
                layers.emplace_back(Relu{});
                in = w;
            }
            layers.emplace_back(Dense{w, 1});
            break;
        }
        case ArchKind::sum_net:
            layers.emplace_back(SumAll{});
            layers.emplace_back(Dense{1, w});
            layers.emplace_back(Relu{});
            layers.emplace_back(Dense{w, 1});
            break;
        case ArchKind::vgg_like:
        case ArchKind::mega_vgg_like: {
            const Padding pad = arch.effective_padding();
            int h = input.height;
            int wd = input.width;
            auto conv = [&](int cin, int cout) {
                layers.emplace_back(Conv2D{cin, cout, 3, pad});
                layers.emplace_back(Relu{});
                h = static_cast<int>(conv_out(h, 3, pad));
                wd = static_cast<int>(conv_out(wd, 3, pad));
            };
            conv(input.channels, w);
            conv(w, w);
            layers.emplace_back(MaxPool2{});
            h /= 2;
            wd /= 2;
            conv(w, 2 * w);
            conv(2 * w, 2 * w);
            layers.emplace_back(MaxPool2{});
            h /= 2;
            wd /= 2;
            layers.emplace_back(Flatten{});
            const int head = arch.effective_head_width();
            layers.emplace_back(Dense{std::max(h, 0) * std::max(wd, 0) * 2 * w, head});
            layers.emplace_back(Relu{});
            layers.emplace_back(Dense{head, 1});
            break;
        }
    }
    return layers;
}

std::size_t parameter_count(const ArchitectureId& arch, Shape input) {
    return Network(input, architecture_layers(arch, input)).parameter_count();
}

Network build_network(const ArchitectureId& arch, Shape input, std::uint64_t seed) {
    Network net(input, architecture_layers(arch, input));
    net.set_architecture(arch);
    rng::Engine engine(seed);
    auto params = net.parameters();
    for (std::size_t i = 0; i < net.layers().size(); ++i) {
        double fan_in = 0;
        double fan_out = 0;
        std::size_t weights = 0;
        if (const auto* c = std::get_if<Conv2D>(&net.layers()[i])) {
            const double area = static_cast<double>(c->kernel * c->kernel);
            fan_in = area * c->in_channels;
            fan_out = area * c->out_channels;
            weights = static_cast<std::size_t>(area) * c->in_channels * c->out_channels;
        } else if (const auto* d = std::get_if<Dense>(&net.layers()[i])) {
            fan_in = d->in;
            fan_out = d->out;
            weights = static_cast<std::size_t>(d->in) * d->out;
        } else {
            continue;
        }
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        double* block = params.data() + net.block_offset(i);
        for (std::size_t k = 0; k < weights; ++k) block[k] = rng::uniform(engine, -limit, limit);
        // biases stay zero
    }
    return net;
}

// ---------------------------------------------------------------------------
// Tape

Tape::Tape(const Network& net) : net_(&net) {
    const auto& layers = net.layers();
    acts_.resize(layers.size());
    deltas_.resize(layers.size());
    transposed_.resize(layers.size());
    pool_index_offset_.assign(layers.size(), 0);
    std::size_t pool_total = 0;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        acts_[i].assign(net.layer_shape(i).size(), 0.0);
        deltas_[i].assign(net.layer_shape(i).size(), 0.0);
        if (const auto* c = std::get_if<Conv2D>(&layers[i])) {
            transposed_[i].assign(static_cast<std::size_t>(c->kernel * c->kernel) * c->in_channels *
                                      c->out_channels,
                                  0.0);
        }
        if (std::holds_alternative<MaxPool2>(layers[i])) {
            pool_index_offset_[i] = pool_total;
            pool_total += net.layer_shape(i).size();
        }
    }
    pool_index_storage_.assign(pool_total, 0);
}

double Tape::forward(const Image& image) {
    const Network& net = *net_;
    if (image.shape != net.input_shape()) {
        throw InputError("image shape " + image.shape.str() + " does not match network input " +
                         net.input_shape().str());
    }
    input_ = image.pixels;
    const auto params = net.parameters();
    Shape in_shape = net.input_shape();
    for (std::size_t li = 0; li < net.layers().size(); ++li) {
        const double* x = li == 0 ? input_.data() : acts_[li - 1].data();
        const std::size_t n_in = in_shape.size();
        double* y = acts_[li].data();
        const Shape out_shape = net.layer_shape(li);
        const double* block = params.data() + net.block_offset(li);
        std::visit(
            overloaded{
                [&](const Conv2D& c) {
                    const int H = in_shape.height, W = in_shape.width, C = c.in_channels;
                    const int K = c.kernel, CO = c.out_channels;
                    const int P = c.padding == Padding::same ? K / 2 : 0;
                    const double* weights = block;
                    const double* bias = block + static_cast<std::size_t>(K * K) * C * CO;
                    // refresh (kh, kw, out, in) copy used by backward()
                    double* t = transposed_[li].data();
                    for (int kk = 0; kk < K * K; ++kk) {
                        for (int ci = 0; ci < C; ++ci) {
                            for (int co = 0; co < CO; ++co) {
                                t[(static_cast<std::size_t>(kk) * CO + co) * C + ci] =
                                    weights[(static_cast<std::size_t>(kk) * C + ci) * CO + co];
                            }
                        }
                    }
                    for (int oy = 0; oy < out_shape.height; ++oy) {
                        for (int ox = 0; ox < out_shape.width; ++ox) {
                            double* o = y + (static_cast<std::size_t>(oy) * out_shape.width + ox) * CO;
                            std::copy(bias, bias + CO, o);
                            for (int ky = 0; ky < K; ++ky) {
                                const int iy = oy + ky - P;
                                if (iy < 0 || iy >= H) continue;
                                for (int kx = 0; kx < K; ++kx) {
                                    const int ix = ox + kx - P;
                                    if (ix < 0 || ix >= W) continue;
                                    const double* xp = x + (static_cast<std::size_t>(iy) * W + ix) * C;
                                    const double* wk =
                                        weights + static_cast<std::size_t>(ky * K + kx) * C * CO;
                                    for (int ci = 0; ci < C; ++ci) {
                                        const double v = xp[ci];
                                        if (v == 0.0) continue;
                                        detail::axpy(v, wk + static_cast<std::size_t>(ci) * CO, o,
                                                     static_cast<std::size_t>(CO));
                                    }
                                }
                            }
                        }
                    }
                },
                [&](const MaxPool2&) {
                    const int W = in_shape.width, C = in_shape.channels;
                    std::uint32_t* idx = pool_index_storage_.data() + pool_index_offset_[li];
                    for (int oy = 0; oy < out_shape.height; ++oy) {
                        for (int ox = 0; ox < out_shape.width; ++ox) {
                            for (int ch = 0; ch < C; ++ch) {
                                // row-major window scan; first maximum wins ties
                                std::size_t best = (static_cast<std::size_t>(2 * oy) * W + 2 * ox) * C + ch;
                                for (int dy = 0; dy < 2; ++dy) {
                                    for (int dx = 0; dx < 2; ++dx) {
                                        const std::size_t k =
                                            (static_cast<std::size_t>(2 * oy + dy) * W + 2 * ox + dx) * C + ch;
                                        if (x[k] > x[best]) best = k;
                                    }
                                }
                                const std::size_t o =
                                    (static_cast<std::size_t>(oy) * out_shape.width + ox) * C + ch;
                                y[o] = x[best];
                                idx[o] = static_cast<std::uint32_t>(best);
                            }
                        }
                    }
                },
                [&](const Relu&) {
                    for (std::size_t k = 0; k < n_in; ++k) y[k] = x[k] > 0.0 ? x[k] : 0.0;
                },
                [&](const Flatten&) { std::copy(x, x + n_in, y); },
                [&](const Dense& d) {
                    const std::size_t out = static_cast<std::size_t>(d.out);
                    const double* bias = block + static_cast<std::size_t>(d.in) * out;
                    std::copy(bias, bias + out, y);
                    for (int i = 0; i < d.in; ++i) {
                        const double v = x[i];
                        if (v == 0.0) continue;
                        detail::axpy(v, block + static_cast<std::size_t>(i) * out, y, out);
                    }
                },
                [&](const SumAll&) {
                    // ascending order: the sum depends only on the multiset of inputs
                    std::vector<double> sorted(x, x + n_in);
                    std::sort(sorted.begin(), sorted.end());
                    double s = 0.0;
                    for (double v : sorted) s += v;
                    y[0] = s;
                }},
            net.layers()[li]);
        in_shape = out_shape;
    }
    return acts_.back()[0];
}

void Tape::backward(double seed, std::span<double> grad) {
    const Network& net = *net_;
    if (grad.size() != net.parameter_count()) {
        throw InputError("gradient buffer has wrong length");
    }
    const auto params = net.parameters();
    const std::size_t L = net.layers().size();
    deltas_[L - 1][0] = seed;
    for (std::size_t li = L; li-- > 0;) {
        const Shape in_shape = li == 0 ? net.input_shape() : net.layer_shape(li - 1);
        const Shape out_shape = net.layer_shape(li);
        const double* x = li == 0 ? input_.data() : acts_[li - 1].data();
        const double* d = deltas_[li].data();
        const bool need_input_delta = li > 0;
        double* dx = need_input_delta ? deltas_[li - 1].data() : nullptr;
        const std::size_t n_in = in_shape.size();
        const double* block = params.data() + net.block_offset(li);
        double* gblock = grad.data() + net.block_offset(li);
        std::visit(
            overloaded{
                [&](const Conv2D& c) {
                    const int H = in_shape.height, W = in_shape.width, C = c.in_channels;
                    const int K = c.kernel, CO = c.out_channels;
                    const int P = c.padding == Padding::same ? K / 2 : 0;
                    double* gw = gblock;
                    double* gb = gblock + static_cast<std::size_t>(K * K) * C * CO;
                    const double* t = transposed_[li].data();
                    if (dx) std::fill(dx, dx + n_in, 0.0);
                    for (int oy = 0; oy < out_shape.height; ++oy) {
                        for (int ox = 0; ox < out_shape.width; ++ox) {
                            const double* dp = d + (static_cast<std::size_t>(oy) * out_shape.width + ox) * CO;
                            for (int co = 0; co < CO; ++co) gb[co] += dp[co];
                            for (int ky = 0; ky < K; ++ky) {
                                const int iy = oy + ky - P;
                                if (iy < 0 || iy >= H) continue;
                                for (int kx = 0; kx < K; ++kx) {
                                    const int ix = ox + kx - P;
                                    if (ix < 0 || ix >= W) continue;
                                    const std::size_t pix = (static_cast<std::size_t>(iy) * W + ix) * C;
                                    const std::size_t kk = static_cast<std::size_t>(ky * K + kx);
                                    double* gwk = gw + kk * C * CO;
                                    for (int ci = 0; ci < C; ++ci) {
                                        const double v = x[pix + ci];
                                        if (v == 0.0) continue;
                                        detail::axpy(v, dp, gwk + static_cast<std::size_t>(ci) * CO,
                                                     static_cast<std::size_t>(CO));
                                    }
                                    if (dx) {
                                        const double* tk = t + kk * CO * C;
                                        for (int co = 0; co < CO; ++co) {
                                            const double dv = dp[co];
                                            if (dv == 0.0) continue;
                                            detail::axpy(dv, tk + static_cast<std::size_t>(co) * C,
                                                         dx + pix, static_cast<std::size_t>(C));
                                        }
                                    }
                                }
                            }
                        }
                    }
                    (void)block;
                },
                [&](const MaxPool2&) {
                    if (!dx) return;
                    std::fill(dx, dx + n_in, 0.0);
                    const std::uint32_t* idx = pool_index_storage_.data() + pool_index_offset_[li];
                    const std::size_t n_out = out_shape.size();
                    for (std::size_t o = 0; o < n_out; ++o) dx[idx[o]] += d[o];
                },
                [&](const Relu&) {
                    if (!dx) return;
                    for (std::size_t k = 0; k < n_in; ++k) dx[k] = x[k] > 0.0 ? d[k] : 0.0;
                },
                [&](const Flatten&) {
                    if (dx) std::copy(d, d + n_in, dx);
                },
                [&](const Dense& dl) {
                    const std::size_t out = static_cast<std::size_t>(dl.out);
                    double* gb = gblock + static_cast<std::size_t>(dl.in) * out;
                    for (std::size_t o = 0; o < out; ++o) gb[o] += d[o];
                    for (int i = 0; i < dl.in; ++i) {
                        const double v = x[i];
                        if (v != 0.0) detail::axpy(v, d, gblock + static_cast<std::size_t>(i) * out, out);
                        if (dx) dx[i] = detail::dot(block + static_cast<std::size_t>(i) * out, d, out);
                    }
                },
                [&](const SumAll&) {
                    if (dx) std::fill(dx, dx + n_in, d[0]);
                }},
            net.layers()[li]);
    }
}

ForwardResult forward(const Network& net, const Image& image) {
    Tape tape(net);
    ForwardResult r;
    r.output = tape.forward(image);
    const std::size_t L = net.layers().size();
    r.activations.reserve(L - 1);
    for (std::size_t i = 0; i + 1 < L; ++i) {
        const auto a = tape.activation(i);
        r.activations.emplace_back(a.begin(), a.end());
    }
    return r;
}

double evaluate(const Network& net, const Image& image) {
    Tape tape(net);
    return tape.forward(image);
}

std::vector<double> grad_params(const Network& net, const Image& image) {
    Tape tape(net);
    tape.forward(image);
    std::vector<double> g(net.parameter_count(), 0.0);
    tape.backward(1.0, g);
    return g;
}

int predict_class(const Network& net, const Image& image) { return evaluate(net, image) > 0.0 ? 1 : 0; }

}  // namespace ak
