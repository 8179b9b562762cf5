#include "ak/dataset.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ak/error.hpp"
#include "ak/perturb.hpp"

namespace ak {

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;
constexpr std::size_t kCifarSide = 32;
constexpr std::size_t kCifarPlane = kCifarSide * kCifarSide;
constexpr std::size_t kCifarRecord = 1 + 3 * kCifarPlane;

// Whole file, gunzipped when compressed (zlib passes plain files through).
std::vector<unsigned char> slurp(const std::filesystem::path& path) {
    gzFile f = gzopen(path.string().c_str(), "rb");
    if (f == nullptr) throw Error("cannot open " + path.string());
    std::vector<unsigned char> data;
    unsigned char chunk[1 << 16];
    int got = 0;
    while ((got = gzread(f, chunk, sizeof chunk)) > 0) data.insert(data.end(), chunk, chunk + got);
    const bool failed = got < 0;
    gzclose(f);
    if (failed) throw FormatError(path.string() + ": decompression failed", data.size());
    return data;
}

std::uint32_t be32(const std::vector<unsigned char>& d, std::size_t at, const std::filesystem::path& p) {
    if (d.size() < at + 4) throw FormatError(p.string() + ": truncated header", d.size());
    return (std::uint32_t{d[at]} << 24) | (std::uint32_t{d[at + 1]} << 16) | (std::uint32_t{d[at + 2]} << 8) |
           std::uint32_t{d[at + 3]};
}

}  // namespace

Shape Dataset::shape() const { return images.empty() ? Shape{} : images.front().shape; }

void Dataset::validate() const {
    if (images.size() != labels.size()) {
        throw InputError("dataset '" + name + "' has " + std::to_string(images.size()) + " images but " +
                         std::to_string(labels.size()) + " labels");
    }
    for (const auto& im : images) {
        if (im.shape != shape()) throw InputError("dataset '" + name + "' mixes image shapes");
        if (im.pixels.size() != im.shape.size()) throw InputError("dataset '" + name + "' has a malformed image");
    }
}

Dataset Dataset::head(std::size_t n) const {
    if (n > size()) {
        throw ConfigError("requested " + std::to_string(n) + " examples but '" + name + "' has only " +
                          std::to_string(size()));
    }
    Dataset out;
    out.images.assign(images.begin(), images.begin() + static_cast<std::ptrdiff_t>(n));
    out.labels.assign(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n));
    out.name = name;
    out.split = split;
    return out;
}

void AugmentConfig::validate() const {
    if (rotation_range_deg < 0 || width_shift_range < 0 || height_shift_range < 0) {
        throw ConfigError("augmentation ranges must be non-negative");
    }
}

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 Split split) {
    const auto img = slurp(images_path);
    const auto lab = slurp(labels_path);

    if (be32(img, 0, images_path) != kIdxImagesMagic) throw FormatError(images_path.string() + ": bad IDX image magic", 0);
    if (be32(lab, 0, labels_path) != kIdxLabelsMagic) throw FormatError(labels_path.string() + ": bad IDX label magic", 0);
    const std::size_t count = be32(img, 4, images_path);
    const int rows = static_cast<int>(be32(img, 8, images_path));
    const int cols = static_cast<int>(be32(img, 12, images_path));
    const std::size_t label_count = be32(lab, 4, labels_path);
    if (count != label_count) {
        throw FormatError(labels_path.string() + ": " + std::to_string(label_count) + " labels for " +
                              std::to_string(count) + " images",
                          4);
    }
    const Shape shape{rows, cols, 1};
    const std::size_t px = shape.size();
    if (img.size() != 16 + count * px) {
        throw FormatError(images_path.string() + ": expected " + std::to_string(16 + count * px) + " bytes",
                          std::min<std::size_t>(img.size(), 16 + count * px));
    }
    if (lab.size() != 8 + count) {
        throw FormatError(labels_path.string() + ": expected " + std::to_string(8 + count) + " bytes",
                          std::min<std::size_t>(lab.size(), 8 + count));
    }

    Dataset ds;
    ds.name = images_path.filename().string();
    ds.split = split;
    ds.images.reserve(count);
    ds.labels.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Image im(shape);
        const unsigned char* src = img.data() + 16 + i * px;
        for (std::size_t k = 0; k < px; ++k) im.pixels[k] = src[k] / 255.0;
        ds.images.push_back(std::move(im));
        ds.labels.push_back(lab[8 + i]);
    }
    return ds;
}

Dataset load_cifar10(std::span<const std::filesystem::path> batch_paths, Split split) {
    if (batch_paths.empty()) throw InputError("no CIFAR-10 batch files given");
    Dataset ds;
    ds.name = "cifar10";
    ds.split = split;
    const Shape shape{static_cast<int>(kCifarSide), static_cast<int>(kCifarSide), 3};
    for (const auto& path : batch_paths) {
        const auto bytes = slurp(path);
        if (bytes.empty() || bytes.size() % kCifarRecord != 0) {
            throw FormatError(path.string() + ": size " + std::to_string(bytes.size()) +
                                  " is not a positive multiple of 3073",
                              bytes.size() - bytes.size() % kCifarRecord);
        }
        for (std::size_t off = 0; off < bytes.size(); off += kCifarRecord) {
            Image im(shape);
            for (std::size_t ch = 0; ch < 3; ++ch) {
                const unsigned char* plane = bytes.data() + off + 1 + ch * kCifarPlane;
                for (std::size_t k = 0; k < kCifarPlane; ++k) im.pixels[k * 3 + ch] = plane[k] / 255.0;
            }
            ds.images.push_back(std::move(im));
            ds.labels.push_back(bytes[off]);
        }
    }
    return ds;
}

Dataset binary_task(const Dataset& data, int class_a, int class_b) {
    if (class_a == class_b) throw InputError("binary task needs two distinct classes");
    data.validate();
    Dataset out;
    out.name = data.name + ":" + std::to_string(class_a) + "v" + std::to_string(class_b);
    out.split = data.split;
    std::size_t count_a = 0;
    std::size_t count_b = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const int y = data.labels[i];
        if (y != class_a && y != class_b) continue;
        (y == class_a ? count_a : count_b) += 1;
        out.images.push_back(data.images[i]);
        out.labels.push_back(y == class_a ? 0 : 1);
    }
    if (count_a == 0 || count_b == 0) {
        throw InputError("class " + std::to_string(count_a == 0 ? class_a : class_b) + " is absent from '" +
                         data.name + "'");
    }
    return out;
}

Image augment(const Image& image, rng::Engine& engine, const AugmentConfig& cfg) {
    const double deg = cfg.rotation_range_deg > 0 ? rng::uniform(engine, -cfg.rotation_range_deg, cfg.rotation_range_deg) : 0.0;
    const int dx = cfg.width_shift_range > 0
                       ? static_cast<int>(rng::below(engine, 2 * static_cast<std::uint64_t>(cfg.width_shift_range) + 1)) -
                             cfg.width_shift_range
                       : 0;
    const int dy = cfg.height_shift_range > 0
                       ? static_cast<int>(rng::below(engine, 2 * static_cast<std::uint64_t>(cfg.height_shift_range) + 1)) -
                             cfg.height_shift_range
                       : 0;
    Image out = deg != 0.0 ? rotate(image, deg * std::numbers::pi / 180.0, Border::nearest) : image;
    if (dx != 0 || dy != 0) out = shift(out, dx, dy, Border::nearest);
    return out;
}

Dataset synth_dataset(std::size_t n, Shape shape, double separation, std::uint64_t seed) {
    if (n % 2 != 0) throw InputError("synthetic dataset size must be even");
    if (separation < 0) throw InputError("separation must be non-negative");
    if (shape.height < 2 || shape.width < 2 || shape.channels < 1) throw InputError("synthetic shape too small");

    // Bumps centred in the upper-left and lower-right quadrants, cut off before they
    // can overlap, so the two templates are exactly orthogonal.
    const double radius = std::min(shape.height, shape.width) / 4.0;
    const double sigma = radius / 2.0;
    auto bump = [&](double cy, double cx) {
        Image t(shape);
        for (int r = 0; r < shape.height; ++r) {
            for (int c = 0; c < shape.width; ++c) {
                const double d2 = (r - cy) * (r - cy) + (c - cx) * (c - cx);
                if (d2 >= radius * radius) continue;
                for (int ch = 0; ch < shape.channels; ++ch) t.at(r, c, ch) = std::exp(-d2 / (2 * sigma * sigma));
            }
        }
        return t;
    };
    const Image templates[2] = {bump((shape.height - 1) / 4.0, (shape.width - 1) / 4.0),
                                bump(3 * (shape.height - 1) / 4.0, 3 * (shape.width - 1) / 4.0)};
    constexpr double kBackground = 0.2;
    constexpr double kAmplitude = 0.3;
    constexpr double kNoise = 0.1;

    rng::Engine engine(seed);
    Dataset ds;
    ds.name = "synth";
    ds.images.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % 2);
        Image im(shape);
        for (std::size_t k = 0; k < im.pixels.size(); ++k) {
            const double mean = kBackground + kAmplitude * separation * templates[label].pixels[k];
            im.pixels[k] = std::clamp(mean + kNoise * rng::normal(engine), 0.0, 1.0);
        }
        ds.images.push_back(std::move(im));
        ds.labels.push_back(label);
    }
    return ds;
}

}  // namespace ak
