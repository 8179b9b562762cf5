#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ak/image.hpp"
#include "ak/rng.hpp"

namespace ak {

enum class Split { train, test };

struct Dataset {
    std::vector<Image> images;
    std::vector<int> labels;
    std::string name;
    Split split = Split::train;

    std::size_t size() const noexcept { return images.size(); }
    bool empty() const noexcept { return images.empty(); }
    Shape shape() const;
    // Throws InputError unless images/labels agree in length and share one shape.
    void validate() const;
    // First n examples (n <= size()).
    Dataset head(std::size_t n) const;
};

enum class FillMode { nearest };

// Train-time augmentation drawn per example and epoch.
struct AugmentConfig {
    double rotation_range_deg = 15.0;
    int width_shift_range = 1;
    int height_shift_range = 1;
    FillMode fill_mode = FillMode::nearest;

    void validate() const;
};

// Big-endian IDX pair (images magic 0x00000803, labels 0x00000801); pixels / 255.
// Gzip-compressed files are read transparently.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 Split split = Split::train);

// CIFAR-10 binary batches: 3073-byte records (label, 3x32x32 channel-planar pixels).
Dataset load_cifar10(std::span<const std::filesystem::path> batch_paths, Split split = Split::train);

// Keeps labels class_a / class_b (relabelled 0 / 1) in original order.
Dataset binary_task(const Dataset& data, int class_a, int class_b);

// Random rotation in [-range, range] degrees (bilinear) then integer shifts in
// [-range, range] per axis, both with nearest-edge fill. The draw consumes `engine`.
Image augment(const Image& image, rng::Engine& engine, const AugmentConfig& cfg);

// Two-class synthetic images: Gaussian noise (sigma 0.1, clipped to [0, 1]) around
// one of two fixed orthogonal blob templates scaled by `separation`.
Dataset synth_dataset(std::size_t n, Shape shape, double separation, std::uint64_t seed);

}  // namespace ak
