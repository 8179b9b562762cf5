#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "ak/image.hpp"

namespace ak {

class Network;
struct Checkpoint;
enum class EmbeddingKind : std::uint8_t;

// Value used for source pixels that fall outside the image.
enum class Border { zero, nearest };

enum class Transform {
    identity,
    shift_right_1,
    shift_down_1,
    rotate_ccw_quarter_rad,
    rotate_cw_quarter_rad,
    zoom_1px,
    quadrant_swap,
};

std::string_view to_string(Transform t);
Transform parse_transform(std::string_view name);

// Output pixel (r, c) = input (r - dy, c - dx) when in bounds; otherwise the border value.
Image shift(const Image& image, int dx, int dy, Border border = Border::zero);

// Rotation by `angle` radians (positive = counterclockwise on screen) about the
// center ((H-1)/2, (W-1)/2), bilinear sampling, channels independent.
Image rotate(const Image& image, double angle, Border border = Border::zero);

// Crops one pixel from every border and resizes back to H x W with a corner-aligned
// bilinear grid. Requires H, W >= 4.
Image zoom(const Image& image);

// Exchanges the upper-left floor(H/2) x floor(W/2) block with the equally sized
// lower-right block.
Image quadrant_swap(const Image& image);

Image apply(Transform t, const Image& image);

// Transform sets used by the named invariance metrics.
std::vector<Transform> translation_transforms();
std::vector<Transform> rotation_transforms();
std::vector<Transform> zoom_transforms();
std::vector<Transform> swap_transforms();

struct InvarianceResult {
    double value = 0.0;          // mean cosine over the counted pairs
    std::size_t pairs = 0;       // (image, transform) pairs averaged
    std::size_t skipped = 0;     // pairs with a zero embedding
    bool warning = false;        // skipped fraction above 1%
};

// Cosine with a fixed formula: dot / sqrt(|a|^2 |b|^2), so identical vectors give exactly 1.
double cosine(std::span<const double> a, std::span<const double> b);

// Mean cosine similarity between phi(x) and phi(t(x)) over images x and transforms t.
InvarianceResult invariance(const Network& net, std::span<const Image> images,
                            std::span<const Transform> transforms, EmbeddingKind kind);
InvarianceResult invariance(const Checkpoint& checkpoint, std::span<const Image> images,
                            std::span<const Transform> transforms, EmbeddingKind kind);

}  // namespace ak
