#include "ak/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ak/error.hpp"
#include "ak/kernel.hpp"
#include "ak/train.hpp"
#include "detail/vec.hpp"

namespace ak {

namespace {

constexpr double kQuarterRadian = 0.25;

// Pixel value at integer coordinates with the given border rule.
double sample(const Image& im, int r, int c, int ch, Border border) {
    const int H = im.shape.height;
    const int W = im.shape.width;
    if (r < 0 || r >= H || c < 0 || c >= W) {
        if (border == Border::zero) return 0.0;
        r = std::clamp(r, 0, H - 1);
        c = std::clamp(c, 0, W - 1);
    }
    return im.at(r, c, ch);
}

// Bilinear interpolation written as nested lerps, so equal neighbours reproduce
// their value exactly.
double bilinear(const Image& im, double y, double x, int ch, Border border) {
    const double fy0 = std::floor(y);
    const double fx0 = std::floor(x);
    const int y0 = static_cast<int>(fy0);
    const int x0 = static_cast<int>(fx0);
    const double ty = y - fy0;
    const double tx = x - fx0;
    const double p00 = sample(im, y0, x0, ch, border);
    const double p01 = tx == 0.0 ? p00 : sample(im, y0, x0 + 1, ch, border);
    const double top = p00 + tx * (p01 - p00);
    if (ty == 0.0) return top;
    const double p10 = sample(im, y0 + 1, x0, ch, border);
    const double p11 = tx == 0.0 ? p10 : sample(im, y0 + 1, x0 + 1, ch, border);
    const double bottom = p10 + tx * (p11 - p10);
    return top + ty * (bottom - top);
}

}  // namespace

std::string_view to_string(Transform t) {
    switch (t) {
        case Transform::identity: return "identity";
        case Transform::shift_right_1: return "shift_right_1";
        case Transform::shift_down_1: return "shift_down_1";
        case Transform::rotate_ccw_quarter_rad: return "rotate_ccw_quarter_rad";
        case Transform::rotate_cw_quarter_rad: return "rotate_cw_quarter_rad";
        case Transform::zoom_1px: return "zoom_1px";
        case Transform::quadrant_swap: return "quadrant_swap";
    }
    return "?";
}

Transform parse_transform(std::string_view name) {
    for (Transform t : {Transform::identity, Transform::shift_right_1, Transform::shift_down_1,
                        Transform::rotate_ccw_quarter_rad, Transform::rotate_cw_quarter_rad, Transform::zoom_1px,
                        Transform::quadrant_swap}) {
        if (to_string(t) == name) return t;
    }
    throw ConfigError("unknown transform '" + std::string(name) + "'");
}

Image shift(const Image& image, int dx, int dy, Border border) {
    const int H = image.shape.height;
    const int W = image.shape.width;
    const int limit = std::min(H, W);
    if (std::abs(dx) >= limit || std::abs(dy) >= limit) {
        throw InputError("shift of (" + std::to_string(dx) + ", " + std::to_string(dy) + ") too large for " +
                         image.shape.str());
    }
    Image out(image.shape);
    for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
            for (int ch = 0; ch < image.shape.channels; ++ch) out.at(r, c, ch) = sample(image, r - dy, c - dx, ch, border);
        }
    }
    return out;
}

Image rotate(const Image& image, double angle, Border border) {
    if (!(std::abs(angle) <= std::numbers::pi)) throw InputError("rotation angle must lie in [-pi, pi]");
    const int H = image.shape.height;
    const int W = image.shape.width;
    const double cy = (H - 1) / 2.0;
    const double cx = (W - 1) / 2.0;
    const double cs = std::cos(angle);
    const double sn = std::sin(angle);
    Image out(image.shape);
    for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
            // inverse map: rows grow downward, so screen-counterclockwise is clockwise in (x, y)
            const double x = c - cx;
            const double y = r - cy;
            const double sx = x * cs - y * sn + cx;
            const double sy = x * sn + y * cs + cy;
            for (int ch = 0; ch < image.shape.channels; ++ch) out.at(r, c, ch) = bilinear(image, sy, sx, ch, border);
        }
    }
    return out;
}

Image zoom(const Image& image) {
    const int H = image.shape.height;
    const int W = image.shape.width;
    if (H < 4 || W < 4) throw InputError("zoom needs an image of at least 4x4, got " + image.shape.str());
    Image out(image.shape);
    for (int r = 0; r < H; ++r) {
        // corner-aligned grid over the (H-2) x (W-2) crop, offset by the one-pixel border
        const double sy = static_cast<double>(r) * (H - 3) / (H - 1) + 1.0;
        for (int c = 0; c < W; ++c) {
            const double sx = static_cast<double>(c) * (W - 3) / (W - 1) + 1.0;
            for (int ch = 0; ch < image.shape.channels; ++ch) out.at(r, c, ch) = bilinear(image, sy, sx, ch, Border::zero);
        }
    }
    return out;
}

Image quadrant_swap(const Image& image) {
    const int H = image.shape.height;
    const int W = image.shape.width;
    const int qh = H / 2;
    const int qw = W / 2;
    Image out = image;
    for (int r = 0; r < qh; ++r) {
        for (int c = 0; c < qw; ++c) {
            for (int ch = 0; ch < image.shape.channels; ++ch) {
                std::swap(out.at(r, c, ch), out.at(H - qh + r, W - qw + c, ch));
            }
        }
    }
    return out;
}

Image apply(Transform t, const Image& image) {
    switch (t) {
        case Transform::identity: return image;
        case Transform::shift_right_1: return shift(image, 1, 0);
        case Transform::shift_down_1: return shift(image, 0, 1);
        case Transform::rotate_ccw_quarter_rad: return rotate(image, kQuarterRadian);
        case Transform::rotate_cw_quarter_rad: return rotate(image, -kQuarterRadian);
        case Transform::zoom_1px: return zoom(image);
        case Transform::quadrant_swap: return quadrant_swap(image);
    }
    return image;
}

std::vector<Transform> translation_transforms() { return {Transform::shift_right_1, Transform::shift_down_1}; }
std::vector<Transform> rotation_transforms() {
    return {Transform::rotate_cw_quarter_rad, Transform::rotate_ccw_quarter_rad};
}
std::vector<Transform> zoom_transforms() { return {Transform::zoom_1px}; }
std::vector<Transform> swap_transforms() { return {Transform::quadrant_swap}; }

double cosine(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InputError("cosine of vectors with different lengths");
    const double ab = detail::dot(a.data(), b.data(), a.size());
    const double aa = detail::dot(a.data(), a.data(), a.size());
    const double bb = detail::dot(b.data(), b.data(), b.size());
    return ab / std::sqrt(aa * bb);
}

InvarianceResult invariance(const Network& net, std::span<const Image> images, std::span<const Transform> transforms,
                            EmbeddingKind kind) {
    if (images.empty()) throw InputError("invariance needs at least one image");
    if (transforms.empty()) throw InputError("invariance needs at least one transform");
    Embedder embed(net, kind);
    std::vector<double> base;
    InvarianceResult res;
    double sum = 0.0;
    for (const Image& x : images) {
        const auto phi = embed(x);
        base.assign(phi.begin(), phi.end());
        const bool base_zero = std::all_of(base.begin(), base.end(), [](double v) { return v == 0.0; });
        for (Transform t : transforms) {
            const auto other = t == Transform::identity ? std::span<const double>(base) : embed(apply(t, x));
            const bool other_zero = std::all_of(other.begin(), other.end(), [](double v) { return v == 0.0; });
            if (base_zero || other_zero) {
                ++res.skipped;
                continue;
            }
            sum += cosine(base, other);
            ++res.pairs;
        }
    }
    const std::size_t total = res.pairs + res.skipped;
    res.warning = static_cast<double>(res.skipped) > 0.01 * static_cast<double>(total);
    if (res.pairs == 0) throw DegenerateError("every embedding pair contained a zero vector");
    res.value = sum / static_cast<double>(res.pairs);
    return res;
}

InvarianceResult invariance(const Checkpoint& checkpoint, std::span<const Image> images,
                            std::span<const Transform> transforms, EmbeddingKind kind) {
    if (images.empty()) throw InputError("invariance needs at least one image");
    return invariance(restore_network(checkpoint, images.front().shape), images, transforms, kind);
}

}  // namespace ak
