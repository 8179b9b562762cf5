#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace ak {

struct Shape {
    int height = 0;
    int width = 0;
    int channels = 0;

    std::size_t size() const noexcept {
        return static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
               static_cast<std::size_t>(channels);
    }
    std::string str() const;

    friend bool operator==(const Shape&, const Shape&) = default;
};

// Dense H x W x C pixel grid, channel-last (pixel (r, c) occupies C consecutive values).
struct Image {
    Shape shape;
    std::vector<double> pixels;

    Image() = default;
    explicit Image(Shape s, double fill = 0.0) : shape(s), pixels(s.size(), fill) {}
    Image(Shape s, std::vector<double> values);

    double& at(int r, int c, int ch = 0) { return pixels[index(r, c, ch)]; }
    double at(int r, int c, int ch = 0) const { return pixels[index(r, c, ch)]; }

    std::size_t index(int r, int c, int ch) const noexcept {
        return (static_cast<std::size_t>(r) * static_cast<std::size_t>(shape.width) +
                static_cast<std::size_t>(c)) *
                   static_cast<std::size_t>(shape.channels) +
               static_cast<std::size_t>(ch);
    }

    friend bool operator==(const Image&, const Image&) = default;
};

}  // namespace ak
