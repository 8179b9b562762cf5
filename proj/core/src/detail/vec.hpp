#pragma once

#include <cstddef>

namespace ak::detail {

inline constexpr std::size_t kLanes = 8;

// Dot product with a fixed accumulation order: element k goes to lane k % 8 in
// increasing k, then lanes are added 0..7. The explicit lanes let the compiler
// vectorize without reassociating, so results do not depend on the target ISA.
inline double dot(const double* a, const double* b, std::size_t n) noexcept {
    double acc[kLanes] = {};
    std::size_t k = 0;
    for (; k + kLanes <= n; k += kLanes) {
        for (std::size_t l = 0; l < kLanes; ++l) acc[l] += a[k + l] * b[k + l];
    }
    for (std::size_t l = 0; k < n; ++k, ++l) acc[l] += a[k] * b[k];
    double s = acc[0];
    for (std::size_t l = 1; l < kLanes; ++l) s += acc[l];
    return s;
}

// y += alpha * x
inline void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace ak::detail
