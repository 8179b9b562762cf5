#include "ak/rng.hpp"

#include <cmath>
#include <numbers>

namespace ak::rng {

double normal(Engine& e) {
    double u1 = 0.0;
    do {
        u1 = uniform01(e);
    } while (u1 <= 0.0);
    const double u2 = uniform01(e);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace ak::rng
