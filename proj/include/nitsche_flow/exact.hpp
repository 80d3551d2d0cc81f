#pragma once

#include <array>
#include <cmath>
#include <numbers>

#include "nitsche_flow/vec2.hpp"

namespace nitsche_flow {

/// Kovasznay flow (rho = 1): steady Navier-Stokes solution behind a row of cylinders.
/// v = (1 - e^{-lambda x} cos 2 pi y, -lambda/(2 pi) e^{-lambda x} sin 2 pi y), p = (1 - e^{-2 lambda x}) / 2.
struct Kovasznay {
    double mu{0.025};

    [[nodiscard]] double lambda() const {
        const double pi2 = std::numbers::pi * std::numbers::pi;
        return 8.0 * pi2 * mu / (1.0 + std::sqrt(1.0 + 16.0 * pi2 * mu * mu));
    }

    [[nodiscard]] Point velocity(const Point& x) const {
        const double l = lambda(), e = std::exp(-l * x.x), w = 2.0 * std::numbers::pi;
        return {1.0 - e * std::cos(w * x.y), -l / w * e * std::sin(w * x.y)};
    }

    [[nodiscard]] double pressure(const Point& x) const { return 0.5 * (1.0 - std::exp(-2.0 * lambda() * x.x)); }

    /// Rows of the velocity gradient: (grad v1, grad v2).
    [[nodiscard]] std::array<Point, 2> gradient(const Point& x) const {
        const double l = lambda(), e = std::exp(-l * x.x), w = 2.0 * std::numbers::pi;
        const double c = std::cos(w * x.y), s = std::sin(w * x.y);
        return {Point{l * e * c, w * e * s}, Point{l * l / w * e * s, -l * e * c}};
    }

    /// Outflow datum consistent with p - mu dv/dn . n = p^D on a face with normal n.
    [[nodiscard]] double outflow_pressure(const Point& x, const Point& n) const {
        const auto g = gradient(x);
        const double dnvn = n.x * dot(g[0], n) + n.y * dot(g[1], n);
        return pressure(x) - mu * dnvn;
    }
};

}  // namespace nitsche_flow
