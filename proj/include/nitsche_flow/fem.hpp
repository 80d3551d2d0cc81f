#pragma once

// Q1 reference element on [-1,1]^2, Gauss rules and mapped geometry at quadrature points.
// Local node k sits at (xi_k, eta_k) = (-1,-1), (1,-1), (1,1), (-1,1); local edge k joins k and k+1.

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "nitsche_flow/mesh.hpp"
#include "nitsche_flow/vec2.hpp"

namespace nitsche_flow {

struct AssemblyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GaussRule {
    std::vector<double> points;
    std::vector<double> weights;
};

/// n-point Gauss-Legendre rule on [-1, 1], exact for degree 2n-1.
inline const GaussRule& gauss_rule(int n) {
    static const std::array<GaussRule, 5> rules = [] {
        std::array<GaussRule, 5> r;
        r[1] = {{0.0}, {2.0}};
        const double a2 = 1.0 / std::sqrt(3.0);
        r[2] = {{-a2, a2}, {1.0, 1.0}};
        const double a3 = std::sqrt(0.6);
        r[3] = {{-a3, 0.0, a3}, {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0}};
        const double s = 2.0 * std::sqrt(1.2);
        const double p1 = std::sqrt((3.0 - s) / 7.0), p2 = std::sqrt((3.0 + s) / 7.0);
        const double w1 = (18.0 + std::sqrt(30.0)) / 36.0, w2 = (18.0 - std::sqrt(30.0)) / 36.0;
        r[4] = {{-p2, -p1, p1, p2}, {w2, w1, w1, w2}};
        return r;
    }();
    if (n < 1 || n > 4) throw std::invalid_argument("gauss_rule: supported orders are 1..4");
    return rules[n];
}

/// Tensor-product rule on [-1,1]^2.
struct CellRule {
    std::vector<Point> points;
    std::vector<double> weights;
};

inline CellRule tensor_rule(int n) {
    const auto& g = gauss_rule(n);
    CellRule r;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            r.points.push_back({g.points[i], g.points[j]});
            r.weights.push_back(g.weights[i] * g.weights[j]);
        }
    return r;
}

namespace q1 {

inline constexpr std::array<double, 4> xi_node{-1.0, 1.0, 1.0, -1.0};
inline constexpr std::array<double, 4> eta_node{-1.0, -1.0, 1.0, 1.0};

inline std::array<double, 4> values(double xi, double eta) {
    std::array<double, 4> n{};
    for (int a = 0; a < 4; ++a) n[a] = 0.25 * (1.0 + xi_node[a] * xi) * (1.0 + eta_node[a] * eta);
    return n;
}

/// Reference gradients (d/dxi, d/deta).
inline std::array<Point, 4> gradients(double xi, double eta) {
    std::array<Point, 4> g{};
    for (int a = 0; a < 4; ++a)
        g[a] = {0.25 * xi_node[a] * (1.0 + eta_node[a] * eta), 0.25 * eta_node[a] * (1.0 + xi_node[a] * xi)};
    return g;
}

/// Only the mixed second derivative of a bilinear function is non-zero.
inline double mixed_derivative(int a) { return 0.25 * xi_node[a] * eta_node[a]; }

/// Reference coordinates of the point at parameter s in [-1,1] along local edge k.
inline Point edge_point(int k, double s) {
    const Point a{xi_node[k], eta_node[k]};
    const Point b{xi_node[(k + 1) % 4], eta_node[(k + 1) % 4]};
    return 0.5 * (1.0 - s) * a + 0.5 * (1.0 + s) * b;
}

}  // namespace q1

/// Basis data of one cell at one reference point.
struct PointGeometry {
    Point x{};
    std::array<double, 4> N{};
    std::array<Point, 4> dN{};     // physical gradients
    std::array<double, 4> lapN{};  // physical Laplacians (bilinear map second-order terms)
    double det{};
};

/// Evaluates the mapped basis of cell `c` at reference point (xi, eta).
inline PointGeometry map_point(const Mesh& m, int c, double xi, double eta) {
    const auto& q = m.cells[c];
    PointGeometry g;
    g.N = q1::values(xi, eta);
    const auto ref = q1::gradients(xi, eta);
    double j00 = 0, j01 = 0, j10 = 0, j11 = 0;  // j_rs = d x_r / d xi_s
    Point xmix{};                               // d^2 x / dxi deta
    for (int a = 0; a < 4; ++a) {
        const Point& X = m.nodes[q[a]];
        g.x += g.N[a] * X;
        j00 += X.x * ref[a].x;
        j01 += X.x * ref[a].y;
        j10 += X.y * ref[a].x;
        j11 += X.y * ref[a].y;
        xmix += q1::mixed_derivative(a) * X;
    }
    g.det = j00 * j11 - j01 * j10;
    if (!(g.det > 0.0)) throw AssemblyError("singular or inverted cell map in cell " + std::to_string(c));
    // Rows of J^-1: grad xi and grad eta.
    const Point gxi{j11 / g.det, -j01 / g.det};
    const Point geta{-j10 / g.det, j00 / g.det};
    for (int a = 0; a < 4; ++a) g.dN[a] = ref[a].x * gxi + ref[a].y * geta;
    // Hessian_x N = J^-T (H_ref N - sum_r dN/dx_r H_ref x_r) J^-1; H_ref has only the mixed entry.
    const double cross = 2.0 * dot(gxi, geta);
    for (int a = 0; a < 4; ++a) {
        const double hm = q1::mixed_derivative(a) - (g.dN[a].x * xmix.x + g.dN[a].y * xmix.y);
        g.lapN[a] = hm * cross;
    }
    return g;
}

/// Basis data on a boundary edge point; `ds` is the length element times the Gauss weight.
struct EdgePointGeometry {
    PointGeometry cell;
    Point n{};
    double ds{};
};

/// Gauss points of local edge `k` of cell `c`, with outward normal.
inline std::vector<EdgePointGeometry> map_edge(const Mesh& m, int c, int k, int npoints) {
    const auto& rule = gauss_rule(npoints);
    const auto& q = m.cells[c];
    const Point a = m.nodes[q[k]];
    const Point b = m.nodes[q[(k + 1) % 4]];
    const Point d = b - a;
    const double len = norm(d);
    const Point n{d.y / len, -d.x / len};
    std::vector<EdgePointGeometry> out(rule.points.size());
    for (std::size_t i = 0; i < rule.points.size(); ++i) {
        const Point r = q1::edge_point(k, rule.points[i]);
        out[i].cell = map_point(m, c, r.x, r.y);
        out[i].n = n;
        out[i].ds = 0.5 * len * rule.weights[i];
    }
    return out;
}

inline constexpr int kCellPoints = 3;  // per direction
inline constexpr int kEdgePoints = 4;

}  // namespace nitsche_flow
