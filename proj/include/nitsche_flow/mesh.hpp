#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "nitsche_flow/vec2.hpp"

namespace nitsche_flow {

enum class BCTag { Wall, Inflow, Outflow, Symmetry, Characteristic };

inline const char* tag_name(BCTag t) {
    switch (t) {
        case BCTag::Wall: return "wall";
        case BCTag::Inflow: return "in";
        case BCTag::Outflow: return "out";
        case BCTag::Symmetry: return "sym";
        case BCTag::Characteristic: return "char";
    }
    return "?";
}

inline BCTag parse_tag(const std::string& s) {
    if (s == "wall") return BCTag::Wall;
    if (s == "in") return BCTag::Inflow;
    if (s == "out") return BCTag::Outflow;
    if (s == "sym") return BCTag::Symmetry;
    if (s == "char") return BCTag::Characteristic;
    throw std::invalid_argument("unknown boundary tag '" + s + "'");
}

struct MeshError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Circle onto which boundary nodes of flagged edges are projected after refinement.
struct Circle {
    Point center{};
    double radius{};

    [[nodiscard]] Point project(const Point& x) const {
        const Point d = x - center;
        const double r = norm(d);
        return center + (radius / r) * d;
    }
};

struct BoundaryEdge {
    std::array<int, 2> nodes{};  // counter-clockwise as seen from the owning cell
    int cell{-1};
    int local{-1};  // local edge index: cell[local] -> cell[(local+1)%4]
    BCTag tag{BCTag::Wall};
    int curve{-1};  // index into Mesh::curves, -1 for straight edges
};

/// Conforming quadrilateral mesh; cells are counter-clockwise node quadruples.
struct Mesh {
    std::vector<Point> nodes;
    std::vector<std::array<int, 4>> cells;
    std::vector<BoundaryEdge> bedges;
    std::vector<double> diameter;  // d_K, max pairwise corner distance
    std::vector<Circle> curves;

    [[nodiscard]] std::size_t num_nodes() const { return nodes.size(); }
    [[nodiscard]] std::size_t num_cells() const { return cells.size(); }

    [[nodiscard]] Point outward_normal(const BoundaryEdge& e) const {
        const Point d = nodes[e.nodes[1]] - nodes[e.nodes[0]];
        const double l = norm(d);
        return {d.y / l, -d.x / l};
    }

    [[nodiscard]] double cell_area(int c) const {
        const auto& q = cells[c];
        double a = 0.0;
        for (int k = 0; k < 4; ++k) {
            const Point& p0 = nodes[q[k]];
            const Point& p1 = nodes[q[(k + 1) % 4]];
            a += p0.x * p1.y - p1.x * p0.y;
        }
        return 0.5 * a;
    }

    [[nodiscard]] Point cell_centroid(int c) const {
        Point s{};
        for (int k : cells[c]) s += nodes[k];
        return 0.25 * s;
    }

    [[nodiscard]] double total_area() const {
        double a = 0.0;
        for (std::size_t c = 0; c < cells.size(); ++c) a += cell_area(static_cast<int>(c));
        return a;
    }

    [[nodiscard]] bool has_tag(BCTag t) const {
        return std::any_of(bedges.begin(), bedges.end(), [t](const BoundaryEdge& e) { return e.tag == t; });
    }
};

/// Decides the tag of a boundary edge from its endpoints and outward normal.
using EdgeTagger = std::function<BCTag(const Point& a, const Point& b, const Point& normal)>;

namespace detail {

inline std::uint64_t edge_key(int a, int b) {
    const auto lo = static_cast<std::uint64_t>(std::min(a, b));
    const auto hi = static_cast<std::uint64_t>(std::max(a, b));
    return (hi << 32) | lo;
}

inline double corner_jacobian(const Mesh& m, int c, int k) {
    const auto& q = m.cells[c];
    const Point& x = m.nodes[q[k]];
    const Point a = m.nodes[q[(k + 1) % 4]] - x;
    const Point b = m.nodes[q[(k + 3) % 4]] - x;
    return a.x * b.y - a.y * b.x;
}

inline void compute_diameters(Mesh& m) {
    m.diameter.resize(m.cells.size());
    for (std::size_t c = 0; c < m.cells.size(); ++c) {
        double d = 0.0;
        for (int i = 0; i < 4; ++i)
            for (int j = i + 1; j < 4; ++j) d = std::max(d, norm(m.nodes[m.cells[c][i]] - m.nodes[m.cells[c][j]]));
        m.diameter[c] = d;
    }
}

/// Orients cells counter-clockwise, extracts boundary edges (edges used by exactly one cell),
/// tags them, and checks non-degeneracy.
inline void finalize(Mesh& m, const EdgeTagger& tagger) {
    for (std::size_t c = 0; c < m.cells.size(); ++c) {
        if (m.cell_area(static_cast<int>(c)) < 0.0) std::swap(m.cells[c][1], m.cells[c][3]);
    }
    std::unordered_map<std::uint64_t, std::pair<int, int>> uses;  // key -> (count, cell*4+local)
    uses.reserve(m.cells.size() * 4);
    for (std::size_t c = 0; c < m.cells.size(); ++c) {
        for (int k = 0; k < 4; ++k) {
            auto& u = uses[edge_key(m.cells[c][k], m.cells[c][(k + 1) % 4])];
            ++u.first;
            u.second = static_cast<int>(c) * 4 + k;
        }
    }
    m.bedges.clear();
    for (std::size_t c = 0; c < m.cells.size(); ++c) {
        for (int k = 0; k < 4; ++k) {
            const int a = m.cells[c][k];
            const int b = m.cells[c][(k + 1) % 4];
            const auto& u = uses.at(edge_key(a, b));
            if (u.first > 2) throw MeshError("non-manifold edge");
            if (u.first == 1) {
                BoundaryEdge e;
                e.nodes = {a, b};
                e.cell = static_cast<int>(c);
                e.local = k;
                e.tag = tagger(m.nodes[a], m.nodes[b], m.outward_normal(e));
                m.bedges.push_back(e);
            }
        }
    }
    for (std::size_t c = 0; c < m.cells.size(); ++c)
        for (int k = 0; k < 4; ++k)
            if (!(corner_jacobian(m, static_cast<int>(c), k) > 0.0)) throw MeshError("degenerate or non-convex cell");
    compute_diameters(m);
}

/// Merges coincident nodes (within tol) so independently generated blocks become conforming.
class NodeMerger {
public:
    explicit NodeMerger(double tol) : tol_(tol) {}

    int add(const Point& p, std::vector<Point>& nodes) {
        const auto ix = static_cast<long long>(std::llround(p.x / tol_));
        const auto iy = static_cast<long long>(std::llround(p.y / tol_));
        for (long long dx = -1; dx <= 1; ++dx)
            for (long long dy = -1; dy <= 1; ++dy) {
                auto it = grid_.find({ix + dx, iy + dy});
                if (it == grid_.end()) continue;
                for (int id : it->second)
                    if (norm(nodes[id] - p) <= tol_) return id;
            }
        const int id = static_cast<int>(nodes.size());
        nodes.push_back(p);
        grid_[{ix, iy}].push_back(id);
        return id;
    }

private:
    double tol_;
    std::map<std::pair<long long, long long>, std::vector<int>> grid_;
};

/// Adds an (ns x nt) block of cells mapped by X(s, t), s, t in [0, 1].
inline void add_block(Mesh& m, NodeMerger& merger, int ns, int nt, const std::function<Point(double, double)>& map) {
    std::vector<int> ids((ns + 1) * (nt + 1));
    for (int j = 0; j <= nt; ++j)
        for (int i = 0; i <= ns; ++i)
            ids[j * (ns + 1) + i] = merger.add(map(static_cast<double>(i) / ns, static_cast<double>(j) / nt), m.nodes);
    for (int j = 0; j < nt; ++j)
        for (int i = 0; i < ns; ++i)
            m.cells.push_back({ids[j * (ns + 1) + i], ids[j * (ns + 1) + i + 1], ids[(j + 1) * (ns + 1) + i + 1],
                               ids[(j + 1) * (ns + 1) + i]});
}

inline std::function<Point(double, double)> rect_map(double x0, double x1, double y0, double y1) {
    return [=](double s, double t) { return Point{x0 + (x1 - x0) * s, y0 + (y1 - y0) * t}; };
}

/// Straight-sided lattice restricted to the cells selected by `keep(i, j)`.
/// Node coordinates are origin + scale * (i * hx, j * hy) with exactly representable unit steps.
inline Mesh masked_lattice(Point origin, double hx, double hy, int nx, int ny, double scale,
                           const std::function<bool(int, int)>& keep, const EdgeTagger& tagger) {
    Mesh m;
    std::vector<int> id((nx + 1) * (ny + 1), -1);
    auto node = [&](int i, int j) {
        int& k = id[j * (nx + 1) + i];
        if (k < 0) {
            k = static_cast<int>(m.nodes.size());
            m.nodes.push_back({origin.x + scale * (i * hx), origin.y + scale * (j * hy)});
        }
        return k;
    };
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
            if (keep(i, j)) m.cells.push_back({node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)});
    if (m.cells.empty()) throw MeshError("empty lattice");
    finalize(m, tagger);
    return m;
}

inline void mark_curve(Mesh& m, const Circle& c, double tol) {
    const int idx = static_cast<int>(m.curves.size());
    m.curves.push_back(c);
    for (auto& e : m.bedges) {
        const double r0 = norm(m.nodes[e.nodes[0]] - c.center);
        const double r1 = norm(m.nodes[e.nodes[1]] - c.center);
        if (std::abs(r0 - c.radius) <= tol && std::abs(r1 - c.radius) <= tol) e.curve = idx;
    }
}

}  // namespace detail

struct RectangleTags {
    BCTag left{BCTag::Wall};
    BCTag right{BCTag::Wall};
    BCTag bottom{BCTag::Wall};
    BCTag top{BCTag::Wall};
};

/// Structured nx x ny rectangle with one tag per side.
inline Mesh generate_rectangle(double x0, double x1, double y0, double y1, int nx, int ny, RectangleTags tags = {}) {
    if (nx < 1 || ny < 1) throw MeshError("generate_rectangle: nx, ny must be >= 1");
    if (!(x0 < x1) || !(y0 < y1)) throw MeshError("generate_rectangle: degenerate extents");
    Mesh m;
    detail::NodeMerger merger(1e-12 * std::max(x1 - x0, y1 - y0));
    detail::add_block(m, merger, nx, ny, detail::rect_map(x0, x1, y0, y1));
    detail::finalize(m, [&](const Point&, const Point&, const Point& n) {
        if (n.x < -0.5) return tags.left;
        if (n.x > 0.5) return tags.right;
        if (n.y < -0.5) return tags.bottom;
        return tags.top;
    });
    return m;
}

/// Each quad split into four; boundary tags inherited; nodes on curved edges projected.
inline Mesh refine_uniform(const Mesh& coarse) {
    Mesh m;
    m.nodes = coarse.nodes;
    m.curves = coarse.curves;
    std::unordered_map<std::uint64_t, int> mid;
    std::unordered_map<std::uint64_t, int> curve_of;
    for (const auto& e : coarse.bedges)
        if (e.curve >= 0) curve_of[detail::edge_key(e.nodes[0], e.nodes[1])] = e.curve;
    auto midpoint = [&](int a, int b) {
        const auto key = detail::edge_key(a, b);
        auto it = mid.find(key);
        if (it != mid.end()) return it->second;
        Point p = 0.5 * (coarse.nodes[a] + coarse.nodes[b]);
        if (auto c = curve_of.find(key); c != curve_of.end()) p = coarse.curves[c->second].project(p);
        const int id = static_cast<int>(m.nodes.size());
        m.nodes.push_back(p);
        mid.emplace(key, id);
        return id;
    };
    // Children of cell c occupy slots 4c..4c+3; child k keeps corner k of the parent.
    m.cells.reserve(coarse.cells.size() * 4);
    for (const auto& q : coarse.cells) {
        const int e0 = midpoint(q[0], q[1]);
        const int e1 = midpoint(q[1], q[2]);
        const int e2 = midpoint(q[2], q[3]);
        const int e3 = midpoint(q[3], q[0]);
        Point cp{};
        for (int k : q) cp += coarse.nodes[k];
        const int c = static_cast<int>(m.nodes.size());
        m.nodes.push_back(0.25 * cp);
        m.cells.push_back({q[0], e0, c, e3});
        m.cells.push_back({e0, q[1], e1, c});
        m.cells.push_back({c, e1, q[2], e2});
        m.cells.push_back({e3, c, e2, q[3]});
    }
    // Each coarse boundary edge splits into two; the owning child is known from the slot layout.
    for (const auto& e : coarse.bedges) {
        const int mnode = midpoint(e.nodes[0], e.nodes[1]);
        const int k = e.local;
        BoundaryEdge a = e, b = e;
        // Child k holds corner k, whose local edge k runs corner -> midpoint.
        a.cell = 4 * e.cell + k;
        a.nodes = {e.nodes[0], mnode};
        a.local = k;
        // Child (k+1)%4 holds corner k+1; its edge from the midpoint to that corner has local index k.
        b.cell = 4 * e.cell + (k + 1) % 4;
        b.nodes = {mnode, e.nodes[1]};
        b.local = k;
        m.bedges.push_back(a);
        m.bedges.push_back(b);
    }
    for (std::size_t c = 0; c < m.cells.size(); ++c)
        for (int k = 0; k < 4; ++k)
            if (!(detail::corner_jacobian(m, static_cast<int>(c), k) > 0.0))
                throw MeshError("refine_uniform: degenerate child cell");
    detail::compute_diameters(m);
    return m;
}

/// Backward-facing step: inlet channel [-upstream, 0] x [height - inlet, height] expanding into
/// [0, downstream] x [0, height]; inflow at the upstream face, outflow downstream, walls elsewhere.
inline Mesh generate_bfs(double step_height, double inlet_height, double upstream_len, double downstream_len,
                         int resolution) {
    if (!(step_height > 0 && inlet_height > 0 && upstream_len > 0 && downstream_len > 0) || resolution < 1)
        throw MeshError("generate_bfs: dimensions must be positive");
    const double height = step_height + inlet_height;
    const double h = step_height / resolution;
    const int nx_up = static_cast<int>(std::lround(upstream_len / h));
    const int nx_down = static_cast<int>(std::lround(downstream_len / h));
    const int ny = static_cast<int>(std::lround(height / h));
    const int ny_step = resolution;
    const double x_in = -nx_up * h;
    const double x_out = nx_down * h;
    return detail::masked_lattice(
        {x_in, 0.0}, h, h, nx_up + nx_down, ny, 1.0, [&](int i, int j) { return i >= nx_up || j >= ny_step; },
        [&](const Point& a, const Point& b, const Point& n) {
            const double tol = 1e-9 * h;
            if (n.x < -0.5 && std::abs(a.x - x_in) < tol && std::abs(b.x - x_in) < tol) return BCTag::Inflow;
            if (n.x > 0.5 && std::abs(a.x - x_out) < tol) return BCTag::Outflow;
            return BCTag::Wall;
        });
}

/// Channel [0, length] x [0, 0.41] with a cylinder of diameter 0.1 centred at (0.2, 0.2).
/// `resolution` >= 1 multiplies the coarse block subdivision. Cylinder edges are tagged Wall and
/// flagged as curve 0, inflow at x=0, outflow at x=length, walls at y=0 and y=0.41.
inline Mesh generate_cylinder_channel(double length, int resolution) {
    constexpr double H = 0.41, cx = 0.2, cy = 0.2, r = 0.05, a = 0.1;
    if (!(length >= cx + a + 0.05)) throw MeshError("generate_cylinder_channel: channel too short for the cylinder");
    if (resolution < 1) throw MeshError("generate_cylinder_channel: resolution must be >= 1");
    const int k = resolution;
    const double x0 = cx - a, x1 = cx + a, y0 = cy - a, y1 = cy + a;
    const int n_right = std::max(1, static_cast<int>(std::lround((length - x1) / 0.1)));
    Mesh m;
    detail::NodeMerger merger(1e-10);
    const Circle circle{{cx, cy}, r};
    // Four ring sectors between the circle and the square [x0,x1] x [y0,y1].
    for (int sector = 0; sector < 4; ++sector) {
        const double phi0 = -0.25 * std::numbers::pi + sector * 0.5 * std::numbers::pi;
        auto square = [&](double t) {
            const double s = 2.0 * t - 1.0;  // -1..1 along the side
            switch (sector) {
                case 0: return Point{x1, cy + a * s};
                case 1: return Point{cx - a * s, y1};
                case 2: return Point{x0, cy - a * s};
                default: return Point{cx + a * s, y0};
            }
        };
        detail::add_block(m, merger, k, 2 * k, [&](double s, double t) {
            const double phi = phi0 + 0.5 * std::numbers::pi * t;
            const Point inner{cx + r * std::cos(phi), cy + r * std::sin(phi)};
            return (1.0 - s) * inner + s * square(t);
        });
    }
    detail::add_block(m, merger, k, k, detail::rect_map(0.0, x0, 0.0, y0));
    detail::add_block(m, merger, k, 2 * k, detail::rect_map(0.0, x0, y0, y1));
    detail::add_block(m, merger, k, k, detail::rect_map(0.0, x0, y1, H));
    detail::add_block(m, merger, 2 * k, k, detail::rect_map(x0, x1, 0.0, y0));
    detail::add_block(m, merger, 2 * k, k, detail::rect_map(x0, x1, y1, H));
    detail::add_block(m, merger, n_right * k, k, detail::rect_map(x1, length, 0.0, y0));
    detail::add_block(m, merger, n_right * k, 2 * k, detail::rect_map(x1, length, y0, y1));
    detail::add_block(m, merger, n_right * k, k, detail::rect_map(x1, length, y1, H));
    detail::finalize(m, [&](const Point& p, const Point& q, const Point&) {
        if (std::abs(p.x) < 1e-12 && std::abs(q.x) < 1e-12) return BCTag::Inflow;
        if (std::abs(p.x - length) < 1e-12 && std::abs(q.x - length) < 1e-12) return BCTag::Outflow;
        return BCTag::Wall;
    });
    detail::mark_curve(m, circle, 1e-9);
    return m;
}

/// Rotated T: inlet channel [0,1] x [0.5,1.5] feeding a cross bar [1,2] x [0,2], all times `scale`.
/// Inflow at x=0, outflow at the bar ends y=0 and y=2, walls elsewhere; symmetric about y=scale.
/// With `characteristic`, inflow and outflow faces are tagged Characteristic instead.
inline Mesh generate_T_jet(double scale, int level = 0, bool characteristic = false) {
    if (!(scale > 0.0)) throw MeshError("generate_T_jet: scale must be positive");
    const int n = 2 << level;  // cells per unit length
    const double h = 1.0 / n;
    const BCTag in = characteristic ? BCTag::Characteristic : BCTag::Inflow;
    const BCTag out = characteristic ? BCTag::Characteristic : BCTag::Outflow;
    return detail::masked_lattice(
        {0.0, 0.0}, h, h, 2 * n, 2 * n, scale,
        [n](int i, int j) { return i >= n || (2 * j >= n && 2 * j < 3 * n); },
        [&](const Point& a, const Point& b, const Point& nrm) {
            const double tol = 1e-9 * scale * h;
            if (nrm.x < -0.5 && std::abs(a.x) < tol && std::abs(b.x) < tol) return in;
            if (std::abs(nrm.y) > 0.5 && a.x >= scale - tol && b.x >= scale - tol &&
                (std::abs(a.y) < tol || std::abs(a.y - 2.0 * scale) < tol))
                return out;
            return BCTag::Wall;
        });
}

/// Standing-vortex square ]-1,1[^2 with 16 * 2^level cells per side, all edges Wall.
inline Mesh generate_square_vortex(int level = 0) {
    const int n = 16 << level;
    return generate_rectangle(-1.0, 1.0, -1.0, 1.0, n, n, {});
}

/// Fraenkel domain ]-3,3[ x ]0,3[ minus the unit half-disc (or, reflected, ]-3,3[^2 minus the unit
/// disc). Inflow at x=-3, outflow at x=3, walls elsewhere; the disc boundary is curve 0.
inline Mesh generate_fraenkel(int resolution, bool reflected = false) {
    if (resolution < 1) throw MeshError("generate_fraenkel: resolution must be >= 1");
    const int k = resolution;
    constexpr double a = 1.5, L = 3.0;
    Mesh m;
    detail::NodeMerger merger(1e-10);
    const Circle circle{{0.0, 0.0}, 1.0};
    for (int half = 0; half < (reflected ? 2 : 1); ++half) {
        const double sy = half == 0 ? 1.0 : -1.0;
        auto mirror = [sy](std::function<Point(double, double)> f) {
            return [f, sy](double s, double t) {
                Point p = f(s, t);
                p.y *= sy;
                return p;
            };
        };
        // Half ring split into sectors mapped onto the right, top and left sides of [-a,a] x [0,a].
        struct Sector {
            double phi0, phi1;
            int nt;
            std::function<Point(double)> side;
        };
        const Sector sectors[3] = {
            {0.0, 0.25 * std::numbers::pi, 2 * k, [](double t) { return Point{a, a * t}; }},
            {0.25 * std::numbers::pi, 0.75 * std::numbers::pi, 4 * k, [](double t) { return Point{a - 2 * a * t, a}; }},
            {0.75 * std::numbers::pi, std::numbers::pi, 2 * k, [](double t) { return Point{-a, a - a * t}; }},
        };
        for (const auto& sec : sectors) {
            detail::add_block(m, merger, k, sec.nt, mirror([sec](double s, double t) {
                                  const double phi = sec.phi0 + (sec.phi1 - sec.phi0) * t;
                                  const Point inner{std::cos(phi), std::sin(phi)};
                                  return (1.0 - s) * inner + s * sec.side(t);
                              }));
        }
        detail::add_block(m, merger, 2 * k, 2 * k, mirror(detail::rect_map(-L, -a, 0.0, a)));
        detail::add_block(m, merger, 2 * k, 2 * k, mirror(detail::rect_map(-L, -a, a, L)));
        detail::add_block(m, merger, 4 * k, 2 * k, mirror(detail::rect_map(-a, a, a, L)));
        detail::add_block(m, merger, 2 * k, 2 * k, mirror(detail::rect_map(a, L, 0.0, a)));
        detail::add_block(m, merger, 2 * k, 2 * k, mirror(detail::rect_map(a, L, a, L)));
    }
    detail::finalize(m, [&](const Point& p, const Point& q, const Point&) {
        if (std::abs(p.x + L) < 1e-12 && std::abs(q.x + L) < 1e-12) return BCTag::Inflow;
        if (std::abs(p.x - L) < 1e-12 && std::abs(q.x - L) < 1e-12) return BCTag::Outflow;
        return BCTag::Wall;
    });
    detail::mark_curve(m, circle, 1e-9);
    return m;
}

/// Kovasznay domain ]-0.5,10[ x ]-0.5,1.5[ with 16 x 3 cells at level 0 (48 cells, x4 per level).
/// Left, bottom and top carry Inflow (Dirichlet velocity), right is Outflow.
inline Mesh generate_kovasznay(int level) {
    const int f = 1 << level;
    return generate_rectangle(-0.5, 10.0, -0.5, 1.5, 16 * f, 3 * f,
                              {BCTag::Inflow, BCTag::Outflow, BCTag::Inflow, BCTag::Inflow});
}

// ---------------------------------------------------------------------------------------------
// Plain-text mesh file: "mesh2d v1", "nodes N" + N lines "x y", "cells M" + M lines of 4 indices,
// "bedges K" + K lines "n0 n1 tag".

inline void write_mesh(std::ostream& os, const Mesh& m) {
    os << "mesh2d v1\n";
    os << "nodes " << m.nodes.size() << '\n';
    os << std::setprecision(17);
    for (const auto& p : m.nodes) os << p.x << ' ' << p.y << '\n';
    os << "cells " << m.cells.size() << '\n';
    for (const auto& c : m.cells) os << c[0] << ' ' << c[1] << ' ' << c[2] << ' ' << c[3] << '\n';
    os << "bedges " << m.bedges.size() << '\n';
    for (const auto& e : m.bedges) os << e.nodes[0] << ' ' << e.nodes[1] << ' ' << tag_name(e.tag) << '\n';
}

inline void write_mesh(const std::string& path, const Mesh& m) {
    std::ofstream os(path);
    if (!os) throw MeshError("cannot open '" + path + "' for writing");
    write_mesh(os, m);
    if (!os) throw MeshError("write to '" + path + "' failed");
}

inline Mesh read_mesh(std::istream& is) {
    std::string word, version;
    if (!(is >> word >> version) || word != "mesh2d" || version != "v1") throw MeshError("bad mesh header");
    auto expect = [&](const char* section) {
        std::size_t count = 0;
        if (!(is >> word >> count) || word != section) throw MeshError(std::string("expected section ") + section);
        return count;
    };
    Mesh m;
    m.nodes.resize(expect("nodes"));
    for (auto& p : m.nodes) {
        std::string sx, sy;
        if (!(is >> sx >> sy)) throw MeshError("truncated node list");
        p = {std::stod(sx), std::stod(sy)};
    }
    m.cells.resize(expect("cells"));
    for (auto& c : m.cells)
        if (!(is >> c[0] >> c[1] >> c[2] >> c[3])) throw MeshError("truncated cell list");
    for (const auto& c : m.cells)
        for (int k : c)
            if (k < 0 || static_cast<std::size_t>(k) >= m.nodes.size()) throw MeshError("cell index out of range");
    const std::size_t ne = expect("bedges");
    std::vector<std::pair<std::uint64_t, BCTag>> listed(ne);
    for (auto& [key, tag] : listed) {
        int a = 0, b = 0;
        std::string t;
        if (!(is >> a >> b >> t)) throw MeshError("truncated boundary edge list");
        key = detail::edge_key(a, b);
        tag = parse_tag(t);
    }
    detail::finalize(m, [&](const Point&, const Point&, const Point&) { return BCTag::Wall; });
    if (m.bedges.size() != ne) throw MeshError("boundary edge list does not match the mesh boundary");
    std::unordered_map<std::uint64_t, BoundaryEdge> found;
    for (const auto& e : m.bedges) found[detail::edge_key(e.nodes[0], e.nodes[1])] = e;
    for (std::size_t i = 0; i < ne; ++i) {
        auto it = found.find(listed[i].first);
        if (it == found.end()) throw MeshError("listed boundary edge is not on the mesh boundary");
        m.bedges[i] = it->second;
        m.bedges[i].tag = listed[i].second;
    }
    return m;
}

inline Mesh read_mesh(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw MeshError("cannot open '" + path + "'");
    return read_mesh(is);
}

}  // namespace nitsche_flow
