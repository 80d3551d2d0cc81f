#pragma once

#include <cmath>

namespace nitsche_flow {

/// Two-component vector over any arithmetic-like scalar (double or a dual number).
template <class T>
struct Vec2 {
    T x{};
    T y{};

    constexpr T& operator[](int i) { return i == 0 ? x : y; }
    constexpr const T& operator[](int i) const { return i == 0 ? x : y; }

    Vec2& operator+=(const Vec2& o) {
        x += o.x;
        y += o.y;
        return *this;
    }
    Vec2& operator-=(const Vec2& o) {
        x -= o.x;
        y -= o.y;
        return *this;
    }
};

using Point = Vec2<double>;

template <class T>
Vec2<T> operator+(Vec2<T> a, const Vec2<T>& b) {
    a += b;
    return a;
}
template <class T>
Vec2<T> operator-(Vec2<T> a, const Vec2<T>& b) {
    a -= b;
    return a;
}
template <class T, class S>
auto operator*(const S& s, const Vec2<T>& a) -> Vec2<decltype(s * a.x)> {
    return {s * a.x, s * a.y};
}

template <class A, class B>
auto dot(const Vec2<A>& a, const Vec2<B>& b) {
    return a.x * b.x + a.y * b.y;
}

inline double norm(const Point& a) { return std::hypot(a.x, a.y); }

/// Rotation by +90 degrees: n -> (-n2, n1).
template <class T>
Vec2<T> perp(const Vec2<T>& n) {
    return {-n.y, n.x};
}

}  // namespace nitsche_flow
