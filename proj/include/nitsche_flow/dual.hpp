#pragma once

#include <cmath>

#include <array>

namespace nitsche_flow {

/// Forward-mode dual number with a fixed number of directional derivatives.
/// Only the ring operations are provided: every residual kernel is polynomial in the unknowns
/// once the non-smooth coefficients are frozen.
template <int N>
struct Dual {
    double val{};
    std::array<double, N> d{};

    Dual() = default;
    Dual(double v) : val(v) {}  // NOLINT(google-explicit-constructor): constants promote implicitly

    static Dual variable(double v, int k) {
        Dual x(v);
        x.d[k] = 1.0;
        return x;
    }

    Dual& operator+=(const Dual& o) {
        val += o.val;
        for (int i = 0; i < N; ++i) d[i] += o.d[i];
        return *this;
    }
    Dual& operator-=(const Dual& o) {
        val -= o.val;
        for (int i = 0; i < N; ++i) d[i] -= o.d[i];
        return *this;
    }
    Dual& operator*=(double s) {
        val *= s;
        for (auto& x : d) x *= s;
        return *this;
    }
    Dual& operator*=(const Dual& o) {
        for (int i = 0; i < N; ++i) d[i] = d[i] * o.val + val * o.d[i];
        val *= o.val;
        return *this;
    }
    Dual& operator/=(double s) { return *this *= (1.0 / s); }
};

template <int N>
Dual<N> operator-(Dual<N> a) {
    a *= -1.0;
    return a;
}
template <int N>
Dual<N> operator+(Dual<N> a, const Dual<N>& b) {
    return a += b;
}
template <int N>
Dual<N> operator-(Dual<N> a, const Dual<N>& b) {
    return a -= b;
}
template <int N>
Dual<N> operator*(Dual<N> a, const Dual<N>& b) {
    return a *= b;
}
template <int N>
Dual<N> operator+(Dual<N> a, double b) {
    a.val += b;
    return a;
}
template <int N>
Dual<N> operator+(double b, Dual<N> a) {
    a.val += b;
    return a;
}
template <int N>
Dual<N> operator-(Dual<N> a, double b) {
    a.val -= b;
    return a;
}
template <int N>
Dual<N> operator-(double b, const Dual<N>& a) {
    return -a + b;
}
template <int N>
Dual<N> operator*(Dual<N> a, double b) {
    return a *= b;
}
template <int N>
Dual<N> operator*(double b, Dual<N> a) {
    return a *= b;
}
template <int N>
Dual<N> operator/(Dual<N> a, double b) {
    return a /= b;
}

template <int N>
Dual<N> sqrt(Dual<N> a) {
    const double r = std::sqrt(a.val);
    const double g = 0.5 / r;
    for (int i = 0; i < N; ++i) a.d[i] *= g;
    a.val = r;
    return a;
}
template <int N>
Dual<N> operator/(double s, Dual<N> a) {
    const double inv = 1.0 / a.val;
    const double g = -s * inv * inv;
    for (int i = 0; i < N; ++i) a.d[i] *= g;
    a.val = s * inv;
    return a;
}

inline double value_of(double x) { return x; }
template <int N>
double value_of(const Dual<N>& x) {
    return x.val;
}

}  // namespace nitsche_flow
