/// @file dual.hpp
/// @brief Minimal forward-mode dual numbers with N partials. Used to get
///        exact derivatives of the per-cell kinetics closure for the
///        coupled Jacobian and the discrete adjoint.

#pragma once

#include <array>
#include <cmath>

namespace vrfb {

template <int N>
struct Dual {
    double v = 0.0;
    std::array<double, N> d{};

    Dual() = default;
    Dual(double value) : v(value) {}
    static Dual seed(double value, int slot) {
        Dual x(value);
        x.d[slot] = 1.0;
        return x;
    }

    Dual& operator+=(const Dual& o) {
        v += o.v;
        for (int i = 0; i < N; ++i) d[i] += o.d[i];
        return *this;
    }
    Dual& operator-=(const Dual& o) {
        v -= o.v;
        for (int i = 0; i < N; ++i) d[i] -= o.d[i];
        return *this;
    }
};

template <int N>
Dual<N> operator+(Dual<N> a, const Dual<N>& b) { return a += b; }
template <int N>
Dual<N> operator-(Dual<N> a, const Dual<N>& b) { return a -= b; }
template <int N>
Dual<N> operator-(const Dual<N>& a) {
    Dual<N> r(-a.v);
    for (int i = 0; i < N; ++i) r.d[i] = -a.d[i];
    return r;
}

template <int N>
Dual<N> operator*(const Dual<N>& a, const Dual<N>& b) {
    Dual<N> r(a.v * b.v);
    for (int i = 0; i < N; ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
    return r;
}

template <int N>
Dual<N> operator/(const Dual<N>& a, const Dual<N>& b) {
    Dual<N> r(a.v / b.v);
    const double inv2 = 1.0 / (b.v * b.v);
    for (int i = 0; i < N; ++i) r.d[i] = (a.d[i] * b.v - a.v * b.d[i]) * inv2;
    return r;
}

template <int N> Dual<N> operator+(double a, Dual<N> b) { return Dual<N>(a) + b; }
template <int N> Dual<N> operator+(Dual<N> a, double b) { return a + Dual<N>(b); }
template <int N> Dual<N> operator-(double a, const Dual<N>& b) { return Dual<N>(a) - b; }
template <int N> Dual<N> operator-(Dual<N> a, double b) { return a - Dual<N>(b); }
template <int N> Dual<N> operator*(double a, const Dual<N>& b) { return Dual<N>(a) * b; }
template <int N> Dual<N> operator*(const Dual<N>& a, double b) { return a * Dual<N>(b); }
template <int N> Dual<N> operator/(double a, const Dual<N>& b) { return Dual<N>(a) / b; }
template <int N> Dual<N> operator/(const Dual<N>& a, double b) { return a / Dual<N>(b); }

template <int N>
Dual<N> exp(const Dual<N>& a) {
    Dual<N> r(std::exp(a.v));
    for (int i = 0; i < N; ++i) r.d[i] = r.v * a.d[i];
    return r;
}

template <int N>
Dual<N> log(const Dual<N>& a) {
    Dual<N> r(std::log(a.v));
    const double inv = 1.0 / a.v;
    for (int i = 0; i < N; ++i) r.d[i] = inv * a.d[i];
    return r;
}

template <int N>
Dual<N> pow(const Dual<N>& a, double e) {
    Dual<N> r(std::pow(a.v, e));
    const double f = e * std::pow(a.v, e - 1.0);
    for (int i = 0; i < N; ++i) r.d[i] = f * a.d[i];
    return r;
}

template <int N>
Dual<N> sqrt(const Dual<N>& a) {
    Dual<N> r(std::sqrt(a.v));
    const double f = 0.5 / r.v;
    for (int i = 0; i < N; ++i) r.d[i] = f * a.d[i];
    return r;
}

// Scalar fallbacks so the closures compile for plain double.
inline double value_of(double x) { return x; }
template <int N>
double value_of(const Dual<N>& x) { return x.v; }

} // namespace vrfb
