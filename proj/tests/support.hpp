#pragma once

// Test-only helpers: random fixtures and independent numeric oracles.

#include <cmath>
#include <functional>
#include <random>

#include "rafsnn/tensor.hpp"

namespace rafsnn::testing {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Tensor t(std::move(shape));
    for (auto& x : t.data()) x = dist(rng);
    return t;
}

// Central difference of f with respect to element i of x (x is restored).
inline double central_difference(Tensor& x, std::size_t i, const std::function<double()>& f, double h = 1e-5) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f();
    x[i] = saved - h;
    const double down = f();
    x[i] = saved;
    return (up - down) / (2.0 * h);
}

inline double relative_error(double a, double b, double floor = 1e-8) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline Tensor naive_matmul(const Tensor& a, const Tensor& b) {
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor c({m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
            c[i * n + j] = acc;
        }
    return c;
}

// Direct nested-loop cross-correlation on [C×H×W] input.
inline Tensor naive_conv2d(const Tensor& x, const Tensor& k, std::size_t stride, std::size_t pad = 0) {
    const std::size_t ci = x.dim(0), h = x.dim(1), w = x.dim(2);
    const std::size_t co = k.dim(0), kh = k.dim(2), kw = k.dim(3);
    const std::size_t ho = (h + 2 * pad - kh) / stride + 1, wo = (w + 2 * pad - kw) / stride + 1;
    Tensor out({co, ho, wo});
    for (std::size_t o = 0; o < co; ++o)
        for (std::size_t y = 0; y < ho; ++y)
            for (std::size_t xx = 0; xx < wo; ++xx) {
                double acc = 0.0;
                for (std::size_t c = 0; c < ci; ++c)
                    for (std::size_t i = 0; i < kh; ++i)
                        for (std::size_t j = 0; j < kw; ++j) {
                            const long iy = static_cast<long>(y * stride + i) - static_cast<long>(pad);
                            const long ix = static_cast<long>(xx * stride + j) - static_cast<long>(pad);
                            if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w)) continue;
                            acc += x.at({c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)}) *
                                   k.at({o, c, i, j});
                        }
                out.at({o, y, xx}) = acc;
            }
    return out;
}

// Classic fourth-order Runge-Kutta for v'' + 2ξv' + ω²v = 0.
inline double rk4_oscillator(double omega, double xi, double v0, double u0, double t_end, std::size_t steps) {
    const double h = t_end / static_cast<double>(steps);
    double v = v0, u = u0;
    auto acc = [&](double vv, double uu) { return -2.0 * xi * uu - omega * omega * vv; };
    for (std::size_t i = 0; i < steps; ++i) {
        const double k1v = u, k1u = acc(v, u);
        const double k2v = u + 0.5 * h * k1u, k2u = acc(v + 0.5 * h * k1v, u + 0.5 * h * k1u);
        const double k3v = u + 0.5 * h * k2u, k3u = acc(v + 0.5 * h * k2v, u + 0.5 * h * k2u);
        const double k4v = u + h * k3u, k4u = acc(v + h * k3v, u + h * k3u);
        v += h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
        u += h / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u);
    }
    return v;
}

}  // namespace rafsnn::testing
