#pragma once
/// \file quadrature.hpp
/// Gauss-Legendre rules of arbitrary order (Newton iteration on P_n).

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <vector>

namespace ckde {

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// n-point Gauss-Legendre rule on [-1, 1].
inline QuadratureRule gauss_legendre_compute(std::size_t n) {
    QuadratureRule q;
    q.nodes.resize(n);
    q.weights.resize(n);
    for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (double(i) + 0.75) / (double(n) + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (std::size_t k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * double(k) - 1.0) * x * p1 - (double(k) - 1.0) * p0) / double(k);
                p0 = p1;
                p1 = p2;
            }
            dp = double(n) * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        q.nodes[i] = -x;
        q.nodes[n - 1 - i] = x;
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        q.weights[i] = q.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) q.nodes[n / 2] = 0.0;
    return q;
}

/// Cached rule on [-1, 1].
inline const QuadratureRule& gauss_legendre(std::size_t n) {
    static std::mutex mu;
    static std::map<std::size_t, QuadratureRule> cache;
    std::lock_guard lock(mu);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, gauss_legendre_compute(n)).first;
    return it->second;
}

/// Rule mapped to [a, b].
inline QuadratureRule gauss_legendre(std::size_t n, double a, double b) {
    QuadratureRule q = gauss_legendre(n);
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    for (std::size_t i = 0; i < n; ++i) {
        q.nodes[i] = c + h * q.nodes[i];
        q.weights[i] *= h;
    }
    return q;
}

}  // namespace ckde
