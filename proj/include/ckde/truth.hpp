#pragma once
/// \file truth.hpp
/// Closed-form N(0, v) marginal: density, CDF and derivatives.

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ckde {

/// Probabilists' Hermite polynomial He_k(z).
inline double hermite_he(int k, double z) {
    double h0 = 1.0, h1 = z;
    if (k == 0) return h0;
    for (int j = 1; j < k; ++j) {
        const double h2 = z * h1 - double(j) * h0;
        h0 = h1;
        h1 = h2;
    }
    return h1;
}

struct GaussianTruth {
    double variance = 1.0;

    explicit GaussianTruth(double v = 1.0) : variance(v) {
        if (!(v > 0.0)) throw std::invalid_argument("GaussianTruth: variance must be positive");
    }

    double sd() const { return std::sqrt(variance); }

    /// k-th derivative of the density: (-1)^k He_k(z) phi(z) / s^{k+1}.
    double density(double x, int k = 0) const {
        const double s = sd(), z = x / s;
        const double phi = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
        return ((k % 2) ? -1.0 : 1.0) * hermite_he(k, z) * phi / std::pow(s, k + 1);
    }

    double cdf(double x) const { return 0.5 * std::erfc(-x / (sd() * std::numbers::sqrt2)); }

    /// F, F' = f, F'' = f'.
    double F(double x) const { return cdf(x); }
    double F1(double x) const { return density(x, 0); }
    double F2(double x) const { return density(x, 1); }

    /// int (f'')^2 = 3 / (8 sqrt(pi) v^{5/2}).
    double f2_squared_integral() const { return 3.0 / (8.0 * std::sqrt(std::numbers::pi) * std::pow(variance, 2.5)); }
};

}  // namespace ckde
