#pragma once
/// \file kde.hpp
/// Kernel density estimate, its second derivative, bandwidth policy and the
/// plug-in confidence band f~ -+ t f~''/(2 n^alpha).

#include "ckde/kernels.hpp"
#include "ckde/process_sim.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ckde {

struct Bandwidth {
    double value = 0.0;
    bool in_regime = false;  ///< alpha/4 < delta < alpha/2
};

/// m_n = n^{-delta}; delta outside (alpha/4, alpha/2) is flagged, not rejected.
inline Bandwidth bandwidth(std::size_t n, double delta, double alpha) {
    if (n < 2) throw std::invalid_argument("bandwidth: n must be >= 2");
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("bandwidth: delta must lie in (0, 1)");
    return {std::pow(double(n), -delta), alpha / 4.0 < delta && delta < alpha / 2.0};
}

struct DensityEstimate {
    std::vector<double> grid;
    std::vector<double> values;
    double m = 0.0;
    std::size_t n = 0;
    int derivative_order = 0;
};

struct ConfidenceBand {
    std::vector<double> grid;
    std::vector<double> lower;
    std::vector<double> upper;
    double level = 0.0;  ///< nominal beta, informational
    double t = 0.0;
    double a = 0.0, b = 0.0;
    std::size_t nonpositive_curvature = 0;  ///< grid points with f~'' <= 0

    bool warning() const { return nonpositive_curvature > 0; }
};

/// Uniform grid over [min X - m, max X + m].
inline std::vector<double> sample_grid(std::span<const double> x, double m, std::size_t points = 2048) {
    if (x.empty()) throw std::invalid_argument("sample_grid: empty sample");
    if (points < 2) throw std::invalid_argument("sample_grid: need >= 2 points");
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    std::vector<double> g(points);
    const double a = *lo - m, b = *hi + m;
    for (std::size_t i = 0; i < points; ++i) g[i] = a + (b - a) * double(i) / double(points - 1);
    return g;
}

inline std::vector<double> uniform_grid(double a, double b, std::size_t points) {
    std::vector<double> g(points);
    for (std::size_t i = 0; i < points; ++i) g[i] = a + (b - a) * double(i) / double(points - 1);
    return g;
}

namespace detail {

/// sum_j K^{(r)}((x - X_j)/m) over the sorted sample, per grid point.
inline std::vector<double> kernel_sums(std::span<const double> sorted, const Kernel& k, int r, double m,
                                       std::span<const double> grid) {
    const auto c = r == 0 ? k.coeffs : k.derivative_coeffs(r);
    std::vector<double> out(grid.size(), 0.0);
    const double reach = m * (1.0 + 1e-9);  // window slightly wide; support test below is exact
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double x = grid[i];
        auto lo = std::lower_bound(sorted.begin(), sorted.end(), x - reach);
        auto hi = std::upper_bound(lo, sorted.end(), x + reach);
        double acc = 0.0;
        for (auto it = lo; it != hi; ++it) {
            const double u = (x - *it) / m;
            if (std::abs(u) <= 1.0) acc += poly_eval(c, u);
        }
        out[i] = acc;
    }
    return out;
}

inline void check_grid(std::span<const double> grid) {
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i - 1] < grid[i])) throw std::invalid_argument("grid must be strictly increasing");
}

}  // namespace detail

/// f~(x) = (1/(n m)) sum_j K((x - X_j)/m).
inline DensityEstimate estimate_density(std::span<const double> x, const Kernel& k, double m,
                                        std::span<const double> grid) {
    if (x.empty()) throw std::invalid_argument("estimate_density: empty sample");
    if (!(m > 0.0)) throw std::invalid_argument("estimate_density: bandwidth must be positive");
    detail::check_grid(grid);
    std::vector<double> sorted(x.begin(), x.end());
    std::sort(sorted.begin(), sorted.end());
    DensityEstimate d{std::vector<double>(grid.begin(), grid.end()), detail::kernel_sums(sorted, k, 0, m, grid), m,
                      x.size(), 0};
    const double s = 1.0 / (double(x.size()) * m);
    for (double& v : d.values) v *= s;
    return d;
}

inline DensityEstimate estimate_density(const SamplePath& p, const Kernel& k, double m, std::span<const double> grid) {
    return estimate_density(std::span<const double>(p.x), k, m, grid);
}

/// f~''(x) = (1/(n m^3)) sum_j K''((x - X_j)/m); needs a smooth kernel.
inline DensityEstimate estimate_second_derivative(std::span<const double> x, const Kernel& k, double m,
                                                  std::span<const double> grid) {
    if (!k.smooth) throw std::invalid_argument("estimate_second_derivative: kernel lacks a continuous K''");
    if (x.empty()) throw std::invalid_argument("estimate_second_derivative: empty sample");
    if (!(m > 0.0)) throw std::invalid_argument("estimate_second_derivative: bandwidth must be positive");
    detail::check_grid(grid);
    std::vector<double> sorted(x.begin(), x.end());
    std::sort(sorted.begin(), sorted.end());
    DensityEstimate d{std::vector<double>(grid.begin(), grid.end()), detail::kernel_sums(sorted, k, 2, m, grid), m,
                      x.size(), 2};
    const double s = 1.0 / (double(x.size()) * m * m * m);
    for (double& v : d.values) v *= s;
    return d;
}

inline DensityEstimate estimate_second_derivative(const SamplePath& p, const Kernel& k, double m,
                                                  std::span<const double> grid) {
    return estimate_second_derivative(std::span<const double>(p.x), k, m, grid);
}

/// Band f~ -+ t f~''/(2 n^alpha) on the grid points inside [a, b]. Where
/// f~'' <= 0 the band is counted in `nonpositive_curvature` and its half
/// width taken as t|f~''|/(2 n^alpha) so that lower <= upper holds.
inline ConfidenceBand confidence_band(const DensityEstimate& fhat, const DensityEstimate& fhat2, double t,
                                      double alpha, std::size_t n, double a, double b) {
    if (fhat.grid != fhat2.grid) throw std::invalid_argument("confidence_band: estimates use different grids");
    if (fhat.derivative_order != 0 || fhat2.derivative_order != 2)
        throw std::invalid_argument("confidence_band: need a density and a second-derivative estimate");
    if (t < 0.0) throw std::invalid_argument("confidence_band: t must be >= 0");
    if (!(a <= b) || fhat.grid.empty() || a < fhat.grid.front() || b > fhat.grid.back())
        throw std::invalid_argument("confidence_band: [a, b] must lie inside the grid range");
    ConfidenceBand band;
    band.t = t;
    band.a = a;
    band.b = b;
    const double scale = t / (2.0 * std::pow(double(n), alpha));
    for (std::size_t i = 0; i < fhat.grid.size(); ++i) {
        const double x = fhat.grid[i];
        if (x < a || x > b) continue;
        const double c = fhat2.values[i];
        if (c <= 0.0) ++band.nonpositive_curvature;
        const double half = scale * std::abs(c);
        band.grid.push_back(x);
        band.lower.push_back(fhat.values[i] - half);
        band.upper.push_back(fhat.values[i] + half);
    }
    return band;
}

/// Trapezoid integral of values over the grid.
inline double trapezoid(std::span<const double> grid, std::span<const double> values) {
    double s = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i) s += 0.5 * (grid[i] - grid[i - 1]) * (values[i] + values[i - 1]);
    return s;
}

}  // namespace ckde
