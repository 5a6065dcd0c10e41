#pragma once
/// \file regression.hpp
/// Least-squares line fits and envelope extraction.

#include <cmath>
#include <stdexcept>
#include <vector>

namespace ckde {

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double stderr_slope = 0.0;  ///< from residuals; 0 with two points
};

inline LineFit ols(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) throw std::invalid_argument("ols: need >= 2 paired points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) mx += x[i], my += y[i];
    mx /= double(n);
    my /= double(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("ols: degenerate abscissae");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    if (n > 2) {
        double rss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = y[i] - f.intercept - f.slope * x[i];
            rss += e * e;
        }
        f.stderr_slope = std::sqrt(rss / double(n - 2) / sxx);
    }
    return f;
}

/// Log-log slope of the local maxima of |v_k| for k in [kmin, kmax].
inline LineFit envelope_slope(const std::vector<double>& v, std::size_t kmin, std::size_t kmax) {
    std::vector<double> lx, ly;
    kmax = std::min(kmax, v.size() - 2);
    for (std::size_t k = std::max<std::size_t>(kmin, 1); k <= kmax; ++k) {
        const double a = std::abs(v[k]);
        if (a > 0.0 && a >= std::abs(v[k - 1]) && a >= std::abs(v[k + 1])) {
            lx.push_back(std::log(double(k)));
            ly.push_back(std::log(a));
        }
    }
    return ols(lx, ly);
}

}  // namespace ckde
