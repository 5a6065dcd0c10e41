#pragma once
/// \file kernels.hpp
/// Compact-support even polynomial kernels of Parzen order s.

#include "ckde/hash.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ckde {

/// K(u) = p(u) on [-1, 1], 0 elsewhere; p even with p(+-1) = 0.
struct Kernel {
    int order = 2;
    bool smooth = false;              ///< p, p', p'' vanish at +-1, so K'' is continuous
    std::vector<double> coeffs;       ///< p(u) = sum_i coeffs[i] u^i (odd entries zero)

    std::size_t degree() const { return coeffs.empty() ? 0 : coeffs.size() - 1; }

    /// Coefficients of the r-th derivative of p.
    std::vector<double> derivative_coeffs(int r) const {
        std::vector<double> c = coeffs;
        for (int k = 0; k < r; ++k) {
            if (c.size() <= 1) return {0.0};
            std::vector<double> d(c.size() - 1);
            for (std::size_t i = 1; i < c.size(); ++i) d[i - 1] = double(i) * c[i];
            c = std::move(d);
        }
        return c;
    }

    std::string descriptor() const {
        return "parzen:s=" + std::to_string(order) + (smooth ? ":smooth" : "");
    }
};

inline double poly_eval(const std::vector<double>& c, double u) {
    double acc = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * u + *it;
    return acc;
}

/// K^{(derivative)}(u): polynomial inside the support, 0 outside.
inline double evaluate(const Kernel& k, double u, int derivative = 0) {
    if (derivative < 0) throw std::invalid_argument("evaluate: negative derivative order");
    if (std::abs(u) > 1.0) return 0.0;
    if (derivative == 0) return poly_eval(k.coeffs, u);
    return poly_eval(k.derivative_coeffs(derivative), u);
}

/// Closed-form integral of u^j K(u) over [-1, 1].
inline double kernel_moment(const Kernel& k, int j) {
    if (j < 0) throw std::invalid_argument("kernel_moment: j must be >= 0");
    if (j % 2 == 1) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < k.coeffs.size(); i += 2) s += k.coeffs[i] * 2.0 / double(std::size_t(j) + i + 1);
    return s;
}

/// Closed-form integral of (K^{(r)})^2.
inline double kernel_squared_integral(const Kernel& k, int r = 0) {
    const auto c = k.derivative_coeffs(r);
    double s = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i)
        for (std::size_t l = 0; l < c.size(); ++l)
            if ((i + l) % 2 == 0) s += c[i] * c[l] * 2.0 / double(i + l + 1);
    return s;
}

namespace detail {

/// Real roots of the polynomial c in (a, b): sign changes on a fine grid refined by bisection.
inline std::vector<double> poly_roots(const std::vector<double>& c, double a, double b, int grid = 4096) {
    std::vector<double> roots;
    double x0 = a, f0 = poly_eval(c, a);
    for (int i = 1; i <= grid; ++i) {
        const double x1 = a + (b - a) * double(i) / grid;
        const double f1 = poly_eval(c, x1);
        if (f0 == 0.0 && i > 1) roots.push_back(x0);
        if (f0 * f1 < 0.0) {
            double lo = x0, hi = x1, flo = f0;
            for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
                const double mid = 0.5 * (lo + hi), fm = poly_eval(c, mid);
                if ((fm < 0.0) == (flo < 0.0)) lo = mid, flo = fm;
                else hi = mid;
            }
            roots.push_back(0.5 * (lo + hi));
        }
        x0 = x1;
        f0 = f1;
    }
    return roots;
}

inline double poly_integral(const std::vector<double>& c, double a, double b) {
    double s = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i)
        s += c[i] * (std::pow(b, double(i + 1)) - std::pow(a, double(i + 1))) / double(i + 1);
    return s;
}

}  // namespace detail

/// Closed-form integral of |u^j K(u)|, split at the sign changes of u^j p(u).
inline double kernel_abs_moment(const Kernel& k, int j) {
    std::vector<double> c(std::size_t(j), 0.0);
    c.insert(c.end(), k.coeffs.begin(), k.coeffs.end());
    auto cuts = detail::poly_roots(c, -1.0, 1.0);
    cuts.insert(cuts.begin(), -1.0);
    cuts.push_back(1.0);
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) s += std::abs(detail::poly_integral(c, cuts[i], cuts[i + 1]));
    return s;
}

/// Total variation of K over the real line: sum of |K| increments between
/// critical points, plus the jumps at the support edges.
inline double total_variation(const Kernel& k) {
    const auto d = k.derivative_coeffs(1);
    auto pts = detail::poly_roots(d, -1.0, 1.0);
    pts.insert(pts.begin(), -1.0);
    pts.push_back(1.0);
    double tv = std::abs(poly_eval(k.coeffs, -1.0)) + std::abs(poly_eval(k.coeffs, 1.0));
    for (std::size_t i = 0; i + 1 < pts.size(); ++i)
        tv += std::abs(poly_eval(k.coeffs, pts[i + 1]) - poly_eval(k.coeffs, pts[i]));
    return tv;
}

/// Even polynomial kernel of order s. Non-smooth: degree s with p(1) = 0
/// (s = 2 gives Epanechnikov). Smooth: degree s + 4 with p = p' = p'' = 0 at 1.
/// Coefficients are solved in exact rational arithmetic.
inline Kernel make_parzen_kernel(int s, bool smooth) {
    if (s % 2 != 0) throw std::invalid_argument("make_parzen_kernel: order s must be even");
    if (s < 2 || s > 6) throw std::invalid_argument("make_parzen_kernel: order s must be 2, 4 or 6");
    using Q = boost::multiprecision::cpp_rational;
    const int nb = smooth ? 3 : 1;         // boundary conditions at u = 1
    const int nu = s / 2 + nb;             // unknowns a_0, a_2, ..., a_{2(nu-1)}
    std::vector<std::vector<Q>> A(std::size_t(nu), std::vector<Q>(std::size_t(nu) + 1, Q(0)));
    int row = 0;
    for (int i = 0; i < s / 2; ++i, ++row) {  // int u^{2i} p = [i == 0]
        for (int j = 0; j < nu; ++j) A[row][j] = Q(2, 2 * i + 2 * j + 1);
        A[row][nu] = Q(i == 0 ? 1 : 0);
    }
    for (int r = 0; r < nb; ++r, ++row) {  // p^{(r)}(1) = 0
        for (int j = 0; j < nu; ++j) {
            Q f(1);
            for (int q = 0; q < r; ++q) f *= (2 * j - q);
            A[row][j] = f;
        }
    }
    for (int c = 0; c < nu; ++c) {  // Gauss-Jordan, exact
        int piv = c;
        while (A[piv][c] == 0) ++piv;
        std::swap(A[piv], A[c]);
        for (int r = 0; r < nu; ++r) {
            if (r == c || A[r][c] == 0) continue;
            const Q f = A[r][c] / A[c][c];
            for (int q = c; q <= nu; ++q) A[r][q] -= f * A[c][q];
        }
    }
    Kernel k;
    k.order = s;
    k.smooth = smooth;
    k.coeffs.assign(std::size_t(2 * (nu - 1) + 1), 0.0);
    for (int j = 0; j < nu; ++j) k.coeffs[std::size_t(2 * j)] = Q(A[j][nu] / A[j][j]).convert_to<double>();
    return k;
}

/// Parse "parzen:s=4:smooth", "parzen:s=2" or "epanechnikov".
inline Kernel parse_kernel(const std::string& desc) {
    if (desc == "epanechnikov") return make_parzen_kernel(2, false);
    std::istringstream is(desc);
    std::string part;
    std::getline(is, part, ':');
    if (part != "parzen") throw std::invalid_argument("unknown kernel family: " + desc);
    int s = 4;
    bool smooth = false;
    while (std::getline(is, part, ':')) {
        if (part.rfind("s=", 0) == 0) {
            try {
                std::size_t used = 0;
                s = std::stoi(part.substr(2), &used);
                if (used != part.size() - 2) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw std::invalid_argument("bad kernel order in: " + desc);
            }
        } else if (part == "smooth") {
            smooth = true;
        } else {
            throw std::invalid_argument("unknown kernel option '" + part + "' in: " + desc);
        }
    }
    return make_parzen_kernel(s, smooth);
}

}  // namespace ckde
