#pragma once
/// \file mise_lab.hpp
/// MISE under long memory: the i.i.d. term, the variance proxy gamma(n) and
/// the Monte Carlo equivalence MISE ~ MISE_0 + (1/4) gamma(n) int f''^2.

#include "ckde/kde.hpp"
#include "ckde/quadrature.hpp"
#include "ckde/statistics.hpp"

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ckde {

/// (4/n) sum_{j=1}^{n-1} (1 - j/n) r(j)^2.
inline double gamma_n(std::span<const double> r, std::size_t n) {
    if (n == 0) throw std::invalid_argument("gamma_n: n must be >= 1");
    if (r.size() < n) throw std::invalid_argument("gamma_n: need r(0..n-1), got " + std::to_string(r.size()) + " lags");
    double s = 0.0;
    for (std::size_t j = 1; j < n; ++j) s += (1.0 - double(j) / double(n)) * r[j] * r[j];
    return 4.0 * s / double(n);
}

/// Leading term n^{-2 alpha} sum a_k^2 / ((1 - 2 alpha)(1 - alpha)) for r(j) = j^{-alpha} sum a_k cos(j lambda_k).
inline double gamma_asymptotic(double alpha, std::span<const double> a, std::size_t n) {
    if (!(alpha > 0.0 && alpha < 0.5)) throw std::invalid_argument("gamma_asymptotic: alpha must lie in (0, 1/2)");
    double s = 0.0;
    for (double v : a) s += v * v;
    return std::pow(double(n), -2.0 * alpha) * s / ((1.0 - 2.0 * alpha) * (1.0 - alpha));
}

/// (2/n^2) sum_{i,k} r(i-k)^2 by the direct double sum; equals gamma_n + 2 r(0)^2 / n.
inline double quadratic_form_variance(std::span<const double> r, std::size_t n) {
    if (r.size() < n || n == 0) throw std::invalid_argument("quadratic_form_variance: need r(0..n-1)");
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) {
            const double v = r[i > k ? i - k : k - i];
            s += v * v;
        }
    return 2.0 * s / (double(n) * double(n));
}

namespace detail {

/// Adaptive Gauss-Kronrod with a hard convergence check.
template <class F>
double adaptive_integral(F&& f, double a, double b, double tol = 1e-11) {
    double err = 0.0;
    const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 12, tol, &err);
    if (!std::isfinite(v) || err > 1e3 * tol * std::max(1.0, std::abs(v)))
        throw std::runtime_error("adaptive quadrature did not converge (error estimate " + std::to_string(err) + ")");
    return v;
}

}  // namespace detail

/// int E_0 (f~ - f)^2 for n i.i.d. draws from f, supported (numerically) on [lo, hi]:
/// int (1/n)[m^{-1}(K^2 * f)_m - (K_m * f)^2] + int (K_m * f - f)^2.
inline double mise_iid_term(const std::function<double(double)>& f, const Kernel& k, double m, std::size_t n,
                            double lo, double hi) {
    if (!(m > 0.0)) throw std::invalid_argument("mise_iid_term: bandwidth must be positive");
    if (n == 0) throw std::invalid_argument("mise_iid_term: n must be >= 1");
    if (!(lo < hi)) throw std::invalid_argument("mise_iid_term: need lo < hi");
    const auto& q = gauss_legendre(48);
    std::vector<double> kv(q.nodes.size());
    for (std::size_t i = 0; i < kv.size(); ++i) kv[i] = evaluate(k, q.nodes[i]);
    const double inv_n = 1.0 / double(n);
    auto integrand = [&](double x) {
        double conv = 0.0, conv2 = 0.0;
        for (std::size_t i = 0; i < kv.size(); ++i) {
            const double fx = f(x - m * q.nodes[i]);
            conv += q.weights[i] * kv[i] * fx;
            conv2 += q.weights[i] * kv[i] * kv[i] * fx;
        }
        const double bias = conv - f(x);
        return inv_n * (conv2 / m - conv * conv) + bias * bias;
    };
    // split at the kernel-support edges so each panel is smooth
    const double a = lo - m, b = hi + m;
    const double mid = 0.5 * (a + b);
    return detail::adaptive_integral(integrand, a, mid) + detail::adaptive_integral(integrand, mid, b);
}

inline double mise_iid_term(const GaussianTruth& truth, const Kernel& k, double m, std::size_t n) {
    const double s = truth.sd();
    return mise_iid_term([&](double x) { return truth.density(x); }, k, m, n, -12.0 * s, 12.0 * s);
}

namespace detail {

/// f~ on a uniform grid. Kernels of degree <= 2 use windowed power sums of the
/// sorted sample (O(n + grid)); others fall back to estimate_density.
inline std::vector<double> density_on_uniform_grid(std::span<const double> x, const Kernel& k, double m,
                                                   std::span<const double> grid) {
    if (k.degree() > 2) return estimate_density(x, k, m, grid).values;
    std::vector<double> s(x.begin(), x.end());
    std::sort(s.begin(), s.end());
    const double c0 = k.coeffs[0], c2 = k.degree() == 2 ? k.coeffs[2] : 0.0;
    const double x0 = 0.5 * (grid.front() + grid.back());
    std::vector<double> P0(s.size() + 1, 0.0), P1(P0), P2(P0);
    for (std::size_t j = 0; j < s.size(); ++j) {
        const double y = (s[j] - x0) / m;
        P0[j + 1] = P0[j] + 1.0;
        P1[j + 1] = P1[j] + y;
        P2[j + 1] = P2[j] + y * y;
    }
    std::vector<double> out(grid.size());
    std::size_t lo = 0, hi = 0;
    const double norm = 1.0 / (double(s.size()) * m);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double g = grid[i];
        while (lo < s.size() && s[lo] < g - m) ++lo;
        if (hi < lo) hi = lo;
        while (hi < s.size() && s[hi] <= g + m) ++hi;
        const double u = (g - x0) / m;
        const double n0 = P0[hi] - P0[lo], n1 = P1[hi] - P1[lo], n2 = P2[hi] - P2[lo];
        // sum_j c0 + c2 (u - y_j)^2
        out[i] = norm * (c0 * n0 + c2 * (u * u * n0 - 2.0 * u * n1 + n2));
    }
    return out;
}

}  // namespace detail

struct MiseEstimate {
    double value = 0.0;   ///< plain average of the ISE
    double stderr = 0.0;
    /// Control-variate estimate. Controls: Q = n^{-1} sum (X_j^2 - EX^2), Q^2
    /// (mean (2/n^2) sum_{i,k} r(i-k)^2, exact for Gaussian X) and the sample mean.
    double controlled = 0.0;
    double controlled_stderr = 0.0;
    std::size_t replicates = 0;
};

/// Average of the trapezoid ISE on 4096 points over +-8 sd of the Gaussian
/// marginal. Tail mass beyond 8 sd is below 1e-15 and ignored.
inline MiseEstimate mise_monte_carlo(const CyclicSpec& spec, const Kernel& k, double delta, std::size_t n,
                                     std::size_t replicates, const MonteCarloOptions& opt = {}) {
    if (replicates < 100) throw std::invalid_argument("mise_monte_carlo: need >= 100 replicates");
    if (opt.innovation != Innovation::gaussian)
        throw std::invalid_argument("mise_monte_carlo: the Gaussian truth needs Gaussian innovations");
    const auto c = expand_filter(spec, opt.K_for(n));
    const auto r = theoretical_acvf(c, n - 1, opt.tail_model);
    const GaussianTruth truth(r[0]);
    const double m = bandwidth(n, delta, spec.alpha()).value;
    const auto grid = uniform_grid(-8.0 * truth.sd(), 8.0 * truth.sd(), 4096);
    std::vector<double> fgrid(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) fgrid[i] = truth.density(grid[i]);
    const PathSimulator sim(c, n, opt.innovation, opt.tail_model);
    struct Draw {
        double ise = 0.0, q = 0.0, mean = 0.0;
    };
    const auto draws = replicate_map<Draw>(
        replicates, opt.threads, [&](std::size_t rep) { return substream_id(tag_mise, n, rep); },
        [&](std::size_t rep) {
        const auto p = sim.simulate(opt.seed, substream_id(tag_mise, n, rep));
        auto d = detail::density_on_uniform_grid(p.x, k, m, grid);
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = (d[i] - fgrid[i]) * (d[i] - fgrid[i]);
        double q = 0.0, s1 = 0.0;
        for (double v : p.x) q += v * v - r[0], s1 += v;
        return Draw{trapezoid(grid, d), q / double(n), s1 / double(n)};
    });
    // controls with known means: Q^2 - E Q^2, Q, mean(X)
    const double eq2 = gamma_n(r, n) + 2.0 * r[0] * r[0] / double(n);
    const Eigen::Index R = Eigen::Index(replicates);
    Eigen::VectorXd y(R);
    Eigen::MatrixXd X(R, 4);
    for (Eigen::Index i = 0; i < R; ++i) {
        const auto& d = draws[std::size_t(i)];
        y[i] = d.ise;
        X(i, 0) = 1.0;
        X(i, 1) = d.q * d.q - eq2;
        X(i, 2) = d.q;
        X(i, 3) = d.mean;
    }
    MiseEstimate out;
    out.replicates = replicates;
    out.value = y.mean();
    out.stderr = std::sqrt((y.array() - out.value).square().sum() / double(R - 1) / double(R));
    const Eigen::VectorXd beta = X.colPivHouseholderQr().solve(y);
    const Eigen::VectorXd res = y - X * beta;
    out.controlled = beta[0];
    out.controlled_stderr = std::sqrt(res.squaredNorm() / double(R - 4) / double(R));
    return out;
}

struct MiseReport {
    std::size_t n = 0;
    double m = 0.0;
    double mise_mc = 0.0;  ///< control-variate estimate
    double mise_mc_stderr = 0.0;
    double mise_mc_raw = 0.0;  ///< plain ISE average
    double mise_mc_raw_stderr = 0.0;
    double mise0 = 0.0;
    double gamma = 0.0;
    double w_term = 0.0;                                      ///< (1/4) gamma(n) int f''^2
    double ratio = std::numeric_limits<double>::quiet_NaN();  ///< NaN when w_term = 0
    double ratio_stderr = std::numeric_limits<double>::quiet_NaN();
    bool hypothesis_ok = false;  ///< alpha < 1/3 and alpha < alpha0 / 2

    bool ratio_defined() const { return std::isfinite(ratio); }
};

inline bool mise_hypothesis(const CyclicSpec& spec) {
    const double a = spec.alpha();
    return a < 1.0 / 3.0 && a < spec.alpha0 / 2.0;
}

/// One report per size. A spec with alpha >= 1/3 or alpha >= alpha0 / 2 still runs
/// with hypothesis_ok = false.
inline std::vector<MiseReport> equivalence_check(const CyclicSpec& spec, const Kernel& k, double delta,
                                                 const std::vector<std::size_t>& sizes, std::size_t replicates,
                                                 const MonteCarloOptions& opt = {}) {
    if (sizes.empty()) throw std::invalid_argument("equivalence_check: empty size ladder");
    std::vector<MiseReport> out;
    for (std::size_t n : sizes) {
        MiseReport rep;
        rep.n = n;
        rep.hypothesis_ok = mise_hypothesis(spec);
        const auto c = expand_filter(spec, opt.K_for(n));
        const auto r = theoretical_acvf(c, n - 1, opt.tail_model);
        const GaussianTruth truth(r[0]);
        rep.m = bandwidth(n, delta, spec.alpha()).value;
        const auto mc = mise_monte_carlo(spec, k, delta, n, replicates, opt);
        rep.mise_mc = std::max(mc.controlled, 0.0);
        rep.mise_mc_stderr = mc.controlled_stderr;
        rep.mise_mc_raw = mc.value;
        rep.mise_mc_raw_stderr = mc.stderr;
        rep.mise0 = mise_iid_term(truth, k, rep.m, n);
        rep.gamma = gamma_n(r, n);
        rep.w_term = 0.25 * rep.gamma * truth.f2_squared_integral();
        if (rep.w_term > 0.0) {
            rep.ratio = (rep.mise_mc - rep.mise0) / rep.w_term;
            rep.ratio_stderr = rep.mise_mc_stderr / rep.w_term;
        }
        out.push_back(rep);
    }
    return out;
}

}  // namespace ckde
