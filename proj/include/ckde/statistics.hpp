#pragma once
/// \file statistics.hpp
/// Empirical CDF, the statistics Y_{n,1}, Y_{n,2}, S_{n,2}, and the Monte
/// Carlo experiments built on them (variance scaling, sup-norm rates).

#include "ckde/kde.hpp"
#include "ckde/parallel.hpp"
#include "ckde/process_sim.hpp"
#include "ckde/regression.hpp"
#include "ckde/truth.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ckde {

/// Shared Monte Carlo settings. Replicate i of size index s draws from
/// substream substream_id(tag, s, i) of `seed`.
struct MonteCarloOptions {
    std::uint64_t seed = 20240601;
    int threads = 0;  ///< 0: all cores
    Innovation innovation = Innovation::gaussian;
    bool tail_model = true;
    std::size_t truncation = 0;  ///< 0: default_truncation(n)

    std::size_t K_for(std::size_t n) const { return truncation ? truncation : default_truncation(n); }
};

/// Stream tags separating experiments that share a master seed.
enum StreamTag : std::uint64_t {
    tag_rates = 1,
    tag_kde_sup = 2,
    tag_s_n2 = 3,
    tag_band = 4,
    tag_mise = 5,
    tag_quantiles = 6,
    tag_estimate = 7,
    tag_simulate = 8,
};

/// Var(X_t) of the (tail-corrected) filter.
inline double marginal_variance(const CoefficientSeries& c, bool tail_correction = true) {
    return theoretical_acvf(c, 0, tail_correction)[0];
}

struct PathStatistics {
    double y_n1 = 0.0;
    double y_n2 = 0.0;
    std::size_t n = 0;
    std::string spec_id;
};

/// F_n at each grid point, (1/n) #{X_j <= x}.
inline std::vector<double> empirical_cdf(std::span<const double> x, std::span<const double> grid) {
    if (x.empty()) throw std::invalid_argument("empirical_cdf: empty sample");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (grid[i] < grid[i - 1]) throw std::invalid_argument("empirical_cdf: grid must be sorted");
    std::vector<double> s(x.begin(), x.end());
    std::sort(s.begin(), s.end());
    std::vector<double> out(grid.size());
    auto it = s.begin();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        it = std::upper_bound(it, s.end(), grid[i]);
        out[i] = double(it - s.begin()) / double(s.size());
    }
    return out;
}

inline double y_n1(const SamplePath& p) {
    double s = 0.0;
    for (double v : p.x) s += v;
    return s;
}

/// Y_{n,2} = 1/2 sum_k (X_k^2 - sum_r b_r^2 xi_{k-r}^2), tail diagonal by its mean.
inline double y_n2(const SamplePath& p, const CoefficientSeries& c) {
    if (p.xi.empty()) throw std::invalid_argument("y_n2: path carries no innovations");
    if (p.K != c.b.size() - 1) throw std::invalid_argument("y_n2: truncation K differs from the path's");
    return PathSimulator(c, p.n(), p.innovation, p.has_tail()).y_n2(p);
}

/// Direct double sum sum_k sum_{s<r} b_r b_s xi_{k-s} xi_{k-r}; plain truncated paths only.
inline double y_n2_naive(const SamplePath& p, const CoefficientSeries& c) {
    if (p.xi.empty()) throw std::invalid_argument("y_n2: path carries no innovations");
    if (p.has_tail()) throw std::invalid_argument("y_n2_naive: defined for truncated paths only");
    const std::size_t K = p.K;
    double total = 0.0;
    for (std::size_t k = 0; k < p.n(); ++k) {
        const double* xi = p.xi.data() + k + K;  // xi[-r] is xi_{k-r}
        for (std::size_t r = 1; r <= K; ++r) {
            double inner = 0.0;
            for (std::size_t s = 0; s < r; ++s) inner += c.b[s] * xi[-std::ptrdiff_t(s)];
            total += c.b[r] * xi[-std::ptrdiff_t(r)] * inner;
        }
    }
    return total;
}

inline PathStatistics path_statistics(const SamplePath& p, const PathSimulator& sim) {
    return {y_n1(p), sim.y_n2(p), p.n(), p.spec_id};
}

/// S_{n,2}(x) = n(F_n(x) - F(x)) + F'(x) Y_{n,1} - c2 F''(x) Y_{n,2}.
/// The Hermite-rank-2 projection of n(F_n - F) is -F'' Y_{n,2}, so c2 = 1
/// makes S_{n,2} the remainder; c2 = 1/2 is kept for comparison.
inline std::vector<double> s_n2(std::span<const double> x, std::span<const double> grid,
                                const std::function<double(double)>& F, const std::function<double(double)>& F1,
                                const std::function<double(double)>& F2, double y1, double y2, double c2 = 1.0) {
    const auto Fn = empirical_cdf(x, grid);
    const double n = double(x.size());
    std::vector<double> out(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
        out[i] = n * (Fn[i] - F(grid[i])) + F1(grid[i]) * y1 - c2 * F2(grid[i]) * y2;
    return out;
}

inline std::vector<double> s_n2(const SamplePath& p, const CoefficientSeries& c, std::span<const double> grid,
                                const std::function<double(double)>& F, const std::function<double(double)>& F1,
                                const std::function<double(double)>& F2, double c2 = 1.0) {
    return s_n2(p.x, grid, F, F1, F2, y_n1(p), y_n2(p, c), c2);
}

/// Exact Gaussian Var(Y_{n,2}) = 1/2 sum_{k,k'} (r(k-k')^2 - sigma^4 q(k-k')),
/// q(h) = sum_j b_j^2 b_{j+h}^2; r must be consistent with the paths (see tail flag).
inline double y_n2_variance_exact(const CoefficientSeries& c, std::size_t n, bool tail_correction = true) {
    const auto r = theoretical_acvf(c, n - 1, tail_correction);
    std::vector<double> b2(c.b.size());
    for (std::size_t k = 0; k < b2.size(); ++k) b2[k] = c.b[k] * c.b[k];
    const std::size_t L = fft::good_size(2 * b2.size());
    auto f = fft::rfft(b2, L);
    for (auto& v : f) v = std::norm(v);
    const auto q = fft::irfft(f, L);
    double s = 0.0;
    for (std::size_t h = 0; h < n; ++h) {
        const double qq = h < b2.size() ? q[h] : 0.0;
        s += (h == 0 ? 1.0 : 2.0) * double(n - h) * (r[h] * r[h] - c.sigma2 * c.sigma2 * qq);
    }
    return 0.5 * s;
}

/// Exact Var(Y_{n,1}) = sum_{k,k'} r(k-k').
inline double y_n1_variance_exact(const CoefficientSeries& c, std::size_t n, bool tail_correction = true) {
    const auto r = theoretical_acvf(c, n - 1, tail_correction);
    double s = 0.0;
    for (std::size_t h = 0; h < n; ++h) s += (h == 0 ? 1.0 : 2.0) * double(n - h) * r[h];
    return s;
}

enum class StatisticTag { y1, y2 };

inline StatisticTag parse_statistic(const std::string& s) {
    if (s == "Y1" || s == "y1") return StatisticTag::y1;
    if (s == "Y2" || s == "y2") return StatisticTag::y2;
    throw std::invalid_argument("unknown statistic tag: " + s);
}

struct RateFit {
    StatisticTag statistic = StatisticTag::y2;
    std::vector<std::size_t> sizes;
    std::vector<double> variances;
    std::vector<double> stderrs;  ///< standard error of each variance estimate
    double fitted_exponent = 0.0;
    double stderr = 0.0;          ///< of the exponent, propagated from the variance stderrs
};

namespace detail {

struct MomentSummary {
    double mean = 0.0, variance = 0.0, variance_se = 0.0;
};

inline MomentSummary summarize(const std::vector<double>& y) {
    const double R = double(y.size());
    MomentSummary m;
    for (double v : y) m.mean += v;
    m.mean /= R;
    double m2 = 0.0, m4 = 0.0;
    for (double v : y) {
        const double d = (v - m.mean) * (v - m.mean);
        m2 += d;
        m4 += d * d;
    }
    m.variance = m2 / (R - 1.0);
    const double mu2 = m2 / R, mu4 = m4 / R;
    m.variance_se = std::sqrt(std::max(mu4 - mu2 * mu2, 0.0) / R);
    return m;
}

inline RateFit fit_rate(StatisticTag tag, const std::vector<std::size_t>& sizes,
                        const std::vector<std::vector<double>>& draws) {
    RateFit f;
    f.statistic = tag;
    f.sizes = sizes;
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        const auto s = summarize(draws[i]);
        if (!(s.variance > 0.0))
            throw std::invalid_argument("variance_scaling: degenerate variance at n=" + std::to_string(sizes[i]));
        f.variances.push_back(s.variance);
        f.stderrs.push_back(s.variance_se);
        lx.push_back(std::log(double(sizes[i])));
        ly.push_back(std::log(s.variance));
    }
    f.fitted_exponent = ols(lx, ly).slope;
    double mx = 0.0;
    for (double v : lx) mx += v;
    mx /= double(lx.size());
    double sxx = 0.0;
    for (double v : lx) sxx += (v - mx) * (v - mx);
    double var = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        const double w = (lx[i] - mx) / sxx, rel = f.stderrs[i] / f.variances[i];
        var += w * w * rel * rel;
    }
    f.stderr = std::sqrt(var);
    return f;
}

inline void check_ladder(const std::vector<std::size_t>& sizes, std::size_t min_sizes = 3) {
    if (sizes.size() < min_sizes)
        throw std::invalid_argument("size ladder needs at least " + std::to_string(min_sizes) + " sizes");
    for (std::size_t i = 1; i < sizes.size(); ++i)
        if (!(sizes[i - 1] < sizes[i])) throw std::invalid_argument("size ladder must be strictly increasing");
}

}  // namespace detail

struct RatePair {
    RateFit y1;
    RateFit y2;
};

/// Var(Y_{n,1}) and Var(Y_{n,2}) fits from the same replicate paths.
inline RatePair variance_scaling_both(const CyclicSpec& spec, const std::vector<std::size_t>& sizes,
                                      std::size_t replicates, const MonteCarloOptions& opt = {}) {
    detail::check_ladder(sizes);
    if (replicates < 200) throw std::invalid_argument("variance_scaling: need >= 200 replicates per size");
    std::vector<std::vector<double>> d1, d2;
    for (std::size_t si = 0; si < sizes.size(); ++si) {
        const std::size_t n = sizes[si];
        const auto c = expand_filter(spec, opt.K_for(n));
        const PathSimulator sim(c, n, opt.innovation, opt.tail_model);
        const auto res = replicate_map<std::pair<double, double>>(
            replicates, opt.threads, [&](std::size_t r) { return substream_id(tag_rates, si, r); },
            [&](std::size_t r) {
            const auto p = sim.simulate(opt.seed, substream_id(tag_rates, si, r));
            return std::pair{y_n1(p), sim.y_n2(p)};
        });
        std::vector<double> a, b;
        for (const auto& [u, v] : res) a.push_back(u), b.push_back(v);
        d1.push_back(std::move(a));
        d2.push_back(std::move(b));
    }
    RatePair out;
    out.y1 = detail::fit_rate(StatisticTag::y1, sizes, d1);
    out.y2 = detail::fit_rate(StatisticTag::y2, sizes, d2);
    return out;
}

/// log Var vs log n least-squares slope for one statistic.
inline RateFit variance_scaling(const CyclicSpec& spec, const std::vector<std::size_t>& sizes,
                                std::size_t replicates, StatisticTag statistic, const MonteCarloOptions& opt = {}) {
    detail::check_ladder(sizes);
    if (replicates < 200) throw std::invalid_argument("variance_scaling: need >= 200 replicates per size");
    std::vector<std::vector<double>> d;
    for (std::size_t si = 0; si < sizes.size(); ++si) {
        const std::size_t n = sizes[si];
        const auto c = expand_filter(spec, opt.K_for(n));
        const PathSimulator sim(c, n, opt.innovation, opt.tail_model);
        d.push_back(replicate_map<double>(
            replicates, opt.threads, [&](std::size_t r) { return substream_id(tag_rates, si, r); },
            [&](std::size_t r) {
            const auto p = sim.simulate(opt.seed, substream_id(tag_rates, si, r));
            return statistic == StatisticTag::y1 ? y_n1(p) : sim.y_n2(p);
        }));
    }
    return detail::fit_rate(statistic, sizes, d);
}

/// Per-size replicate values of one sup statistic plus summaries.
struct SupLadder {
    std::vector<std::size_t> sizes;
    std::vector<std::vector<double>> values;  ///< [size][replicate]
    std::vector<double> medians;
    std::vector<double> means;
    std::vector<double> mean_stderrs;
};

namespace detail {

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline void summarize_ladder(SupLadder& L) {
    for (const auto& v : L.values) {
        L.medians.push_back(median(v));
        const auto s = summarize(v);
        L.means.push_back(s.mean);
        L.mean_stderrs.push_back(std::sqrt(s.variance / double(v.size())));
    }
}

}  // namespace detail

/// sup over a 2048-point sample-range grid of |f~ - f| per replicate (unscaled).
/// The truth is the Gaussian marginal with the filter's variance.
inline SupLadder kde_sup_experiment(const CyclicSpec& spec, const Kernel& k, double delta,
                                    const std::vector<std::size_t>& sizes, std::size_t replicates,
                                    const MonteCarloOptions& opt = {}, std::size_t grid_points = 2048) {
    detail::check_ladder(sizes, 2);
    SupLadder L;
    L.sizes = sizes;
    for (std::size_t si = 0; si < sizes.size(); ++si) {
        const std::size_t n = sizes[si];
        const auto c = expand_filter(spec, opt.K_for(n));
        const GaussianTruth truth(marginal_variance(c, opt.tail_model));
        const double m = bandwidth(n, delta, spec.alpha()).value;
        const PathSimulator sim(c, n, opt.innovation, opt.tail_model);
        L.values.push_back(replicate_map<double>(
            replicates, opt.threads, [&](std::size_t r) { return substream_id(tag_kde_sup, si, r); },
            [&](std::size_t r) {
            const auto p = sim.simulate(opt.seed, substream_id(tag_kde_sup, si, r));
            const auto g = sample_grid(p.x, m, grid_points);
            const auto f = estimate_density(p, k, m, g);
            double sup = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) sup = std::max(sup, std::abs(f.values[i] - truth.density(g[i])));
            return sup;
        }));
    }
    detail::summarize_ladder(L);
    return L;
}

/// n^{alpha+delta-1} sup_grid |S_{n,2}| per replicate.
inline SupLadder s_n2_decay(const CyclicSpec& spec, double delta, const std::vector<std::size_t>& sizes,
                            std::size_t replicates, const MonteCarloOptions& opt = {}, double c2 = 1.0,
                            std::size_t grid_points = 2048) {
    detail::check_ladder(sizes, 2);
    SupLadder L;
    L.sizes = sizes;
    const double alpha = spec.alpha();
    for (std::size_t si = 0; si < sizes.size(); ++si) {
        const std::size_t n = sizes[si];
        const auto c = expand_filter(spec, opt.K_for(n));
        const GaussianTruth tr(marginal_variance(c, opt.tail_model));
        const double m = bandwidth(n, delta, alpha).value;
        const double scale = std::pow(double(n), alpha + delta - 1.0);
        const PathSimulator sim(c, n, opt.innovation, opt.tail_model);
        L.values.push_back(replicate_map<double>(
            replicates, opt.threads, [&](std::size_t r) { return substream_id(tag_s_n2, si, r); },
            [&](std::size_t r) {
            const auto p = sim.simulate(opt.seed, substream_id(tag_s_n2, si, r));
            const auto g = sample_grid(p.x, m, grid_points);
            const auto S = s_n2(
                p.x, g, [&](double x) { return tr.F(x); }, [&](double x) { return tr.F1(x); },
                [&](double x) { return tr.F2(x); }, y_n1(p), sim.y_n2(p), c2);
            double sup = 0.0;
            for (double v : S) sup = std::max(sup, std::abs(v));
            return scale * sup;
        }));
    }
    detail::summarize_ladder(L);
    return L;
}

}  // namespace ckde
