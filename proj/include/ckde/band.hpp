#pragma once
/// \file band.hpp
/// Coverage of the plug-in band f~ -+ t f~''/(2 n^alpha) on [a, b] for a
/// Gaussian-marginal process shifted by a constant mean.

#include "ckde/kde.hpp"
#include "ckde/limit_law.hpp"
#include "ckde/statistics.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace ckde {

struct BandDesign {
    CyclicSpec spec{{{std::numbers::pi / 2, 0.2}}};  ///< sigma2 is overwritten to reach marginal_sd
    double marginal_sd = 0.7;
    double marginal_mean = -0.68;  ///< X_t + mean; [1, 2] sits at z in [2.4, 3.83] by default
    Kernel kernel = make_parzen_kernel(4, true);
    Kernel kernel2 = make_parzen_kernel(2, true);  ///< for f~''
    double delta = 0.06;
    double delta2 = 0.02;  ///< bandwidth exponent of f~''
    double a = 1.0, b = 2.0;
    double beta = 0.9;
    std::size_t grid_points = 101;
};

struct CoverageResult {
    std::size_t n = 0;
    std::size_t replicates = 0;
    double t = 0.0;
    double coverage = 0.0;
    double stderr = 0.0;
    double oracle_width_coverage = 0.0;  ///< same centre, width from the true f''
    std::size_t curvature_warnings = 0;  ///< replicates with f~'' <= 0 somewhere on [a, b]
    std::vector<char> covered;           ///< per replicate
};

/// sigma2 such that the (tail-corrected) marginal standard deviation equals sd.
inline CyclicSpec with_marginal_sd(CyclicSpec spec, double sd, std::size_t K, bool tail = true) {
    if (!(sd > 0.0)) throw std::invalid_argument("with_marginal_sd: sd must be positive");
    spec.sigma2 = 1.0;
    const double v = marginal_variance(expand_filter(spec, K), tail);
    spec.sigma2 = sd * sd / v;
    return spec;
}

/// Coverage over `replicates` paths of length n with band quantile t.
inline CoverageResult band_coverage(const BandDesign& d, std::size_t n, std::size_t replicates, double t,
                                    const MonteCarloOptions& opt = {}) {
    if (replicates == 0) throw std::invalid_argument("band_coverage: need >= 1 replicate");
    if (opt.innovation != Innovation::gaussian)
        throw std::invalid_argument("band_coverage: the Gaussian truth needs Gaussian innovations");
    const std::size_t K = opt.K_for(n);
    const CyclicSpec spec = with_marginal_sd(d.spec, d.marginal_sd, K, opt.tail_model);
    const auto c = expand_filter(spec, K);
    const GaussianTruth truth(marginal_variance(c, opt.tail_model));
    const double alpha = spec.alpha();
    const double m = bandwidth(n, d.delta, alpha).value, m2 = bandwidth(n, d.delta2, alpha).value;
    const auto grid = uniform_grid(d.a, d.b, d.grid_points);
    const double scale = t / (2.0 * std::pow(double(n), alpha));
    const PathSimulator sim(c, n, opt.innovation, opt.tail_model);
    struct Rep {
        char covered = 0, oracle = 0, warned = 0;
    };
    const auto reps = replicate_map<Rep>(
        replicates, opt.threads, [&](std::size_t r) { return substream_id(tag_band, n, r); }, [&](std::size_t r) {
        auto p = sim.simulate(opt.seed, substream_id(tag_band, n, r));
        for (double& x : p.x) x += d.marginal_mean;
        const auto f = estimate_density(p, d.kernel, m, grid);
        const auto f2 = estimate_second_derivative(p, d.kernel2, m2, grid);
        const auto band = confidence_band(f, f2, t, alpha, n, d.a, d.b);
        Rep out;
        out.covered = 1;
        out.oracle = 1;
        out.warned = band.warning();
        for (std::size_t i = 0; i < band.grid.size(); ++i) {
            const double x = band.grid[i] - d.marginal_mean;
            const double fx = truth.density(x);
            if (fx < band.lower[i] || fx > band.upper[i]) out.covered = 0;
            if (std::abs(f.values[i] - fx) > scale * std::abs(truth.density(x, 2))) out.oracle = 0;
        }
        return out;
    });
    CoverageResult res;
    res.n = n;
    res.replicates = replicates;
    res.t = t;
    for (const auto& r : reps) {
        res.covered.push_back(r.covered);
        res.coverage += r.covered;
        res.oracle_width_coverage += r.oracle;
        res.curvature_warnings += r.warned;
    }
    res.coverage /= double(replicates);
    res.oracle_width_coverage /= double(replicates);
    res.stderr = std::sqrt(res.coverage * (1.0 - res.coverage) / double(replicates));
    return res;
}

/// Band quantile t: the beta-quantile of |R_{alpha,Lambda}| for the design's own (alpha, Lambda).
/// The matched c_j scale with sigma2, so the spec is first rescaled as band_coverage does for size n.
inline double band_quantile(const BandDesign& d, std::size_t n, std::size_t M, std::uint64_t seed,
                            CjConvention conv = CjConvention::matched, const LimitSampling& how = {},
                            const MonteCarloOptions& opt = {}) {
    const auto L = make_limit_spec(with_marginal_sd(d.spec, d.marginal_sd, opt.K_for(n), opt.tail_model), conv);
    return quantile_table(L, {d.beta}, M, seed, how).quantile(d.beta);
}

}  // namespace ckde
