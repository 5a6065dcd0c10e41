#pragma once
/// \file limit_law.hpp
/// The limit R_{alpha,Lambda} = D^{-1} sum_j c_j (R_j^(1) + R_j^(2)): the
/// constant D, the weights c_j, two Rosenblatt samplers, quantile tables and
/// a periodogram estimator of (alpha, Lambda).

#include "ckde/fft.hpp"
#include "ckde/hash.hpp"
#include "ckde/parallel.hpp"
#include "ckde/process_sim.hpp"
#include "ckde/quadrature.hpp"
#include "ckde/regression.hpp"
#include "ckde/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ckde {

/// D = sqrt((2-2a)(1-2a)) / (4 Gamma(a) cos(a pi/2)).
inline double constant_D(double alpha) {
    if (!(alpha > 0.0 && alpha <= 0.5)) throw std::invalid_argument("constant_D: alpha must lie in (0, 1/2]");
    if (alpha == 0.5) return 0.0;
    return std::sqrt((2.0 - 2.0 * alpha) * (1.0 - 2.0 * alpha)) /
           (4.0 * std::tgamma(alpha) * std::cos(alpha * std::numbers::pi / 2.0));
}

/// modulus: c_j = |h_j| (c_0 = |h_0|/2) with h_j = g(e^{i l_j}) prod_{k != j} (1 - e^{i(l_k - l_j)})^{(a-1)/2}.
/// matched: c_j = sigma^2 |H_j|^2 / (2 pi) (c_0 with 4 pi), H_j the full regular
/// factor of the filter at the pole, i.e. the spectral density f(l) ~ c_j |l - l_j|^{-(1-a)}.
/// Only `matched` ties Var(R) to lim Var(n^{a-1} sum (X_k^2 - E X^2)).
enum class CjConvention { modulus, matched };

inline CjConvention parse_cj_convention(const std::string& s) {
    if (s == "modulus") return CjConvention::modulus;
    if (s == "matched") return CjConvention::matched;
    throw std::invalid_argument("unknown c_j convention: " + s);
}

inline std::string to_string(CjConvention c) { return c == CjConvention::modulus ? "modulus" : "matched"; }

struct CjEntry {
    int index = 0;       ///< 0: zero frequency; j >= 1: poles[j-1]
    double lambda = 0.0;
    std::complex<double> h;  ///< raw complex h_j of the modulus convention
    double c = 0.0;
};

inline std::vector<CjEntry> coefficients_cj(const CyclicSpec& spec, CjConvention conv = CjConvention::modulus) {
    spec.validate();
    const auto J = spec.dominating();
    if (J.empty()) throw std::invalid_argument("coefficients_cj: no dominating pole (short memory)");
    const double alpha = spec.alpha();
    std::vector<double> locs;  // all dominating singularities, conjugates included
    for (int j : J) {
        if (j == 0) {
            locs.push_back(0.0);
        } else {
            locs.push_back(spec.poles[std::size_t(j - 1)].lambda);
            locs.push_back(-spec.poles[std::size_t(j - 1)].lambda);
        }
    }
    std::vector<DarbouxTerm> terms;
    if (conv == CjConvention::matched) terms = darboux_terms(spec);
    std::vector<CjEntry> out;
    for (int j : J) {
        const double lj = j == 0 ? 0.0 : spec.poles[std::size_t(j - 1)].lambda;
        std::complex<double> h = spec.g_at(std::polar(1.0, lj));
        bool self = false;
        for (double lk : locs) {
            if (lk == lj && !self) {
                self = true;
                continue;
            }
            const auto base = 1.0 - std::polar(1.0, lk - lj);
            if (std::abs(base) < 1e-14) throw std::invalid_argument("coefficients_cj: coincident poles");
            h *= std::pow(base, 0.5 * (alpha - 1.0));
        }
        CjEntry e{j, lj, h, 0.0};
        if (conv == CjConvention::modulus) {
            e.c = j == 0 ? std::abs(h) / 2.0 : std::abs(h);
        } else {
            const auto it = std::find_if(terms.begin(), terms.end(), [&](const DarbouxTerm& t) { return t.lambda == lj; });
            if (it == terms.end()) throw std::logic_error("coefficients_cj: pole without Darboux term");
            e.c = spec.sigma2 * std::norm(it->H) / ((j == 0 ? 4.0 : 2.0) * std::numbers::pi);
        }
        out.push_back(e);
    }
    return out;
}

/// Parameters of R_{alpha,Lambda}.
struct LimitSpec {
    double alpha = 0.2;
    std::vector<double> lambdas;  ///< dominating pole locations, 0 for the zero frequency
    std::vector<double> cj;
    double D = 0.0;

    bool zero_in_J() const { return std::find(lambdas.begin(), lambdas.end(), 0.0) != lambdas.end(); }

    void validate() const {
        if (!(alpha > 0.0 && alpha < 0.5)) throw std::invalid_argument("LimitSpec: alpha must lie in (0, 1/2)");
        if (lambdas.empty() || lambdas.size() != cj.size())
            throw std::invalid_argument("LimitSpec: need one weight per dominating pole");
        if (!(D > 0.0)) throw std::invalid_argument("LimitSpec: D must be positive");
    }

    /// D^{-2} (4 c_0^2 + sum_{j != 0} 2 c_j^2) for unit-variance components.
    double variance() const {
        double s = 0.0;
        for (std::size_t i = 0; i < cj.size(); ++i) s += (lambdas[i] == 0.0 ? 4.0 : 2.0) * cj[i] * cj[i];
        return s / (D * D);
    }

    std::string canonical() const {
        std::ostringstream os;
        os << "alpha=" << fmt_double(alpha) << ";D=" << fmt_double(D);
        for (std::size_t i = 0; i < cj.size(); ++i) os << ";l=" << fmt_double(lambdas[i]) << ",c=" << fmt_double(cj[i]);
        return os.str();
    }
};

inline LimitSpec make_limit_spec(const CyclicSpec& spec, CjConvention conv = CjConvention::matched) {
    LimitSpec L;
    L.alpha = spec.alpha();
    if (!(L.alpha < 0.5)) throw std::invalid_argument("make_limit_spec: needs alpha < 1/2 (Hermite-rank-two limit)");
    for (const auto& e : coefficients_cj(spec, conv)) {
        L.lambdas.push_back(e.lambda);
        L.cj.push_back(e.c);
    }
    L.D = constant_D(L.alpha);
    L.validate();
    return L;
}

/// Spec with every pole of `lambdas` at memory `alpha` (0 maps to alpha0),
/// short-memory part and sigma^2 from `base`: the plug-in model.
inline CyclicSpec plug_in_spec(const CyclicSpec& base, double alpha, const std::vector<double>& lambdas) {
    CyclicSpec s;
    s.g_coeffs = base.g_coeffs;
    s.sigma2 = base.sigma2;
    for (double l : lambdas) {
        if (l == 0.0) s.alpha0 = alpha;
        else s.poles.push_back({l, alpha});
    }
    s.validate();
    return s;
}

enum class RosenblattScheme { integral, quadratic };

inline RosenblattScheme parse_scheme(const std::string& s) {
    if (s == "integral") return RosenblattScheme::integral;
    if (s == "quadratic") return RosenblattScheme::quadratic;
    throw std::invalid_argument("unknown Rosenblatt scheme: " + s);
}

inline std::string to_string(RosenblattScheme s) { return s == RosenblattScheme::integral ? "integral" : "quadratic"; }

/// A block of standardized draws with their Gaussian anchors g (standardized
/// first-chaos component, the discretized B(1)); g is used for control variates.
struct RosenblattBlock {
    std::vector<double> values;
    std::vector<double> anchors;
};

/// Unit-variance Rosenblatt draws with parameter gamma (alpha = 1 - gamma).
///
/// integral: R = int_0^1 S(u)^2 du - E, S(u) = int e^{iux} |x|^{(a-1)/2} W(dx)
/// discretized on N cells of [0, A] (weights int x^{a-1} exact per cell) and a
/// Gauss-Legendre rule in u; divided by its exact discrete sd. Bias: the
/// frequencies beyond A carry variance share O(A^{2a-1}).
///
/// quadratic: sum_{t<N} (Z_t^2 - 1) for Z stationary with rho(h) = (1+h)^{-a}
/// (exact circulant embedding), divided by sqrt(2 sum rho^2). Bias: O(N^{2a-1})
/// in the cumulants.
class RosenblattSampler {
public:
    static constexpr std::size_t block_size = 256;

    RosenblattSampler(double gamma, RosenblattScheme scheme, std::size_t N = 0, double A = 200.0)
        : gamma_(gamma), alpha_(1.0 - gamma), scheme_(scheme) {
        if (!(gamma > 0.5 && gamma < 1.0)) throw std::invalid_argument("Rosenblatt: gamma must lie in (1/2, 1)");
        if (scheme == RosenblattScheme::integral) {
            N_ = N ? N : 2000;
            A_ = A;
            if (!(A_ > 0.0)) throw std::invalid_argument("Rosenblatt: frequency box must be positive");
            prepare_integral();
        } else {
            N_ = N ? N : 4096;
            prepare_quadratic();
        }
        if (N_ < 2) throw std::invalid_argument("Rosenblatt: resolution must be >= 2");
    }

    double gamma() const { return gamma_; }
    RosenblattScheme scheme() const { return scheme_; }
    std::size_t resolution() const { return N_; }
    double box() const { return A_; }

    /// Skewness of the discretized draw, exact from traces: 8 tr(T^3) / (2 tr(T^2))^{3/2}
    /// with T the quadratic-form matrix (M M^T, or the N x N Toeplitz matrix of rho).
    /// Its distance to the N -> infinity value is the scheme's discretization bias.
    double exact_skewness() const {
        double t2 = 0.0, t3 = 0.0;
        if (scheme_ == RosenblattScheme::integral) {
            const Eigen::MatrixXd G = M_ * M_.transpose();
            t2 = G.squaredNorm();
            t3 = (G * G).cwiseProduct(G).sum();
        } else {
            // tr(T^3) = sum_{a,b} rho(a) rho(b) rho(a+b) #{k : k, k+b, k+a+b in [0, N)}
            const long N = long(N_);
            std::vector<double> rho(std::size_t(2 * N));
            for (long h = 0; h < 2 * N; ++h) rho[std::size_t(h)] = std::pow(1.0 + double(h), -alpha_);
            auto r = [&](long h) { return rho[std::size_t(h < 0 ? -h : h)]; };
            for (long h = -(N - 1); h < N; ++h) t2 += double(N - std::abs(h)) * r(h) * r(h);
            for (long a = -(N - 1); a < N; ++a)
                for (long b = -(N - 1); b < N; ++b) {
                    const long c = a + b;
                    const long span = std::max({0L, b, c}) - std::min({0L, b, c});
                    if (span < N) t3 += double(N - span) * r(a) * r(b) * r(c);
                }
        }
        return 8.0 * t3 / std::pow(2.0 * t2, 1.5);
    }

    /// Draws [block*block_size, (block+1)*block_size) of substream family `stream`.
    RosenblattBlock block(std::uint64_t seed, std::uint64_t stream, std::uint64_t blk) const {
        RandomStream rs(seed, substream_id(stream, blk));
        return scheme_ == RosenblattScheme::integral ? integral_block(rs) : quadratic_block(rs);
    }

    /// First `count` draws of family `stream`, blocks in parallel.
    RosenblattBlock draws(std::uint64_t seed, std::uint64_t stream, std::size_t count, int threads = 0) const {
        const std::size_t nb = (count + block_size - 1) / block_size;
        const auto blocks = parallel_map<RosenblattBlock>(nb, threads, [&](std::size_t b) { return block(seed, stream, b); });
        RosenblattBlock out;
        out.values.reserve(count);
        out.anchors.reserve(count);
        for (const auto& b : blocks)
            for (std::size_t i = 0; i < b.values.size() && out.values.size() < count; ++i) {
                out.values.push_back(b.values[i]);
                out.anchors.push_back(b.anchors[i]);
            }
        return out;
    }

private:
    void prepare_integral() {
        const std::size_t N = N_;
        const double a = alpha_;
        std::vector<double> W(N), x(N);
        for (std::size_t i = 0; i < N; ++i) {
            const double e0 = A_ * double(i) / double(N), e1 = A_ * double(i + 1) / double(N);
            W[i] = (std::pow(e1, a) - std::pow(e0, a)) / a;
            x[i] = (std::pow(e1, a + 1.0) - std::pow(e0, a + 1.0)) / ((a + 1.0) * W[i]);
        }
        const std::size_t L = std::size_t(std::ceil(A_)) + 50;
        const auto q = gauss_legendre(L, 0.0, 1.0);
        M_.resize(Eigen::Index(L), Eigen::Index(2 * N));
        for (std::size_t l = 0; l < L; ++l) {
            const double sw = std::sqrt(q.weights[l]);
            for (std::size_t i = 0; i < N; ++i) {
                const double amp = sw * std::sqrt(2.0 * W[i]);
                M_(Eigen::Index(l), Eigen::Index(i)) = amp * std::cos(x[i] * q.nodes[l]);
                M_(Eigen::Index(l), Eigen::Index(N + i)) = amp * std::sin(x[i] * q.nodes[l]);
            }
        }
        const Eigen::MatrixXd G = M_ * M_.transpose();
        mean_ = G.trace();
        sd_ = std::sqrt(2.0 * G.squaredNorm());
        Eigen::VectorXd sw(static_cast<Eigen::Index>(L));
        for (std::size_t l = 0; l < L; ++l) sw[Eigen::Index(l)] = std::sqrt(q.weights[l]);
        anchor_row_ = M_.transpose() * sw;  // int_0^1 S = anchor_row . z
        anchor_row_ /= anchor_row_.norm();
    }

    RosenblattBlock integral_block(RandomStream& rs) const {
        const Eigen::Index cols = Eigen::Index(block_size);
        Eigen::MatrixXd Z(M_.cols(), cols);
        for (Eigen::Index c = 0; c < cols; ++c)
            for (Eigen::Index r = 0; r < Z.rows(); ++r) Z(r, c) = rs.normal();
        const Eigen::MatrixXd Y = M_ * Z;
        const Eigen::RowVectorXd g = anchor_row_.transpose() * Z;
        RosenblattBlock out;
        for (Eigen::Index c = 0; c < cols; ++c) {
            out.values.push_back((Y.col(c).squaredNorm() - mean_) / sd_);
            out.anchors.push_back(g[c]);
        }
        return out;
    }

    void prepare_quadratic() {
        const std::size_t N = N_;
        auto rho = [&](double h) { return std::pow(1.0 + h, -alpha_); };
        for (std::size_t P = 2 * N;; P *= 2) {
            std::vector<std::complex<double>> c(P);
            for (std::size_t k = 0; k < P; ++k) c[k] = rho(double(std::min(k, P - k)));
            const auto ev = fft::dft(c, true);
            double lo = 0.0, hi = 0.0;
            for (const auto& v : ev) lo = std::min(lo, v.real()), hi = std::max(hi, v.real());
            if (lo >= -1e-12 * hi) {
                P_ = P;
                scale_.resize(P);
                for (std::size_t k = 0; k < P; ++k) scale_[k] = std::sqrt(std::max(ev[k].real(), 0.0) / double(P));
                break;
            }
            if (P > 64 * N) throw std::runtime_error("Rosenblatt: circulant embedding is not positive semidefinite");
        }
        double s2 = 0.0, s1 = 0.0;
        for (std::size_t h = 0; h < N; ++h) {
            const double w = (h == 0 ? 1.0 : 2.0) * double(N - h);
            s2 += w * rho(double(h)) * rho(double(h));
            s1 += w * rho(double(h));
        }
        sd_ = std::sqrt(2.0 * s2);
        anchor_sd_ = std::sqrt(s1);
    }

    RosenblattBlock quadratic_block(RandomStream& rs) const {
        RosenblattBlock out;
        std::vector<std::complex<double>> e(P_);
        for (std::size_t d = 0; d < block_size; d += 2) {
            for (std::size_t k = 0; k < P_; ++k) {
                const double re = rs.normal(), im = rs.normal();
                e[k] = scale_[k] * std::complex<double>(re, im);
            }
            const auto z = fft::dft(e, true);
            double q1 = 0.0, q2 = 0.0, g1 = 0.0, g2 = 0.0;
            for (std::size_t t = 0; t < N_; ++t) {
                const double a = z[t].real(), b = z[t].imag();
                q1 += a * a - 1.0;
                q2 += b * b - 1.0;
                g1 += a;
                g2 += b;
            }
            out.values.push_back(q1 / sd_);
            out.anchors.push_back(g1 / anchor_sd_);
            out.values.push_back(q2 / sd_);
            out.anchors.push_back(g2 / anchor_sd_);
        }
        return out;
    }

    double gamma_, alpha_;
    RosenblattScheme scheme_;
    std::size_t N_ = 0;
    double A_ = 0.0;
    double mean_ = 0.0, sd_ = 1.0, anchor_sd_ = 1.0;
    Eigen::MatrixXd M_;
    Eigen::VectorXd anchor_row_;
    std::size_t P_ = 0;
    std::vector<double> scale_;
};

/// One standardized Rosenblatt draw: draw 0 of the sampler's first block.
inline double sample_rosenblatt(double gamma, RosenblattScheme scheme, std::size_t N, std::uint64_t seed) {
    return RosenblattSampler(gamma, scheme, N).block(seed, 0, 0).values[0];
}

struct MomentEstimate {
    double value = 0.0;
    double stderr = 0.0;
};

/// E[R^3] by regression on c = g^2 - 1, c^2 - 2, c^3 - 8 (g standard normal
/// anchor, so the controls have mean zero); the raw moment is reported too.
struct ThirdMoment {
    MomentEstimate raw;
    MomentEstimate controlled;
};

inline ThirdMoment third_moment(const std::vector<double>& v, const std::vector<double>& g) {
    if (v.size() != g.size() || v.size() < 10) throw std::invalid_argument("third_moment: need matching samples");
    const Eigen::Index n = Eigen::Index(v.size());
    Eigen::VectorXd y(n);
    Eigen::MatrixXd X(n, 4);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double c = g[std::size_t(i)] * g[std::size_t(i)] - 1.0;
        y[i] = std::pow(v[std::size_t(i)], 3);
        X(i, 0) = 1.0;
        X(i, 1) = c;
        X(i, 2) = c * c - 2.0;
        X(i, 3) = c * c * c - 8.0;
    }
    ThirdMoment t;
    t.raw.value = y.mean();
    t.raw.stderr = std::sqrt((y.array() - y.mean()).square().sum() / double(n - 1) / double(n));
    const Eigen::VectorXd beta = X.colPivHouseholderQr().solve(y);
    const Eigen::VectorXd res = y - X * beta;
    t.controlled.value = beta[0];
    t.controlled.stderr = std::sqrt(res.squaredNorm() / double(n - 4) / double(n));
    return t;
}

/// Two-sample Kolmogorov-Smirnov distance.
inline double ks_distance(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_distance: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(double(i) / double(a.size()) - double(j) / double(b.size())));
    }
    return d;
}

struct LimitSampling {
    RosenblattScheme scheme = RosenblattScheme::quadratic;
    std::size_t resolution = 0;  ///< 0: scheme default
    int threads = 0;
};

/// M draws of R_{alpha,Lambda}. Component slot s (two per cyclic pole, one for
/// the zero frequency, whose R^(1) = R^(2)) uses stream family substream_id(10, s).
inline std::vector<double> sample_R_alpha_lambda(const LimitSpec& L, std::uint64_t seed, std::size_t M,
                                                 const LimitSampling& how = {}) {
    L.validate();
    const RosenblattSampler rs(1.0 - L.alpha, how.scheme, how.resolution);
    std::vector<double> out(M, 0.0);
    std::uint64_t slot = 0;
    for (std::size_t j = 0; j < L.cj.size(); ++j) {
        const bool zero = L.lambdas[j] == 0.0;
        const int copies = zero ? 1 : 2;
        const double w = (zero ? 2.0 : 1.0) * L.cj[j] / L.D;
        for (int c = 0; c < copies; ++c, ++slot) {
            const auto d = rs.draws(seed, substream_id(10, slot), M, how.threads);
            for (std::size_t i = 0; i < M; ++i) out[i] += w * d.values[i];
        }
    }
    return out;
}

/// Single draw (index 0).
inline double sample_R_alpha_lambda(const LimitSpec& L, std::uint64_t seed) {
    return sample_R_alpha_lambda(L, seed, 1)[0];
}

/// Empirical beta-quantiles of |R_{alpha,Lambda}|.
struct QuantileTable {
    std::vector<double> betas;
    std::vector<double> quantiles;
    std::size_t M = 0;
    std::uint64_t seed = 0;
    LimitSpec limit;
    std::string scheme;
    std::size_t resolution = 0;
    std::string spec_id;
    std::string convention;

    double quantile(double beta) const {
        for (std::size_t i = 0; i < betas.size(); ++i)
            if (std::abs(betas[i] - beta) < 1e-12) return quantiles[i];
        throw std::out_of_range("QuantileTable: beta not tabulated");
    }

    /// Hash of everything that determines the table.
    std::string key() const {
        std::ostringstream os;
        os << "alpha=" << std::llround(limit.alpha * 1e6);
        for (double l : limit.lambdas) os << ";l=" << std::llround(l * 1e6);
        os << ";lim=" << limit.canonical() << ";spec=" << spec_id << ";conv=" << convention << ";M=" << M
           << ";seed=" << seed << ";scheme=" << scheme << ";N=" << resolution << ";betas=";
        for (double b : betas) os << fmt_double(b) << ',';
        return sha256_hex(os.str()).substr(0, 24);
    }
};

inline void check_betas(const std::vector<double>& betas) {
    if (betas.empty()) throw std::invalid_argument("quantile_table: empty beta list");
    for (double b : betas)
        if (!(b > 0.0 && b < 1.0)) throw std::invalid_argument("quantile_table: beta must lie in (0, 1)");
}

inline QuantileTable quantile_table(const LimitSpec& L, const std::vector<double>& betas, std::size_t M,
                                    std::uint64_t seed, const LimitSampling& how = {}, const std::string& spec_id = "",
                                    const std::string& convention = "") {
    check_betas(betas);
    if (M < 10000) throw std::invalid_argument("quantile_table: M must be >= 1e4");
    auto draws = sample_R_alpha_lambda(L, seed, M, how);
    for (double& v : draws) v = std::abs(v);
    std::sort(draws.begin(), draws.end());
    QuantileTable t;
    t.betas = betas;
    for (double b : betas) {
        const std::size_t k = std::size_t(std::ceil(b * double(M)));
        t.quantiles.push_back(draws[std::min(M, std::max<std::size_t>(k, 1)) - 1]);
    }
    t.M = M;
    t.seed = seed;
    t.limit = L;
    t.scheme = to_string(how.scheme);
    t.resolution = how.resolution ? how.resolution : (how.scheme == RosenblattScheme::integral ? 2000 : 4096);
    t.spec_id = spec_id;
    t.convention = convention;
    return t;
}

/// Table for the dominating poles of `spec` at (alpha, lambdas) plug-in values.
inline QuantileTable quantile_table(double alpha, const std::vector<double>& lambdas, const CyclicSpec& spec,
                                    const std::vector<double>& betas, std::size_t M, std::uint64_t seed,
                                    CjConvention conv = CjConvention::matched, const LimitSampling& how = {}) {
    const auto s = plug_in_spec(spec, alpha, lambdas);
    return quantile_table(make_limit_spec(s, conv), betas, M, seed, how, s.id(), to_string(conv));
}

inline void write_quantile_table(const QuantileTable& t, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << "# quantiles of |R_{alpha,Lambda}|\n";
    os << "# key = " << t.key() << "\n";
    os << "# alpha = " << fmt_double(t.limit.alpha) << "\n";
    os << "# D = " << fmt_double(t.limit.D) << "\n";
    for (std::size_t i = 0; i < t.limit.lambdas.size(); ++i)
        os << "# pole = " << fmt_double(t.limit.lambdas[i]) << " " << fmt_double(t.limit.cj[i]) << "\n";
    os << "# M = " << t.M << "\n# seed = " << t.seed << "\n# scheme = " << t.scheme << "\n# resolution = "
       << t.resolution << "\n# spec_id = " << t.spec_id << "\n# convention = " << t.convention << "\n";
    os << "beta,quantile\n";
    for (std::size_t i = 0; i < t.betas.size(); ++i) os << fmt_double(t.betas[i]) << ',' << fmt_double(t.quantiles[i]) << '\n';
}

inline QuantileTable read_quantile_table(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path);
    QuantileTable t;
    std::string line;
    bool header = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find(" = ");
            if (eq == std::string::npos) continue;
            const std::string k = line.substr(2, eq - 2), v = line.substr(eq + 3);
            std::istringstream vs(v);
            if (k == "alpha") vs >> t.limit.alpha;
            else if (k == "D") vs >> t.limit.D;
            else if (k == "pole") {
                double l = 0, c = 0;
                vs >> l >> c;
                t.limit.lambdas.push_back(l);
                t.limit.cj.push_back(c);
            } else if (k == "M") vs >> t.M;
            else if (k == "seed") vs >> t.seed;
            else if (k == "scheme") t.scheme = v;
            else if (k == "resolution") vs >> t.resolution;
            else if (k == "spec_id") t.spec_id = v;
            else if (k == "convention") t.convention = v;
            continue;
        }
        if (!header) {
            header = true;
            continue;
        }
        const auto comma = line.find(',');
        t.betas.push_back(std::stod(line.substr(0, comma)));
        t.quantiles.push_back(std::stod(line.substr(comma + 1)));
    }
    return t;
}

/// quantile_table with an on-disk cache in `dir` keyed by QuantileTable::key().
/// Returns the table and whether it came from the cache.
inline std::pair<QuantileTable, std::string> cached_quantile_table(const std::string& dir, double alpha,
                                                                   const std::vector<double>& lambdas,
                                                                   const CyclicSpec& spec,
                                                                   const std::vector<double>& betas, std::size_t M,
                                                                   std::uint64_t seed, CjConvention conv,
                                                                   const LimitSampling& how, bool* hit = nullptr) {
    QuantileTable probe;
    const auto s = plug_in_spec(spec, alpha, lambdas);
    probe.limit = make_limit_spec(s, conv);
    probe.betas = betas;
    probe.M = M;
    probe.seed = seed;
    probe.scheme = to_string(how.scheme);
    probe.resolution = how.resolution ? how.resolution : (how.scheme == RosenblattScheme::integral ? 2000 : 4096);
    probe.spec_id = s.id();
    probe.convention = to_string(conv);
    const auto path = (std::filesystem::path(dir) / ("quantiles-" + probe.key() + ".csv")).string();
    if (std::filesystem::exists(path)) {
        if (hit) *hit = true;
        return {read_quantile_table(path), path};
    }
    if (hit) *hit = false;
    std::filesystem::create_directories(dir);
    auto t = quantile_table(alpha, lambdas, spec, betas, M, seed, conv, how);
    write_quantile_table(t, path);
    return {t, path};
}

struct PoleEstimate {
    double alpha_hat = 0.0;
    std::vector<double> lambda_hats;
    std::vector<double> alpha_per_pole;
};

/// Periodogram-based (alpha, Lambda) estimate. Blocks of `block` Fourier
/// frequencies whose mean periodogram exceeds `threshold` times the median
/// block mean are candidate peaks, taken strongest first; each masks its
/// flanks down to the threshold. lambda is the argmax of the 5-point smoothed
/// periodogram near the block, alpha = 1 + the log-periodogram slope over
/// offsets 3..sqrt(n) on both sides. Candidates whose slope is not below
/// -3 standard errors are dropped.
inline PoleEstimate estimate_alpha_lambda(std::span<const double> x, double threshold = 4.0, std::size_t block = 64) {
    const std::size_t n = x.size();
    if (n < 4096) throw std::invalid_argument("estimate_alpha_lambda: need n >= 2^12");
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= double(n);
    std::vector<double> xc(x.begin(), x.end());
    for (double& v : xc) v -= mean;
    const auto F = fft::rfft(xc, n);
    const std::size_t H = n / 2;  // frequencies 2 pi k / n, k = 1..H
    std::vector<double> I(H + 1, 0.0);
    for (std::size_t k = 1; k <= H; ++k) I[k] = std::norm(F[k]) / (2.0 * std::numbers::pi * double(n));
    const std::size_t nb = H / block;
    std::vector<double> bm(nb);
    for (std::size_t b = 0; b < nb; ++b) {
        double s = 0.0;
        for (std::size_t k = b * block + 1; k <= (b + 1) * block; ++k) s += I[k];
        bm[b] = s / double(block);
    }
    std::vector<double> sorted = bm;
    std::nth_element(sorted.begin(), sorted.begin() + std::ptrdiff_t(nb / 2), sorted.end());
    const double med = sorted[nb / 2];
    const std::size_t m = std::size_t(std::sqrt(double(n)));
    std::vector<bool> masked(nb, false);
    PoleEstimate est;
    for (;;) {
        std::size_t best = nb;
        for (std::size_t b = 0; b < nb; ++b)
            if (!masked[b] && bm[b] > threshold * med && (best == nb || bm[b] > bm[best])) best = b;
        if (best == nb) break;
        // peak location inside the block and its neighbours
        const std::size_t lo = std::max<std::size_t>(1, best * block + 1 - std::min(best * block, block));
        const std::size_t hi = std::min(H, (best + 2) * block);
        std::size_t kmax = lo;
        double vmax = -1.0;
        for (std::size_t k = lo; k <= hi; ++k) {
            double s = 0.0, w = 0.0;
            for (int o = -2; o <= 2; ++o) {
                const std::ptrdiff_t q = std::ptrdiff_t(k) + o;
                if (q < 1 || q > std::ptrdiff_t(H)) continue;
                const double ww = o == 0 ? 1.0 : (std::abs(o) == 1 ? 0.5 : 0.25);
                s += ww * I[std::size_t(q)];
                w += ww;
            }
            if (s / w > vmax) vmax = s / w, kmax = k;
        }
        const bool zero = kmax <= block;
        const double lam = zero ? 0.0 : 2.0 * std::numbers::pi * double(kmax) / double(n);
        std::vector<double> px, py;
        const std::size_t kc = zero ? 0 : kmax;
        for (std::size_t j = 3; j <= m; ++j) {
            for (int side : {-1, 1}) {
                if (zero && side < 0) continue;
                const std::ptrdiff_t q = std::ptrdiff_t(kc) + side * std::ptrdiff_t(j);
                if (q < 1 || q > std::ptrdiff_t(H)) continue;
                px.push_back(std::log(2.0 * std::numbers::pi * double(j) / double(n)));
                py.push_back(std::log(I[std::size_t(q)]));
            }
        }
        const auto fit = ols(px, py);
        // a pole needs a clearly falling log-periodogram; flat bumps on a pole's flank are skipped
        if (fit.slope < -3.0 * fit.stderr_slope) {
            est.lambda_hats.push_back(lam);
            est.alpha_per_pole.push_back(1.0 + fit.slope);
        }
        // mask the peak and its flanks until two consecutive blocks fall below the threshold
        const std::size_t pb = std::min(nb - 1, kmax / block);
        masked[pb] = true;
        for (int dir : {-1, 1}) {
            int below = 0;
            for (std::ptrdiff_t b = std::ptrdiff_t(pb) + dir; b >= 0 && b < std::ptrdiff_t(nb) && below < 2; b += dir) {
                masked[std::size_t(b)] = true;
                below = bm[std::size_t(b)] > threshold * med ? 0 : below + 1;
            }
        }
    }
    if (est.lambda_hats.empty()) throw std::runtime_error("estimate_alpha_lambda: no significant spectral peak");
    est.alpha_hat = *std::min_element(est.alpha_per_pole.begin(), est.alpha_per_pole.end());
    return est;
}

inline PoleEstimate estimate_alpha_lambda(const SamplePath& p, double threshold = 4.0, std::size_t block = 64) {
    return estimate_alpha_lambda(std::span<const double>(p.x), threshold, block);
}

}  // namespace ckde
