#pragma once
/// \file process_sim.hpp
/// Gegenbauer-type filters, sample paths and autocovariances of cyclic
/// long-memory linear processes X_t = sum_k b_k xi_{t-k}.
///
/// Besides plain truncation at K, the filter carries its large-k asymptotics
/// (one term per singularity of G on the unit circle),
///   b_k ~ 2 Re[H_j e^{i k lambda_j}] w_j(k) / Gamma(d_j),  w(k) = Gamma(k+d)/Gamma(k+1),
/// which is used to extend b beyond K, to correct the acvf for the neglected
/// tail and to add the contribution of innovations older than the stored
/// window to simulated paths.

#include "ckde/fft.hpp"
#include "ckde/hash.hpp"
#include "ckde/quadrature.hpp"
#include "ckde/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ckde {

using cplx = std::complex<double>;

struct Pole {
    double lambda = 0.0;  ///< frequency in (0, pi)
    double alpha = 1.0;   ///< memory exponent in (0, 1]
};

/// Pole/memory structure of the filter G(z).
struct CyclicSpec {
    std::vector<Pole> poles;
    double alpha0 = 1.0;  ///< exponent at frequency zero, 1 = no pole
    std::vector<double> g_coeffs{1.0};
    double sigma2 = 1.0;

    /// min over all alpha_j including alpha0 (1 for short memory).
    double alpha() const {
        double a = alpha0;
        for (const auto& p : poles) a = std::min(a, p.alpha);
        return a;
    }

    /// Dominating set J: 0 is the zero frequency, j >= 1 is poles[j-1].
    /// Empty when alpha == 1 (no long memory).
    std::vector<int> dominating(double tol = 1e-12) const {
        std::vector<int> J;
        const double a = alpha();
        if (a >= 1.0) return J;
        if (std::abs(alpha0 - a) <= tol) J.push_back(0);
        for (std::size_t j = 0; j < poles.size(); ++j)
            if (std::abs(poles[j].alpha - a) <= tol) J.push_back(int(j) + 1);
        return J;
    }

    bool cyclic_dominant() const { return alpha() < alpha0 / 2.0; }

    /// All rule violations, each prefixed by its field path.
    std::vector<std::string> violations() const {
        std::vector<std::string> v;
        for (std::size_t j = 0; j < poles.size(); ++j) {
            const std::string base = "poles[" + std::to_string(j) + "]";
            const auto& p = poles[j];
            if (!(p.lambda > 0.0 && p.lambda < std::numbers::pi))
                v.push_back(base + ".lambda: must lie in (0, pi), got " + fmt_double(p.lambda));
            if (!(p.alpha > 0.0 && p.alpha <= 1.0))
                v.push_back(base + ".alpha: must lie in (0, 1], got " + fmt_double(p.alpha));
            if (j > 0 && !(poles[j - 1].lambda < p.lambda))
                v.push_back(base + ".lambda: poles must be strictly increasing in lambda");
        }
        if (!(alpha0 > 0.0 && alpha0 <= 1.0))
            v.push_back("process.alpha0: must lie in (0, 1], got " + fmt_double(alpha0));
        if (g_coeffs.empty() || g_coeffs[0] == 0.0 || !std::isfinite(g_coeffs[0]))
            v.push_back("process.g: constant term must be nonzero");
        for (double c : g_coeffs)
            if (!std::isfinite(c)) v.push_back("process.g: coefficients must be finite");
        if (!(sigma2 > 0.0 && std::isfinite(sigma2)))
            v.push_back("process.sigma2: must be positive, got " + fmt_double(sigma2));
        return v;
    }

    void validate() const {
        const auto v = violations();
        if (v.empty()) return;
        std::string msg = "invalid CyclicSpec:";
        for (const auto& s : v) msg += "\n  " + s;
        throw std::invalid_argument(msg);
    }

    /// Canonical text form; equal specs give equal strings.
    std::string canonical() const {
        std::ostringstream os;
        os << "poles=";
        for (const auto& p : poles) os << fmt_double(p.lambda) << ':' << fmt_double(p.alpha) << ';';
        os << " alpha0=" << fmt_double(alpha0) << " g=";
        for (double c : g_coeffs) os << fmt_double(c) << ';';
        os << " sigma2=" << fmt_double(sigma2);
        return os.str();
    }

    std::string id() const { return sha256_hex(canonical()).substr(0, 16); }

    cplx g_at(cplx z) const {
        cplx acc = 0.0;
        for (auto it = g_coeffs.rbegin(); it != g_coeffs.rend(); ++it) acc = acc * z + *it;
        return acc;
    }
};

/// One singular term of the large-k expansion of b_k.
struct DarbouxTerm {
    double lambda = 0.0;  ///< 0 for the zero-frequency pole
    double d = 0.0;       ///< (1 - alpha_j)/2
    cplx H;               ///< regular part of G at the singularity
    double gamma_d = 1.0; ///< Gamma(d)

    /// Gamma(k+d)/Gamma(k+1) to relative O(k^-2).
    double w(double k) const { return std::pow(k + 0.5 * d, d - 1.0); }

    double coefficient(double k) const {
        if (lambda == 0.0) return H.real() * w(k) / gamma_d;
        return 2.0 * (H * std::polar(1.0, k * lambda)).real() * w(k) / gamma_d;
    }

    /// Weight of the non-oscillating part of b_k b_{k+h}: b_k b_{k+h} ~
    /// pair_weight * cos(h lambda) w(k) w(k+h).
    double pair_weight() const {
        const double a = std::norm(H) / (gamma_d * gamma_d);
        return lambda == 0.0 ? a : 2.0 * a;
    }
};

/// sum_{k > K'} w(k) w(k+h) with A = K' + 1/2 + d/2 (midpoint rule for the
/// sum, then the substitution s = v^{-1/(1-2d)} makes the integral regular).
inline double tail_pair_sum(double d, double A, double h) {
    const double p = d - 1.0, e = 1.0 - 2.0 * d;
    const double c = h / A;
    const auto& q = gauss_legendre(64);
    double acc = 0.0;
    for (std::size_t i = 0; i < q.nodes.size(); ++i) {
        const double v = 0.5 * (q.nodes[i] + 1.0);
        acc += 0.5 * q.weights[i] * std::pow(1.0 + c * std::pow(v, 1.0 / e), p);
    }
    return std::pow(A, 2.0 * p + 1.0) / e * acc;
}

/// Truncated filter coefficients b_0..b_K plus the asymptotic tail model.
struct CoefficientSeries {
    std::vector<double> b;
    std::size_t K = 0;
    double sigma2 = 1.0;
    std::vector<DarbouxTerm> tail;  ///< empty: no singularities, b is exact
    std::string spec_id;

    double asymptotic(double k) const {
        double acc = 0.0;
        for (const auto& t : tail) acc += t.coefficient(k);
        return acc;
    }

    /// b_k for k <= K, asymptotic value beyond.
    double extended(std::size_t k) const { return k <= K ? b[k] : asymptotic(double(k)); }

    /// b extended with the asymptotic model to indices 0..len-1.
    std::vector<double> extended_series(std::size_t len) const {
        std::vector<double> out(len, 0.0);
        for (std::size_t k = 0; k < len; ++k) out[k] = k < b.size() ? b[k] : (tail.empty() ? 0.0 : asymptotic(double(k)));
        return out;
    }

    double energy() const {
        double s = 0.0;
        for (double v : b) s += v * v;
        return s;
    }

    /// sigma^2 sum_{k > Kp} b_k b_{k+h} under the asymptotic model
    /// (oscillating and cross-pole products dropped, O(Kp^{2d-2})).
    double tail_covariance(double Kp, double h) const {
        double acc = 0.0;
        for (const auto& t : tail) {
            const double c = t.lambda == 0.0 ? 1.0 : std::cos(h * t.lambda);
            acc += t.pair_weight() * c * tail_pair_sum(t.d, Kp + 0.5 + 0.5 * t.d, h);
        }
        return sigma2 * acc;
    }
};

namespace detail {

/// Coefficients of (1 - 2uz + z^2)^{-d}, k = 0..K (Gegenbauer recursion).
inline std::vector<double> gegenbauer_series(double u, double d, std::size_t K) {
    std::vector<double> c(K + 1, 0.0);
    c[0] = 1.0;
    if (K >= 1) c[1] = 2.0 * d * u;
    for (std::size_t k = 2; k <= K; ++k) {
        const double kk = double(k);
        c[k] = (2.0 * u * (kk + d - 1.0) * c[k - 1] - (kk + 2.0 * d - 2.0) * c[k - 2]) / kk;
    }
    return c;
}

/// Coefficients of (1 - z)^{-d}, k = 0..K.
inline std::vector<double> fractional_series(double d, std::size_t K) {
    std::vector<double> c(K + 1, 0.0);
    c[0] = 1.0;
    for (std::size_t k = 1; k <= K; ++k) c[k] = c[k - 1] * (double(k) - 1.0 + d) / double(k);
    return c;
}

struct SingularFactor {
    double mu;  ///< factor (1 - e^{i mu} z)^{-d}
    double d;
};

inline std::vector<SingularFactor> singular_factors(const CyclicSpec& spec) {
    std::vector<SingularFactor> f;
    for (const auto& p : spec.poles) {
        const double d = 0.5 * (1.0 - p.alpha);
        if (d <= 0.0) continue;
        f.push_back({p.lambda, d});
        f.push_back({-p.lambda, d});
    }
    if (spec.alpha0 < 1.0) f.push_back({0.0, 0.5 * (1.0 - spec.alpha0)});
    return f;
}

}  // namespace detail

/// Darboux constants of every singularity of G on the upper unit circle.
inline std::vector<DarbouxTerm> darboux_terms(const CyclicSpec& spec) {
    const auto factors = detail::singular_factors(spec);
    std::vector<DarbouxTerm> out;
    for (std::size_t i = 0; i < factors.size(); ++i) {
        const auto& fi = factors[i];
        if (fi.mu < 0.0) continue;
        // singularity of factor i sits at z = e^{-i mu}
        const cplx z = std::polar(1.0, -fi.mu);
        cplx H = spec.g_at(z);
        for (std::size_t k = 0; k < factors.size(); ++k) {
            if (k == i) continue;
            const cplx base = 1.0 - std::polar(1.0, factors[k].mu - fi.mu);
            if (std::abs(base) < 1e-14) throw std::invalid_argument("coincident poles");
            H *= std::pow(base, -factors[k].d);
        }
        if (fi.mu == 0.0) H = H.real();
        out.push_back({fi.mu, fi.d, H, std::tgamma(fi.d)});
    }
    return out;
}

/// First K+1 power-series coefficients of G(z) = g(z) prod_j (1 - 2cos(l_j) z + z^2)^{-d_j} (1-z)^{-d_0}.
inline CoefficientSeries expand_filter(const CyclicSpec& spec, std::size_t K) {
    if (K < 1) throw std::invalid_argument("expand_filter: K must be >= 1");
    for (const auto& p : spec.poles)
        if (p.alpha == 0.0) throw std::invalid_argument("expand_filter: alpha_j = 0 is outside the filter class");
    spec.validate();

    std::vector<double> b(spec.g_coeffs.begin(), spec.g_coeffs.end());
    b.resize(K + 1, 0.0);
    for (const auto& p : spec.poles) {
        const double d = 0.5 * (1.0 - p.alpha);
        if (d <= 0.0) continue;
        b = fft::convolve(b, detail::gegenbauer_series(std::cos(p.lambda), d, K), K + 1);
    }
    if (spec.alpha0 < 1.0) b = fft::convolve(b, detail::fractional_series(0.5 * (1.0 - spec.alpha0), K), K + 1);

    b[0] = spec.g_coeffs[0];  // every factor is monic; keeps b_0 exact under FFT rounding

    CoefficientSeries cs;
    cs.b = std::move(b);
    cs.K = K;
    cs.sigma2 = spec.sigma2;
    cs.tail = darboux_terms(spec);
    cs.spec_id = spec.id();
    return cs;
}

/// Truncation policy: with the tail model the relative error is O(1/K);
/// K >= n is required by the tail sampler.
inline std::size_t default_truncation(std::size_t n) { return std::max<std::size_t>(32768, 4 * n); }

/// r(h) = sigma^2 sum_k b_k b_{k+h}, h = 0..hmax. With `tail_correction` the
/// sum runs over the asymptotically extended filter (k up to infinity).
inline std::vector<double> theoretical_acvf(const CoefficientSeries& c, std::size_t hmax,
                                            bool tail_correction = true) {
    if (hmax >= c.K) throw std::invalid_argument("theoretical_acvf: hmax must be < K");
    const bool tail = tail_correction && !c.tail.empty();
    const std::size_t M = tail ? c.K + hmax : c.K;
    const auto bt = c.extended_series(M + 1);
    const std::size_t L = fft::good_size(2 * (M + 1));
    auto spec = fft::rfft(bt, L);
    for (auto& v : spec) v = std::norm(v);
    const auto ac = fft::irfft(spec, L);
    std::vector<double> r(hmax + 1);
    for (std::size_t h = 0; h <= hmax; ++h) {
        r[h] = c.sigma2 * ac[h];
        if (tail) r[h] += c.tail_covariance(double(M - h), double(h));
    }
    return r;
}

enum class Innovation { gaussian, uniform };

inline Innovation parse_innovation(const std::string& tag) {
    if (tag == "gaussian") return Innovation::gaussian;
    if (tag == "uniform") return Innovation::uniform;
    throw std::invalid_argument("unknown innovation tag: " + tag);
}

inline std::string to_string(Innovation i) { return i == Innovation::gaussian ? "gaussian" : "uniform"; }

/// Realized X_1..X_n with the driving innovations xi_{1-K}..xi_n.
/// `tail` holds the contribution of innovations older than 1-K (empty when
/// the path was generated by plain truncation).
struct SamplePath {
    std::vector<double> x;
    std::vector<double> xi;
    std::vector<double> tail;
    std::uint64_t seed = 0;
    std::uint64_t substream = 0;
    std::string spec_id;
    std::size_t K = 0;
    Innovation innovation = Innovation::gaussian;

    std::size_t n() const { return x.size(); }
    bool has_tail() const { return !tail.empty(); }
};

/// Path generator for fixed (coefficients, n). Filter transforms and the
/// tail sampler are prepared once and reused across replicates.
class PathSimulator {
public:
    static constexpr std::size_t chebyshev_nodes = 16;

    PathSimulator(const CoefficientSeries& c, std::size_t n, Innovation innov = Innovation::gaussian,
                  bool tail_model = true)
        : c_(c), n_(n), innov_(innov), tail_(tail_model && !c.tail.empty()) {
        if (n < 1) throw std::invalid_argument("simulate_path: n must be >= 1");
        if (c.b.empty()) throw std::invalid_argument("simulate_path: empty filter");
        if (tail_ && n > c.K) throw std::invalid_argument("simulate_path: tail model requires n <= K");
        K_ = c.b.size() - 1;
        const std::size_t blen = tail_ ? n + K_ : K_ + 1;
        bt_ = c.extended_series(blen);
        L_ = fft::good_size(tail_ ? 2 * n + K_ - 1 : n + K_);
        if (!tail_) {
            std::size_t eff = bt_.size();
            while (eff > 1 && bt_[eff - 1] == 0.0) --eff;
            direct_ = eff <= 64;
            if (direct_) bt_.resize(eff);
        }
        if (!direct_) {
            bspec_ = fft::rfft(bt_, L_);
            std::vector<double> b2(bt_.size());
            for (std::size_t k = 0; k < bt_.size(); ++k) b2[k] = bt_[k] * bt_[k];
            b2spec_ = fft::rfft(b2, L_);
        }
        if (tail_) prepare_tail();
    }

    std::size_t n() const { return n_; }
    std::size_t K() const { return K_; }
    bool tail_model() const { return tail_; }
    const CoefficientSeries& coefficients() const { return c_; }

    /// Var of the tail term at t = 1..n (zero without tail model).
    const std::vector<double>& tail_variance() const { return tail_var_; }

    SamplePath simulate(std::uint64_t seed, std::uint64_t substream = 0) const {
        RandomStream rs(seed, substream);
        SamplePath p;
        p.seed = seed;
        p.substream = substream;
        p.spec_id = c_.spec_id;
        p.K = K_;
        p.innovation = innov_;
        const double sd = std::sqrt(c_.sigma2);
        p.xi.resize(n_ + K_);
        if (innov_ == Innovation::gaussian) {
            for (double& v : p.xi) v = sd * rs.normal();
        } else {
            const double a = sd * std::sqrt(3.0);
            for (double& v : p.xi) v = a * (2.0 * rs.uniform() - 1.0);
        }
        p.x = convolve_window(bspec_, p.xi);
        if (tail_) {
            p.tail = sample_tail(rs);
            for (std::size_t t = 0; t < n_; ++t) p.x[t] += p.tail[t];
        }
        return p;
    }

    /// D_t = sum_r b_r^2 xi_{t-r}^2 over stored innovations, plus Var(T_t)
    /// standing in for the diagonal of the unstored tail.
    std::vector<double> diagonal(const SamplePath& p) const {
        check(p);
        std::vector<double> xi2(p.xi.size());
        for (std::size_t i = 0; i < xi2.size(); ++i) xi2[i] = p.xi[i] * p.xi[i];
        auto D = convolve_window(b2spec_, xi2);
        if (tail_)
            for (std::size_t t = 0; t < n_; ++t) D[t] += tail_var_[t];
        return D;
    }

    /// Y_{n,2} = 1/2 sum_t (X_t^2 - D_t).
    double y_n2(const SamplePath& p) const {
        const auto D = diagonal(p);
        double s = 0.0;
        for (std::size_t t = 0; t < n_; ++t) s += p.x[t] * p.x[t] - D[t];
        return 0.5 * s;
    }

private:
    void check(const SamplePath& p) const {
        if (p.xi.size() != n_ + K_ || p.x.size() != n_)
            throw std::invalid_argument("path does not match simulator (missing innovations?)");
        if (p.has_tail() != tail_) throw std::invalid_argument("path tail flag does not match simulator");
    }

    std::vector<double> convolve_window(const std::vector<cplx>& fspec, const std::vector<double>& sig) const {
        if (direct_) {
            // short filters: exact direct sum (b = (1) reproduces xi bit for bit)
            const bool sq = &fspec == &b2spec_;
            std::vector<double> out(n_, 0.0);
            for (std::size_t t = 0; t < n_; ++t) {
                double acc = 0.0;
                for (std::size_t k = 0; k < bt_.size(); ++k) {
                    const double bk = sq ? bt_[k] * bt_[k] : bt_[k];
                    acc += bk * sig[t + K_ - k];
                }
                out[t] = acc;
            }
            return out;
        }
        auto s = fft::rfft(sig, L_);
        for (std::size_t i = 0; i < s.size(); ++i) s[i] *= fspec[i];
        const auto full = fft::irfft(s, L_);
        return std::vector<double>(full.begin() + std::ptrdiff_t(K_), full.begin() + std::ptrdiff_t(K_ + n_));
    }

    struct TailSampler {
        DarbouxTerm term;
        Eigen::MatrixXd factor;  ///< W = factor factor^T at the nodes
    };

    void prepare_tail() {
        const std::size_t P = std::min(chebyshev_nodes, n_);
        nodes_.resize(P);
        if (P == n_) {
            for (std::size_t l = 0; l < P; ++l) nodes_[l] = double(l + 1);
        } else {
            const double mid = 0.5 * (1.0 + double(n_)), half = 0.5 * (double(n_) - 1.0);
            for (std::size_t l = 0; l < P; ++l)
                nodes_[l] = mid + half * std::cos(std::numbers::pi * (2.0 * double(l) + 1.0) / (2.0 * double(P)));
        }
        // Barycentric interpolation matrix (first-kind Chebyshev weights).
        interp_ = Eigen::MatrixXd::Zero(Eigen::Index(n_), Eigen::Index(P));
        if (P == n_) {
            interp_.setIdentity();
        } else {
            std::vector<double> bw(P);
            for (std::size_t l = 0; l < P; ++l)
                bw[l] = ((l % 2) ? -1.0 : 1.0) * std::sin(std::numbers::pi * (2.0 * double(l) + 1.0) / (2.0 * double(P)));
            for (std::size_t t = 0; t < n_; ++t) {
                const double tt = double(t + 1);
                double den = 0.0;
                std::size_t hit = P;
                for (std::size_t l = 0; l < P; ++l) {
                    if (tt == nodes_[l]) hit = l;
                    const double q = bw[l] / (tt - nodes_[l]);
                    interp_(Eigen::Index(t), Eigen::Index(l)) = q;
                    den += q;
                }
                if (hit < P) {
                    interp_.row(Eigen::Index(t)).setZero();
                    interp_(Eigen::Index(t), Eigen::Index(hit)) = 1.0;
                } else {
                    interp_.row(Eigen::Index(t)) /= den;
                }
            }
        }
        const double Kd = double(K_);
        for (const auto& term : c_.tail) {
            // Cov of V(t) = sum_{m >= K} e^{i m lambda} w(t+m) xi_{-m} at the nodes.
            Eigen::MatrixXd W(static_cast<Eigen::Index>(P), static_cast<Eigen::Index>(P));
            for (std::size_t l = 0; l < P; ++l)
                for (std::size_t k = l; k < P; ++k) {
                    const double lo = std::min(nodes_[l], nodes_[k]);
                    const double h = std::abs(nodes_[l] - nodes_[k]);
                    const double v = c_.sigma2 * tail_pair_sum(term.d, lo + Kd - 0.5 + 0.5 * term.d, h);
                    W(Eigen::Index(l), Eigen::Index(k)) = W(Eigen::Index(k), Eigen::Index(l)) = v;
                }
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(W);
            Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
            samplers_.push_back({term, es.eigenvectors() * ev.asDiagonal()});
        }
        tail_var_.assign(n_, 0.0);
        for (std::size_t t = 0; t < n_; ++t) tail_var_[t] = c_.tail_covariance(double(t + 1) + Kd - 1.0, 0.0);
    }

    std::vector<double> sample_tail(RandomStream& rs) const {
        const auto P = Eigen::Index(nodes_.size());
        std::vector<double> T(n_, 0.0);
        for (const auto& s : samplers_) {
            Eigen::VectorXd e1(P), e2(P);
            for (Eigen::Index l = 0; l < P; ++l) e1[l] = rs.normal();
            if (s.term.lambda == 0.0) {
                const Eigen::VectorXd v = interp_ * (s.factor * e1);
                const double a = s.term.H.real() / s.term.gamma_d;
                for (std::size_t t = 0; t < n_; ++t) T[t] += a * v[Eigen::Index(t)];
            } else {
                for (Eigen::Index l = 0; l < P; ++l) e2[l] = rs.normal();
                const Eigen::VectorXd vr = interp_ * (s.factor * e1) / std::sqrt(2.0);
                const Eigen::VectorXd vi = interp_ * (s.factor * e2) / std::sqrt(2.0);
                const double a = 2.0 / s.term.gamma_d;
                for (std::size_t t = 0; t < n_; ++t) {
                    const cplx ph = s.term.H * std::polar(1.0, double(t + 1) * s.term.lambda);
                    T[t] += a * (ph * cplx(vr[Eigen::Index(t)], vi[Eigen::Index(t)])).real();
                }
            }
        }
        return T;
    }

    CoefficientSeries c_;
    std::size_t n_;
    Innovation innov_;
    bool tail_;
    bool direct_ = false;
    std::size_t K_ = 0;
    std::size_t L_ = 0;
    std::vector<double> bt_;
    std::vector<cplx> bspec_;
    std::vector<cplx> b2spec_;
    std::vector<double> nodes_;
    Eigen::MatrixXd interp_;
    std::vector<TailSampler> samplers_;
    std::vector<double> tail_var_;
};

/// One path of length n from stream (seed, substream).
inline SamplePath simulate_path(const CoefficientSeries& c, std::size_t n, std::uint64_t seed,
                                Innovation innov = Innovation::gaussian, std::uint64_t substream = 0,
                                bool tail_model = true) {
    return PathSimulator(c, n, innov, tail_model).simulate(seed, substream);
}

}  // namespace ckde
