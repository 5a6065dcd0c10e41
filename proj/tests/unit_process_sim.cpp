#include "ckde/process_sim.hpp"
#include "ckde/regression.hpp"

#include <boost/multiprecision/cpp_int.hpp>
#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

using namespace ckde;
using boost::multiprecision::cpp_rational;

namespace {

CyclicSpec single_pole(double lambda, double alpha) {
    CyclicSpec s;
    s.poles = {{lambda, alpha}};
    return s;
}

CoefficientSeries white(std::size_t K, std::vector<double> b = {1.0}, double sigma2 = 1.0) {
    CoefficientSeries c;
    b.resize(K + 1, 0.0);
    c.b = b;
    c.K = K;
    c.sigma2 = sigma2;
    return c;
}

}  // namespace

// ---------------------------------------------------------------- spec
TEST(CyclicSpec, DerivedAlphaAndDominatingSet) {
    CyclicSpec s;
    s.poles = {{1.0, 0.3}, {2.0, 0.2}};
    s.alpha0 = 0.6;
    EXPECT_DOUBLE_EQ(s.alpha(), 0.2);
    EXPECT_EQ(s.dominating(), (std::vector<int>{2}));
    EXPECT_TRUE(s.cyclic_dominant());
    s.alpha0 = 0.2;
    EXPECT_EQ(s.dominating(), (std::vector<int>{0, 2}));
    EXPECT_FALSE(s.cyclic_dominant());
    EXPECT_TRUE(CyclicSpec{}.dominating().empty());
}

TEST(CyclicSpec, ViolationsNameFields) {
    CyclicSpec s;
    s.poles = {{3.5, 0.2}, {1.0, 0.0}};
    s.g_coeffs = {0.0};
    s.sigma2 = -1;
    const auto v = s.violations();
    auto has = [&](const std::string& key) {
        for (const auto& m : v)
            if (m.rfind(key, 0) == 0) return true;
        return false;
    };
    EXPECT_TRUE(has("poles[0].lambda"));
    EXPECT_TRUE(has("poles[1].alpha"));
    EXPECT_TRUE(has("poles[1].lambda"));
    EXPECT_TRUE(has("process.g"));
    EXPECT_TRUE(has("process.sigma2"));
    EXPECT_THROW(s.validate(), std::invalid_argument);
}

TEST(CyclicSpec, IdIsStable) {
    EXPECT_EQ(single_pole(1.0, 0.2).id(), single_pole(1.0, 0.2).id());
    EXPECT_NE(single_pole(1.0, 0.2).id(), single_pole(1.0, 0.21).id());
}

// ---------------------------------------------------------------- expand_filter
TEST(ExpandFilter, QuarterFrequencyMatchesExactBinomials) {
    // (1 + z^2)^{-2/5}: b_{2k} = binom(-2/5, k), odd terms vanish
    const auto c = expand_filter(single_pole(std::numbers::pi / 2, 0.2), 40);
    cpp_rational e(-2, 5), coef(1);
    for (int k = 0; k <= 20; ++k) {
        if (k > 0) coef = coef * (e - (k - 1)) / k;
        EXPECT_NEAR(c.b[2 * k], coef.convert_to<double>(), 1e-14) << "k=" << k;
        if (2 * k + 1 <= 40) {
            EXPECT_NEAR(c.b[2 * k + 1], 0.0, 1e-15);
        }
    }
}

TEST(ExpandFilter, ShortMemoryFilterEqualsG) {
    CyclicSpec s;
    s.g_coeffs = {1.0, 0.5};
    const auto c = expand_filter(s, 10);
    EXPECT_EQ(c.b[0], 1.0);
    EXPECT_EQ(c.b[1], 0.5);
    for (std::size_t k = 2; k <= 10; ++k) EXPECT_EQ(c.b[k], 0.0);
    EXPECT_TRUE(c.tail.empty());
}

TEST(ExpandFilter, RejectsBadInput) {
    EXPECT_THROW(expand_filter(single_pole(1.0, 0.2), 0), std::invalid_argument);
    EXPECT_THROW(expand_filter(single_pole(1.0, 0.0), 10), std::invalid_argument);
}

TEST(ExpandFilter, ZeroTermEqualsG0) {
    CyclicSpec s = single_pole(1.0, 0.3);
    s.g_coeffs = {2.5, -1.0};
    s.alpha0 = 0.7;
    EXPECT_EQ(expand_filter(s, 100).b[0], 2.5);
}

TEST(ExpandFilter, Multiplicativity) {
    const std::size_t K = 3000;
    CyclicSpec p1 = single_pole(0.7, 0.3);
    p1.g_coeffs = {1.0, 0.4};
    CyclicSpec p2 = single_pole(2.1, 0.45);
    p2.alpha0 = 0.8;
    CyclicSpec both;
    both.poles = {{0.7, 0.3}, {2.1, 0.45}};
    both.alpha0 = 0.8;
    both.g_coeffs = {1.0, 0.4};
    const auto prod = fft::convolve(expand_filter(p1, K).b, expand_filter(p2, K).b, K + 1);
    const auto c = expand_filter(both, K);
    for (std::size_t k = 0; k <= K; ++k) EXPECT_NEAR(c.b[k], prod[k], 1e-12);
}

TEST(ExpandFilter, AsymptoticTailMatchesExactCoefficients) {
    CyclicSpec s;
    s.poles = {{std::numbers::pi / 3, 0.2}, {2.0, 0.4}};
    s.alpha0 = 0.7;
    s.g_coeffs = {1.0, -0.3, 0.2};
    const auto c = expand_filter(s, 200000);
    double worst = 0;
    for (std::size_t k = 50000; k <= 200000; k += 7) {
        const double env = std::pow(double(k), -0.6);
        worst = std::max(worst, std::abs(c.b[k] - c.asymptotic(double(k))) / env);
    }
    EXPECT_LT(worst, 2e-5);
}

TEST(ExpandFilter, DarbouxConstantSinglePole) {
    // g = 1: H = (1 - e^{-2 i lambda})^{-d}
    const double lam = 1.1, a = 0.3, d = 0.35;
    const auto t = darboux_terms(single_pole(lam, a));
    ASSERT_EQ(t.size(), 1u);
    const cplx H = std::pow(1.0 - std::polar(1.0, -2.0 * lam), -d);
    EXPECT_NEAR(std::abs(t[0].H - H), 0.0, 1e-14);
}

TEST(ExpandFilter, EnvelopeSlope) {
    const auto c = expand_filter(single_pole(std::numbers::pi / 3, 0.2), 100000);
    EXPECT_NEAR(envelope_slope(c.b, 100, 100000).slope, -0.6, 0.05);
}

// ---------------------------------------------------------------- acvf
TEST(TheoreticalAcvf, WhiteNoise) {
    const auto r = theoretical_acvf(white(10), 9);
    EXPECT_EQ(r[0], 1.0);
    for (std::size_t h = 1; h <= 9; ++h) EXPECT_NEAR(r[h], 0.0, 1e-15);
}

TEST(TheoreticalAcvf, LagZeroIsEnergy) {
    auto s = single_pole(0.9, 0.3);
    s.sigma2 = 2.0;
    const auto c = expand_filter(s, 5000);
    EXPECT_NEAR(theoretical_acvf(c, 10, false)[0], 2.0 * c.energy(), 1e-10);
}

TEST(TheoreticalAcvf, RejectsLagBeyondTruncation) {
    EXPECT_THROW(theoretical_acvf(white(10), 10), std::invalid_argument);
}

TEST(TheoreticalAcvf, TailCorrectionIsTruncationInvariant) {
    const auto s = single_pole(std::numbers::pi / 3, 0.2);
    const auto r1 = theoretical_acvf(expand_filter(s, 1 << 15), 2000);
    const auto r2 = theoretical_acvf(expand_filter(s, 1 << 20), 2000);
    for (std::size_t h = 0; h <= 2000; ++h) EXPECT_NEAR(r1[h], r2[h], 2e-6) << h;
    // plain truncation is far off
    const auto r3 = theoretical_acvf(expand_filter(s, 1 << 15), 2000, false);
    EXPECT_GT(std::abs(r3[0] - r2[0]), 1e-2);
}

TEST(TheoreticalAcvf, EnvelopeSlope) {
    const auto c = expand_filter(single_pole(std::numbers::pi / 3, 0.2), 100000);
    const auto r = theoretical_acvf(c, 10000);
    EXPECT_NEAR(envelope_slope(r, 100, 10000).slope, -0.2, 0.05);
}

TEST(TheoreticalAcvf, ToeplitzIsPsd) {
    CyclicSpec s;
    s.poles = {{0.5, 0.25}, {2.5, 0.35}};
    s.alpha0 = 0.9;
    const auto r = theoretical_acvf(expand_filter(s, 20000), 64);
    Eigen::MatrixXd T(65, 65);
    for (int i = 0; i <= 64; ++i)
        for (int j = 0; j <= 64; ++j) T(i, j) = r[std::size_t(std::abs(i - j))];
    EXPECT_GT(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(T).eigenvalues().minCoeff(), -1e-8);
}

// ---------------------------------------------------------------- simulate_path
TEST(SimulatePath, IdentityFilterReproducesInnovations) {
    const auto p = simulate_path(white(0), 500, 99);
    ASSERT_EQ(p.xi.size(), 500u);
    for (std::size_t t = 0; t < 500; ++t) EXPECT_EQ(p.x[t], p.xi[t]);
}

TEST(SimulatePath, VarianceOfShortFilter) {
    const auto p = simulate_path(white(1, {1.0, 0.5}), 1000000, 7);
    double m = 0, s2 = 0, s4 = 0;
    for (double v : p.x) m += v;
    m /= double(p.n());
    for (double v : p.x) s2 += (v - m) * (v - m), s4 += std::pow(v - m, 4);
    const double var = s2 / double(p.n());
    // MA(1): Var of the sample variance ~ (1/n) sum_h 2 r(h)^2
    const double se = std::sqrt(2.0 * (1.25 * 1.25 + 2 * 0.25) / double(p.n()));
    EXPECT_NEAR(var, 1.25, 3 * se);
}

TEST(SimulatePath, Deterministic) {
    const auto c = expand_filter(single_pole(1.0, 0.3), 4096);
    const auto a = simulate_path(c, 1024, 11, Innovation::gaussian, 3);
    const auto b = simulate_path(c, 1024, 11, Innovation::gaussian, 3);
    EXPECT_EQ(a.x, b.x);
    EXPECT_EQ(a.xi, b.xi);
    EXPECT_EQ(a.tail, b.tail);
    const auto d = simulate_path(c, 1024, 11, Innovation::gaussian, 4);
    EXPECT_NE(a.x, d.x);
}

TEST(SimulatePath, UnknownInnovationTag) {
    EXPECT_THROW(parse_innovation("cauchy"), std::invalid_argument);
    EXPECT_EQ(parse_innovation("uniform"), Innovation::uniform);
}

TEST(SimulatePath, ConvolutionIdentityTruncated) {
    CyclicSpec s = single_pole(1.2, 0.3);
    s.g_coeffs = {1.0, 0.3};
    const auto c = expand_filter(s, 700);
    const auto p = simulate_path(c, 1000, 5, Innovation::uniform, 0, false);
    ASSERT_EQ(p.xi.size(), 1700u);
    EXPECT_FALSE(p.has_tail());
    for (std::size_t t = 0; t < 1000; ++t) {
        double ref = 0;
        for (std::size_t k = 0; k <= 700; ++k) ref += c.b[k] * p.xi[t + 700 - k];
        EXPECT_NEAR(p.x[t], ref, 1e-12);
    }
}

TEST(SimulatePath, ConvolutionIdentityWithTail) {
    const auto c = expand_filter(single_pole(1.2, 0.3), 1000);
    const auto p = simulate_path(c, 600, 5);
    ASSERT_TRUE(p.has_tail());
    for (std::size_t t = 0; t < 600; t += 7) {
        double ref = 0;
        for (std::size_t k = 0; k <= t + 1000; ++k) ref += c.extended(k) * p.xi[t + 1000 - k];
        EXPECT_NEAR(p.x[t] - p.tail[t], ref, 1e-12);
    }
    EXPECT_THROW(simulate_path(c, 1001, 5), std::invalid_argument);
}

TEST(SimulatePath, SubstreamsUncorrelated) {
    const auto c = white(0);
    const std::size_t n = 100000;
    const auto a = simulate_path(c, n, 1, Innovation::gaussian, 0);
    const auto b = simulate_path(c, n, 1, Innovation::gaussian, 1);
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < n; ++i) sab += a.x[i] * b.x[i], saa += a.x[i] * a.x[i], sbb += b.x[i] * b.x[i];
    EXPECT_LT(std::abs(sab / std::sqrt(saa * sbb)), 4.0 / std::sqrt(double(n)));
}

TEST(SimulatePath, MarginalVarianceMatchesAcvf) {
    // Var(X_t) across replicates at the first and last time points, tail on.
    const auto s = single_pole(std::numbers::pi / 3, 0.2);
    const auto c = expand_filter(s, 8192);
    const auto r0 = theoretical_acvf(c, 1)[0];
    PathSimulator sim(c, 2048);
    const int R = 1500;
    double s_first = 0, s_last = 0, s_tail = 0;
    for (int i = 0; i < R; ++i) {
        const auto p = sim.simulate(17, std::uint64_t(i));
        s_first += p.x.front() * p.x.front();
        s_last += p.x.back() * p.x.back();
        s_tail += p.tail.back() * p.tail.back();
    }
    const double se = r0 * std::sqrt(2.0 / R);
    EXPECT_NEAR(s_first / R, r0, 4 * se);
    EXPECT_NEAR(s_last / R, r0, 4 * se);
    const double tv = sim.tail_variance().back();
    EXPECT_NEAR(s_tail / R, tv, 4 * tv * std::sqrt(2.0 / R));
}

TEST(SimulatePath, TailInterpolationReproducesCovariance) {
    // Cov(T_1, T_n) of the interpolated tail equals the closed form.
    const auto c = expand_filter(single_pole(0.8, 0.25), 4096);
    PathSimulator sim(c, 1024);
    const int R = 4000;
    double s11 = 0, s1n = 0;
    for (int i = 0; i < R; ++i) {
        const auto p = sim.simulate(23, std::uint64_t(i));
        s11 += p.tail[0] * p.tail[0];
        s1n += p.tail[0] * p.tail[1023];
    }
    const double v11 = c.tail_covariance(4096.0, 0.0);
    const double v1n = c.tail_covariance(4096.0, 1023.0);
    EXPECT_NEAR(s11 / R, v11, 4 * v11 * std::sqrt(2.0 / R));
    EXPECT_NEAR(s1n / R, v1n, 4 * v11 * std::sqrt(2.0 / R));
}
