#include "ckde/fft.hpp"
#include "ckde/quadrature.hpp"
#include "ckde/regression.hpp"
#include "ckde/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace ckde;

// ---------------------------------------------------------------- Philox
TEST(Philox, KnownAnswerVectors) {
    const auto a = philox4x32({0, 0, 0, 0}, {0, 0});
    EXPECT_EQ(a, (std::array<std::uint32_t, 4>{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
    const auto b = philox4x32({~0u, ~0u, ~0u, ~0u}, {~0u, ~0u});
    EXPECT_EQ(b, (std::array<std::uint32_t, 4>{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
    const auto c = philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0});
    EXPECT_EQ(c, (std::array<std::uint32_t, 4>{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(RandomStream, ReplayableAndSeedSensitive) {
    RandomStream a(42, 7), b(42, 7), c(43, 7), d(42, 8);
    for (int i = 0; i < 100; ++i) {
        const double x = a.normal();
        EXPECT_EQ(x, b.normal());
        EXPECT_NE(x, c.normal());
        EXPECT_NE(x, d.normal());
    }
}

TEST(RandomStream, NormalMoments) {
    RandomStream rs(1, 0);
    const int n = 400000;
    double s1 = 0, s2 = 0, s4 = 0;
    for (int i = 0; i < n; ++i) {
        const double z = rs.normal();
        s1 += z, s2 += z * z, s4 += z * z * z * z;
    }
    EXPECT_NEAR(s1 / n, 0.0, 4.0 / std::sqrt(n));
    EXPECT_NEAR(s2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
    EXPECT_NEAR(s4 / n, 3.0, 4.0 * std::sqrt(96.0 / n));
}

TEST(RandomStream, UniformInOpenInterval) {
    RandomStream rs(3, 3);
    double mn = 1, mx = 0;
    for (int i = 0; i < 100000; ++i) {
        const double u = rs.uniform();
        mn = std::min(mn, u), mx = std::max(mx, u);
    }
    EXPECT_GT(mn, 0.0);
    EXPECT_LT(mx, 1.0);
}

// ---------------------------------------------------------------- FFT
TEST(Fft, GoodSizeHasSmallFactors) {
    EXPECT_EQ(fft::good_size(1), 1u);
    EXPECT_EQ(fft::good_size(11), 12u);
    EXPECT_EQ(fft::good_size(1025), 1029u);
}

TEST(Fft, ConvolutionMatchesDirect) {
    RandomStream rs(5, 0);
    std::vector<double> a(300), b(517);
    for (double& v : a) v = rs.normal();
    for (double& v : b) v = rs.normal();
    const auto c = fft::convolve(a, b);
    ASSERT_EQ(c.size(), a.size() + b.size() - 1);
    for (std::size_t k = 0; k < c.size(); ++k) {
        double ref = 0;
        for (std::size_t i = 0; i < a.size(); ++i)
            if (k >= i && k - i < b.size()) ref += a[i] * b[k - i];
        EXPECT_NEAR(c[k], ref, 1e-11);
    }
    const auto t = fft::convolve(a, b, 10);
    ASSERT_EQ(t.size(), 10u);
    EXPECT_NEAR(t[9], c[9], 1e-12);
}

TEST(Fft, ComplexRoundTrip) {
    std::vector<fft::cplx> x(30);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = {std::sin(double(i)), std::cos(3.0 * double(i))};
    auto y = fft::dft(x, true);
    auto z = fft::dft(y, false);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(std::abs(z[i] / 30.0 - x[i]), 0.0, 1e-13);
}

// ---------------------------------------------------------------- quadrature
TEST(GaussLegendre, IntegratesPolynomialsExactly) {
    for (std::size_t n : {1u, 2u, 5u, 16u, 64u, 251u}) {
        const auto& q = gauss_legendre(n);
        for (std::size_t p = 0; p < 2 * n; p += 2) {
            double s = 0;
            for (std::size_t i = 0; i < n; ++i) s += q.weights[i] * std::pow(q.nodes[i], double(p));
            EXPECT_NEAR(s, 2.0 / double(p + 1), 1e-13) << "n=" << n << " p=" << p;
        }
    }
}

TEST(GaussLegendre, MappedInterval) {
    const auto q = gauss_legendre(40, 0.0, std::numbers::pi);
    double s = 0;
    for (std::size_t i = 0; i < q.nodes.size(); ++i) s += q.weights[i] * std::sin(q.nodes[i]);
    EXPECT_NEAR(s, 2.0, 1e-14);
}

// ---------------------------------------------------------------- regression
TEST(Regression, ExactLineAndEnvelope) {
    const auto f = ols({1, 2, 3, 4}, {3, 5, 7, 9});
    EXPECT_NEAR(f.slope, 2.0, 1e-14);
    EXPECT_NEAR(f.intercept, 1.0, 1e-14);
    std::vector<double> v(5000);
    for (std::size_t k = 1; k < v.size(); ++k) v[k] = std::pow(double(k), -0.7) * std::cos(double(k) * 0.9);
    EXPECT_NEAR(envelope_slope(v, 50, 4990).slope, -0.7, 0.01);
}
