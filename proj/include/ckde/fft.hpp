#pragma once
/// \file fft.hpp
/// Thin FFTW wrapper: cached plans, real linear convolution, complex DFT.

#include <fftw3.h>

#include <algorithm>
#include <complex>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <vector>

namespace ckde::fft {

using cplx = std::complex<double>;

/// Smallest size >= n whose only prime factors are 2, 3, 5, 7.
inline std::size_t good_size(std::size_t n) {
    if (n <= 1) return 1;
    for (std::size_t m = n;; ++m) {
        std::size_t r = m;
        for (std::size_t p : {2u, 3u, 5u, 7u})
            while (r % p == 0) r /= p;
        if (r == 1) return m;
    }
}

namespace detail {

template <class T>
struct FftwDeleter {
    void operator()(T* p) const { fftw_free(p); }
};
template <class T>
using fftw_ptr = std::unique_ptr<T, FftwDeleter<T>>;

struct PlanSet {
    fftw_plan r2c = nullptr;
    fftw_plan c2r = nullptr;
    fftw_plan c2c_fwd = nullptr;
    fftw_plan c2c_bwd = nullptr;
};

/// Plans are created once per size under a lock (FFTW's planner is not
/// thread-safe) and executed through the new-array interface, which is.
class PlanCache {
public:
    static PlanCache& instance() {
        static PlanCache cache;
        return cache;
    }

    const PlanSet& real(std::size_t n) {
        std::lock_guard lock(mu_);
        PlanSet& ps = plans_[n];
        if (!ps.r2c) {
            fftw_ptr<double> in(fftw_alloc_real(n));
            fftw_ptr<fftw_complex> out(fftw_alloc_complex(n / 2 + 1));
            ps.r2c = fftw_plan_dft_r2c_1d(int(n), in.get(), out.get(), FFTW_ESTIMATE);
            ps.c2r = fftw_plan_dft_c2r_1d(int(n), out.get(), in.get(), FFTW_ESTIMATE);
        }
        return ps;
    }

    const PlanSet& complex(std::size_t n) {
        std::lock_guard lock(mu_);
        PlanSet& ps = plans_[n];
        if (!ps.c2c_fwd) {
            fftw_ptr<fftw_complex> a(fftw_alloc_complex(n)), b(fftw_alloc_complex(n));
            ps.c2c_fwd = fftw_plan_dft_1d(int(n), a.get(), b.get(), FFTW_FORWARD, FFTW_ESTIMATE);
            ps.c2c_bwd = fftw_plan_dft_1d(int(n), a.get(), b.get(), FFTW_BACKWARD, FFTW_ESTIMATE);
        }
        return ps;
    }

private:
    std::mutex mu_;
    std::map<std::size_t, PlanSet> plans_;
};

}  // namespace detail

/// Real forward transform of `x` zero-padded to length n; returns n/2+1 bins.
inline std::vector<cplx> rfft(std::span<const double> x, std::size_t n) {
    if (x.size() > n) throw std::invalid_argument("rfft: input longer than transform size");
    const auto& ps = detail::PlanCache::instance().real(n);
    detail::fftw_ptr<double> in(fftw_alloc_real(n));
    detail::fftw_ptr<fftw_complex> out(fftw_alloc_complex(n / 2 + 1));
    std::copy(x.begin(), x.end(), in.get());
    std::fill(in.get() + x.size(), in.get() + n, 0.0);
    fftw_execute_dft_r2c(ps.r2c, in.get(), out.get());
    std::vector<cplx> res(n / 2 + 1);
    std::memcpy(static_cast<void*>(res.data()), out.get(), res.size() * sizeof(cplx));
    return res;
}

/// Inverse of rfft including the 1/n factor.
inline std::vector<double> irfft(std::span<const cplx> spec, std::size_t n) {
    if (spec.size() != n / 2 + 1) throw std::invalid_argument("irfft: spectrum size mismatch");
    const auto& ps = detail::PlanCache::instance().real(n);
    detail::fftw_ptr<fftw_complex> in(fftw_alloc_complex(n / 2 + 1));
    detail::fftw_ptr<double> out(fftw_alloc_real(n));
    std::memcpy(in.get(), spec.data(), spec.size() * sizeof(cplx));
    fftw_execute_dft_c2r(ps.c2r, in.get(), out.get());
    std::vector<double> res(out.get(), out.get() + n);
    const double s = 1.0 / double(n);
    for (double& v : res) v *= s;
    return res;
}

/// Unnormalized complex DFT (sign -1 forward, +1 backward).
inline std::vector<cplx> dft(std::span<const cplx> x, bool forward = true) {
    const std::size_t n = x.size();
    const auto& ps = detail::PlanCache::instance().complex(n);
    detail::fftw_ptr<fftw_complex> in(fftw_alloc_complex(n)), out(fftw_alloc_complex(n));
    std::memcpy(in.get(), x.data(), n * sizeof(cplx));
    fftw_execute_dft(forward ? ps.c2c_fwd : ps.c2c_bwd, in.get(), out.get());
    std::vector<cplx> res(n);
    std::memcpy(static_cast<void*>(res.data()), out.get(), n * sizeof(cplx));
    return res;
}

/// Full linear convolution (length a+b-1), truncated to `keep` entries if nonzero.
inline std::vector<double> convolve(std::span<const double> a, std::span<const double> b,
                                    std::size_t keep = 0) {
    if (a.empty() || b.empty()) return {};
    const std::size_t full = a.size() + b.size() - 1;
    if (keep == 0 || keep > full) keep = full;
    if (std::min(a.size(), b.size()) <= 32) {
        std::vector<double> out(keep, 0.0);
        const auto& s = a.size() <= b.size() ? a : b;
        const auto& l = a.size() <= b.size() ? b : a;
        for (std::size_t i = 0; i < s.size(); ++i)
            for (std::size_t j = 0; j < l.size() && i + j < keep; ++j) out[i + j] += s[i] * l[j];
        return out;
    }
    const std::size_t n = good_size(full);
    auto fa = rfft(a, n);
    const auto fb = rfft(b, n);
    for (std::size_t i = 0; i < fa.size(); ++i) fa[i] *= fb[i];
    auto out = irfft(fa, n);
    out.resize(keep);
    return out;
}

}  // namespace ckde::fft
