#include "fracpeak/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <mutex>
#include <numbers>

namespace fracpeak {

namespace {
std::mutex& planner_lock() {
    static std::mutex m;
    return m;
}

struct FftwBuf {
    explicit FftwBuf(std::size_t bytes) : p(fftw_malloc(bytes)) {}
    ~FftwBuf() { fftw_free(p); }
    void* p;
};
} // namespace

RealFft::RealFft(std::size_t n) : n_(n) {
    FftwBuf in(sizeof(double) * n), out(sizeof(fftw_complex) * (n / 2 + 1));
    std::lock_guard lk(planner_lock());
    fwd_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), static_cast<double*>(in.p),
                                static_cast<fftw_complex*>(out.p), FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_c2r_1d(static_cast<int>(n), static_cast<fftw_complex*>(out.p),
                                static_cast<double*>(in.p), FFTW_ESTIMATE);
}

RealFft::~RealFft() {
    std::lock_guard lk(planner_lock());
    if (fwd_) fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
    if (bwd_) fftw_destroy_plan(static_cast<fftw_plan>(bwd_));
}

std::vector<std::complex<double>> RealFft::forward(std::span<const double> in) const {
    FftwBuf a(sizeof(double) * n_), b(sizeof(fftw_complex) * spectrum_size());
    std::memcpy(a.p, in.data(), sizeof(double) * n_);
    fftw_execute_dft_r2c(static_cast<fftw_plan>(fwd_), static_cast<double*>(a.p),
                         static_cast<fftw_complex*>(b.p));
    std::vector<std::complex<double>> out(spectrum_size());
    std::memcpy(out.data(), b.p, sizeof(fftw_complex) * spectrum_size());
    return out;
}

std::vector<double> RealFft::inverse(std::span<const std::complex<double>> in) const {
    FftwBuf a(sizeof(fftw_complex) * spectrum_size()), b(sizeof(double) * n_);
    std::memcpy(a.p, in.data(), sizeof(fftw_complex) * spectrum_size());
    fftw_execute_dft_c2r(static_cast<fftw_plan>(bwd_), static_cast<fftw_complex*>(a.p),
                         static_cast<double*>(b.p));
    std::vector<double> out(n_);
    std::memcpy(out.data(), b.p, sizeof(double) * n_);
    const double inv = 1.0 / static_cast<double>(n_);
    for (auto& v : out) v *= inv;
    return out;
}

std::vector<double> rfft_wavenumbers(std::size_t n, double h) {
    std::vector<double> k(n / 2 + 1);
    const double base = 2.0 * std::numbers::pi / (static_cast<double>(n) * h);
    for (std::size_t j = 0; j < k.size(); ++j) k[j] = base * static_cast<double>(j);
    return k;
}

std::vector<double> toeplitz_apply(std::span<const double> k, std::span<const double> f) {
    const std::size_t n = f.size();
    const std::size_t m = 2 * n;
    // circulant embedding of the symmetric kernel
    std::vector<double> c(m, 0.0), g(m, 0.0);
    for (std::size_t j = 0; j < n; ++j) c[j] = k[j];
    for (std::size_t j = 1; j < n; ++j) c[m - j] = k[j];
    std::copy(f.begin(), f.end(), g.begin());
    RealFft fft(m);
    auto C = fft.forward(c);
    auto G = fft.forward(g);
    for (std::size_t j = 0; j < C.size(); ++j) G[j] *= C[j].real();
    auto y = fft.inverse(G);
    y.resize(n);
    return y;
}

} // namespace fracpeak
