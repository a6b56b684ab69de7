#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace fracpeak {

// Real <-> half-complex transform of fixed length. Plans are made once
// (under a global lock, FFTW's planner is not reentrant); execution uses the
// new-array interface with call-local buffers so one object can serve many
// threads.
class RealFft {
public:
    explicit RealFft(std::size_t n);
    ~RealFft();
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;

    std::size_t size() const { return n_; }
    std::size_t spectrum_size() const { return n_ / 2 + 1; }

    std::vector<std::complex<double>> forward(std::span<const double> in) const;
    // normalized: inverse(forward(u)) == u
    std::vector<double> inverse(std::span<const std::complex<double>> in) const;

private:
    std::size_t n_;
    void* fwd_ = nullptr;
    void* bwd_ = nullptr;
};

// angular wavenumbers of the rfft bins for spacing h
std::vector<double> rfft_wavenumbers(std::size_t n, double h);

// y_i = sum_j k_{|i-j|} f_j for a symmetric Toeplitz kernel given by its first
// column (k.size() >= f.size()); zero-padded FFT convolution
std::vector<double> toeplitz_apply(std::span<const double> k, std::span<const double> f);

} // namespace fracpeak
