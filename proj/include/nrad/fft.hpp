#pragma once

#include <cmath>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "nrad/common.hpp"

namespace nrad {

// Complex DFT, double precision. Radix-2 for powers of two, Bluestein
// otherwise. No global state; results are identical regardless of thread
// count or call order.
//
// Conventions:
//   forward:          X[k] = sum_n x[n] e^{-2*pi*i*k*n/N}
//   inverse_unscaled: x[n] = sum_k X[k] e^{+2*pi*i*k*n/N}   (no 1/N)
class Fft {
public:
    explicit Fft(std::size_t n) : n_(n) {
        if (n == 0) fail_invalid("Fft: size must be positive");
        if (is_pow2(n)) {
            twiddle_.resize(n / 2);
            for (std::size_t j = 0; j < n / 2; ++j) {
                const double a = -kTwoPi * static_cast<double>(j) / static_cast<double>(n);
                twiddle_[j] = {std::cos(a), std::sin(a)};
            }
        } else {
            init_bluestein();
        }
    }

    std::size_t size() const { return n_; }

    void forward(std::span<cplx> data) const {
        if (data.size() != n_) fail_invalid("Fft::forward: size mismatch");
        if (twiddle_.empty()) {
            bluestein(data);
        } else {
            radix2(data);
        }
    }

    void inverse_unscaled(std::span<cplx> data) const {
        for (auto& v : data) v = std::conj(v);
        forward(data);
        for (auto& v : data) v = std::conj(v);
    }

    void inverse(std::span<cplx> data) const {
        inverse_unscaled(data);
        const double s = 1.0 / static_cast<double>(n_);
        for (auto& v : data) v *= s;
    }

    static bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

private:
    void radix2(std::span<cplx> a) const {
        const std::size_t n = n_;
        for (std::size_t i = 1, j = 0; i < n; ++i) {
            std::size_t bit = n >> 1;
            for (; j & bit; bit >>= 1) j ^= bit;
            j ^= bit;
            if (i < j) std::swap(a[i], a[j]);
        }
        for (std::size_t len = 2; len <= n; len <<= 1) {
            const std::size_t stride = n / len;
            for (std::size_t i = 0; i < n; i += len) {
                for (std::size_t k = 0; k < len / 2; ++k) {
                    const cplx w = twiddle_[k * stride];
                    const cplx u = a[i + k];
                    const cplx v = a[i + k + len / 2] * w;
                    a[i + k] = u + v;
                    a[i + k + len / 2] = u - v;
                }
            }
        }
    }

    void init_bluestein() {
        conv_len_ = 1;
        while (conv_len_ < 2 * n_ - 1) conv_len_ <<= 1;
        chirp_.resize(n_);
        // n^2 mod 2n keeps the chirp argument small and exact in uint64.
        for (std::size_t k = 0; k < n_; ++k) {
            const std::uint64_t sq = (static_cast<std::uint64_t>(k) * k) % (2 * n_);
            const double a = -kPi * static_cast<double>(sq) / static_cast<double>(n_);
            chirp_[k] = {std::cos(a), std::sin(a)};
        }
        sub_ = std::make_shared<Fft>(conv_len_);
        kernel_fft_.assign(conv_len_, cplx{0.0, 0.0});
        kernel_fft_[0] = std::conj(chirp_[0]);
        for (std::size_t k = 1; k < n_; ++k) {
            kernel_fft_[k] = std::conj(chirp_[k]);
            kernel_fft_[conv_len_ - k] = std::conj(chirp_[k]);
        }
        sub_->forward(kernel_fft_);
    }

    void bluestein(std::span<cplx> data) const {
        std::vector<cplx> work(conv_len_, cplx{0.0, 0.0});
        for (std::size_t k = 0; k < n_; ++k) work[k] = data[k] * chirp_[k];
        sub_->forward(work);
        for (std::size_t k = 0; k < conv_len_; ++k) work[k] *= kernel_fft_[k];
        sub_->inverse(work);
        for (std::size_t k = 0; k < n_; ++k) data[k] = work[k] * chirp_[k];
    }

    std::size_t n_;
    std::vector<cplx> twiddle_;
    // Bluestein state
    std::size_t conv_len_ = 0;
    std::vector<cplx> chirp_;
    std::vector<cplx> kernel_fft_;
    std::shared_ptr<Fft> sub_;
};

}  // namespace nrad
