#pragma once

#include <complex>
#include <span>
#include <vector>

namespace cider {

/// In-place iterative radix-2 FFT (forward, unnormalized). Size must be a
/// power of two. Twiddles are cached per plan so repeated transforms of the
/// same size stay cheap.
class FftPlan {
public:
    explicit FftPlan(std::size_t n);

    std::size_t size() const { return n_; }
    void forward(std::span<std::complex<double>> data) const;

    /// Magnitudes of bins 0..n/2 of a real frame.
    void real_magnitude(std::span<const double> frame, std::span<double> magnitude,
                        std::vector<std::complex<double>>& scratch) const;

private:
    std::size_t n_;
    std::vector<std::size_t> bitrev_;
    std::vector<std::complex<double>> twiddle_;
};

bool is_power_of_two(std::size_t n);

}  // namespace cider
