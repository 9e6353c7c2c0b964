// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "flowsteer/rng.hpp"
#include "flowsteer/tensor.hpp"

namespace flowsteer {

enum class OperatorKind { Colorization, Blur, SuperRes4, Denoise, Matrix };

std::string to_string(OperatorKind kind);
OperatorKind operator_kind_from_string(const std::string& name);

/// Normalized, truncated 2-D Gaussian of odd `size`, peak at the center.
Tensor make_gaussian_kernel(std::size_t size, double sigma_b);

/// min(61, 2*ceil(3*sigma_b)+1).
std::size_t default_kernel_size(double sigma_b);

namespace detail {
struct SpectralPlan;
}

/// A linear degradation A with an associated pseudo-inverse A^+.
///
/// Images are {channels, height, width}. Blur uses circular boundaries and
/// works per channel in the frequency domain. Matrix is a dense operator on
/// flattened tensors with a caller-supplied pseudo-inverse, meant for
/// low-dimensional toy problems.
///
/// Instances are immutable after construction and may be shared between
/// threads.
class DegradationOperator {
public:
    static DegradationOperator colorization(std::size_t height, std::size_t width);
    static DegradationOperator blur(std::size_t channels, std::size_t height, std::size_t width, Tensor kernel,
                                    double wiener_lambda);
    static DegradationOperator super_res4(std::size_t channels, std::size_t height, std::size_t width);
    static DegradationOperator denoise(Dims dims, double noise_sigma);
    /// `forward` is rows x cols acting on vectors of length cols (= element_count(input_dims));
    /// `pinv` is cols x rows.
    static DegradationOperator matrix(Dims input_dims, Dims output_dims, std::vector<double> forward,
                                      std::vector<double> pinv);

    OperatorKind kind() const noexcept { return kind_; }
    const Dims& input_dims() const noexcept { return input_dims_; }
    const Dims& output_dims() const noexcept { return output_dims_; }

    double noise_sigma() const noexcept { return noise_sigma_; }
    double wiener_lambda() const noexcept { return wiener_lambda_; }
    const Tensor& kernel() const noexcept { return kernel_; }

    /// True when A A^+ A == A holds exactly (every kind except Blur).
    bool has_exact_pinv() const noexcept { return kind_ != OperatorKind::Blur; }

    Tensor apply(const Tensor& x) const;
    Tensor apply_pinv(const Tensor& y) const;

    /// Frequency response of the blur kernel (height*width, row-major). Blur only.
    const std::vector<std::complex<double>>& transfer_function() const;

private:
    DegradationOperator() = default;

    Tensor blur_filter(const Tensor& x, bool wiener) const;
    Tensor matrix_apply(const std::vector<double>& mat, const Tensor& x, const Dims& out_dims) const;

    OperatorKind kind_ = OperatorKind::Denoise;
    Dims input_dims_;
    Dims output_dims_;
    double noise_sigma_ = 0.0;
    double wiener_lambda_ = 0.0;
    Tensor kernel_;
    std::shared_ptr<const detail::SpectralPlan> plan_;
    std::shared_ptr<const std::vector<double>> forward_;
    std::shared_ptr<const std::vector<double>> pinv_;
};

struct FidelityUpdateConfig {
    double lambda_strength = 1.0;
    double injected_noise_sigma = 0.0;

    void validate() const;
};

/// A^+ y + lambda (x - A^+ A x) + xi, with xi ~ N(0, eta^2 I) drawn from `rng`
/// only when eta > 0.
Tensor fidelity_update(const Tensor& x, const Tensor& y, const DegradationOperator& op,
                       const FidelityUpdateConfig& cfg, Rng& rng);

}  // namespace flowsteer
