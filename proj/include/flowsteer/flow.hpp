// SPDX-License-Identifier: Apache-2.0
#pragma once

// Rectified-flow conventions used throughout the library:
//   t = 0 is the clean end, t = 1 the noise end (N(0, I));
//   x_t = (1 - t) x_0 + t x_1, target velocity x_1 - x_0.
// Generation integrates from t = 1 down to t = 0.

#include <cstddef>
#include <vector>

#include "flowsteer/tensor.hpp"

namespace flowsteer {

/// Strictly increasing times t_0 = 0 < ... < t_N = 1.
class TimeGrid {
public:
    static TimeGrid uniform(std::size_t n_steps);
    static TimeGrid custom(std::vector<double> times);

    std::size_t steps() const noexcept { return times_.size() - 1; }
    double operator[](std::size_t i) const noexcept { return times_[i]; }
    const std::vector<double>& times() const noexcept { return times_; }

private:
    explicit TimeGrid(std::vector<double> times) : times_(std::move(times)) {}
    std::vector<double> times_;
};

/// Anything mapping (state, time) to a velocity of the same shape.
class VelocityField {
public:
    virtual ~VelocityField() = default;
    virtual Tensor velocity(const Tensor& x, double t) const = 0;
};

/// Isotropic Gaussian mixture sum_k w_k N(mu_k, sigma_k^2 I) standing in for
/// the clean data distribution.
struct GmmTarget {
    std::vector<double> weights;
    std::vector<Tensor> means;
    std::vector<double> stdevs;

    void validate() const;
    const Dims& dims() const { return means.front().dims(); }
    std::size_t components() const noexcept { return weights.size(); }

    Tensor mixture_mean() const;
    /// Per-element variance of the mixture.
    Tensor mixture_variance() const;
};

/// Per-component conditional expectations at (x, t).
struct GmmPosterior {
    std::vector<double> responsibilities;
    std::vector<Tensor> clean_means;  // E[x_0 | x_t = x, k]
    std::vector<Tensor> noise_means;  // E[x_1 | x_t = x, k]
};

GmmPosterior gmm_posterior(const Tensor& x, double t, const GmmTarget& target);

/// Exact marginal velocity E[x_1 - x_0 | x_t = x] of the mixture.
Tensor gmm_velocity(const Tensor& x, double t, const GmmTarget& target);

class GmmVelocityField final : public VelocityField {
public:
    /// Times below `t_floor` are evaluated at `t_floor`, which keeps the field
    /// finite at t = 0 for zero-stdev components (default: no floor).
    explicit GmmVelocityField(GmmTarget target, double t_floor = 0.0);

    Tensor velocity(const Tensor& x, double t) const override;
    const GmmTarget& target() const noexcept { return target_; }
    double t_floor() const noexcept { return t_floor_; }

private:
    GmmTarget target_;
    double t_floor_;
};

Tensor interpolate(const Tensor& x0, const Tensor& x1, double t);

/// Euler integration from t = 1 to t = 0. Returns [x_{t_N}, ..., x_{t_0}].
std::vector<Tensor> euler_generate(const VelocityField& v, const Tensor& x_start, const TimeGrid& grid);

/// Euler integration from t = 0 to t = 1. Returns [x_{t_0}, ..., x_{t_N}].
std::vector<Tensor> euler_invert(const VelocityField& v, const Tensor& x_clean, const TimeGrid& grid);

/// One Euler step from `t_from` to `t_to`, throwing NumericalError(step) on a
/// non-finite velocity. The generate and invert helpers number steps by
/// iterations, starting at 1.
Tensor euler_step(const VelocityField& v, const Tensor& x, double t_from, double t_to, std::ptrdiff_t step);

inline constexpr double kDefaultDenoiseEps = 1e-6;

/// x_{0|t} = x_t / ((1-t)+eps) - t * eta / ((1-t)+eps).
Tensor denoise_estimate(const Tensor& x_t, double t, const Tensor& eta, double eps = kDefaultDenoiseEps);

/// x_t = (1-t) x0_bar + t * eta.
Tensor project_back(const Tensor& x0_bar, double t, const Tensor& eta);

}  // namespace flowsteer
