// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace flowsteer {

/// Per-step conditioning strengths over an N-step reconstruction.
///
/// Steps are numbered by iterations elapsed since the start of
/// reconstruction: step 1 is the first (noisiest, t near 1) Euler step and
/// step N the last (ending at t = 0). A "0.5N" start therefore means the
/// window opens half-way through sampling.
class LambdaSchedule {
public:
    LambdaSchedule() = default;
    explicit LambdaSchedule(std::vector<double> values);

    static LambdaSchedule zeros(std::size_t n) { return LambdaSchedule(std::vector<double>(n, 0.0)); }
    static LambdaSchedule constant(std::size_t n, double h) { return LambdaSchedule(std::vector<double>(n, h)); }

    std::size_t steps() const noexcept { return values_.size(); }
    /// Strength at 1-based step `step`.
    double at_step(std::size_t step) const { return values_.at(step - 1); }
    const std::vector<double>& values() const noexcept { return values_; }
    std::size_t nonzero_count() const noexcept;

    bool operator==(const LambdaSchedule&) const = default;

private:
    std::vector<double> values_;
};

/// Step index for a fraction of N, e.g. 0.5 -> 0.5N. Rounds down (with a
/// 1e-9 allowance for representation error), so 0.95 * 30 -> 28.
std::size_t fraction_to_step(double fraction, std::size_t n);

/// lambda_i = h for i_start <= i <= i_stop, else 0.
LambdaSchedule rect_schedule(std::size_t n, std::size_t i_start, std::size_t i_stop, double h);

/// h1 on [i_start, i_step), h2 on [i_step, i_end]; indices clamp into range.
/// The last `final_pad` steps are zeroed; if that leaves nothing, the step
/// just before the pad gets 1; otherwise values are divided by max(1, peak).
LambdaSchedule two_step_schedule(std::size_t n, long i_start, long i_step, long i_end, double h1, double h2,
                                 std::size_t final_pad);

/// Named presets: "general" (0.5N, 0.9N, 1) and the per-task two-step rows
/// "colorization", "superres", "deblur", "denoise"; plus "none" (all zero)
/// and "always" (all one).
LambdaSchedule preset_schedule(const std::string& name, std::size_t n);
std::vector<std::string> preset_names();

/// Linear-beta DDPM schedule. Index t runs 1..T; alpha_bar_0 = 1.
class DiffusionSchedule {
public:
    DiffusionSchedule(std::vector<double> betas, double sigma_y);

    std::size_t steps() const noexcept { return betas_.size(); }
    double beta(std::size_t t) const { return betas_.at(t - 1); }
    double alpha(std::size_t t) const { return 1.0 - beta(t); }
    double alpha_bar(std::size_t t) const { return t == 0 ? 1.0 : alpha_bars_.at(t - 1); }
    /// Posterior standard deviation sqrt(beta_t (1 - abar_{t-1}) / (1 - abar_t)).
    double sigma(std::size_t t) const { return sigmas_.at(t - 1); }
    double sigma_y() const noexcept { return sigma_y_; }

private:
    std::vector<double> betas_;
    std::vector<double> alpha_bars_;
    std::vector<double> sigmas_;
    double sigma_y_;
};

DiffusionSchedule ddpm_schedule(std::size_t steps, double beta_first, double beta_last, double sigma_y);

/// The 1e-4..0.02 linear range of a 1000-step DDPM, rescaled by 1000 / T so
/// shorter schedules still reach near-pure noise.
struct BetaRange {
    double first;
    double last;
};
BetaRange default_beta_range(std::size_t steps);

/// Coefficient of x0 in the DDPM posterior mean: sqrt(abar_{t-1}) beta_t / (1 - abar_t).
double a_t_coeff(const DiffusionSchedule& s, std::size_t t);
/// Coefficient of x_t in the DDPM posterior mean: sqrt(alpha_t) (1 - abar_{t-1}) / (1 - abar_t).
double x_t_coeff(const DiffusionSchedule& s, std::size_t t);

struct NoiseRobustStep {
    double a_t = 0.0;
    double lambda_t = 0.0;
    double gamma_t = 0.0;
};

/// lambda_t = 1 if sigma_t >= a_t sigma_y, else sigma_t / (a_t sigma_y);
/// gamma_t = sqrt(max(0, sigma_t^2 - a_t^2 lambda_t^2 sigma_y^2)).
NoiseRobustStep adaptive_lambda_gamma(double sigma_t, double a_t, double sigma_y);

}  // namespace flowsteer
