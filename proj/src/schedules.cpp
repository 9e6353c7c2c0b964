// SPDX-License-Identifier: Apache-2.0
#include "flowsteer/schedules.hpp"

#include <algorithm>
#include <cmath>

#include "flowsteer/errors.hpp"

namespace flowsteer {

LambdaSchedule::LambdaSchedule(std::vector<double> values) : values_(std::move(values)) {
    for (double v : values_) {
        if (!(v >= 0.0 && v <= 1.0)) throw ParameterError("lambda schedule values must lie in [0, 1]");
    }
}

std::size_t LambdaSchedule::nonzero_count() const noexcept {
    return static_cast<std::size_t>(std::count_if(values_.begin(), values_.end(), [](double v) { return v != 0.0; }));
}

std::size_t fraction_to_step(double fraction, std::size_t n) {
    if (!(fraction >= 0.0)) throw ParameterError("schedule fraction must be nonnegative");
    return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

LambdaSchedule rect_schedule(std::size_t n, std::size_t i_start, std::size_t i_stop, double h) {
    if (n == 0) throw ParameterError("schedule needs at least one step");
    if (i_start < 1 || i_start > i_stop || i_stop > n) {
        throw ParameterError("rect schedule needs 1 <= i_start <= i_stop <= N");
    }
    if (!(h > 0.0 && h <= 1.0)) throw ParameterError("rect schedule height must lie in (0, 1]");
    std::vector<double> values(n, 0.0);
    for (std::size_t i = i_start; i <= i_stop; ++i) values[i - 1] = h;
    return LambdaSchedule(std::move(values));
}

LambdaSchedule two_step_schedule(std::size_t n, long i_start, long i_step, long i_end, double h1, double h2,
                                 std::size_t final_pad) {
    std::vector<double> lam(n, 0.0);
    if (n == 0) return LambdaSchedule(std::move(lam));
    const long big_n = static_cast<long>(n);
    // Zero-based half-open bounds: [lo, mid) gets h1, [mid, hi) gets h2.
    long a = i_start - 1;
    long b = i_step - 1;
    long c = i_end;
    long lo = std::min(a, b);
    long mid = std::max(a, b);
    long hi = std::max(mid, c);
    mid = std::min(mid, c);
    lo = std::clamp(lo, 0L, big_n);
    mid = std::clamp(mid, 0L, big_n);
    hi = std::clamp(hi, 0L, big_n);
    for (long i = lo; i < mid; ++i) lam[static_cast<std::size_t>(i)] = h1;
    for (long i = mid; i < hi; ++i) lam[static_cast<std::size_t>(i)] = h2;

    if (final_pad > 0 && final_pad < n) std::fill(lam.end() - static_cast<long>(final_pad), lam.end(), 0.0);

    const double peak = *std::max_element(lam.begin(), lam.end());
    if (peak <= 0.0 && big_n - static_cast<long>(final_pad) - 1 >= 0) {
        lam[n - final_pad - 1] = 1.0;
    } else {
        const double norm = std::max(1.0, peak);
        for (auto& v : lam) v /= norm;
    }
    return LambdaSchedule(std::move(lam));
}

namespace {

struct TwoStepPreset {
    const char* name;
    double start, step, end, h1, h2;
};

// Per-task two-step rows; final padding of one step.
constexpr TwoStepPreset kTwoStepPresets[] = {
    {"colorization", 0.40, 0.50, 0.95, 1.0, 0.3},
    {"superres", 0.50, 0.70, 0.85, 1.0, 0.5},
    {"deblur", 0.70, 0.80, 0.90, 1.0, 0.3},
    {"denoise", 0.50, 0.75, 0.95, 1.0, 0.5},
};

constexpr std::size_t kPresetFinalPad = 1;

}  // namespace

LambdaSchedule preset_schedule(const std::string& name, std::size_t n) {
    if (n == 0) throw ParameterError("schedule needs at least one step");
    if (name == "general") {
        const std::size_t start = std::max<std::size_t>(1, fraction_to_step(0.5, n));
        const std::size_t stop = std::max(start, fraction_to_step(0.9, n));
        return rect_schedule(n, start, stop, 1.0);
    }
    if (name == "none") return LambdaSchedule::zeros(n);
    if (name == "always") return LambdaSchedule::constant(n, 1.0);
    for (const auto& p : kTwoStepPresets) {
        if (name == p.name) {
            return two_step_schedule(n, static_cast<long>(fraction_to_step(p.start, n)),
                                     static_cast<long>(fraction_to_step(p.step, n)),
                                     static_cast<long>(fraction_to_step(p.end, n)), p.h1, p.h2, kPresetFinalPad);
        }
    }
    throw ConfigError("unknown schedule preset '" + name + "'");
}

std::vector<std::string> preset_names() {
    std::vector<std::string> names = {"general", "none", "always"};
    for (const auto& p : kTwoStepPresets) names.emplace_back(p.name);
    return names;
}

DiffusionSchedule::DiffusionSchedule(std::vector<double> betas, double sigma_y)
    : betas_(std::move(betas)), sigma_y_(sigma_y) {
    if (betas_.size() < 2) throw ParameterError("diffusion schedule needs T >= 2");
    if (sigma_y_ < 0.0) throw ParameterError("measurement sigma must be nonnegative");
    double abar = 1.0;
    for (double b : betas_) {
        if (!(b > 0.0 && b < 1.0)) throw ParameterError("betas must lie in (0, 1)");
        const double abar_prev = abar;
        abar *= 1.0 - b;
        alpha_bars_.push_back(abar);
        sigmas_.push_back(std::sqrt(b * (1.0 - abar_prev) / (1.0 - abar)));
    }
}

DiffusionSchedule ddpm_schedule(std::size_t steps, double beta_first, double beta_last, double sigma_y) {
    if (steps < 2) throw ParameterError("diffusion schedule needs T >= 2");
    if (!(beta_first > 0.0 && beta_first <= beta_last && beta_last < 1.0)) {
        throw ParameterError("need 0 < beta_first <= beta_last < 1");
    }
    std::vector<double> betas(steps);
    for (std::size_t i = 0; i < steps; ++i) {
        const double f = static_cast<double>(i) / static_cast<double>(steps - 1);
        betas[i] = beta_first + f * (beta_last - beta_first);
    }
    return DiffusionSchedule(std::move(betas), sigma_y);
}

BetaRange default_beta_range(std::size_t steps) {
    const double scale = 1000.0 / static_cast<double>(steps);
    return {1e-4 * scale, std::min(0.02 * scale, 0.999)};
}

double a_t_coeff(const DiffusionSchedule& s, std::size_t t) {
    return std::sqrt(s.alpha_bar(t - 1)) * s.beta(t) / (1.0 - s.alpha_bar(t));
}

double x_t_coeff(const DiffusionSchedule& s, std::size_t t) {
    return std::sqrt(s.alpha(t)) * (1.0 - s.alpha_bar(t - 1)) / (1.0 - s.alpha_bar(t));
}

NoiseRobustStep adaptive_lambda_gamma(double sigma_t, double a_t, double sigma_y) {
    if (sigma_t < 0.0 || a_t < 0.0 || sigma_y < 0.0) throw ParameterError("noise-robust inputs must be nonnegative");
    NoiseRobustStep step;
    step.a_t = a_t;
    const double noise = a_t * sigma_y;
    if (sigma_t < noise) {
        // The measurement noise alone already exceeds the step's budget.
        step.lambda_t = sigma_t / noise;
        step.gamma_t = 0.0;
        return step;
    }
    step.lambda_t = 1.0;
    step.gamma_t = std::sqrt(std::max(0.0, sigma_t * sigma_t - noise * noise));
    return step;
}

}  // namespace flowsteer
