// SPDX-License-Identifier: Apache-2.0
#include "flowsteer/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "flowsteer/errors.hpp"

namespace flowsteer {

TimeGrid TimeGrid::uniform(std::size_t n_steps) {
    if (n_steps == 0) throw ParameterError("time grid needs at least one step");
    std::vector<double> times(n_steps + 1);
    for (std::size_t i = 0; i <= n_steps; ++i) times[i] = static_cast<double>(i) / static_cast<double>(n_steps);
    times.front() = 0.0;
    times.back() = 1.0;
    return TimeGrid(std::move(times));
}

TimeGrid TimeGrid::custom(std::vector<double> times) {
    if (times.size() < 2) throw ParameterError("time grid needs at least one step");
    if (times.front() != 0.0 || times.back() != 1.0) throw ParameterError("time grid must start at 0 and end at 1");
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (!(times[i] > times[i - 1])) throw ParameterError("time grid must be strictly increasing");
    }
    return TimeGrid(std::move(times));
}

void GmmTarget::validate() const {
    if (weights.empty()) throw ParameterError("gmm needs at least one component");
    if (weights.size() != means.size() || weights.size() != stdevs.size()) {
        throw ParameterError("gmm weights, means and stdevs must have equal length");
    }
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw ParameterError("gmm weights must be nonnegative");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ParameterError("gmm weights must sum to 1");
    for (double s : stdevs) {
        if (!(s >= 0.0)) throw ParameterError("gmm stdevs must be nonnegative");
    }
    for (const auto& m : means) {
        if (m.dims() != means.front().dims()) throw ShapeError("gmm means must share dims");
    }
}

Tensor GmmTarget::mixture_mean() const {
    Tensor out(dims());
    for (std::size_t k = 0; k < components(); ++k)
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += weights[k] * means[k][i];
    return out;
}

Tensor GmmTarget::mixture_variance() const {
    const Tensor mu = mixture_mean();
    Tensor out(dims());
    for (std::size_t k = 0; k < components(); ++k)
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] += weights[k] * (stdevs[k] * stdevs[k] + means[k][i] * means[k][i]);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= mu[i] * mu[i];
    return out;
}

GmmPosterior gmm_posterior(const Tensor& x, double t, const GmmTarget& target) {
    target.validate();
    require_dims(x, target.dims(), "gmm_velocity");
    if (!(t >= 0.0 && t <= 1.0)) throw ParameterError("gmm_velocity: t must lie in [0, 1]");
    const std::size_t kc = target.components();
    const double d = static_cast<double>(x.size());
    const double keep = 1.0 - t;

    GmmPosterior post;
    post.responsibilities.assign(kc, 0.0);
    post.clean_means.reserve(kc);
    post.noise_means.reserve(kc);
    std::vector<double> log_r(kc, -std::numeric_limits<double>::infinity());

    for (std::size_t k = 0; k < kc; ++k) {
        const double sigma = target.stdevs[k];
        const double s2 = keep * keep * sigma * sigma + t * t;
        if (!(s2 > 0.0)) throw NumericalError("gmm_velocity: singular component at t = 0 with zero stdev");
        const Tensor& mu = target.means[k];
        Tensor resid(x.dims());
        double sq = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            resid[i] = x[i] - keep * mu[i];
            sq += resid[i] * resid[i];
        }
        if (target.weights[k] > 0.0) {
            log_r[k] = std::log(target.weights[k]) - 0.5 * d * std::log(2.0 * std::numbers::pi * s2) - 0.5 * sq / s2;
        }
        const double clean_gain = keep * sigma * sigma / s2;
        const double noise_gain = t / s2;
        Tensor clean(x.dims());
        Tensor noise(x.dims());
        for (std::size_t i = 0; i < x.size(); ++i) {
            clean[i] = mu[i] + clean_gain * resid[i];
            noise[i] = noise_gain * resid[i];
        }
        post.clean_means.push_back(std::move(clean));
        post.noise_means.push_back(std::move(noise));
    }

    const double peak = *std::max_element(log_r.begin(), log_r.end());
    double total = 0.0;
    for (std::size_t k = 0; k < kc; ++k) {
        post.responsibilities[k] = std::isfinite(log_r[k]) ? std::exp(log_r[k] - peak) : 0.0;
        total += post.responsibilities[k];
    }
    for (auto& r : post.responsibilities) r /= total;
    return post;
}

Tensor gmm_velocity(const Tensor& x, double t, const GmmTarget& target) {
    const GmmPosterior post = gmm_posterior(x, t, target);
    Tensor v(x.dims());
    for (std::size_t k = 0; k < post.responsibilities.size(); ++k) {
        const double r = post.responsibilities[k];
        if (r == 0.0) continue;
        for (std::size_t i = 0; i < v.size(); ++i) v[i] += r * (post.noise_means[k][i] - post.clean_means[k][i]);
    }
    return v;
}

GmmVelocityField::GmmVelocityField(GmmTarget target, double t_floor) : target_(std::move(target)), t_floor_(t_floor) {
    target_.validate();
    if (!(t_floor >= 0.0 && t_floor < 1.0)) throw ParameterError("gmm field: t_floor must lie in [0, 1)");
}

Tensor GmmVelocityField::velocity(const Tensor& x, double t) const {
    return gmm_velocity(x, std::max(t, t_floor_), target_);
}

Tensor interpolate(const Tensor& x0, const Tensor& x1, double t) {
    require_same_shape(x0, x1, "interpolate");
    if (!(t >= 0.0 && t <= 1.0)) throw ParameterError("interpolate: t must lie in [0, 1]");
    return lincomb(1.0 - t, x0, t, x1);
}

Tensor euler_step(const VelocityField& v, const Tensor& x, double t_from, double t_to, std::ptrdiff_t step) {
    const Tensor vel = v.velocity(x, t_from);
    require_same_shape(vel, x, "velocity field output");
    if (!vel.all_finite()) throw NumericalError("non-finite velocity", step);
    Tensor next = x;
    const double dt = t_to - t_from;
    for (std::size_t i = 0; i < next.size(); ++i) next[i] += dt * vel[i];
    return next;
}

std::vector<Tensor> euler_generate(const VelocityField& v, const Tensor& x_start, const TimeGrid& grid) {
    const std::size_t n = grid.steps();
    std::vector<Tensor> traj;
    traj.reserve(n + 1);
    traj.push_back(x_start);
    for (std::size_t i = n; i >= 1; --i) {
        traj.push_back(euler_step(v, traj.back(), grid[i], grid[i - 1], static_cast<std::ptrdiff_t>(n - i + 1)));
    }
    return traj;
}

std::vector<Tensor> euler_invert(const VelocityField& v, const Tensor& x_clean, const TimeGrid& grid) {
    const std::size_t n = grid.steps();
    std::vector<Tensor> traj;
    traj.reserve(n + 1);
    traj.push_back(x_clean);
    for (std::size_t i = 0; i < n; ++i) {
        traj.push_back(euler_step(v, traj.back(), grid[i], grid[i + 1], static_cast<std::ptrdiff_t>(i + 1)));
    }
    return traj;
}

Tensor denoise_estimate(const Tensor& x_t, double t, const Tensor& eta, double eps) {
    require_same_shape(x_t, eta, "denoise_estimate");
    if (!(eps > 0.0)) throw ParameterError("denoise_estimate: eps must be positive");
    const double denom = (1.0 - t) + eps;
    Tensor out(x_t.dims());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x_t[i] / denom - t * eta[i] / denom;
    return out;
}

Tensor project_back(const Tensor& x0_bar, double t, const Tensor& eta) {
    require_same_shape(x0_bar, eta, "project_back");
    if (!(t >= 0.0 && t <= 1.0)) throw ParameterError("project_back: t must lie in [0, 1]");
    return lincomb(1.0 - t, x0_bar, t, eta);
}

}  // namespace flowsteer
