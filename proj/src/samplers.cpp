// SPDX-License-Identifier: Apache-2.0
#include "flowsteer/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "flowsteer/errors.hpp"
#include "flowsteer/metrics.hpp"

namespace flowsteer {

void RestorationTask::validate() const {
    require_dims(y, op.output_dims(), "restoration measurement");
    if (truth) require_dims(*truth, op.input_dims(), "restoration ground truth");
}

std::string to_string(ProjectionMode mode) { return mode == ProjectionMode::Direct ? "direct" : "via_x0"; }

ProjectionMode projection_mode_from_string(const std::string& name) {
    if (name == "direct") return ProjectionMode::Direct;
    if (name == "via_x0") return ProjectionMode::ViaX0;
    throw ConfigError("unknown projection mode '" + name + "'");
}

void FlowSteerConfig::validate() const {
    if (schedule.steps() != grid.steps()) {
        throw ConfigError("schedule has " + std::to_string(schedule.steps()) + " steps but the grid has " +
                          std::to_string(grid.steps()));
    }
    if (!(eps > 0.0)) throw ConfigError("eps must be positive");
    if (!(eta_eff >= 0.0)) throw ConfigError("eta_eff must be nonnegative");
}

namespace {

void check_state(const Tensor& x, std::size_t step) {
    if (!x.all_finite()) throw NumericalError("non-finite sampler state", static_cast<std::ptrdiff_t>(step));
}

void record(TraceStep& ts, const Tensor& x, const RestorationTask& task) {
    const Residual r = measurement_residual(task.op, x, task.y);
    ts.recorded = true;
    ts.residual_l2 = r.l2;
    ts.residual_linf = r.linf;
    ts.psnr = task.truth ? psnr(x, *task.truth) : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

std::string RestorationTrace::csv_header() {
    return "step,t_from,t_to,lambda,conditioned,residual_l2,residual_linf,psnr";
}

std::string RestorationTrace::csv() const {
    std::ostringstream out;
    out << csv_header() << '\n';
    for (const auto& s : steps) {
        out << s.step << ',' << format_number(s.t_from) << ',' << format_number(s.t_to) << ','
            << format_number(s.lambda) << ',' << (s.conditioned ? 1 : 0) << ','
            << (s.recorded ? format_number(s.residual_l2) : "") << ','
            << (s.recorded ? format_number(s.residual_linf) : "") << ','
            << (s.recorded ? format_number(s.psnr) : "") << '\n';
    }
    return out.str();
}

RestorationResult restore_flowsteer(const VelocityField& v, const RestorationTask& task, const FlowSteerConfig& cfg,
                                    Rng& rng) {
    cfg.validate();
    task.validate();
    const LatentCodec& codec = cfg.codec;
    if (codec.pixel_dims() != task.op.input_dims()) {
        throw ConfigError("codec pixel dims " + dims_to_string(codec.pixel_dims()) + " do not match operator input " +
                          dims_to_string(task.op.input_dims()));
    }
    const std::size_t n = cfg.grid.steps();
    const FidelityUpdateConfig base{1.0, cfg.eta_eff};

    Tensor z = rng.normal_tensor(codec.latent_dims());
    const Tensor eta = cfg.projection == ProjectionMode::ViaX0 ? codec.decode(z) : Tensor();

    RestorationResult result;
    result.trace.steps.reserve(n);
    for (std::size_t k = 1; k <= n; ++k) {
        const std::size_t i = n - k + 1;
        TraceStep ts;
        ts.step = k;
        ts.t_from = cfg.grid[i];
        ts.t_to = cfg.grid[i - 1];
        ts.lambda = cfg.schedule.at_step(k);
        z = euler_step(v, z, ts.t_from, ts.t_to, static_cast<std::ptrdiff_t>(k));
        if (ts.lambda > 0.0) {
            ts.conditioned = true;
            Tensor x = codec.decode(z, rng);
            FidelityUpdateConfig fcfg = base;
            fcfg.lambda_strength = ts.lambda;
            if (cfg.projection == ProjectionMode::Direct) {
                x = fidelity_update(x, task.y, task.op, fcfg, rng);
            } else {
                const Tensor x0 = denoise_estimate(x, ts.t_to, eta, cfg.eps);
                x = project_back(fidelity_update(x0, task.y, task.op, fcfg, rng), ts.t_to, eta);
            }
            check_state(x, k);
            record(ts, x, task);
            z = codec.encode(x);
            result.trace.last_conditioned = std::move(x);
        } else if (cfg.trace_all_steps) {
            check_state(z, k);
            record(ts, codec.decode(z), task);
        }
        result.trace.steps.push_back(ts);
    }
    result.image = codec.decode(z, rng);
    check_state(result.image, n);
    return result;
}

Tensor restore_ideal_flow(const VelocityField& v, const RestorationTask& task, const TimeGrid& grid, double eps,
                          Rng& rng, bool resample_eta) {
    task.validate();
    if (!(eps > 0.0)) throw ConfigError("eps must be positive");
    const std::size_t n = grid.steps();
    Tensor x = rng.normal_tensor(task.op.input_dims());
    Tensor eta = x;
    const FidelityUpdateConfig full{1.0, 0.0};
    for (std::size_t k = 1; k <= n; ++k) {
        const std::size_t i = n - k + 1;
        const double t = grid[i - 1];
        x = euler_step(v, x, grid[i], t, static_cast<std::ptrdiff_t>(k));
        if (resample_eta) eta = rng.normal_tensor(x.dims());
        const Tensor x0 = denoise_estimate(x, t, eta, eps);
        x = project_back(fidelity_update(x0, task.y, task.op, full, rng), t, eta);
        check_state(x, k);
    }
    return x;
}

Tensor AnalyticDenoiser::clean_estimate(const Tensor& x_t, double alpha_bar) const {
    require_dims(x_t, prior.dims(), "analytic denoiser");
    if (!(alpha_bar > 0.0 && alpha_bar <= 1.0)) throw ParameterError("alpha_bar must lie in (0, 1]");
    const double root = std::sqrt(alpha_bar);
    const double d = static_cast<double>(x_t.size());
    const std::size_t kc = prior.components();
    std::vector<double> log_r(kc, -std::numeric_limits<double>::infinity());
    std::vector<Tensor> means;
    means.reserve(kc);
    for (std::size_t k = 0; k < kc; ++k) {
        const double var0 = prior.stdevs[k] * prior.stdevs[k];
        const double s2 = alpha_bar * var0 + (1.0 - alpha_bar);
        if (!(s2 > 0.0)) throw NumericalError("analytic denoiser: singular component at alpha_bar = 1");
        const Tensor& mu = prior.means[k];
        const double gain = root * var0 / s2;
        Tensor m(x_t.dims());
        double sq = 0.0;
        for (std::size_t j = 0; j < x_t.size(); ++j) {
            const double r = x_t[j] - root * mu[j];
            sq += r * r;
            m[j] = mu[j] + gain * r;
        }
        if (prior.weights[k] > 0.0) {
            log_r[k] = std::log(prior.weights[k]) - 0.5 * d * std::log(2.0 * std::numbers::pi * s2) - 0.5 * sq / s2;
        }
        means.push_back(std::move(m));
    }
    const double peak = *std::max_element(log_r.begin(), log_r.end());
    std::vector<double> r(kc);
    double total = 0.0;
    for (std::size_t k = 0; k < kc; ++k) {
        r[k] = std::isfinite(log_r[k]) ? std::exp(log_r[k] - peak) : 0.0;
        total += r[k];
    }
    Tensor out(x_t.dims());
    for (std::size_t k = 0; k < kc; ++k) {
        if (r[k] == 0.0) continue;
        const double w = r[k] / total;
        for (std::size_t j = 0; j < out.size(); ++j) out[j] += w * means[k][j];
    }
    return out;
}

Tensor AnalyticDenoiser::noise_estimate(const Tensor& x_t, double alpha_bar) const {
    if (!(alpha_bar < 1.0)) throw ParameterError("noise estimate needs alpha_bar < 1");
    const Tensor x0 = clean_estimate(x_t, alpha_bar);
    return lincomb(1.0 / std::sqrt(1.0 - alpha_bar), x_t, -std::sqrt(alpha_bar) / std::sqrt(1.0 - alpha_bar), x0);
}

Tensor restore_ddnm(const AnalyticDenoiser& denoiser, const RestorationTask& task, const DiffusionSchedule& s,
                    bool noise_robust, Rng& rng, std::vector<Tensor>* trajectory) {
    task.validate();
    denoiser.prior.validate();
    if (denoiser.prior.dims() != task.op.input_dims()) throw ConfigError("denoiser prior dims do not match operator");
    const std::size_t big_t = s.steps();
    Tensor x = rng.normal_tensor(task.op.input_dims());
    if (trajectory) {
        trajectory->clear();
        trajectory->push_back(x);
    }
    for (std::size_t t = big_t; t >= 1; --t) {
        // x_{0|t} from the posterior-mean denoiser (equivalently the noise
        // estimate pushed through the Tweedie inversion).
        const Tensor x0 = denoiser.clean_estimate(x, s.alpha_bar(t));
        const double a_t = a_t_coeff(s, t);
        const double c_t = x_t_coeff(s, t);
        // A^+ y + (I - A^+ A) x0 written as x0 - A^+ (A x0 - y), the
        // lambda = 1 case of the damped update, so that both variants agree
        // bit for bit when sigma_y = 0.
        double lambda = 1.0;
        double noise_scale = s.sigma(t);
        if (noise_robust) {
            const NoiseRobustStep nr = adaptive_lambda_gamma(s.sigma(t), a_t, s.sigma_y());
            lambda = nr.lambda_t;
            noise_scale = nr.gamma_t;
        }
        const Tensor correction = task.op.apply_pinv(task.op.apply(x0) - task.y);
        const Tensor x0_hat = lincomb(1.0, x0, -lambda, correction);
        Tensor next = lincomb(a_t, x0_hat, c_t, x);
        // Every step draws the same amount of noise so variants share streams.
        Tensor z = rng.normal_tensor(x.dims());
        if (t > 1) next += noise_scale * z;
        x = std::move(next);
        check_state(x, t);
        if (trajectory) trajectory->push_back(x);
    }
    return x;
}

Tensor generate_unconditioned(const VelocityField& v, const TimeGrid& grid, const LatentCodec& codec, Rng& rng) {
    const Tensor z = rng.normal_tensor(codec.latent_dims());
    std::vector<Tensor> traj = euler_generate(v, z, grid);
    return codec.decode(traj.back(), rng);
}

}  // namespace flowsteer
