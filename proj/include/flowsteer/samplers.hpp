// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flowsteer/codec.hpp"
#include "flowsteer/flow.hpp"
#include "flowsteer/operators.hpp"
#include "flowsteer/rng.hpp"
#include "flowsteer/schedules.hpp"

namespace flowsteer {

struct RestorationTask {
    DegradationOperator op = DegradationOperator::denoise(Dims{1}, 0.0);
    Tensor y;
    std::optional<Tensor> truth;
    std::uint64_t seed = 0;

    void validate() const;
};

enum class ProjectionMode { Direct, ViaX0 };

std::string to_string(ProjectionMode mode);
ProjectionMode projection_mode_from_string(const std::string& name);

struct FlowSteerConfig {
    TimeGrid grid = TimeGrid::uniform(30);
    LambdaSchedule schedule = LambdaSchedule::zeros(30);
    LatentCodec codec{CodecKind::Identity, Dims{1}};
    double eta_eff = 0.0;
    ProjectionMode projection = ProjectionMode::Direct;
    double eps = kDefaultDenoiseEps;
    /// Record residual and PSNR for every step, not only conditioned ones.
    bool trace_all_steps = true;

    void validate() const;
};

/// One reconstruction step. `step` counts from 1 (first, noisiest) to N; the
/// step moves the state from `t_from` to `t_to` < `t_from`.
struct TraceStep {
    std::size_t step = 0;
    double t_from = 0.0;
    double t_to = 0.0;
    double lambda = 0.0;
    bool conditioned = false;
    bool recorded = false;
    /// ||A x_hat - y|| of the pixel-space state at t_to (after the update on
    /// conditioned steps).
    double residual_l2 = 0.0;
    double residual_linf = 0.0;
    /// PSNR of that state against the ground truth; NaN without one.
    double psnr = 0.0;
};

struct RestorationTrace {
    std::vector<TraceStep> steps;
    /// Pixel-space estimate produced by the last fidelity update, if any.
    std::optional<Tensor> last_conditioned;

    static std::string csv_header();
    std::string csv() const;
};

struct RestorationResult {
    Tensor image;
    RestorationTrace trace;
};

/// Scheduled fidelity conditioning of a flow sampler.
///
/// z starts as N(0, I) in latent space. Step k runs one Euler step from
/// t_{N-k+1} to t_{N-k}; when lambda_k > 0 the state is decoded, passed through
/// fidelity_update (optionally wrapped in denoise_estimate / project_back
/// with the initial noise as eta) and re-encoded. Steps with lambda_k = 0 do
/// not touch the codec. Returns the decoded state at t = 0.
RestorationResult restore_flowsteer(const VelocityField& v, const RestorationTask& task, const FlowSteerConfig& cfg,
                                    Rng& rng);

/// Pixel-space sampler that conditions every step through the clean
/// estimate: denoise, full fidelity update, project back. eta is the initial
/// noise unless `resample_eta` draws a fresh one per step.
Tensor restore_ideal_flow(const VelocityField& v, const RestorationTask& task, const TimeGrid& grid, double eps,
                          Rng& rng, bool resample_eta = false);

/// Closed-form E[x_0 | x_t] for a Gaussian-mixture prior under the
/// variance-preserving forward process x_t = sqrt(abar) x_0 + sqrt(1-abar) e.
struct AnalyticDenoiser {
    GmmTarget prior;

    Tensor clean_estimate(const Tensor& x_t, double alpha_bar) const;
    /// (x_t - sqrt(abar) x0_hat) / sqrt(1 - abar).
    Tensor noise_estimate(const Tensor& x_t, double alpha_bar) const;
};

/// Diffusion-path null-space restoration over s.steps() ancestral steps.
/// With `noise_robust`, the update is damped by lambda_t and the sampling
/// noise scaled to gamma_t. `trajectory`, if given, receives
/// [x_T, ..., x_0].
Tensor restore_ddnm(const AnalyticDenoiser& denoiser, const RestorationTask& task, const DiffusionSchedule& s,
                    bool noise_robust, Rng& rng, std::vector<Tensor>* trajectory = nullptr);

/// Euler generation from fresh noise, decoded; the lambda = 0 baseline.
Tensor generate_unconditioned(const VelocityField& v, const TimeGrid& grid, const LatentCodec& codec, Rng& rng);

}  // namespace flowsteer
