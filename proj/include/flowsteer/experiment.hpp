// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "flowsteer/config.hpp"
#include "flowsteer/metrics.hpp"
#include "flowsteer/operators.hpp"
#include "flowsteer/samplers.hpp"

namespace flowsteer {

/// Operator for `task` on images of `image_dims` ({3, H, W}).
DegradationOperator make_task_operator(TaskKind task, const OperatorSpec& spec, const Dims& image_dims);

/// y = A x, plus N(0, sigma_g^2) noise for the denoising task.
Tensor synthesize_measurement(const DegradationOperator& op, const Tensor& x, Rng& rng);

/// Stream seeds. Measurement noise depends only on the dataset seed and the
/// image index; restoration noise on the run seed and the image index.
std::uint64_t measurement_seed(std::uint64_t dataset_seed, std::size_t image);
std::uint64_t restoration_seed(std::uint64_t run_seed, std::size_t image);

/// Clean images, their measurements and the shared operator.
struct Fixture {
    TaskKind task = TaskKind::Colorization;
    DegradationOperator op = DegradationOperator::denoise(Dims{1}, 0.0);
    std::vector<Tensor> clean;
    std::vector<Tensor> measurements;
};

Fixture build_fixture(TaskKind task, const OperatorSpec& spec, const DatasetSpec& data);

/// Everything a single restoration needs besides the field and the image.
struct RunOptions {
    std::string method = "flowsteer";  // flowsteer | ideal | pinv | unconditioned
    std::size_t steps = 30;
    LambdaSchedule schedule = LambdaSchedule::zeros(30);
    CodecKind codec = CodecKind::Identity;
    double decode_noise = 0.0;
    double eta_eff = 0.0;
    ProjectionMode projection = ProjectionMode::Direct;
    double eps = kDefaultDenoiseEps;
    /// Record every step in the trace (conditioned steps are always recorded).
    bool trace = false;
    /// Schedule name written into metric rows.
    std::string label = "custom";
};

RunOptions run_options(const ExperimentConfig& cfg);

struct RunOutput {
    Tensor image;
    RestorationTrace trace;
    MetricReport report;
};

/// Restores fixture image `index` with run seed `seed` and scores it.
RunOutput restore_item(const VelocityField& v, const Fixture& fx, std::size_t index, std::uint64_t seed,
                       const RunOptions& opts);

struct CellSummary {
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
    double mean_residual_l2 = 0.0;
    std::size_t runs = 0;
};

/// Mean metrics over every (image, seed) pair, computed in parallel and
/// reduced in a fixed order.
CellSummary evaluate_cell(const VelocityField& v, const Fixture& fx, const RunOptions& opts,
                          const std::vector<std::uint64_t>& seeds);

/// The configured velocity field: a checkpointed net or, for gmm2d data,
/// the analytic oracle.
std::unique_ptr<VelocityField> load_flow(const ExperimentConfig& cfg);

/// Trains a fresh net as configured; the clean sampler renders shape images
/// (through the codec) or draws from the 2-D mixture.
struct TrainOutcome {
    VelocityNet net;
    LossCurve curve;
};
TrainOutcome train_flow(const ExperimentConfig& cfg);

/// Subcommand names accepted by run_subcommand.
std::vector<std::string> subcommand_names();

/// Runs one subcommand; writes under cfg.output_dir. Throws on failure.
void run_subcommand(const std::string& name, const ExperimentConfig& cfg);

/// Maps exceptions to exit codes: 0 success, 1 configuration or input
/// problems, 2 numerical failure.
int exit_code_for(const std::exception& e);

}  // namespace flowsteer
