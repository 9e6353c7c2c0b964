// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "flowsteer/flow.hpp"
#include "flowsteer/rng.hpp"

namespace flowsteer {

struct DenseLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> weight;  // out x in, row-major
    std::vector<double> bias;    // out
};

/// Fully connected velocity field over flattened states.
///
/// Input is the state concatenated with `time_features` sinusoidal features
/// [sin(2^j pi t), cos(2^j pi t)] for j < time_features / 2. Hidden layers use
/// tanh; the output layer is linear.
///
/// With `skip` enabled the output gains a gated linear path g(t) * x, where
/// g(t) = W_s phi(t) + b_s is a per-element gain computed from the time
/// features. The skip parameters start at zero.
///
/// Parameters are addressed by a flat index: for each layer in order, its
/// weights (row-major) followed by its biases, then the skip weights
/// (data_dim x time_features) and skip biases when present.
class VelocityNet final : public VelocityField {
public:
    /// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
    static VelocityNet init(std::size_t data_dim, const std::vector<std::size_t>& hidden, std::size_t time_features,
                            std::uint64_t seed, bool skip = false);

    VelocityNet(std::size_t data_dim, std::size_t time_features, std::vector<DenseLayer> layers);
    /// `skip` must be data_dim x time_features.
    VelocityNet(std::size_t data_dim, std::size_t time_features, std::vector<DenseLayer> layers, DenseLayer skip);

    std::size_t data_dim() const noexcept { return data_dim_; }
    std::size_t time_features() const noexcept { return time_features_; }
    const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
    std::vector<std::size_t> hidden_widths() const;
    bool has_skip() const noexcept { return has_skip_; }
    const DenseLayer& skip() const noexcept { return skip_; }

    /// Velocity for a single state of any dims with data_dim elements.
    Tensor velocity(const Tensor& x, double t) const override;

    /// Batched forward pass; x and out are batch x data_dim.
    void forward_batch(std::span<const double> x, std::span<const double> t, std::span<double> out) const;

    std::size_t parameter_count() const noexcept;
    double parameter(std::size_t index) const;
    void set_parameter(std::size_t index, double value);
    std::vector<double> parameters() const;
    void set_parameters(std::span<const double> values);

    bool operator==(const VelocityNet& other) const;

private:
    std::size_t data_dim_;
    std::size_t time_features_;
    std::vector<DenseLayer> layers_;
    bool has_skip_ = false;
    DenseLayer skip_;
};

/// Rectified-flow regression batch: states x_t, times t and targets x_1 - x_0.
struct FlowBatch {
    std::size_t size = 0;
    std::vector<double> states;
    std::vector<double> times;
    std::vector<double> targets;
};

/// Draws x_0 from `sample_clean`, x_1 ~ N(0, I), t ~ U(0, 1) per row.
using CleanSampler = std::function<void(Rng&, std::span<double>)>;
FlowBatch make_flow_batch(const CleanSampler& sample_clean, std::size_t data_dim, std::size_t batch_size, Rng& rng);

/// Squared error ||v(x_t, t) - target||^2 summed over dimensions, averaged
/// over the batch.
double batch_loss(const VelocityNet& net, const FlowBatch& batch);

struct LossGradient {
    double loss = 0.0;
    std::vector<double> gradient;  // flat parameter order
};

LossGradient loss_and_gradient(const VelocityNet& net, const FlowBatch& batch);

enum class OptimizerKind { Sgd, Momentum };

struct TrainConfig {
    std::size_t steps = 20000;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    OptimizerKind optimizer = OptimizerKind::Momentum;
    double momentum = 0.9;
    /// Evaluate a fixed monitor batch every this many steps (0 disables).
    std::size_t monitor_every = 10;
    std::size_t monitor_batch = 256;

    void validate() const;
};

struct LossCurve {
    std::vector<double> batch;    // training-batch loss before each update
    std::vector<double> monitor;  // fixed monitor-batch loss, every monitor_every steps
    std::size_t monitor_every = 0;
};

/// Minimizes the rectified-flow objective with SGD or momentum SGD.
/// Throws TrainingError naming the step if the loss becomes non-finite.
LossCurve train(VelocityNet& net, const CleanSampler& sample_clean, const TrainConfig& cfg);

/// Max relative error between backprop and central finite differences
/// (step 1e-5) over `n_params` parameters chosen with `seed`. Relative error
/// is |a - f| / max(|a|, |f|, 1e-7).
double grad_check(const VelocityNet& net, const FlowBatch& batch, std::size_t n_params = 64, std::uint64_t seed = 0);

/// Checkpoints are FST1 records: a header [data_dim, time_features, layers,
/// widths..., skip] followed by weight and bias tensors per layer, then the
/// skip weight and bias when skip = 1. Parameters are stored as float32.
void save_checkpoint(const VelocityNet& net, const std::filesystem::path& path);
VelocityNet load_checkpoint(const std::filesystem::path& path);

}  // namespace flowsteer
