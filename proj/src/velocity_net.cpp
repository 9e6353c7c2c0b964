// SPDX-License-Identifier: Apache-2.0
#include "flowsteer/velocity_net.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "flowsteer/errors.hpp"
#include "flowsteer/io.hpp"
#include "flowsteer/kernels.hpp"

namespace flowsteer {

namespace {

using kernels::Trans;

// Activations of every layer for one batch; acts[0] is the network input.
struct ForwardCache {
    std::size_t batch = 0;
    std::vector<std::vector<double>> acts;
};

void check_finite(std::span<const double> v, const char* what) {
    for (double x : v) {
        if (!std::isfinite(x)) throw NumericalError(std::string(what) + ": non-finite input");
    }
}

}  // namespace

VelocityNet VelocityNet::init(std::size_t data_dim, const std::vector<std::size_t>& hidden, std::size_t time_features,
                              std::uint64_t seed, bool skip) {
    if (hidden.empty()) throw ParameterError("velocity net needs at least one hidden layer");
    if (data_dim == 0) throw ParameterError("velocity net data_dim must be positive");
    if (time_features == 0 || time_features % 2 != 0) {
        throw ParameterError("velocity net time_features must be a positive even count");
    }
    Rng rng(seed);
    std::vector<DenseLayer> layers;
    std::size_t in = data_dim + time_features;
    std::vector<std::size_t> widths = hidden;
    widths.push_back(data_dim);
    for (std::size_t out : widths) {
        if (out == 0) throw ParameterError("velocity net layer widths must be positive");
        DenseLayer layer;
        layer.in = in;
        layer.out = out;
        layer.weight.resize(in * out);
        layer.bias.assign(out, 0.0);
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        for (auto& w : layer.weight) w = rng.uniform(-bound, bound);
        layers.push_back(std::move(layer));
        in = out;
    }
    if (!skip) return VelocityNet(data_dim, time_features, std::move(layers));
    DenseLayer gate{time_features, data_dim, std::vector<double>(data_dim * time_features, 0.0),
                    std::vector<double>(data_dim, 0.0)};
    return VelocityNet(data_dim, time_features, std::move(layers), std::move(gate));
}

VelocityNet::VelocityNet(std::size_t data_dim, std::size_t time_features, std::vector<DenseLayer> layers,
                         DenseLayer skip)
    : VelocityNet(data_dim, time_features, std::move(layers)) {
    if (skip.in != time_features_ || skip.out != data_dim_ || skip.weight.size() != skip.in * skip.out ||
        skip.bias.size() != skip.out) {
        throw ShapeError("velocity net skip gate must be data_dim x time_features");
    }
    check_finite(skip.weight, "velocity net skip weights");
    check_finite(skip.bias, "velocity net skip biases");
    has_skip_ = true;
    skip_ = std::move(skip);
}

VelocityNet::VelocityNet(std::size_t data_dim, std::size_t time_features, std::vector<DenseLayer> layers)
    : data_dim_(data_dim), time_features_(time_features), layers_(std::move(layers)) {
    if (layers_.size() < 2) throw ParameterError("velocity net needs at least one hidden layer");
    if (time_features_ == 0 || time_features_ % 2 != 0) {
        throw ParameterError("velocity net time_features must be a positive even count");
    }
    std::size_t in = data_dim_ + time_features_;
    for (const auto& l : layers_) {
        if (l.in != in || l.weight.size() != l.in * l.out || l.bias.size() != l.out) {
            throw ShapeError("velocity net layer shapes do not chain");
        }
        check_finite(l.weight, "velocity net weights");
        check_finite(l.bias, "velocity net biases");
        in = l.out;
    }
    if (in != data_dim_) throw ShapeError("velocity net output width must equal data_dim");
}

std::vector<std::size_t> VelocityNet::hidden_widths() const {
    std::vector<std::size_t> widths;
    for (std::size_t i = 0; i + 1 < layers_.size(); ++i) widths.push_back(layers_[i].out);
    return widths;
}

namespace {

ForwardCache run_forward(const VelocityNet& net, std::span<const double> x, std::span<const double> t) {
    const std::size_t d = net.data_dim();
    const std::size_t f = net.time_features();
    ForwardCache cache;
    cache.batch = t.size();
    const std::size_t b = cache.batch;
    const std::size_t in0 = d + f;
    cache.acts.reserve(net.layers().size() + 1);
    std::vector<double> input(b * in0);
    const std::size_t half = f / 2;
    for (std::size_t r = 0; r < b; ++r) {
        std::copy_n(x.data() + r * d, d, input.data() + r * in0);
        double* feat = input.data() + r * in0 + d;
        for (std::size_t j = 0; j < half; ++j) {
            const double arg = std::ldexp(std::numbers::pi * t[r], static_cast<int>(j));
            feat[2 * j] = std::sin(arg);
            feat[2 * j + 1] = std::cos(arg);
        }
    }
    cache.acts.push_back(std::move(input));
    const auto& layers = net.layers();
    for (std::size_t li = 0; li < layers.size(); ++li) {
        const auto& l = layers[li];
        std::vector<double> z(b * l.out);
        kernels::gemm(Trans::No, Trans::Yes, b, l.out, l.in, 1.0, cache.acts.back(), l.weight, 0.0, z);
        kernels::add_row_bias(z, l.bias);
        if (li + 1 < layers.size()) kernels::tanh_forward(z, z);
        cache.acts.push_back(std::move(z));
    }
    if (net.has_skip()) {
        const DenseLayer& g = net.skip();
        std::vector<double> gain(b * d);
        for (std::size_t r = 0; r < b; ++r) {
            const double* feat = cache.acts[0].data() + r * in0 + d;
            double* gr = gain.data() + r * d;
            for (std::size_t i = 0; i < d; ++i) {
                double acc = g.bias[i];
                for (std::size_t j = 0; j < f; ++j) acc += g.weight[i * f + j] * feat[j];
                gr[i] = acc;
            }
        }
        double* out = cache.acts.back().data();
        for (std::size_t k = 0; k < b * d; ++k) out[k] += gain[k] * x[k];
    }
    return cache;
}

}  // namespace

void VelocityNet::forward_batch(std::span<const double> x, std::span<const double> t, std::span<double> out) const {
    const std::size_t b = t.size();
    if (x.size() != b * data_dim_ || out.size() != b * data_dim_) {
        throw ShapeError("velocity net forward: expected batch x " + std::to_string(data_dim_) + " buffers");
    }
    check_finite(x, "velocity net forward");
    check_finite(t, "velocity net forward");
    ForwardCache cache = run_forward(*this, x, t);
    std::copy(cache.acts.back().begin(), cache.acts.back().end(), out.begin());
}

Tensor VelocityNet::velocity(const Tensor& x, double t) const {
    if (x.size() != data_dim_) {
        throw ShapeError("velocity net expects " + std::to_string(data_dim_) + " values, got " +
                         dims_to_string(x.dims()));
    }
    Tensor out(x.dims());
    const double tt[1] = {t};
    forward_batch(x.values(), tt, out.values());
    return out;
}

std::size_t VelocityNet::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
    if (has_skip_) n += skip_.weight.size() + skip_.bias.size();
    return n;
}

double VelocityNet::parameter(std::size_t index) const {
    std::vector<const DenseLayer*> all;
    for (const auto& l : layers_) all.push_back(&l);
    if (has_skip_) all.push_back(&skip_);
    for (const DenseLayer* lp : all) {
        const auto& l = *lp;
        if (index < l.weight.size()) return l.weight[index];
        index -= l.weight.size();
        if (index < l.bias.size()) return l.bias[index];
        index -= l.bias.size();
    }
    throw ParameterError("parameter index out of range");
}

void VelocityNet::set_parameter(std::size_t index, double value) {
    std::vector<DenseLayer*> all;
    for (auto& l : layers_) all.push_back(&l);
    if (has_skip_) all.push_back(&skip_);
    for (DenseLayer* lp : all) {
        auto& l = *lp;
        if (index < l.weight.size()) {
            l.weight[index] = value;
            return;
        }
        index -= l.weight.size();
        if (index < l.bias.size()) {
            l.bias[index] = value;
            return;
        }
        index -= l.bias.size();
    }
    throw ParameterError("parameter index out of range");
}

std::vector<double> VelocityNet::parameters() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (const auto& l : layers_) {
        out.insert(out.end(), l.weight.begin(), l.weight.end());
        out.insert(out.end(), l.bias.begin(), l.bias.end());
    }
    if (has_skip_) {
        out.insert(out.end(), skip_.weight.begin(), skip_.weight.end());
        out.insert(out.end(), skip_.bias.begin(), skip_.bias.end());
    }
    return out;
}

void VelocityNet::set_parameters(std::span<const double> values) {
    if (values.size() != parameter_count()) throw ShapeError("parameter vector has the wrong length");
    std::size_t pos = 0;
    for (auto& l : layers_) {
        std::copy_n(values.data() + pos, l.weight.size(), l.weight.begin());
        pos += l.weight.size();
        std::copy_n(values.data() + pos, l.bias.size(), l.bias.begin());
        pos += l.bias.size();
    }
    if (has_skip_) {
        std::copy_n(values.data() + pos, skip_.weight.size(), skip_.weight.begin());
        pos += skip_.weight.size();
        std::copy_n(values.data() + pos, skip_.bias.size(), skip_.bias.begin());
    }
}

bool VelocityNet::operator==(const VelocityNet& other) const {
    if (data_dim_ != other.data_dim_ || time_features_ != other.time_features_ ||
        layers_.size() != other.layers_.size())
        return false;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& a = layers_[i];
        const auto& b = other.layers_[i];
        if (a.in != b.in || a.out != b.out || a.weight != b.weight || a.bias != b.bias) return false;
    }
    if (has_skip_ != other.has_skip_) return false;
    return !has_skip_ || (skip_.weight == other.skip_.weight && skip_.bias == other.skip_.bias);
}

FlowBatch make_flow_batch(const CleanSampler& sample_clean, std::size_t data_dim, std::size_t batch_size, Rng& rng) {
    FlowBatch batch;
    batch.size = batch_size;
    batch.states.resize(batch_size * data_dim);
    batch.times.resize(batch_size);
    batch.targets.resize(batch_size * data_dim);
    std::vector<double> clean(data_dim);
    for (std::size_t r = 0; r < batch_size; ++r) {
        sample_clean(rng, clean);
        const double t = rng.uniform();
        batch.times[r] = t;
        for (std::size_t i = 0; i < data_dim; ++i) {
            const double noise = rng.normal();
            batch.states[r * data_dim + i] = (1.0 - t) * clean[i] + t * noise;
            batch.targets[r * data_dim + i] = noise - clean[i];
        }
    }
    return batch;
}

double batch_loss(const VelocityNet& net, const FlowBatch& batch) {
    std::vector<double> out(batch.states.size());
    net.forward_batch(batch.states, batch.times, out);
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double e = out[i] - batch.targets[i];
        s += e * e;
    }
    return s / static_cast<double>(batch.size);
}

LossGradient loss_and_gradient(const VelocityNet& net, const FlowBatch& batch) {
    const std::size_t b = batch.size;
    const auto& layers = net.layers();
    ForwardCache cache = run_forward(net, batch.states, batch.times);

    const std::vector<double>& pred = cache.acts.back();
    const double scale = 1.0 / static_cast<double>(b);
    LossGradient result;
    std::vector<double> delta(pred.size());
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e = pred[i] - batch.targets[i];
        s += e * e;
        delta[i] = 2.0 * scale * e;
    }
    result.loss = s * scale;

    // Gradient offsets of each layer in flat parameter order.
    std::vector<std::size_t> offsets(layers.size());
    std::size_t total = 0;
    for (std::size_t li = 0; li < layers.size(); ++li) {
        offsets[li] = total;
        total += layers[li].weight.size() + layers[li].bias.size();
    }
    const std::size_t skip_offset = total;
    if (net.has_skip()) total += net.skip().weight.size() + net.skip().bias.size();
    result.gradient.assign(total, 0.0);

    if (net.has_skip()) {
        const std::size_t d = net.data_dim();
        const std::size_t f = net.time_features();
        const std::size_t in0 = d + f;
        double* gw = result.gradient.data() + skip_offset;
        double* gb = gw + d * f;
        for (std::size_t r = 0; r < b; ++r) {
            const double* feat = cache.acts[0].data() + r * in0 + d;
            for (std::size_t i = 0; i < d; ++i) {
                const double dg = delta[r * d + i] * batch.states[r * d + i];
                gb[i] += dg;
                for (std::size_t j = 0; j < f; ++j) gw[i * f + j] += dg * feat[j];
            }
        }
    }

    for (std::size_t li = layers.size(); li-- > 0;) {
        const auto& l = layers[li];
        const std::vector<double>& a_prev = cache.acts[li];
        std::span<double> grad_w(result.gradient.data() + offsets[li], l.weight.size());
        std::span<double> grad_b(result.gradient.data() + offsets[li] + l.weight.size(), l.bias.size());
        kernels::gemm(Trans::Yes, Trans::No, l.out, l.in, b, 1.0, delta, a_prev, 0.0, grad_w);
        kernels::accumulate_column_sums(delta, grad_b);
        if (li == 0) break;
        std::vector<double> delta_prev(b * l.in);
        kernels::gemm(Trans::No, Trans::No, b, l.in, l.out, 1.0, delta, l.weight, 0.0, delta_prev);
        kernels::tanh_backward(a_prev, delta_prev);
        delta = std::move(delta_prev);
    }
    return result;
}

void TrainConfig::validate() const {
    if (steps < 1) throw ParameterError("training steps must be >= 1");
    if (batch_size < 1) throw ParameterError("batch size must be >= 1");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw ParameterError("learning rate must be finite and nonnegative");
    }
    if (optimizer == OptimizerKind::Momentum && !(momentum >= 0.0 && momentum < 1.0)) {
        throw ParameterError("momentum must lie in [0, 1)");
    }
}

LossCurve train(VelocityNet& net, const CleanSampler& sample_clean, const TrainConfig& cfg) {
    cfg.validate();
    const std::size_t d = net.data_dim();
    Rng rng(derive_seed(cfg.seed, 0));
    Rng monitor_rng(derive_seed(cfg.seed, 1));
    FlowBatch monitor;
    if (cfg.monitor_every > 0) monitor = make_flow_batch(sample_clean, d, cfg.monitor_batch, monitor_rng);

    LossCurve curve;
    curve.monitor_every = cfg.monitor_every;
    curve.batch.reserve(cfg.steps);
    std::vector<double> params = net.parameters();
    std::vector<double> velocity(params.size(), 0.0);

    for (std::size_t step = 0; step < cfg.steps; ++step) {
        if (cfg.monitor_every > 0 && step % cfg.monitor_every == 0) curve.monitor.push_back(batch_loss(net, monitor));
        const FlowBatch batch = make_flow_batch(sample_clean, d, cfg.batch_size, rng);
        LossGradient lg = loss_and_gradient(net, batch);
        if (!std::isfinite(lg.loss)) throw TrainingError("training loss diverged", static_cast<std::ptrdiff_t>(step));
        curve.batch.push_back(lg.loss);
        if (cfg.learning_rate == 0.0) continue;
        if (cfg.optimizer == OptimizerKind::Momentum) {
            for (std::size_t i = 0; i < params.size(); ++i) {
                velocity[i] = cfg.momentum * velocity[i] + lg.gradient[i];
                params[i] -= cfg.learning_rate * velocity[i];
            }
        } else {
            for (std::size_t i = 0; i < params.size(); ++i) params[i] -= cfg.learning_rate * lg.gradient[i];
        }
        net.set_parameters(params);
    }
    if (cfg.monitor_every > 0) curve.monitor.push_back(batch_loss(net, monitor));
    return curve;
}

double grad_check(const VelocityNet& net, const FlowBatch& batch, std::size_t n_params, std::uint64_t seed) {
    const LossGradient lg = loss_and_gradient(net, batch);
    VelocityNet probe = net;
    Rng rng(seed);
    const std::size_t total = net.parameter_count();
    constexpr double h = 1e-5;
    double worst = 0.0;
    for (std::size_t n = 0; n < n_params; ++n) {
        const std::size_t idx = rng.index(total);
        const double orig = probe.parameter(idx);
        probe.set_parameter(idx, orig + h);
        const double up = batch_loss(probe, batch);
        probe.set_parameter(idx, orig - h);
        const double down = batch_loss(probe, batch);
        probe.set_parameter(idx, orig);
        const double fd = (up - down) / (2.0 * h);
        const double an = lg.gradient[idx];
        const double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-7});
        worst = std::max(worst, rel);
    }
    return worst;
}

void save_checkpoint(const VelocityNet& net, const std::filesystem::path& path) {
    std::vector<Tensor> records;
    std::vector<double> header = {static_cast<double>(net.data_dim()), static_cast<double>(net.time_features()),
                                  static_cast<double>(net.layers().size())};
    for (const auto& l : net.layers()) header.push_back(static_cast<double>(l.out));
    header.push_back(net.has_skip() ? 1.0 : 0.0);
    records.emplace_back(Dims{header.size()}, header);
    for (const auto& l : net.layers()) {
        records.emplace_back(Dims{l.out, l.in}, l.weight);
        records.emplace_back(Dims{l.out}, l.bias);
    }
    if (net.has_skip()) {
        records.emplace_back(Dims{net.data_dim(), net.time_features()}, net.skip().weight);
        records.emplace_back(Dims{net.data_dim()}, net.skip().bias);
    }
    write_fst_records(path, records);
}

VelocityNet load_checkpoint(const std::filesystem::path& path) {
    const auto records = read_fst_records(path);
    if (records.empty() || records[0].rank() != 1 || records[0].size() < 3) {
        throw FormatError("checkpoint header record missing", 0);
    }
    const auto& header = records[0];
    const auto data_dim = static_cast<std::size_t>(header[0]);
    const auto time_features = static_cast<std::size_t>(header[1]);
    const auto n_layers = static_cast<std::size_t>(header[2]);
    if (header.size() != 4 + n_layers) throw FormatError("checkpoint header has the wrong length", 0);
    const bool skip = header[3 + n_layers] != 0.0;
    if (records.size() != 1 + 2 * n_layers + (skip ? 2 : 0)) {
        throw FormatError("checkpoint record count does not match header", 0);
    }
    std::vector<DenseLayer> layers;
    std::size_t in = data_dim + time_features;
    for (std::size_t li = 0; li < n_layers; ++li) {
        const Tensor& w = records[1 + 2 * li];
        const Tensor& b = records[2 + 2 * li];
        const auto out = static_cast<std::size_t>(header[3 + li]);
        if (w.dims() != Dims{out, in} || b.dims() != Dims{out}) {
            throw FormatError("checkpoint layer " + std::to_string(li) + " has unexpected shape", 0);
        }
        DenseLayer l;
        l.in = in;
        l.out = out;
        l.weight.assign(w.values().begin(), w.values().end());
        l.bias.assign(b.values().begin(), b.values().end());
        layers.push_back(std::move(l));
        in = out;
    }
    if (!skip) return VelocityNet(data_dim, time_features, std::move(layers));
    const Tensor& sw = records[1 + 2 * n_layers];
    const Tensor& sb = records[2 + 2 * n_layers];
    if (sw.dims() != Dims{data_dim, time_features} || sb.dims() != Dims{data_dim}) {
        throw FormatError("checkpoint skip gate has unexpected shape", 0);
    }
    DenseLayer gate{time_features, data_dim, std::vector<double>(sw.values().begin(), sw.values().end()),
                    std::vector<double>(sb.values().begin(), sb.values().end())};
    return VelocityNet(data_dim, time_features, std::move(layers), std::move(gate));
}

}  // namespace flowsteer
