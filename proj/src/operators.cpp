// SPDX-License-Identifier: Apache-2.0
#include "flowsteer/operators.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>

#include "flowsteer/errors.hpp"

namespace flowsteer {

namespace detail {

namespace {
// FFTW's planner is not thread-safe; execution with distinct buffers is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwBuffer {
    explicit FftwBuffer(std::size_t n) : ptr(fftw_alloc_complex(n)), size(n) {}
    ~FftwBuffer() { fftw_free(ptr); }
    FftwBuffer(const FftwBuffer&) = delete;
    FftwBuffer& operator=(const FftwBuffer&) = delete;
    fftw_complex* ptr;
    std::size_t size;
};
}  // namespace

struct SpectralPlan {
    SpectralPlan(std::size_t h, std::size_t w) : height(h), width(w) {
        FftwBuffer scratch(h * w);
        std::lock_guard lock(planner_mutex());
        forward = fftw_plan_dft_2d(static_cast<int>(h), static_cast<int>(w), scratch.ptr, scratch.ptr, FFTW_FORWARD,
                                   FFTW_ESTIMATE);
        backward = fftw_plan_dft_2d(static_cast<int>(h), static_cast<int>(w), scratch.ptr, scratch.ptr,
                                    FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    ~SpectralPlan() {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(forward);
        fftw_destroy_plan(backward);
    }
    SpectralPlan(const SpectralPlan&) = delete;
    SpectralPlan& operator=(const SpectralPlan&) = delete;

    std::size_t height;
    std::size_t width;
    fftw_plan forward{};
    fftw_plan backward{};
    std::vector<std::complex<double>> transfer;     // F{h}
    std::vector<std::complex<double>> wiener_gain;  // conj(F{h}) / (|F{h}|^2 + lambda)
};

}  // namespace detail

std::string to_string(OperatorKind kind) {
    switch (kind) {
        case OperatorKind::Colorization: return "colorization";
        case OperatorKind::Blur: return "blur";
        case OperatorKind::SuperRes4: return "superres4";
        case OperatorKind::Denoise: return "denoise";
        case OperatorKind::Matrix: return "matrix";
    }
    return "unknown";
}

OperatorKind operator_kind_from_string(const std::string& name) {
    if (name == "colorization" || name == "colorize") return OperatorKind::Colorization;
    if (name == "blur" || name == "deblur" || name == "deblurring") return OperatorKind::Blur;
    if (name == "superres4" || name == "superres" || name == "sr4") return OperatorKind::SuperRes4;
    if (name == "denoise" || name == "denoising") return OperatorKind::Denoise;
    if (name == "matrix") return OperatorKind::Matrix;
    throw ParameterError("unknown operator kind '" + name + "'");
}

Tensor make_gaussian_kernel(std::size_t size, double sigma_b) {
    if (size == 0 || size % 2 == 0) throw ParameterError("gaussian kernel size must be odd and positive");
    if (!(sigma_b > 0.0)) throw ParameterError("gaussian kernel sigma must be positive");
    Tensor k(Dims{size, size});
    const double c = static_cast<double>(size / 2);
    double total = 0.0;
    for (std::size_t i = 0; i < size; ++i) {
        for (std::size_t j = 0; j < size; ++j) {
            const double dy = static_cast<double>(i) - c;
            const double dx = static_cast<double>(j) - c;
            const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma_b * sigma_b));
            k[i * size + j] = v;
            total += v;
        }
    }
    k *= 1.0 / total;
    return k;
}

std::size_t default_kernel_size(double sigma_b) {
    if (!(sigma_b > 0.0)) throw ParameterError("blur sigma must be positive");
    const auto s = 2 * static_cast<std::size_t>(std::ceil(3.0 * sigma_b)) + 1;
    return std::min<std::size_t>(61, s);
}

DegradationOperator DegradationOperator::colorization(std::size_t height, std::size_t width) {
    DegradationOperator op;
    op.kind_ = OperatorKind::Colorization;
    op.input_dims_ = op.output_dims_ = Dims{3, height, width};
    return op;
}

DegradationOperator DegradationOperator::blur(std::size_t channels, std::size_t height, std::size_t width,
                                              Tensor kernel, double wiener_lambda) {
    if (kernel.rank() != 2 || kernel.dims()[0] != kernel.dims()[1] || kernel.dims()[0] % 2 == 0) {
        throw ParameterError("blur kernel must be square with odd size, got " + dims_to_string(kernel.dims()));
    }
    const std::size_t ks = kernel.dims()[0];
    if (ks > height || ks > width) {
        throw ParameterError("blur kernel of size " + std::to_string(ks) + " does not fit a " +
                             std::to_string(height) + "x" + std::to_string(width) + " image");
    }
    double sum = 0.0;
    for (double v : kernel.values()) {
        if (v < 0.0) throw ParameterError("blur kernel must be nonnegative");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ParameterError("blur kernel must sum to 1");
    if (!(wiener_lambda > 0.0)) throw ParameterError("wiener lambda must be positive");

    DegradationOperator op;
    op.kind_ = OperatorKind::Blur;
    op.input_dims_ = op.output_dims_ = Dims{channels, height, width};
    op.wiener_lambda_ = wiener_lambda;
    op.kernel_ = std::move(kernel);

    auto plan = std::make_shared<detail::SpectralPlan>(height, width);
    // Zero-phase placement: kernel center at the origin, wrapped circularly.
    const std::size_t n = height * width;
    std::vector<std::complex<double>> buf(n, {0.0, 0.0});
    const std::ptrdiff_t c = static_cast<std::ptrdiff_t>(ks / 2);
    const auto h = static_cast<std::ptrdiff_t>(height);
    const auto w = static_cast<std::ptrdiff_t>(width);
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(ks); ++i) {
        for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(ks); ++j) {
            const auto yy = static_cast<std::size_t>(((i - c) % h + h) % h);
            const auto xx = static_cast<std::size_t>(((j - c) % w + w) % w);
            buf[yy * width + xx] += op.kernel_[static_cast<std::size_t>(i) * ks + static_cast<std::size_t>(j)];
        }
    }
    detail::FftwBuffer work(n);
    std::copy(buf.begin(), buf.end(), reinterpret_cast<std::complex<double>*>(work.ptr));
    fftw_execute_dft(plan->forward, work.ptr, work.ptr);
    const auto* spectrum = reinterpret_cast<const std::complex<double>*>(work.ptr);
    plan->transfer.assign(spectrum, spectrum + n);
    plan->wiener_gain.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto hval = plan->transfer[i];
        plan->wiener_gain[i] = std::conj(hval) / (std::norm(hval) + wiener_lambda);
    }
    op.plan_ = std::move(plan);
    return op;
}

DegradationOperator DegradationOperator::super_res4(std::size_t channels, std::size_t height, std::size_t width) {
    if (height % 4 != 0 || width % 4 != 0) {
        throw ShapeError("superres4 needs height and width divisible by 4");
    }
    DegradationOperator op;
    op.kind_ = OperatorKind::SuperRes4;
    op.input_dims_ = Dims{channels, height, width};
    op.output_dims_ = Dims{channels, height / 4, width / 4};
    return op;
}

DegradationOperator DegradationOperator::denoise(Dims dims, double noise_sigma) {
    if (noise_sigma < 0.0) throw ParameterError("noise sigma must be nonnegative");
    DegradationOperator op;
    op.kind_ = OperatorKind::Denoise;
    op.input_dims_ = op.output_dims_ = std::move(dims);
    op.noise_sigma_ = noise_sigma;
    return op;
}

DegradationOperator DegradationOperator::matrix(Dims input_dims, Dims output_dims, std::vector<double> forward,
                                                std::vector<double> pinv) {
    const std::size_t cols = element_count(input_dims);
    const std::size_t rows = element_count(output_dims);
    if (forward.size() != rows * cols || pinv.size() != rows * cols) {
        throw ShapeError("matrix operator: expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                         " forward and its transpose-shaped pseudo-inverse");
    }
    DegradationOperator op;
    op.kind_ = OperatorKind::Matrix;
    op.input_dims_ = std::move(input_dims);
    op.output_dims_ = std::move(output_dims);
    op.forward_ = std::make_shared<const std::vector<double>>(std::move(forward));
    op.pinv_ = std::make_shared<const std::vector<double>>(std::move(pinv));
    return op;
}

const std::vector<std::complex<double>>& DegradationOperator::transfer_function() const {
    if (kind_ != OperatorKind::Blur) throw ParameterError("transfer function exists only for blur operators");
    return plan_->transfer;
}

Tensor DegradationOperator::blur_filter(const Tensor& x, bool wiener) const {
    const std::size_t h = plan_->height;
    const std::size_t w = plan_->width;
    const std::size_t n = h * w;
    const auto& gain = wiener ? plan_->wiener_gain : plan_->transfer;
    Tensor out(x.dims());
    detail::FftwBuffer work(n);
    auto* buf = reinterpret_cast<std::complex<double>*>(work.ptr);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t c = 0; c < x.channels(); ++c) {
        const double* src = x.data() + c * n;
        for (std::size_t i = 0; i < n; ++i) buf[i] = {src[i], 0.0};
        fftw_execute_dft(plan_->forward, work.ptr, work.ptr);
        for (std::size_t i = 0; i < n; ++i) buf[i] *= gain[i];
        fftw_execute_dft(plan_->backward, work.ptr, work.ptr);
        double* dst = out.data() + c * n;
        for (std::size_t i = 0; i < n; ++i) dst[i] = buf[i].real() * inv_n;
    }
    return out;
}

Tensor DegradationOperator::matrix_apply(const std::vector<double>& mat, const Tensor& x,
                                         const Dims& out_dims) const {
    Tensor out(out_dims);
    const std::size_t rows = out.size();
    const std::size_t cols = x.size();
    for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c) acc += mat[r * cols + c] * x[c];
        out[r] = acc;
    }
    return out;
}

Tensor DegradationOperator::apply(const Tensor& x) const {
    require_dims(x, input_dims_, "apply");
    switch (kind_) {
        case OperatorKind::Colorization: {
            Tensor out(output_dims_);
            const std::size_t n = x.height() * x.width();
            for (std::size_t p = 0; p < n; ++p) {
                const double m = (x[p] + x[n + p] + x[2 * n + p]) / 3.0;
                out[p] = out[n + p] = out[2 * n + p] = m;
            }
            return out;
        }
        case OperatorKind::Blur: return blur_filter(x, false);
        case OperatorKind::SuperRes4: {
            Tensor out(output_dims_);
            for (std::size_t c = 0; c < out.channels(); ++c)
                for (std::size_t u = 0; u < out.height(); ++u)
                    for (std::size_t v = 0; v < out.width(); ++v) {
                        // Pairwise sums, so a constant block averages to
                        // its value exactly and A A^+ is the identity.
                        double rows[4];
                        for (std::size_t i = 0; i < 4; ++i) {
                            const double* r = x.data() + (c * x.height() + 4 * u + i) * x.width() + 4 * v;
                            rows[i] = (r[0] + r[1]) + (r[2] + r[3]);
                        }
                        out.at(c, u, v) = ((rows[0] + rows[1]) + (rows[2] + rows[3])) / 16.0;
                    }
            return out;
        }
        case OperatorKind::Denoise: return x;
        case OperatorKind::Matrix: return matrix_apply(*forward_, x, output_dims_);
    }
    return x;
}

Tensor DegradationOperator::apply_pinv(const Tensor& y) const {
    require_dims(y, output_dims_, "apply_pinv");
    switch (kind_) {
        case OperatorKind::Colorization: return apply(y);  // A^+ = A: channel mean, replicated.
        case OperatorKind::Blur: return blur_filter(y, true);
        case OperatorKind::SuperRes4: {
            Tensor out(input_dims_);
            for (std::size_t c = 0; c < out.channels(); ++c)
                for (std::size_t i = 0; i < out.height(); ++i)
                    for (std::size_t j = 0; j < out.width(); ++j) out.at(c, i, j) = y.at(c, i / 4, j / 4);
            return out;
        }
        case OperatorKind::Denoise: return y;
        case OperatorKind::Matrix: return matrix_apply(*pinv_, y, input_dims_);
    }
    return y;
}

void FidelityUpdateConfig::validate() const {
    if (!(lambda_strength >= 0.0 && lambda_strength <= 1.0)) {
        throw ParameterError("fidelity lambda must lie in [0, 1]");
    }
    if (!(injected_noise_sigma >= 0.0)) throw ParameterError("injected noise sigma must be nonnegative");
}

Tensor fidelity_update(const Tensor& x, const Tensor& y, const DegradationOperator& op,
                       const FidelityUpdateConfig& cfg, Rng& rng) {
    cfg.validate();
    require_dims(x, op.input_dims(), "fidelity_update x");
    require_dims(y, op.output_dims(), "fidelity_update y");
    Tensor out = op.apply_pinv(y);
    if (cfg.lambda_strength != 0.0) {
        const Tensor range_part = op.apply_pinv(op.apply(x));
        const double lam = cfg.lambda_strength;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += lam * (x[i] - range_part[i]);
    }
    if (cfg.injected_noise_sigma > 0.0) {
        for (auto& v : out.values()) v += cfg.injected_noise_sigma * rng.normal();
    }
    return out;
}

}  // namespace flowsteer
