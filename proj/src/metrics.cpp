// SPDX-License-Identifier: Apache-2.0
#include "flowsteer/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <vector>

#include "flowsteer/errors.hpp"

namespace flowsteer {

double mse(const Tensor& x, const Tensor& ref) {
    require_same_shape(x, ref, "mse");
    if (x.empty()) throw ShapeError("mse of empty tensors");
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - ref[i];
        acc += d * d;
    }
    return acc / static_cast<double>(x.size());
}

double psnr(const Tensor& x, const Tensor& ref, double peak) {
    if (!(peak > 0.0)) throw ParameterError("psnr peak must be positive");
    const double err = mse(x, ref);
    if (err == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / err);
}

double ssim(const Tensor& x, const Tensor& ref, const SsimParams& p) {
    require_same_shape(x, ref, "ssim");
    if (x.rank() != 3) throw ShapeError("ssim expects {C, H, W} images");
    if (p.window == 0 || p.window > x.height() || p.window > x.width()) {
        throw ParameterError("ssim window larger than image");
    }
    const double c1 = (p.k1 * p.peak) * (p.k1 * p.peak);
    const double c2 = (p.k2 * p.peak) * (p.k2 * p.peak);
    const std::size_t w = p.window;
    const double count = static_cast<double>(w * w);
    const std::size_t ny = x.height() - w + 1;
    const std::size_t nx = x.width() - w + 1;
    double total = 0.0;
    for (std::size_t c = 0; c < x.channels(); ++c) {
        double channel_sum = 0.0;
        for (std::size_t y0 = 0; y0 < ny; ++y0) {
            for (std::size_t x0 = 0; x0 < nx; ++x0) {
                double ma = 0.0, mb = 0.0;
                for (std::size_t dy = 0; dy < w; ++dy)
                    for (std::size_t dx = 0; dx < w; ++dx) {
                        ma += x.at(c, y0 + dy, x0 + dx);
                        mb += ref.at(c, y0 + dy, x0 + dx);
                    }
                ma /= count;
                mb /= count;
                double va = 0.0, vb = 0.0, cov = 0.0;
                for (std::size_t dy = 0; dy < w; ++dy)
                    for (std::size_t dx = 0; dx < w; ++dx) {
                        const double da = x.at(c, y0 + dy, x0 + dx) - ma;
                        const double db = ref.at(c, y0 + dy, x0 + dx) - mb;
                        va += da * da;
                        vb += db * db;
                        cov += da * db;
                    }
                va /= count;
                vb /= count;
                cov /= count;
                const double num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
                const double den = (ma * ma + mb * mb + c1) * (va + vb + c2);
                channel_sum += num / den;
            }
        }
        total += channel_sum / static_cast<double>(ny * nx);
    }
    return total / static_cast<double>(x.channels());
}

Tensor histogram_match(const Tensor& x, const Tensor& ref) {
    require_same_shape(x, ref, "histogram_match");
    if (x.rank() != 3) throw ShapeError("histogram_match expects {C, H, W} images");
    const std::size_t plane = x.height() * x.width();
    Tensor out(x.dims());
    std::vector<std::size_t> order(plane);
    std::vector<double> sorted_ref(plane);
    for (std::size_t c = 0; c < x.channels(); ++c) {
        const double* xs = x.data() + c * plane;
        const double* rs = ref.data() + c * plane;
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [xs](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
        std::copy_n(rs, plane, sorted_ref.begin());
        std::sort(sorted_ref.begin(), sorted_ref.end());
        double* os = out.data() + c * plane;
        for (std::size_t r = 0; r < plane; ++r) os[order[r]] = sorted_ref[r];
    }
    return out;
}

Residual measurement_residual(const DegradationOperator& op, const Tensor& x_hat, const Tensor& y) {
    require_dims(y, op.output_dims(), "measurement_residual");
    const Tensor diff = op.apply(x_hat) - y;
    return {norm_l2(diff), norm_linf(diff)};
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string MetricReport::csv_header() {
    return "task,operator,schedule,seed,psnr,ssim,mse,residual_l2,residual_linf,histogram_matched,image";
}

std::string MetricReport::csv_row() const {
    return task + "," + op + "," + schedule + "," + std::to_string(seed) + "," + format_number(psnr) + "," +
           format_number(ssim) + "," + format_number(mse) + "," + format_number(residual_l2) + "," +
           format_number(residual_linf) + "," + (histogram_matched ? "true" : "false") + "," +
           std::to_string(image);
}

MetricReport evaluate_restoration(const Tensor& x_hat, const Tensor& truth, const DegradationOperator& op,
                                  const Tensor& y, bool match_histogram) {
    MetricReport r;
    r.op = to_string(op.kind());
    const Residual res = measurement_residual(op, x_hat, y);
    r.residual_l2 = res.l2;
    r.residual_linf = res.linf;
    Tensor scored = x_hat;
    for (auto& v : scored.values()) v = std::clamp(v, 0.0, 1.0);
    if (match_histogram) scored = histogram_match(scored, truth);
    r.histogram_matched = match_histogram;
    r.mse = mse(scored, truth);
    r.psnr = psnr(scored, truth);
    r.ssim = scored.height() >= 8 && scored.width() >= 8 ? ssim(scored, truth) : std::nan("");
    return r;
}

}  // namespace flowsteer
