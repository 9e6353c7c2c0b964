// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "flowsteer/operators.hpp"
#include "flowsteer/tensor.hpp"

namespace flowsteer {

/// 10 log10(peak^2 / MSE); +infinity when the images are identical.
double psnr(const Tensor& x, const Tensor& ref, double peak = 1.0);
double mse(const Tensor& x, const Tensor& ref);

struct SsimParams {
    std::size_t window = 8;
    double k1 = 0.01;
    double k2 = 0.03;
    double peak = 1.0;
};

/// Mean SSIM over all valid positions of a uniform window, averaged over
/// channels. Images are {C, H, W}.
double ssim(const Tensor& x, const Tensor& ref, const SsimParams& params = {});

/// Per-channel rank mapping: the k-th smallest value of x (ties in original
/// order) is replaced by the k-th smallest value of ref.
Tensor histogram_match(const Tensor& x, const Tensor& ref);

struct Residual {
    double l2 = 0.0;
    double linf = 0.0;
};
Residual measurement_residual(const DegradationOperator& op, const Tensor& x_hat, const Tensor& y);

struct MetricReport {
    std::string task;
    std::string op;
    std::string schedule;
    std::uint64_t seed = 0;
    double psnr = 0.0;
    double ssim = 0.0;
    double mse = 0.0;
    double residual_l2 = 0.0;
    double residual_linf = 0.0;
    bool histogram_matched = false;
    /// Dataset index of the scored image; -1 when not applicable.
    long image = -1;

    static std::string csv_header();
    std::string csv_row() const;
};

/// Scores `x_hat` against `truth`. The residual uses x_hat as given; PSNR,
/// SSIM and MSE use x_hat clamped to [0, 1] (what an exported image holds),
/// histogram-matched to `truth` when `match_histogram` is set.
MetricReport evaluate_restoration(const Tensor& x_hat, const Tensor& truth, const DegradationOperator& op,
                                  const Tensor& y, bool match_histogram);

/// Fixed CSV number format: 6 significant digits, "inf"/"-inf"/"nan".
std::string format_number(double v);

}  // namespace flowsteer
