#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "flowsteer/errors.hpp"
#include "flowsteer/metrics.hpp"
#include "flowsteer/rng.hpp"

using namespace flowsteer;

namespace {

Tensor random_image(std::uint64_t seed, std::size_t c = 3, std::size_t h = 12, std::size_t w = 10) {
    Rng rng(seed);
    Tensor t(Dims{c, h, w});
    for (auto& v : t.values()) v = rng.uniform();
    return t;
}

// Windowed SSIM from per-window sums of x, y, x^2, y^2 and xy.
double ssim_oracle(const Tensor& a, const Tensor& b, std::size_t win, double c1, double c2) {
    double total = 0.0;
    for (std::size_t c = 0; c < a.channels(); ++c) {
        double acc = 0.0;
        std::size_t n = 0;
        for (std::size_t i = 0; i + win <= a.height(); ++i) {
            for (std::size_t j = 0; j + win <= a.width(); ++j) {
                double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
                for (std::size_t u = i; u < i + win; ++u) {
                    for (std::size_t v = j; v < j + win; ++v) {
                        const double p = a.at(c, u, v), q = b.at(c, u, v);
                        sa += p;
                        sb += q;
                        saa += p * p;
                        sbb += q * q;
                        sab += p * q;
                    }
                }
                const double m = static_cast<double>(win * win);
                const double ma = sa / m, mb = sb / m;
                const double va = saa / m - ma * ma, vb = sbb / m - mb * mb, cv = sab / m - ma * mb;
                acc += (2 * ma * mb + c1) * (2 * cv + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                ++n;
            }
        }
        total += acc / static_cast<double>(n);
    }
    return total / static_cast<double>(a.channels());
}

}  // namespace

TEST_CASE("psnr") {
    const Tensor a = random_image(1);
    CHECK(std::isinf(psnr(a, a)));
    CHECK(psnr(a, a) > 0);

    Tensor b = a;
    for (auto& v : b.values()) v += 0.1;
    CHECK(mse(b, a) == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(psnr(b, a) == doctest::Approx(20.0).epsilon(1e-10));

    // MSE of 0.01 from a single large error spread over 100 pixels.
    Tensor z(Dims{1, 10, 10}), e(Dims{1, 10, 10});
    e[0] = 1.0;
    CHECK(psnr(e, z) == doctest::Approx(20.0).epsilon(1e-12));
    CHECK(psnr(e, z, 255.0) == doctest::Approx(20.0 + 20.0 * std::log10(255.0)).epsilon(1e-12));

    CHECK_THROWS_AS(psnr(a, Tensor(Dims{3, 12, 11})), ShapeError);
    CHECK_THROWS_AS(psnr(a, a, 0.0), ParameterError);
}

TEST_CASE("psnr is symmetric and agrees with mse") {
    for (std::uint64_t s = 0; s < 20; ++s) {
        const Tensor a = random_image(100 + s), b = random_image(200 + s);
        CHECK(psnr(a, b) == psnr(b, a));
        CHECK(std::abs(psnr(a, b) - 10.0 * std::log10(1.0 / mse(a, b))) <= 1e-9);
    }
}

TEST_CASE("ssim") {
    SUBCASE("identity is exactly one") {
        for (std::uint64_t s = 0; s < 10; ++s) {
            const Tensor a = random_image(300 + s);
            CHECK(ssim(a, a) == 1.0);
        }
    }
    SUBCASE("matches a sum-of-moments oracle") {
        for (std::uint64_t s = 0; s < 10; ++s) {
            const Tensor a = random_image(400 + s), b = random_image(500 + s);
            CHECK(ssim(a, b) == doctest::Approx(ssim_oracle(a, b, 8, 1e-4, 9e-4)).epsilon(1e-9));
            SsimParams p;
            p.window = 3;
            CHECK(ssim(a, b, p) == doctest::Approx(ssim_oracle(a, b, 3, 1e-4, 9e-4)).epsilon(1e-9));
        }
    }
    SUBCASE("constant images reduce to the luminance term") {
        const double mu_a = 0.7, mu_b = 0.4, c1 = 1e-4;
        const Tensor a(Dims{3, 8, 8}, mu_a), b(Dims{3, 8, 8}, mu_b);
        const double expect = (2 * mu_a * mu_b + c1) / (mu_a * mu_a + mu_b * mu_b + c1);
        CHECK(ssim(a, b) == doctest::Approx(expect).epsilon(1e-12));
        CHECK(ssim(a, b) < 1.0);
    }
    SUBCASE("anti-correlated patterns score negative") {
        // Equal means, variance 0.01 each, covariance -0.01.
        const Tensor a(Dims{1, 2, 2}, {0.6, 0.4, 0.4, 0.6});
        const Tensor b(Dims{1, 2, 2}, {0.4, 0.6, 0.6, 0.4});
        SsimParams p;
        p.window = 2;
        const double c2 = 9e-4;
        CHECK(ssim(a, b, p) == doctest::Approx((c2 - 0.02) / (0.02 + c2)).epsilon(1e-10));
        CHECK(ssim(a, b, p) < 0.0);
    }
    SUBCASE("bounded") {
        for (std::uint64_t s = 0; s < 20; ++s) {
            Tensor a = random_image(600 + s), b = random_image(700 + s);
            for (auto& v : b.values()) v = 1.0 - v;
            const double v = ssim(a, b);
            CHECK(v >= -1.0);
            CHECK(v <= 1.0);
        }
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(ssim(Tensor(Dims{3, 6, 6}), Tensor(Dims{3, 6, 6})), ParameterError);
        CHECK_THROWS_AS(ssim(random_image(1), random_image(2, 3, 12, 11)), ShapeError);
        CHECK_THROWS_AS(ssim(Tensor(Dims{64}), Tensor(Dims{64})), ShapeError);
    }
}

TEST_CASE("histogram matching") {
    SUBCASE("identity") {
        const Tensor a = random_image(800);
        CHECK(histogram_match(a, a) == a);
    }
    SUBCASE("constant input ties resolve in pixel order") {
        const Tensor x(Dims{1, 2, 2}, 0.5);
        const Tensor ref(Dims{1, 2, 2}, {0.4, 0.1, 0.3, 0.2});
        CHECK(histogram_match(x, ref) == Tensor(Dims{1, 2, 2}, {0.1, 0.2, 0.3, 0.4}));
    }
    SUBCASE("hand rank map") {
        const Tensor x(Dims{1, 2, 2}, {0.9, 0.1, 0.5, 0.1});
        const Tensor ref(Dims{1, 2, 2}, {3.0, 1.0, 4.0, 2.0});
        // Ranks of x: pixel 1, pixel 3, pixel 2, pixel 0.
        CHECK(histogram_match(x, ref) == Tensor(Dims{1, 2, 2}, {4.0, 1.0, 3.0, 2.0}));
    }
    SUBCASE("grey input takes each channel's multiset") {
        Tensor grey(Dims{3, 6, 6});
        Rng rng(801);
        for (std::size_t i = 0; i < 36; ++i) {
            const double g = std::floor(rng.uniform() * 5.0) / 5.0;  // with ties
            for (std::size_t c = 0; c < 3; ++c) grey[c * 36 + i] = g;
        }
        const Tensor ref = random_image(802, 3, 6, 6);
        const Tensor out = histogram_match(grey, ref);
        for (std::size_t c = 0; c < 3; ++c) {
            std::vector<double> a(out.data() + c * 36, out.data() + (c + 1) * 36);
            std::vector<double> b(ref.data() + c * 36, ref.data() + (c + 1) * 36);
            std::sort(a.begin(), a.end());
            std::sort(b.begin(), b.end());
            CHECK(a == b);
            // Monotone: x_i < x_j implies out_i <= out_j.
            for (std::size_t i = 0; i < 36; ++i)
                for (std::size_t j = 0; j < 36; ++j)
                    if (grey[c * 36 + i] < grey[c * 36 + j]) CHECK(out[c * 36 + i] <= out[c * 36 + j]);
        }
    }
    SUBCASE("idempotent") {
        for (std::uint64_t s = 0; s < 10; ++s) {
            Tensor x = random_image(900 + s);
            for (auto& v : x.values()) v = std::round(v * 4.0);
            const Tensor ref = random_image(950 + s);
            const Tensor once = histogram_match(x, ref);
            CHECK(histogram_match(once, ref) == once);
        }
    }
    CHECK_THROWS_AS(histogram_match(random_image(1), random_image(2, 3, 10, 12)), ShapeError);
}

TEST_CASE("measurement residual") {
    const Tensor x = random_image(1000, 3, 8, 8);
    Rng rng(1001);
    const Tensor p = rng.normal_tensor(Dims{3, 8, 8});
    for (const auto& op : {DegradationOperator::colorization(8, 8), DegradationOperator::super_res4(3, 8, 8)}) {
        const Tensor y = op.apply(x);
        const Residual zero = measurement_residual(op, x, y);
        CHECK(zero.l2 == 0.0);
        CHECK(zero.linf == 0.0);
        const Tensor null_part = p - op.apply_pinv(op.apply(p));
        const Residual r = measurement_residual(op, x + null_part, y);
        CHECK(r.l2 <= 1e-6);
        CHECK(r.linf <= 1e-6);
    }
    const auto den = DegradationOperator::denoise(Dims{3, 8, 8}, 0.2);
    const Residual r = measurement_residual(den, x, p);
    CHECK(r.l2 == doctest::Approx(norm_l2(x - p)).epsilon(1e-14));
    CHECK(r.linf == norm_linf(x - p));
    CHECK_THROWS_AS(measurement_residual(den, x, Tensor(Dims{3, 8, 9})), ShapeError);
}

TEST_CASE("restoration report") {
    const Tensor truth = random_image(1100, 3, 8, 8);
    const auto op = DegradationOperator::colorization(8, 8);
    const Tensor y = op.apply(truth);

    Tensor x_hat = truth;
    x_hat[0] = 1.5;  // out of range; clamped for scoring, raw for the residual
    const MetricReport plain = evaluate_restoration(x_hat, truth, op, y, false);
    Tensor clamped = x_hat;
    clamped[0] = 1.0;
    CHECK(plain.mse == doctest::Approx(mse(clamped, truth)).epsilon(1e-14));
    CHECK(std::abs(plain.psnr - 10.0 * std::log10(1.0 / plain.mse)) <= 1e-9);
    CHECK(plain.ssim == doctest::Approx(ssim(clamped, truth)).epsilon(1e-14));
    CHECK(plain.residual_linf == doctest::Approx((1.5 - truth[0]) / 3.0).epsilon(1e-12));
    CHECK_FALSE(plain.histogram_matched);
    CHECK(plain.op == "colorization");

    // A per-channel monotone distortion is undone by histogram matching.
    Tensor warped = truth;
    for (auto& v : warped.values()) v = v * v * 0.5 + 0.1;
    const MetricReport matched = evaluate_restoration(warped, truth, op, y, true);
    CHECK(matched.histogram_matched);
    CHECK(std::isinf(matched.psnr));
    CHECK(matched.ssim == 1.0);

    // Too small for the SSIM window: reported as nan.
    const Tensor small = random_image(1101, 3, 4, 4);
    const auto op4 = DegradationOperator::colorization(4, 4);
    CHECK(std::isnan(evaluate_restoration(small, small, op4, op4.apply(small), false).ssim));
}

TEST_CASE("report csv") {
    MetricReport r;
    r.task = "colorization";
    r.op = "colorization";
    r.schedule = "general";
    r.seed = 3;
    r.psnr = 21.123456789;
    r.ssim = 0.5;
    r.mse = 0.0077;
    r.residual_l2 = 0;
    r.residual_linf = std::numeric_limits<double>::infinity();
    r.histogram_matched = true;
    r.image = 7;
    CHECK(MetricReport::csv_header() ==
          "task,operator,schedule,seed,psnr,ssim,mse,residual_l2,residual_linf,histogram_matched,image");
    CHECK(r.csv_row() == "colorization,colorization,general,3,21.1235,0.5,0.0077,0,inf,true,7");
    CHECK(format_number(std::nan("")) == "nan");
    CHECK(format_number(-std::numeric_limits<double>::infinity()) == "-inf");
    CHECK(format_number(1234567.0) == "1.23457e+06");
}
