// SPDX-License-Identifier: Apache-2.0
#include "flowsteer/dataset.hpp"

#include <array>
#include <cmath>
#include <numbers>

#include "flowsteer/errors.hpp"

namespace flowsteer {

namespace {

constexpr int kSuper = 4;

struct Shape {
    bool ellipse;
    double cx, cy, rx, ry;
    std::array<double, 3> colour;

    bool contains(double px, double py) const {
        const double dx = (px - cx) / rx;
        const double dy = (py - cy) / ry;
        return ellipse ? dx * dx + dy * dy <= 1.0 : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
    }
};

std::array<double, 3> random_colour(Rng& rng) {
    return {rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)};
}

}  // namespace

Tensor render_shape_image(Rng& rng, std::size_t size) {
    if (size < kMinShapeSize || size > kMaxShapeSize) {
        throw ParameterError("shape image size must lie in [8, 64]");
    }
    const double s = static_cast<double>(size);
    const auto c0 = random_colour(rng);
    const auto c1 = random_colour(rng);
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double gx = std::cos(angle);
    const double gy = std::sin(angle);

    const std::size_t n_shapes = 1 + rng.index(3);
    std::vector<Shape> shapes;
    for (std::size_t k = 0; k < n_shapes; ++k) {
        Shape sh;
        sh.ellipse = rng.uniform() < 0.5;
        sh.cx = rng.uniform(0.2, 0.8) * s;
        sh.cy = rng.uniform(0.2, 0.8) * s;
        sh.rx = rng.uniform(0.12, 0.35) * s;
        sh.ry = rng.uniform(0.12, 0.35) * s;
        sh.colour = random_colour(rng);
        shapes.push_back(sh);
    }

    Tensor img = Tensor::image(3, size, size);
    for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
            std::array<double, 3> acc{};
            for (int sy = 0; sy < kSuper; ++sy) {
                for (int sx = 0; sx < kSuper; ++sx) {
                    const double px = static_cast<double>(x) + (sx + 0.5) / kSuper;
                    const double py = static_cast<double>(y) + (sy + 0.5) / kSuper;
                    // Gradient position in [0, 1] along (gx, gy) through the image centre.
                    const double u = 0.5 + ((px - 0.5 * s) * gx + (py - 0.5 * s) * gy) / (s * std::numbers::sqrt2);
                    std::array<double, 3> colour;
                    for (int c = 0; c < 3; ++c) colour[c] = (1.0 - u) * c0[c] + u * c1[c];
                    // Later shapes are drawn on top.
                    for (const auto& sh : shapes)
                        if (sh.contains(px, py)) colour = sh.colour;
                    for (int c = 0; c < 3; ++c) acc[c] += colour[c];
                }
            }
            for (std::size_t c = 0; c < 3; ++c) img.at(c, y, x) = acc[c] / (kSuper * kSuper);
        }
    }
    return img;
}

std::vector<Tensor> gen_shape_dataset(std::size_t count, std::size_t size, std::uint64_t seed) {
    if (size < kMinShapeSize || size > kMaxShapeSize) {
        throw ParameterError("shape image size must lie in [8, 64]");
    }
    std::vector<Tensor> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Rng rng(derive_seed(seed, i));
        out.push_back(render_shape_image(rng, size));
    }
    return out;
}

GmmTarget two_mode_gmm() {
    GmmTarget g;
    g.weights = {0.5, 0.5};
    g.means = {Tensor(Dims{2}, std::vector<double>{2.0, 0.0}), Tensor(Dims{2}, std::vector<double>{-2.0, 0.0})};
    g.stdevs = {0.1, 0.1};
    return g;
}

}  // namespace flowsteer
