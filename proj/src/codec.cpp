// SPDX-License-Identifier: Apache-2.0
#include "flowsteer/codec.hpp"

#include "flowsteer/errors.hpp"

namespace flowsteer {

std::string to_string(CodecKind kind) {
    return kind == CodecKind::Identity ? "identity" : "haar2x2";
}

CodecKind codec_kind_from_string(const std::string& name) {
    if (name == "identity") return CodecKind::Identity;
    if (name == "haar2x2" || name == "haar") return CodecKind::HaarPatch2x2;
    throw ConfigError("unknown codec '" + name + "'");
}

LatentCodec::LatentCodec(CodecKind kind, Dims pixel_dims, double decode_noise)
    : kind_(kind), pixel_dims_(std::move(pixel_dims)), decode_noise_(decode_noise) {
    if (!(decode_noise_ >= 0.0)) throw ParameterError("codec decode noise must be nonnegative");
    element_count(pixel_dims_);
    if (kind_ == CodecKind::Identity) {
        latent_dims_ = pixel_dims_;
        return;
    }
    if (pixel_dims_.size() != 3 || pixel_dims_[1] % 2 != 0 || pixel_dims_[2] % 2 != 0) {
        throw ShapeError("haar2x2 codec needs {C, H, W} with even H and W, got " + dims_to_string(pixel_dims_));
    }
    latent_dims_ = {4 * pixel_dims_[0], pixel_dims_[1] / 2, pixel_dims_[2] / 2};
}

Tensor LatentCodec::encode(const Tensor& x) const {
    require_dims(x, pixel_dims_, "codec encode");
    if (kind_ == CodecKind::Identity) return x;
    Tensor z(latent_dims_);
    const std::size_t hh = latent_dims_[1];
    const std::size_t hw = latent_dims_[2];
    for (std::size_t c = 0; c < pixel_dims_[0]; ++c) {
        for (std::size_t y = 0; y < hh; ++y) {
            for (std::size_t u = 0; u < hw; ++u) {
                const double a = x.at(c, 2 * y, 2 * u);
                const double b = x.at(c, 2 * y, 2 * u + 1);
                const double d = x.at(c, 2 * y + 1, 2 * u);
                const double e = x.at(c, 2 * y + 1, 2 * u + 1);
                z.at(4 * c + 0, y, u) = 0.5 * (a + b + d + e);
                z.at(4 * c + 1, y, u) = 0.5 * (a - b + d - e);
                z.at(4 * c + 2, y, u) = 0.5 * (a + b - d - e);
                z.at(4 * c + 3, y, u) = 0.5 * (a - b - d + e);
            }
        }
    }
    return z;
}

Tensor LatentCodec::decode(const Tensor& z) const {
    require_dims(z, latent_dims_, "codec decode");
    if (kind_ == CodecKind::Identity) return z;
    Tensor x(pixel_dims_);
    const std::size_t hh = latent_dims_[1];
    const std::size_t hw = latent_dims_[2];
    for (std::size_t c = 0; c < pixel_dims_[0]; ++c) {
        for (std::size_t y = 0; y < hh; ++y) {
            for (std::size_t u = 0; u < hw; ++u) {
                const double s = z.at(4 * c + 0, y, u);
                const double h = z.at(4 * c + 1, y, u);
                const double v = z.at(4 * c + 2, y, u);
                const double g = z.at(4 * c + 3, y, u);
                x.at(c, 2 * y, 2 * u) = 0.5 * (s + h + v + g);
                x.at(c, 2 * y, 2 * u + 1) = 0.5 * (s - h + v - g);
                x.at(c, 2 * y + 1, 2 * u) = 0.5 * (s + h - v - g);
                x.at(c, 2 * y + 1, 2 * u + 1) = 0.5 * (s - h - v + g);
            }
        }
    }
    return x;
}

Tensor LatentCodec::decode(const Tensor& z, Rng& rng) const {
    Tensor x = decode(z);
    if (decode_noise_ > 0.0) {
        for (auto& v : x.values()) v += decode_noise_ * rng.normal();
    }
    return x;
}

}  // namespace flowsteer
