// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "flowsteer/rng.hpp"
#include "flowsteer/tensor.hpp"

namespace flowsteer {

enum class CodecKind { Identity, HaarPatch2x2 };

std::string to_string(CodecKind kind);
CodecKind codec_kind_from_string(const std::string& name);

/// Exactly invertible map between pixel space and the sampler's working space.
///
/// HaarPatch2x2 turns each 2x2 patch of channel c into four orthonormal
/// coefficients stored at latent channels 4c + {0: average, 1: horizontal,
/// 2: vertical, 3: diagonal}, so {C, H, W} becomes {4C, H/2, W/2}.
///
/// `decode_noise` > 0 adds N(0, decode_noise^2) to every decoded pixel to
/// mimic a lossy autoencoder; the caller supplies the generator.
class LatentCodec {
public:
    LatentCodec(CodecKind kind, Dims pixel_dims, double decode_noise = 0.0);

    CodecKind kind() const noexcept { return kind_; }
    const Dims& pixel_dims() const noexcept { return pixel_dims_; }
    const Dims& latent_dims() const noexcept { return latent_dims_; }
    double decode_noise() const noexcept { return decode_noise_; }

    Tensor encode(const Tensor& x) const;
    /// Noise-free inverse of encode.
    Tensor decode(const Tensor& z) const;
    /// decode plus the optional lossy-codec perturbation (no draws when off).
    Tensor decode(const Tensor& z, Rng& rng) const;

private:
    CodecKind kind_;
    Dims pixel_dims_;
    Dims latent_dims_;
    double decode_noise_;
};

}  // namespace flowsteer
