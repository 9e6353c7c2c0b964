// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "flowsteer/flow.hpp"
#include "flowsteer/rng.hpp"
#include "flowsteer/tensor.hpp"

namespace flowsteer {

inline constexpr std::size_t kMinShapeSize = 8;
inline constexpr std::size_t kMaxShapeSize = 64;

/// One procedural RGB image of size x size: a linear two-colour gradient
/// along a random direction, overlaid with one to three opaque ellipses or
/// rectangles. Shape edges are anti-aliased by 4x4 supersampled coverage.
/// Colours are drawn from [0.1, 0.9] per channel.
Tensor render_shape_image(Rng& rng, std::size_t size);

/// `count` images; image i is rendered from stream derive_seed(seed, i), so
/// any prefix of a dataset equals the smaller dataset with the same seed.
std::vector<Tensor> gen_shape_dataset(std::size_t count, std::size_t size, std::uint64_t seed);

/// Two equally weighted 2-D modes at (+-2, 0) with stdev 0.1.
GmmTarget two_mode_gmm();

}  // namespace flowsteer
