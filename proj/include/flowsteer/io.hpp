// SPDX-License-Identifier: Apache-2.0
#pragma once

// File formats.
//
// FST1 tensor record, all integers little-endian:
//   "FST1" | version byte (1) | ndim u32 | ndim x extent u32 | payload f32[prod(extents)]
// A file may hold several records back to back.
//
// Images are binary PPM (P6, 3 channels) or PGM (P5, 1 channel) with maxval
// 255. Export clamps to [0, 1], scales by 255 and rounds half away from zero.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "flowsteer/tensor.hpp"

namespace flowsteer {

inline constexpr std::uint8_t kFstVersion = 1;

void append_fst(std::vector<std::uint8_t>& out, const Tensor& t);
/// Decodes one record starting at `offset` and advances it past the record.
Tensor decode_fst(std::span<const std::uint8_t> bytes, std::size_t& offset);

void write_fst(const std::filesystem::path& path, const Tensor& t);
Tensor read_fst(const std::filesystem::path& path);
void write_fst_records(const std::filesystem::path& path, const std::vector<Tensor>& tensors);
std::vector<Tensor> read_fst_records(const std::filesystem::path& path);

std::uint8_t to_byte(double v) noexcept;

std::vector<std::uint8_t> encode_ppm(const Tensor& image);
Tensor decode_ppm(std::span<const std::uint8_t> bytes);
void write_ppm(const std::filesystem::path& path, const Tensor& image);
Tensor read_ppm(const std::filesystem::path& path);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace flowsteer
