#pragma once

#include "evsplat/common.hpp"

#include <filesystem>

namespace evsplat {

/// 8-bit PNG (gray or RGB); values are clamped to [0, 1] and rounded.
void write_png(const std::filesystem::path& path, const Image& image);

/// Lossless float dump: "EVSF", then little-endian uint32 version (1), width, height, channels,
/// then width * height * channels little-endian float32 values, row-major, channels interleaved.
void write_float_image(const std::filesystem::path& path, const Image& image);
Image read_float_image(const std::filesystem::path& path);

} // namespace evsplat
