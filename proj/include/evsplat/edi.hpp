#pragma once

#include "evsplat/common.hpp"
#include "evsplat/events.hpp"

#include <vector>

namespace evsplat {

/// N sharp frames at equally spaced instants spanning one exposure.
struct LatentSet {
    std::vector<Image> images;
    std::vector<double> timestamps;
};

/// Per-pixel multiplicative brightness factors E_1..E_n relative to the first instant.
///
/// E_1 = 1 and E_{i+1} = E_i * exp(c_pos * #pos_i - c_neg * #neg_i), where #pos_i / #neg_i count
/// the events of bin i at that pixel. Returned as n single-channel images.
std::vector<Image> exposure_factors(const EventStream& stream, int n, const Thresholds& thresholds,
                                    int width, int height);

enum class LatentClamp { kUnitRange, kNone };

/// Event-based double integral: the blurry frame is the mean of the n latent frames and each
/// latent frame is the first one scaled by its exposure factor. Solving gives
/// I_1 = n * B / sum_i E_i and I_i = I_1 * E_i per pixel. The luminance factor scales every
/// channel identically. Clamping to [0, 1] happens last.
LatentSet reconstruct_latents(const Image& blurry, const EventStream& stream, int n,
                              const Thresholds& thresholds, LatentClamp clamp = LatentClamp::kUnitRange,
                              int threads = 1);

} // namespace evsplat
