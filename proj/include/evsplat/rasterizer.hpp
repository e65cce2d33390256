#pragma once

#include "evsplat/common.hpp"
#include "evsplat/splat.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace evsplat {

/// Compositing limits shared by the forward and backward passes.
inline constexpr double kMaxAlpha = 0.99;
inline constexpr double kMinAlpha = 1.0 / 255.0;
inline constexpr double kMinTransmittance = 1e-4;
/// A splat touches a pixel only inside its 3-sigma ellipse (squared Mahalanobis distance <= 9).
inline constexpr double kExtentSigmas = 3.0;
inline constexpr int kTileSize = 16;

struct RenderSettings {
    int threads = 1;
    /// Tile-binned fast path. When false every pixel walks every visible splat.
    bool tiled = true;
    /// Gradient buffers are partitioned independently of the thread count, so gradients are
    /// bit-identical for any `threads`. Otherwise one buffer per worker.
    bool deterministic = true;
};

struct RenderOutput {
    Image image; ///< H x W x 3
    Image alpha; ///< H x W x 1, equals 1 - final transmittance
    /// Number of splats composited at each pixel (row-major).
    std::vector<std::uint32_t> contributors;
};

struct GaussianGradient {
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    Eigen::Vector4d rotation = Eigen::Vector4d::Zero();
    Eigen::Vector3d log_scale = Eigen::Vector3d::Zero();
    double opacity_logit = 0.0;
    Eigen::Vector3d color = Eigen::Vector3d::Zero();

    GaussianGradient& operator+=(const GaussianGradient& other);
    friend bool operator==(const GaussianGradient&, const GaussianGradient&) = default;
};

using SceneGradients = std::vector<GaussianGradient>;

/// Depth-sorted front-to-back alpha compositing of the scene.
///
/// Splats at or in front of the near plane are culled; the rest are ordered by camera depth with
/// ties broken by index. Per pixel alpha = min(0.99, sigmoid(opacity_logit) * weight), splats
/// with alpha < 1/255 or outside their 3-sigma ellipse are skipped, and compositing stops before
/// a splat that would drop the transmittance below 1e-4. The leftover transmittance blends in
/// the background.
RenderOutput render(const Scene& scene, const Camera& cam, const Eigen::Vector3d& background,
                    const RenderSettings& settings = {});

/// Adjoint of render: gradients of a scalar loss with respect to every Gaussian parameter, given
/// dLoss/dImage (H x W x 3).
SceneGradients render_backward(const Scene& scene, const Camera& cam, const Eigen::Vector3d& background,
                               const Image& upstream, const RenderSettings& settings = {});

} // namespace evsplat
