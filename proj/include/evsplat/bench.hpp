#pragma once

#include "evsplat/rasterizer.hpp"

#include <vector>

namespace evsplat {

struct BenchOptions {
    int repeats = 10;
    /// Frames rendered per repeat; 0 picks enough frames for roughly `target_seconds` per repeat.
    int frames_per_repeat = 0;
    double target_seconds = 0.25;
    int warmup_frames = 3;
    RenderSettings settings;
};

struct BenchResult {
    int frames_per_repeat = 0;
    std::vector<double> repeat_ms_per_frame;
    double ms_per_frame = 0.0; ///< median over repeats
    double fps = 0.0;
    double spread = 0.0;       ///< (max - min) / median of the per-repeat ms/frame
};

/// Wall-clock timing of `render` on a fixed scene and camera.
BenchResult bench_render(const Scene& scene, const Camera& cam, const Eigen::Vector3d& background,
                         const BenchOptions& options = {});

} // namespace evsplat
