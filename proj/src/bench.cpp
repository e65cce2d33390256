#include "evsplat/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace evsplat {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_for(const Scene& scene, const Camera& cam, const Eigen::Vector3d& bg, const RenderSettings& s, int frames) {
    const auto start = Clock::now();
    for (int i = 0; i < frames; ++i) {
        const RenderOutput out = render(scene, cam, bg, s);
        // Keep the optimiser from discarding the work.
        if (out.image.empty()) fail(ErrorCode::kInvalidArgument, "empty render");
    }
    return std::chrono::duration<double>(Clock::now() - start).count();
}

} // namespace

BenchResult bench_render(const Scene& scene, const Camera& cam, const Eigen::Vector3d& background,
                         const BenchOptions& options) {
    if (options.repeats < 1) fail(ErrorCode::kInvalidArgument, "bench needs at least one repeat");
    if (options.frames_per_repeat < 0 || !(options.target_seconds > 0.0)) {
        fail(ErrorCode::kInvalidArgument, "bench frame count / target time out of range");
    }
    validate_camera(cam);
    validate_scene(scene);

    seconds_for(scene, cam, background, options.settings, std::max(1, options.warmup_frames));
    BenchResult result;
    result.frames_per_repeat = options.frames_per_repeat;
    if (result.frames_per_repeat == 0) {
        // Calibrate on a short probe, then size repeats to the target duration.
        int probe = 1;
        double t = seconds_for(scene, cam, background, options.settings, probe);
        while (t < 0.02 && probe < (1 << 20)) {
            probe *= 2;
            t = seconds_for(scene, cam, background, options.settings, probe);
        }
        result.frames_per_repeat = std::max(1, static_cast<int>(std::ceil(options.target_seconds * probe / t)));
    }

    for (int r = 0; r < options.repeats; ++r) {
        const double t = seconds_for(scene, cam, background, options.settings, result.frames_per_repeat);
        result.repeat_ms_per_frame.push_back(1000.0 * t / result.frames_per_repeat);
    }
    std::vector<double> sorted = result.repeat_ms_per_frame;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t k = sorted.size();
    result.ms_per_frame = k % 2 ? sorted[k / 2] : 0.5 * (sorted[k / 2 - 1] + sorted[k / 2]);
    result.fps = 1000.0 / result.ms_per_frame;
    result.spread = (sorted.back() - sorted.front()) / result.ms_per_frame;
    return result;
}

} // namespace evsplat
