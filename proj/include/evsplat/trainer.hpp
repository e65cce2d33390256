#pragma once

#include "evsplat/common.hpp"
#include "evsplat/events.hpp"
#include "evsplat/objective.hpp"
#include "evsplat/rasterizer.hpp"
#include "evsplat/splat.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <vector>

namespace evsplat {

/// Per-group Adam step sizes. Position rates are multiplied by the scene extent and decay
/// exponentially from `position` to `position_final` over the run.
struct LearningRates {
    double position = 1.6e-4;
    double position_final = 1.6e-6;
    double color = 2.5e-3;
    double opacity = 5e-2;
    double scale = 5e-3;
    double rotation = 1e-3;
};

struct TrainConfig {
    int iterations = 30000;
    LossWeights weights;
    LearningRates learning_rates;
    /// Scale for the position learning rate; <= 0 derives it from the training cameras.
    double spatial_extent = 0.0;
    std::uint64_t seed = 0;
    Eigen::Vector3d background = Eigen::Vector3d::Zero();
    bool deterministic = true;
    int threads = 1;
    /// Event frame pairs drawn per iteration.
    int event_pairs = 1;
    /// Baseline that fits each blurry image with a single render at the mid-exposure pose.
    bool single_pose = false;
    int checkpoint_every = 1000;
    /// Where checkpoints and the CSV log go; empty disables both.
    std::filesystem::path output_dir;
};

void validate_config(const TrainConfig& config);

/// One blurry training frame with its in-exposure poses and events.
struct View {
    std::string name;
    Image blurry;
    double t_start = 0.0;
    double t_end = 1.0;
    std::vector<Pose> poses; ///< ordered by timestamp, one per latent instant
    EventStream stream;
    Intrinsics intrinsics;
};

void validate_view(const View& view, int n);

/// Index of the mid-exposure pose, ceil(n / 2) counted from 1.
inline int mid_exposure_index(int n) { return (n + 1) / 2 - 1; }

struct PointCloud {
    std::vector<Eigen::Vector3d> positions;
    std::vector<Eigen::Vector3d> colors; ///< empty, or one per position
};

/// One isotropic Gaussian per point: log of the mean distance to the three nearest neighbours
/// (0.1 for a lone point), opacity 0.1, identity rotation, input colour or mid-gray.
Scene init_scene_from_points(const PointCloud& points);

/// Adam with bias correction (beta1 0.9, beta2 0.999, eps 1e-15) over the five parameter groups.
class AdamOptimizer {
public:
    struct GroupRates {
        double position = 0.0;
        double rotation = 0.0;
        double scale = 0.0;
        double opacity = 0.0;
        double color = 0.0;
    };

    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEpsilon = 1e-15;

    explicit AdamOptimizer(std::size_t gaussians);
    void step(Scene& scene, const SceneGradients& grads, const GroupRates& rates);
    long steps() const noexcept { return steps_; }

private:
    std::vector<double> first_;
    std::vector<double> second_;
    long steps_ = 0;
};

double scene_extent(std::span<const View> views);

/// Stateful optimisation loop: owns the scene, the optimiser moments and the seeded generator.
class Trainer {
public:
    using DensifyHook = std::function<void(Scene&, int iteration)>;

    Trainer(Scene initial, TrainConfig config, double extent);

    /// One optimisation step on `view`: renders every in-exposure pose, synthesises the blur,
    /// scores blur and event terms, back-propagates through the rasteriser and applies Adam.
    /// Throws Error(kTrainingDiverged) on a non-finite loss.
    LossBreakdown step(const View& view);

    /// Loss at the current parameters without updating them (event pair drawn from `pair_rng`).
    LossBreakdown evaluate(const View& view, std::mt19937_64& pair_rng) const;

    const Scene& scene() const noexcept { return scene_; }
    int iteration() const noexcept { return iteration_; }
    std::mt19937_64& rng() noexcept { return rng_; }
    void set_densify_hook(DensifyHook hook) { densify_ = std::move(hook); }

private:
    struct Prepared;
    Prepared prepare(const View& view, std::mt19937_64& rng) const;

    Scene scene_;
    TrainConfig config_;
    double extent_;
    AdamOptimizer adam_;
    std::mt19937_64 rng_;
    int iteration_ = 0;
    DensifyHook densify_;
};

struct TrainResult {
    Scene scene;
    std::vector<LossBreakdown> history;
};

/// Runs config.iterations steps with views drawn uniformly with replacement. Writes the CSV log
/// (`iter,l1,dssim,blur,event,total`), checkpoints and final.scene when config.output_dir is set.
TrainResult train(std::span<const View> dataset, const Scene& initial, const TrainConfig& config);

/// -10 log10(MSE), capped at 100 dB when MSE < 1e-10.
double psnr(const Image& a, const Image& b);
/// SSIM as a quality score (same window and constants as the D-SSIM loss).
double ssim_metric(const Image& a, const Image& b);

/// Uniform draw of an unordered frame pair (n < m) out of `count` frames.
std::pair<int, int> draw_frame_pair(int count, std::mt19937_64& rng);

} // namespace evsplat
