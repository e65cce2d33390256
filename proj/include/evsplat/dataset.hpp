#pragma once

#include "evsplat/common.hpp"
#include "evsplat/events.hpp"
#include "evsplat/rasterizer.hpp"
#include "evsplat/splat.hpp"
#include "evsplat/trainer.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace evsplat {

inline constexpr int kManifestFormatVersion = 1;

// ---------------------------------------------------------------------------------------------
// Manifest: the on-disk description of a dataset. Paths are relative to the manifest's folder.

struct ManifestView {
    std::string name;
    std::string blurry;      ///< float dump, H x W x 3
    std::string blurry_png;  ///< optional preview
    double t_start = 0.0;
    double t_end = 1.0;
    std::vector<Pose> poses; ///< world-to-camera, one per latent instant
    std::string events;
    std::string sharp;                ///< optional: ground truth at the mid-exposure pose
    std::vector<std::string> latents; ///< optional: ground-truth latent frames

    friend bool operator==(const ManifestView&, const ManifestView&) = default;
};

struct ManifestTestView {
    std::string name;
    Pose pose;
    std::string sharp;

    friend bool operator==(const ManifestTestView&, const ManifestTestView&) = default;
};

struct Manifest {
    int format_version = kManifestFormatVersion;
    Intrinsics intrinsics;
    int n_latents = 5;
    Thresholds thresholds;
    Eigen::Vector3d background = Eigen::Vector3d::Zero();
    std::string points;
    std::vector<ManifestView> views;
    std::vector<ManifestTestView> test_views;
};

/// Parses and structurally validates a manifest (no referenced files are opened).
Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

/// Point list: `x y z` or `x y z r g b` per line, `#` comments ignored.
/// A single camera for `render`: JSON with format_version, intrinsics, pose {q, t} and an
/// optional background colour.
struct CameraFile {
    Intrinsics intrinsics;
    Pose pose;
    Eigen::Vector3d background = Eigen::Vector3d::Zero();
};

CameraFile read_camera_file(const std::filesystem::path& path);
void write_camera_file(const std::filesystem::path& path, const CameraFile& camera);

PointCloud read_points(const std::filesystem::path& path);
void write_points(const std::filesystem::path& path, const PointCloud& points);

struct TestView {
    std::string name;
    Pose pose;
    Image sharp;
};

/// Fully loaded, validated dataset.
struct Dataset {
    Intrinsics intrinsics;
    int n_latents = 5;
    Thresholds thresholds;
    Eigen::Vector3d background = Eigen::Vector3d::Zero();
    std::vector<View> views;
    std::vector<std::optional<Image>> sharp;           ///< per view, mid-exposure ground truth
    std::vector<std::vector<Image>> latents;           ///< per view, empty when absent
    std::vector<TestView> test_views;
    PointCloud points;
};

/// Loads every referenced file and checks all invariants eagerly; diagnostics name the view,
/// file and line.
Dataset load_dataset(const std::filesystem::path& manifest_path);

// ---------------------------------------------------------------------------------------------
// Synthetic scenes with known ground truth.

/// Camera motion during one exposure: rotation SLERPed and translation lerped from start to end.
struct ShakeTrajectory {
    Pose start;
    Pose end;
};

Pose interpolate_pose(const Pose& start, const Pose& end, double s);

struct SyntheticSpec {
    Scene scene;
    Intrinsics intrinsics;
    std::vector<ShakeTrajectory> views;
    std::vector<Pose> test_poses;
    int n_latents = 5;
    Thresholds thresholds;
    double exposure = 0.04;             ///< seconds per view
    Eigen::Vector3d background = Eigen::Vector3d::Zero();
    PointCloud init_points;             ///< initialisation handed to training
    std::uint64_t seed = 0;
};

void validate_synthetic_spec(const SyntheticSpec& spec);

struct HarnessOptions {
    int width = 64;
    int height = 64;
    int gaussians = 200;
    int views = 8;
    int test_views = 4;
    int n_latents = 5;
    Thresholds thresholds;
    double shake_rotation = 0.03;   ///< radians of in-exposure rotation
    double shake_translation = 0.05; ///< scene units of in-exposure translation
    double point_noise = 0.03;      ///< std-dev added to ground-truth means for the init points
    std::uint64_t seed = 0;
};

/// The standard desk-scale harness: a textured relief of Gaussians seen by cameras on an arc,
/// each exposure with a random camera shake, plus held-out sharp poses.
SyntheticSpec standard_harness(const HarnessOptions& options = {});

struct SyntheticDataset {
    Manifest manifest;
    Dataset dataset;
    std::vector<std::vector<Image>> latents; ///< per view, per instant (RGB)
};

/// Renders the latent frames of every view, averages them into the blurry frame, simulates the
/// events, and (when out_dir is non-empty) writes manifest.json plus all referenced files.
SyntheticDataset generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out_dir,
                                    int threads = 1);

// ---------------------------------------------------------------------------------------------
// Evaluation.

enum class EvalMode { kDeblur, kNovelView };

EvalMode parse_eval_mode(std::string_view text);

struct MetricsRow {
    std::string name;
    double psnr = 0.0;
    double ssim = 0.0;
};

struct MetricsTable {
    std::vector<MetricsRow> rows;
    MetricsRow mean;
};

/// Deblur mode renders the mid-exposure pose of each training view; novel-view mode renders
/// the held-out poses. Throws Error(kModeUnavailable) without the needed ground truth.
MetricsTable evaluate(const Scene& scene, const Dataset& dataset, EvalMode mode,
                      const RenderSettings& settings = {});

std::string format_metrics_csv(const MetricsTable& table);
std::string format_metrics_table(const MetricsTable& table);

} // namespace evsplat
