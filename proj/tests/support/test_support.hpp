#pragma once

#include "evsplat/rasterizer.hpp"
#include "evsplat/splat.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <random>
#include <vector>

namespace evsplat::testing {

inline Intrinsics square_intrinsics(int size, double focal) {
    return Intrinsics{focal, focal, 0.5 * (size - 1), 0.5 * (size - 1), size, size};
}

/// Camera at the world origin looking down +z.
inline Camera identity_camera(int size, double focal) {
    Camera cam;
    cam.intrinsics = square_intrinsics(size, focal);
    return cam;
}

inline Camera tilted_camera(int size, double focal, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-0.15, 0.15);
    Camera cam = identity_camera(size, focal);
    cam.rotation = (Eigen::AngleAxisd(u(rng), Eigen::Vector3d::UnitX()) *
                    Eigen::AngleAxisd(u(rng), Eigen::Vector3d::UnitY()) *
                    Eigen::AngleAxisd(u(rng), Eigen::Vector3d::UnitZ()))
                       .toRotationMatrix();
    cam.translation = Eigen::Vector3d(u(rng), u(rng), u(rng));
    return cam;
}

/// Random Gaussians in front of the camera, sized to cover a few pixels each.
inline Scene random_scene(int count, std::mt19937_64& rng, double depth = 3.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Scene scene;
    for (int i = 0; i < count; ++i) {
        Gaussian3D g;
        g.mean = {(u(rng) - 0.5) * 1.2, (u(rng) - 0.5) * 1.2, depth + (u(rng) - 0.5) * 1.0};
        g.rotation = {u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5};
        g.rotation *= (0.5 + u(rng)) / g.rotation.norm();
        g.log_scale = {std::log(0.08 + 0.15 * u(rng)), std::log(0.08 + 0.15 * u(rng)), std::log(0.05 + 0.1 * u(rng))};
        g.opacity_logit = -1.0 + 3.0 * u(rng);
        g.color = {u(rng), u(rng), u(rng)};
        scene.push_back(g);
    }
    return scene;
}

inline Image random_image(int w, int h, int c, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Image img(w, h, c);
    for (double& v : img.data()) v = u(rng);
    return img;
}

/// Flattened view of one scalar parameter of a Gaussian: index 0..13 in the order
/// mean(3), rotation(4), log_scale(3), opacity_logit(1), color(3).
inline double& parameter(Gaussian3D& g, int k) {
    if (k < 3) return g.mean[k];
    if (k < 7) return g.rotation[k - 3];
    if (k < 10) return g.log_scale[k - 7];
    if (k == 10) return g.opacity_logit;
    return g.color[k - 11];
}

inline double gradient_entry(const GaussianGradient& g, int k) {
    if (k < 3) return g.mean[k];
    if (k < 7) return g.rotation[k - 3];
    if (k < 10) return g.log_scale[k - 7];
    if (k == 10) return g.opacity_logit;
    return g.color[k - 11];
}

inline constexpr int kParametersPerGaussian = 14;

struct FiniteDifference {
    double value = 0.0;
    double step = 0.0;
    bool smooth = false; ///< false when no step left the discrete compositing state unchanged
};

/// Central difference of `loss` in parameter (gaussian, k). The step shrinks from 1e-4 until
/// `signature` agrees at both probes, i.e. the probes stay on one smooth branch of the
/// piecewise-smooth loss (same per-pixel splat sets, same L1 signs, ...).
template <typename Loss, typename Signature>
FiniteDifference central_difference(Scene scene, int gaussian, int k, Loss&& loss, Signature&& signature) {
    double& p = parameter(scene[gaussian], k);
    const double original = p;
    for (double step = 1e-4; step >= 1e-7; step *= 0.1) {
        p = original + step;
        const auto sig_plus = signature(scene);
        const double plus = loss(scene);
        p = original - step;
        const auto sig_minus = signature(scene);
        const double minus = loss(scene);
        p = original;
        if (sig_plus == sig_minus) return {(plus - minus) / (2.0 * step), step, true};
    }
    return {0.0, 0.0, false};
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("evsplat_" + tag + "_" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline bool gradients_agree(double analytic, double numeric, double rel = 1e-4, double abs_floor = 1e-7) {
    const double diff = std::abs(analytic - numeric);
    return diff <= abs_floor || diff <= rel * std::max(std::abs(analytic), std::abs(numeric));
}

} // namespace evsplat::testing
