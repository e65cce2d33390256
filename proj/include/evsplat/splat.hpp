#pragma once

#include "evsplat/common.hpp"

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <filesystem>
#include <optional>
#include <vector>

namespace evsplat {

/// Low-pass dilation added to both diagonal entries of every projected covariance (pixel^2).
inline constexpr double kDilation = 0.3;
/// Gaussians whose camera-space depth is at or below this are culled.
inline constexpr double kNearPlane = 0.01;

using Matrix23d = Eigen::Matrix<double, 2, 3>;

/// Optimizable splat primitive. Rotation is a quaternion stored (w, x, y, z) and normalised
/// only when evaluated; scale and opacity live in log / logit space.
struct Gaussian3D {
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    Eigen::Vector4d rotation{1.0, 0.0, 0.0, 0.0};
    Eigen::Vector3d log_scale = Eigen::Vector3d::Zero();
    double opacity_logit = 0.0;
    Eigen::Vector3d color = Eigen::Vector3d::Constant(0.5);

    friend bool operator==(const Gaussian3D&, const Gaussian3D&) = default;
};

using Scene = std::vector<Gaussian3D>;

/// Rigid world-to-camera transform.
struct Pose {
    Eigen::Vector4d rotation{1.0, 0.0, 0.0, 0.0}; // (w, x, y, z)
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    friend bool operator==(const Pose&, const Pose&) = default;
};

struct Intrinsics {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 0;
    int height = 0;

    friend bool operator==(const Intrinsics&, const Intrinsics&) = default;
};

/// Pinhole camera. Pixel (i, j) has its centre at image coordinates (i, j).
struct Camera {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();
    Intrinsics intrinsics;

    Eigen::Vector3d to_camera(const Eigen::Vector3d& world) const { return rotation * world + translation; }
    Eigen::Vector3d center() const { return -rotation.transpose() * translation; }
};

void validate_camera(const Camera& cam);
Camera make_camera(const Pose& pose, const Intrinsics& intrinsics);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// Rotation matrix of the normalised quaternion (w, x, y, z). Throws on a zero quaternion.
Eigen::Matrix3d rotation_from_quaternion(const Eigen::Vector4d& q);
Eigen::Vector4d quaternion_from_rotation(const Eigen::Matrix3d& rotation);

/// Sigma = R S S^T R^T with S = diag(exp(log_scale)).
Eigen::Matrix3d covariance_3d(const Eigen::Vector4d& q, const Eigen::Vector3d& log_scale);

/// Affine approximation of the perspective projection at the camera-space point.
Matrix23d perspective_jacobian(const Intrinsics& intrinsics, const Eigen::Vector3d& mean_cam);

/// J W Sigma W^T J^T plus the low-pass dilation, for an arbitrary Jacobian and view rotation.
Eigen::Matrix2d project_covariance(const Eigen::Matrix3d& sigma, const Matrix23d& jacobian,
                                   const Eigen::Matrix3d& view_rotation);

/// Screen-space covariance for a camera; nullopt when the mean is at or behind the near plane.
std::optional<Eigen::Matrix2d> project_covariance(const Eigen::Matrix3d& sigma, const Camera& cam,
                                                  const Eigen::Vector3d& mean_cam);

/// exp(-1/2 delta^T Sigma'^-1 delta); nullopt when Sigma' is not invertible.
std::optional<double> gaussian_weight(const Eigen::Vector2d& delta, const Eigen::Matrix2d& sigma2d);

/// Throws Error(kInvalidScene) on any non-finite parameter or zero quaternion.
void validate_scene(const Scene& scene);

/// Text scene format, one Gaussian per line after a version header:
/// `x y z qw qx qy qz ls1 ls2 ls3 opacity_logit r g b`.
void write_scene(const std::filesystem::path& path, const Scene& scene);
Scene read_scene(const std::filesystem::path& path);

} // namespace evsplat
