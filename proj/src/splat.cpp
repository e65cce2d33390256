#include "evsplat/splat.hpp"

#include "text_util.hpp"

#include <Eigen/LU>

#include <cmath>
#include <string>

namespace evsplat {

namespace {
constexpr std::string_view kSceneHeader = "# evsplat scene format_version 1";
}

void validate_camera(const Camera& cam) {
    const auto& k = cam.intrinsics;
    if (!(k.fx > 0.0) || !(k.fy > 0.0)) fail(ErrorCode::kInvalidArgument, "focal lengths must be positive");
    if (k.width <= 0 || k.height <= 0) fail(ErrorCode::kInvalidArgument, "sensor size must be positive");
    const double orthogonality = (cam.rotation * cam.rotation.transpose() - Eigen::Matrix3d::Identity()).norm();
    if (!(orthogonality < 1e-6)) fail(ErrorCode::kInvalidArgument, "camera rotation is not orthonormal");
    if (!cam.translation.allFinite()) fail(ErrorCode::kInvalidArgument, "camera translation is not finite");
}

Camera make_camera(const Pose& pose, const Intrinsics& intrinsics) {
    Camera cam;
    cam.rotation = rotation_from_quaternion(pose.rotation);
    cam.translation = pose.translation;
    cam.intrinsics = intrinsics;
    return cam;
}

Eigen::Matrix3d rotation_from_quaternion(const Eigen::Vector4d& q) {
    const double norm = q.norm();
    if (!(norm > 0.0)) fail(ErrorCode::kInvalidArgument, "zero quaternion");
    const Eigen::Vector4d u = q / norm;
    const double w = u[0], x = u[1], y = u[2], z = u[3];
    Eigen::Matrix3d r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

Eigen::Vector4d quaternion_from_rotation(const Eigen::Matrix3d& rotation) {
    Eigen::Quaterniond q(rotation);
    q.normalize();
    Eigen::Vector4d out(q.w(), q.x(), q.y(), q.z());
    if (out[0] < 0.0) out = -out;
    return out;
}

Eigen::Matrix3d covariance_3d(const Eigen::Vector4d& q, const Eigen::Vector3d& log_scale) {
    const Eigen::Matrix3d m = rotation_from_quaternion(q) * log_scale.array().exp().matrix().asDiagonal();
    return m * m.transpose();
}

Matrix23d perspective_jacobian(const Intrinsics& k, const Eigen::Vector3d& t) {
    const double inv_z = 1.0 / t.z();
    const double inv_z2 = inv_z * inv_z;
    Matrix23d j;
    j << k.fx * inv_z, 0.0, -k.fx * t.x() * inv_z2,
         0.0, k.fy * inv_z, -k.fy * t.y() * inv_z2;
    return j;
}

Eigen::Matrix2d project_covariance(const Eigen::Matrix3d& sigma, const Matrix23d& jacobian,
                                   const Eigen::Matrix3d& view_rotation) {
    const Matrix23d t = jacobian * view_rotation;
    Eigen::Matrix2d projected = t * sigma * t.transpose();
    projected(0, 0) += kDilation;
    projected(1, 1) += kDilation;
    // Symmetrise away round-off so downstream conics stay exactly symmetric.
    projected(1, 0) = projected(0, 1);
    return projected;
}

std::optional<Eigen::Matrix2d> project_covariance(const Eigen::Matrix3d& sigma, const Camera& cam,
                                                  const Eigen::Vector3d& mean_cam) {
    if (!(mean_cam.z() > kNearPlane)) return std::nullopt;
    return project_covariance(sigma, perspective_jacobian(cam.intrinsics, mean_cam), cam.rotation);
}

std::optional<double> gaussian_weight(const Eigen::Vector2d& delta, const Eigen::Matrix2d& sigma2d) {
    const double det = sigma2d.determinant();
    if (!(det > 0.0) || !std::isfinite(det)) return std::nullopt;
    const Eigen::Matrix2d conic = sigma2d.inverse();
    return std::exp(-0.5 * delta.dot(conic * delta));
}

void validate_scene(const Scene& scene) {
    for (std::size_t i = 0; i < scene.size(); ++i) {
        const Gaussian3D& g = scene[i];
        const bool finite = g.mean.allFinite() && g.rotation.allFinite() && g.log_scale.allFinite() &&
                            std::isfinite(g.opacity_logit) && g.color.allFinite();
        if (!finite) fail(ErrorCode::kInvalidScene, "Gaussian " + std::to_string(i) + " has a non-finite parameter");
        if (!(g.rotation.norm() > 0.0)) fail(ErrorCode::kInvalidScene, "Gaussian " + std::to_string(i) + " has a zero quaternion");
    }
}

void write_scene(const std::filesystem::path& path, const Scene& scene) {
    auto out = detail::open_for_writing(path);
    out << kSceneHeader << '\n';
    out << "# x y z qw qx qy qz ls1 ls2 ls3 opacity_logit r g b\n";
    for (const Gaussian3D& g : scene) {
        const double values[14] = {g.mean.x(),     g.mean.y(),      g.mean.z(),      g.rotation[0], g.rotation[1],
                                   g.rotation[2],  g.rotation[3],   g.log_scale[0],  g.log_scale[1], g.log_scale[2],
                                   g.opacity_logit, g.color[0],     g.color[1],      g.color[2]};
        for (int i = 0; i < 14; ++i) out << (i ? " " : "") << detail::format_double(values[i]);
        out << '\n';
    }
    if (!out) fail(ErrorCode::kInvalidArgument, "failed writing " + path.string());
}

Scene read_scene(const std::filesystem::path& path) {
    auto in = detail::open_for_reading(path);
    std::string line;
    std::size_t line_no = 0;
    bool saw_header = false;
    Scene scene;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            saw_header = (line == kSceneHeader);
            if (!saw_header) fail(ErrorCode::kParseError, detail::where(path, 1) + ": missing scene format header");
            continue;
        }
        if (detail::is_blank_or_comment(line)) continue;
        const auto fields = detail::split_fields(line);
        double v[14];
        bool ok = fields.size() == 14;
        for (std::size_t i = 0; ok && i < 14; ++i) ok = detail::parse_number(fields[i], v[i]);
        if (!ok) fail(ErrorCode::kParseError, detail::where(path, line_no) + ": expected 14 numeric fields");
        Gaussian3D g;
        g.mean = {v[0], v[1], v[2]};
        g.rotation = {v[3], v[4], v[5], v[6]};
        g.log_scale = {v[7], v[8], v[9]};
        g.opacity_logit = v[10];
        g.color = {v[11], v[12], v[13]};
        scene.push_back(g);
    }
    if (!saw_header) fail(ErrorCode::kParseError, path.string() + ": empty scene file");
    validate_scene(scene);
    return scene;
}

} // namespace evsplat
