#include "evsplat/rasterizer.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace evsplat {

GaussianGradient& GaussianGradient::operator+=(const GaussianGradient& other) {
    mean += other.mean;
    rotation += other.rotation;
    log_scale += other.log_scale;
    opacity_logit += other.opacity_logit;
    color += other.color;
    return *this;
}

namespace {

constexpr double kMaxMahalanobis2 = kExtentSigmas * kExtentSigmas;

// Screen-space splat plus the intermediates the backward pass needs.
struct Splat {
    int index = 0;
    double depth = 0.0;
    double u = 0.0;
    double v = 0.0;
    // Conic (inverse covariance) entries: [[a, b], [b, c]].
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    double opacity = 0.0;
    Eigen::Vector3d color;
    int x0 = 0, x1 = -1, y0 = 0, y1 = -1;

    Eigen::Vector3d mean_cam;
    Matrix23d jacobian;
    Eigen::Matrix3d cov3d;
    Eigen::Matrix2d conic;
    Eigen::Matrix3d rotation;
    Eigen::Vector3d scale;
    Eigen::Vector4d unit_q;
    double q_norm = 1.0;
};

std::vector<Splat> project_scene(const Scene& scene, const Camera& cam) {
    const auto& k = cam.intrinsics;
    std::vector<Splat> splats;
    splats.reserve(scene.size());
    for (std::size_t i = 0; i < scene.size(); ++i) {
        const Gaussian3D& g = scene[i];
        Splat s;
        s.index = static_cast<int>(i);
        s.mean_cam = cam.to_camera(g.mean);
        s.depth = s.mean_cam.z();
        if (!(s.depth > kNearPlane)) continue;

        s.q_norm = g.rotation.norm();
        s.unit_q = g.rotation / s.q_norm;
        s.rotation = rotation_from_quaternion(g.rotation);
        s.scale = g.log_scale.array().exp();
        const Eigen::Matrix3d m = s.rotation * s.scale.asDiagonal();
        s.cov3d = m * m.transpose();
        s.jacobian = perspective_jacobian(k, s.mean_cam);
        const Eigen::Matrix2d cov2d = project_covariance(s.cov3d, s.jacobian, cam.rotation);
        const double det = cov2d.determinant();
        if (!(det > 0.0)) continue;
        s.conic = cov2d.inverse();
        s.a = s.conic(0, 0);
        s.b = s.conic(0, 1);
        s.c = s.conic(1, 1);

        s.u = k.fx * s.mean_cam.x() / s.depth + k.cx;
        s.v = k.fy * s.mean_cam.y() / s.depth + k.cy;
        const double rx = kExtentSigmas * std::sqrt(cov2d(0, 0));
        const double ry = kExtentSigmas * std::sqrt(cov2d(1, 1));
        // One pixel of padding so round-off at the ellipse boundary never drops a pixel.
        s.x0 = std::max(0, static_cast<int>(std::floor(s.u - rx)) - 1);
        s.x1 = std::min(k.width - 1, static_cast<int>(std::ceil(s.u + rx)) + 1);
        s.y0 = std::max(0, static_cast<int>(std::floor(s.v - ry)) - 1);
        s.y1 = std::min(k.height - 1, static_cast<int>(std::ceil(s.v + ry)) + 1);
        if (s.x0 > s.x1 || s.y0 > s.y1) continue;

        s.opacity = sigmoid(g.opacity_logit);
        s.color = g.color;
        splats.push_back(s);
    }
    std::sort(splats.begin(), splats.end(), [](const Splat& l, const Splat& r) {
        return l.depth < r.depth || (l.depth == r.depth && l.index < r.index);
    });
    return splats;
}

// Splat lists per pixel: either every visible splat or the splats binned to its tile.
class SplatLists {
public:
    SplatLists(const std::vector<Splat>& splats, int width, int height, bool tiled)
        : width_(width), tiled_(tiled) {
        if (!tiled_) {
            all_.resize(splats.size());
            std::iota(all_.begin(), all_.end(), 0);
            return;
        }
        tiles_x_ = (width + kTileSize - 1) / kTileSize;
        const int tiles_y = (height + kTileSize - 1) / kTileSize;
        tiles_.resize(static_cast<std::size_t>(tiles_x_) * tiles_y);
        for (int i = 0; i < static_cast<int>(splats.size()); ++i) {
            const Splat& s = splats[i];
            for (int ty = s.y0 / kTileSize; ty <= s.y1 / kTileSize; ++ty) {
                for (int tx = s.x0 / kTileSize; tx <= s.x1 / kTileSize; ++tx) {
                    tiles_[static_cast<std::size_t>(ty) * tiles_x_ + tx].push_back(i);
                }
            }
        }
    }

    const std::vector<int>& at(int x, int y) const {
        if (!tiled_) return all_;
        return tiles_[static_cast<std::size_t>(y / kTileSize) * tiles_x_ + x / kTileSize];
    }

private:
    int width_;
    bool tiled_;
    int tiles_x_ = 0;
    std::vector<int> all_;
    std::vector<std::vector<int>> tiles_;
};

struct Contribution {
    int splat = 0;
    double alpha = 0.0;
    double weight = 0.0;
    double transmittance = 0.0; // before this splat
    bool clamped = false;
};

// Walks one pixel's splats front to back. `visit` sees every composited splat; returns the final
// transmittance.
template <typename Visit>
double composite_pixel(const std::vector<Splat>& splats, const std::vector<int>& list, int px, int py,
                       Visit&& visit) {
    double transmittance = 1.0;
    for (int idx : list) {
        const Splat& s = splats[idx];
        if (px < s.x0 || px > s.x1 || py < s.y0 || py > s.y1) continue;
        const double dx = px - s.u;
        const double dy = py - s.v;
        const double mahalanobis2 = s.a * dx * dx + 2.0 * s.b * dx * dy + s.c * dy * dy;
        if (!(mahalanobis2 <= kMaxMahalanobis2)) continue;
        const double weight = std::exp(-0.5 * mahalanobis2);
        const double raw_alpha = s.opacity * weight;
        const bool clamped = raw_alpha > kMaxAlpha;
        const double alpha = clamped ? kMaxAlpha : raw_alpha;
        if (alpha < kMinAlpha) continue;
        const double next = transmittance * (1.0 - alpha);
        if (next < kMinTransmittance) break;
        visit(Contribution{idx, alpha, weight, transmittance, clamped});
        transmittance = next;
    }
    return transmittance;
}

void require_valid_inputs(const Scene& scene, const Camera& cam, const Eigen::Vector3d& background) {
    validate_camera(cam);
    validate_scene(scene);
    if (!background.allFinite()) fail(ErrorCode::kInvalidArgument, "background must be finite");
}

// Screen-space gradient accumulators for one splat.
struct ScreenGradient {
    double u = 0.0, v = 0.0;
    double a = 0.0, b = 0.0, c = 0.0;
    double opacity = 0.0;
    Eigen::Vector3d color = Eigen::Vector3d::Zero();

    void add(const ScreenGradient& o) {
        u += o.u;
        v += o.v;
        a += o.a;
        b += o.b;
        c += o.c;
        opacity += o.opacity;
        color += o.color;
    }
};

// d R(q_hat) / d q_hat contracted with dL/dR.
Eigen::Vector4d rotation_adjoint(const Eigen::Vector4d& q, const Eigen::Matrix3d& g) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Eigen::Vector4d d;
    d[0] = 2 * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) + x * g(2, 1));
    d[1] = 2 * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - w * g(1, 2) + z * g(2, 0) + w * g(2, 1)) -
           4 * x * (g(1, 1) + g(2, 2));
    d[2] = 2 * (x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2) - w * g(2, 0) + z * g(2, 1)) -
           4 * y * (g(0, 0) + g(2, 2));
    d[3] = 2 * (-w * g(0, 1) + x * g(0, 2) + w * g(1, 0) + y * g(1, 2) + x * g(2, 0) + y * g(2, 1)) -
           4 * z * (g(0, 0) + g(1, 1));
    return d;
}

GaussianGradient splat_adjoint(const Splat& s, const ScreenGradient& sg, const Camera& cam) {
    const auto& k = cam.intrinsics;
    GaussianGradient out;
    out.color = sg.color;
    out.opacity_logit = sg.opacity * s.opacity * (1.0 - s.opacity);

    // Conic -> projected covariance.
    Eigen::Matrix2d g_conic;
    g_conic << sg.a, 0.5 * sg.b, 0.5 * sg.b, sg.c;
    const Eigen::Matrix2d g_cov2d = -s.conic * g_conic * s.conic;

    // Projected covariance -> 3D covariance and Jacobian, with T = J W.
    const Matrix23d t = s.jacobian * cam.rotation;
    Eigen::Matrix3d g_cov3d = t.transpose() * g_cov2d * t;
    g_cov3d = 0.5 * (g_cov3d + g_cov3d.transpose());
    const Matrix23d g_t = 2.0 * g_cov2d * t * s.cov3d;
    const Matrix23d g_j = g_t * cam.rotation.transpose();

    const double x = s.mean_cam.x(), y = s.mean_cam.y(), z = s.mean_cam.z();
    const double inv_z = 1.0 / z, inv_z2 = inv_z * inv_z, inv_z3 = inv_z2 * inv_z;
    Eigen::Vector3d g_mean_cam;
    g_mean_cam.x() = g_j(0, 2) * (-k.fx * inv_z2) + sg.u * k.fx * inv_z;
    g_mean_cam.y() = g_j(1, 2) * (-k.fy * inv_z2) + sg.v * k.fy * inv_z;
    g_mean_cam.z() = g_j(0, 0) * (-k.fx * inv_z2) + g_j(0, 2) * (2.0 * k.fx * x * inv_z3) +
                     g_j(1, 1) * (-k.fy * inv_z2) + g_j(1, 2) * (2.0 * k.fy * y * inv_z3) -
                     sg.u * k.fx * x * inv_z2 - sg.v * k.fy * y * inv_z2;
    out.mean = cam.rotation.transpose() * g_mean_cam;

    // Sigma = M M^T with M = R diag(s).
    const Eigen::Matrix3d m = s.rotation * s.scale.asDiagonal();
    const Eigen::Matrix3d g_m = 2.0 * g_cov3d * m;
    Eigen::Matrix3d g_r;
    for (int j = 0; j < 3; ++j) {
        out.log_scale[j] = s.scale[j] * g_m.col(j).dot(s.rotation.col(j));
        g_r.col(j) = g_m.col(j) * s.scale[j];
    }
    const Eigen::Vector4d g_unit = rotation_adjoint(s.unit_q, g_r);
    out.rotation = (g_unit - s.unit_q * s.unit_q.dot(g_unit)) / s.q_norm;
    return out;
}

} // namespace

RenderOutput render(const Scene& scene, const Camera& cam, const Eigen::Vector3d& background,
                    const RenderSettings& settings) {
    require_valid_inputs(scene, cam, background);
    const int width = cam.intrinsics.width;
    const int height = cam.intrinsics.height;
    const auto splats = project_scene(scene, cam);
    const SplatLists lists(splats, width, height, settings.tiled);

    RenderOutput out{Image(width, height, 3), Image(width, height, 1),
                     std::vector<std::uint32_t>(static_cast<std::size_t>(width) * height, 0)};
    parallel_for(0, height, resolve_threads(settings.threads), [&](int y) {
        for (int x = 0; x < width; ++x) {
            Eigen::Vector3d color = Eigen::Vector3d::Zero();
            std::uint32_t count = 0;
            const double final_t = composite_pixel(splats, lists.at(x, y), x, y, [&](const Contribution& c) {
                color += splats[c.splat].color * (c.alpha * c.transmittance);
                ++count;
            });
            color += background * final_t;
            for (int ch = 0; ch < 3; ++ch) out.image.at(x, y, ch) = color[ch];
            out.alpha.at(x, y) = 1.0 - final_t;
            out.contributors[static_cast<std::size_t>(y) * width + x] = count;
        }
    });
    return out;
}

SceneGradients render_backward(const Scene& scene, const Camera& cam, const Eigen::Vector3d& background,
                               const Image& upstream, const RenderSettings& settings) {
    require_valid_inputs(scene, cam, background);
    const int width = cam.intrinsics.width;
    const int height = cam.intrinsics.height;
    if (upstream.width() != width || upstream.height() != height || upstream.channels() != 3) {
        fail(ErrorCode::kInvalidArgument, "upstream gradient must be H x W x 3 matching the camera");
    }
    const auto splats = project_scene(scene, cam);
    const SplatLists lists(splats, width, height, settings.tiled);
    const int threads = resolve_threads(settings.threads);

    // Rows are split into fixed chunks with private buffers, reduced in chunk order.
    const int chunks = std::max(1, std::min(height, settings.deterministic ? 16 : threads));
    std::vector<std::vector<ScreenGradient>> buffers(chunks, std::vector<ScreenGradient>(splats.size()));
    parallel_for(0, chunks, threads, [&](int chunk) {
        auto& grads = buffers[chunk];
        const int row_begin = static_cast<int>(static_cast<long>(height) * chunk / chunks);
        const int row_end = static_cast<int>(static_cast<long>(height) * (chunk + 1) / chunks);
        std::vector<Contribution> stack;
        for (int y = row_begin; y < row_end; ++y) {
            for (int x = 0; x < width; ++x) {
                const Eigen::Vector3d g_pixel(upstream.at(x, y, 0), upstream.at(x, y, 1), upstream.at(x, y, 2));
                if (g_pixel.isZero(0.0)) continue;
                stack.clear();
                const double final_t = composite_pixel(splats, lists.at(x, y), x, y,
                                                       [&](const Contribution& c) { stack.push_back(c); });
                // Light arriving from behind the current splat, background included.
                Eigen::Vector3d behind = background * final_t;
                for (auto it = stack.rbegin(); it != stack.rend(); ++it) {
                    const Splat& s = splats[it->splat];
                    ScreenGradient& g = grads[it->splat];
                    const double alpha = it->alpha;
                    const double t = it->transmittance;
                    g.color += g_pixel * (alpha * t);
                    const double g_alpha = g_pixel.dot(s.color * t - behind / (1.0 - alpha));
                    behind += s.color * (alpha * t);
                    if (it->clamped) continue;
                    g.opacity += g_alpha * it->weight;
                    const double g_power = g_alpha * alpha;
                    const double dx = x - s.u;
                    const double dy = y - s.v;
                    g.u += g_power * (s.a * dx + s.b * dy);
                    g.v += g_power * (s.b * dx + s.c * dy);
                    g.a += g_power * (-0.5 * dx * dx);
                    g.b += g_power * (-dx * dy);
                    g.c += g_power * (-0.5 * dy * dy);
                }
            }
        }
    });

    SceneGradients out(scene.size());
    parallel_for(0, static_cast<int>(splats.size()), threads, [&](int i) {
        ScreenGradient total;
        for (const auto& buffer : buffers) total.add(buffer[i]);
        out[splats[i].index] = splat_adjoint(splats[i], total, cam);
    });
    return out;
}

} // namespace evsplat
