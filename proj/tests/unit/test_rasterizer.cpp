#include "evsplat/rasterizer.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace evsplat {
namespace {

using testing::identity_camera;
using testing::random_scene;

// Scalar per-pixel compositor written from the definitions alone: builds each covariance from
// Eigen's quaternion, projects it with a hand-written Jacobian and composites in depth order.
Image oracle_render(const Scene& scene, const Camera& cam, const Eigen::Vector3d& bg) {
    const auto& k = cam.intrinsics;
    struct Item {
        double depth;
        int index;
        double u, v;
        Eigen::Matrix2d inv_cov;
        double opacity;
        Eigen::Vector3d color;
    };
    std::vector<Item> items;
    for (int i = 0; i < static_cast<int>(scene.size()); ++i) {
        const Gaussian3D& g = scene[i];
        const Eigen::Vector3d t = cam.rotation * g.mean + cam.translation;
        if (t.z() <= 0.01) continue;
        const Eigen::Quaterniond q(g.rotation[0], g.rotation[1], g.rotation[2], g.rotation[3]);
        const Eigen::Matrix3d r = q.normalized().toRotationMatrix();
        Eigen::Matrix3d s2 = Eigen::Matrix3d::Zero();
        for (int a = 0; a < 3; ++a) s2(a, a) = std::exp(2.0 * g.log_scale[a]);
        const Eigen::Matrix3d sigma = r * s2 * r.transpose();
        Eigen::Matrix<double, 2, 3> j;
        j << k.fx / t.z(), 0, -k.fx * t.x() / (t.z() * t.z()), 0, k.fy / t.z(), -k.fy * t.y() / (t.z() * t.z());
        Eigen::Matrix2d cov = j * cam.rotation * sigma * cam.rotation.transpose() * j.transpose();
        cov += 0.3 * Eigen::Matrix2d::Identity();
        items.push_back({t.z(), i, k.fx * t.x() / t.z() + k.cx, k.fy * t.y() / t.z() + k.cy, cov.inverse(),
                         1.0 / (1.0 + std::exp(-g.opacity_logit)), g.color});
    }
    std::sort(items.begin(), items.end(),
              [](const Item& a, const Item& b) { return a.depth < b.depth || (a.depth == b.depth && a.index < b.index); });
    Image out(k.width, k.height, 3);
    for (int y = 0; y < k.height; ++y) {
        for (int x = 0; x < k.width; ++x) {
            double t = 1.0;
            Eigen::Vector3d c = Eigen::Vector3d::Zero();
            for (const Item& it : items) {
                const Eigen::Vector2d d(x - it.u, y - it.v);
                const double m2 = d.dot(it.inv_cov * d);
                if (m2 > 9.0) continue;
                const double alpha = std::min(0.99, it.opacity * std::exp(-0.5 * m2));
                if (alpha < 1.0 / 255.0) continue;
                if (t * (1.0 - alpha) < 1e-4) break;
                c += it.color * alpha * t;
                t *= 1.0 - alpha;
            }
            c += bg * t;
            for (int ch = 0; ch < 3; ++ch) out.at(x, y, ch) = c[ch];
        }
    }
    return out;
}

double max_abs_diff(const Image& a, const Image& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

double linear_loss(const Scene& scene, const Camera& cam, const Eigen::Vector3d& bg, const Image& weights) {
    const Image img = render(scene, cam, bg).image;
    double sum = 0.0;
    for (std::size_t i = 0; i < img.size(); ++i) sum += img.data()[i] * weights.data()[i];
    return sum;
}

TEST(Render, EmptySceneIsBackground) {
    const Camera cam = identity_camera(16, 16.0);
    const Eigen::Vector3d bg(0.1, 0.2, 0.3);
    const RenderOutput out = render({}, cam, bg);
    for (int y = 0; y < 16; ++y) {
        for (int x = 0; x < 16; ++x) {
            for (int c = 0; c < 3; ++c) EXPECT_EQ(out.image.at(x, y, c), bg[c]);
            EXPECT_EQ(out.alpha.at(x, y), 0.0);
        }
    }
}

TEST(Render, SingleGaussianAtPixelCentre) {
    // Mean projects exactly onto pixel (7, 7): weight 1, so alpha equals the opacity.
    Camera cam = identity_camera(15, 20.0);
    Gaussian3D g;
    g.mean = {0.0, 0.0, 2.0};
    g.log_scale = Eigen::Vector3d::Constant(std::log(0.1));
    g.opacity_logit = logit(0.8);
    g.color = {0.9, 0.5, 0.25};
    const RenderOutput out = render({g}, cam, Eigen::Vector3d::Zero());
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(out.image.at(7, 7, c), 0.8 * g.color[c], 1e-12);
    EXPECT_NEAR(out.alpha.at(7, 7), 0.8, 1e-12);
}

TEST(Render, MatchesBruteForceOracle) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        const Camera cam = testing::tilted_camera(32, 30.0, rng);
        const Scene scene = random_scene(2 + trial, rng);
        const Eigen::Vector3d bg(0.3, 0.1, 0.7);
        const Image expected = oracle_render(scene, cam, bg);
        EXPECT_LT(max_abs_diff(render(scene, cam, bg, {1, true, true}).image, expected), 1e-9);
        EXPECT_LT(max_abs_diff(render(scene, cam, bg, {1, false, true}).image, expected), 1e-9);
    }
}

TEST(Render, TwoOverlappingGaussiansCompositeInDepthOrder) {
    const Camera cam = identity_camera(21, 25.0);
    Gaussian3D front, back;
    front.mean = {0.05, 0.0, 2.0};
    back.mean = {-0.05, 0.02, 3.0};
    front.log_scale = back.log_scale = Eigen::Vector3d::Constant(std::log(0.15));
    front.opacity_logit = logit(0.6);
    back.opacity_logit = logit(0.9);
    front.color = {1.0, 0.0, 0.0};
    back.color = {0.0, 0.0, 1.0};
    // Listing the back splat first must not change the result.
    const Scene scene{back, front};
    const Image expected = oracle_render(scene, cam, Eigen::Vector3d::Zero());
    EXPECT_LT(max_abs_diff(render(scene, cam, Eigen::Vector3d::Zero()).image, expected), 1e-12);
}

TEST(Render, TransmittanceAndAlphaStayInRange) {
    std::mt19937_64 rng(11);
    const Scene scene = random_scene(40, rng);
    const Camera cam = identity_camera(32, 30.0);
    const RenderOutput out = render(scene, cam, Eigen::Vector3d::Zero());
    for (double a : out.alpha.data()) {
        EXPECT_GE(a, 0.0);
        EXPECT_LE(a, 1.0);
    }
    // Colours in [0,1] on a black background keep the image in [0,1].
    for (double v : out.image.data()) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0 + 1e-12);
    }
}

TEST(Render, ThreadCountDoesNotChangeBits) {
    std::mt19937_64 rng(3);
    const Scene scene = random_scene(30, rng);
    const Camera cam = identity_camera(40, 36.0);
    const Eigen::Vector3d bg(0.2, 0.2, 0.2);
    const RenderOutput one = render(scene, cam, bg, {1, true, true});
    const RenderOutput four = render(scene, cam, bg, {4, true, true});
    EXPECT_EQ(one.image, four.image);

    const Image up = testing::random_image(40, 40, 3, rng, -1.0, 1.0);
    const SceneGradients g1 = render_backward(scene, cam, bg, up, {1, true, true});
    const SceneGradients g4 = render_backward(scene, cam, bg, up, {4, true, true});
    EXPECT_EQ(g1, g4);
}

TEST(Render, RejectsNonFiniteScene) {
    Scene scene(1);
    scene[0].mean = {0.0, 0.0, std::nan("")};
    try {
        render(scene, identity_camera(8, 8.0), Eigen::Vector3d::Zero());
        FAIL() << "expected invalid-scene";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::kInvalidScene);
    }
}

TEST(Render, CullsBehindNearPlane) {
    Gaussian3D g;
    g.mean = {0.0, 0.0, 0.005};
    g.opacity_logit = 5.0;
    const RenderOutput out = render({g}, identity_camera(8, 8.0), Eigen::Vector3d::Zero());
    for (double a : out.alpha.data()) EXPECT_EQ(a, 0.0);
}

TEST(RenderBackward, MatchesFiniteDifferences) {
    std::mt19937_64 rng(2024);
    const Camera cam = testing::tilted_camera(32, 30.0, rng);
    const Scene scene = random_scene(5, rng);
    const Eigen::Vector3d bg(0.25, 0.5, 0.1);
    const Image weights = testing::random_image(32, 32, 3, rng, -1.0, 1.0);
    const SceneGradients grads = render_backward(scene, cam, bg, weights);

    auto loss = [&](const Scene& s) { return linear_loss(s, cam, bg, weights); };
    auto signature = [&](const Scene& s) { return render(s, cam, bg).contributors; };
    int checked = 0, nonzero = 0;
    for (int i = 0; i < static_cast<int>(scene.size()); ++i) {
        for (int k = 0; k < testing::kParametersPerGaussian; ++k) {
            const auto fd = testing::central_difference(scene, i, k, loss, signature);
            ASSERT_TRUE(fd.smooth);
            const double analytic = testing::gradient_entry(grads[i], k);
            EXPECT_TRUE(testing::gradients_agree(analytic, fd.value))
                << "gaussian " << i << " param " << k << ": analytic " << analytic << " numeric " << fd.value;
            ++checked;
            nonzero += analytic != 0.0;
        }
    }
    EXPECT_EQ(checked, 70);
    EXPECT_GE(nonzero, 60); // the check is vacuous if most splats miss the sensor
}

TEST(RenderBackward, UntouchedGaussianGetsZeroGradient) {
    Gaussian3D on_screen, off_screen;
    on_screen.mean = {0.0, 0.0, 2.0};
    on_screen.log_scale = Eigen::Vector3d::Constant(std::log(0.1));
    off_screen = on_screen;
    off_screen.mean = {50.0, 0.0, 2.0};
    const Camera cam = identity_camera(16, 16.0);
    Image up(16, 16, 3, 1.0);
    const SceneGradients g = render_backward({on_screen, off_screen}, cam, Eigen::Vector3d::Zero(), up);
    EXPECT_NE(g[0].color.norm(), 0.0);
    EXPECT_EQ(g[1], GaussianGradient{});

    // Zero upstream everywhere the splat lands also yields exactly zero.
    const SceneGradients none = render_backward({on_screen}, cam, Eigen::Vector3d::Zero(), Image(16, 16, 3));
    EXPECT_EQ(none[0], GaussianGradient{});
}

TEST(RenderBackward, LoneGaussianColourGradientIsAlphaWeightedCoverage) {
    // With one splat, T = 1 in front of it, so dL/dc = sum_p upstream_p * alpha_p.
    std::mt19937_64 rng(5);
    Gaussian3D g;
    g.mean = {0.02, -0.03, 2.0};
    g.log_scale = {std::log(0.15), std::log(0.1), std::log(0.1)};
    g.opacity_logit = logit(0.7);
    g.color = {0.2, 0.6, 0.9};
    const Camera cam = identity_camera(24, 24.0);
    const RenderOutput out = render({g}, cam, Eigen::Vector3d::Zero());
    const Image target = testing::random_image(24, 24, 3, rng);
    Image up(24, 24, 3);
    const double scale = 1.0 / static_cast<double>(up.size());
    for (std::size_t i = 0; i < up.size(); ++i) {
        const double d = out.image.data()[i] - target.data()[i];
        up.data()[i] = d > 0 ? scale : (d < 0 ? -scale : 0.0);
    }
    Eigen::Vector3d expected = Eigen::Vector3d::Zero();
    for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 24; ++x)
            for (int c = 0; c < 3; ++c) expected[c] += up.at(x, y, c) * out.alpha.at(x, y);
    const SceneGradients grads = render_backward({g}, cam, Eigen::Vector3d::Zero(), up);
    EXPECT_LT((grads[0].color - expected).norm(), 1e-14);
}

TEST(RenderBackward, RejectsMismatchedUpstream) {
    try {
        render_backward({Gaussian3D{}}, identity_camera(8, 8.0), Eigen::Vector3d::Zero(), Image(7, 8, 3));
        FAIL() << "expected invalid-argument";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::kInvalidArgument);
    }
}

TEST(RenderBackward, DirectionalDerivativeMatches) {
    // Forward/backward consistency along random parameter directions.
    std::mt19937_64 rng(99);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
        const Camera cam = testing::tilted_camera(24, 24.0, rng);
        const Scene scene = random_scene(4, rng);
        const Image weights = testing::random_image(24, 24, 3, rng, -1.0, 1.0);
        const Eigen::Vector3d bg(0.1, 0.1, 0.1);
        const SceneGradients grads = render_backward(scene, cam, bg, weights);
        std::vector<double> dir(scene.size() * testing::kParametersPerGaussian);
        for (double& d : dir) d = normal(rng);
        double analytic = 0.0;
        for (std::size_t i = 0; i < scene.size(); ++i)
            for (int k = 0; k < testing::kParametersPerGaussian; ++k)
                analytic += dir[i * testing::kParametersPerGaussian + k] * testing::gradient_entry(grads[i], k);

        auto shifted = [&](double eps) {
            Scene s = scene;
            for (std::size_t i = 0; i < s.size(); ++i)
                for (int k = 0; k < testing::kParametersPerGaussian; ++k)
                    testing::parameter(s[i], k) += eps * dir[i * testing::kParametersPerGaussian + k];
            return s;
        };
        bool done = false;
        for (double eps = 1e-5; eps >= 1e-8 && !done; eps *= 0.1) {
            const Scene plus = shifted(eps), minus = shifted(-eps);
            if (render(plus, cam, bg).contributors != render(minus, cam, bg).contributors) continue;
            const double numeric = (linear_loss(plus, cam, bg, weights) - linear_loss(minus, cam, bg, weights)) / (2 * eps);
            EXPECT_TRUE(testing::gradients_agree(analytic, numeric)) << analytic << " vs " << numeric;
            done = true;
        }
        EXPECT_TRUE(done);
    }
}

} // namespace
} // namespace evsplat
