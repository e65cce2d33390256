#include "evsplat/splat.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

namespace evsplat {
namespace {

const Eigen::Vector4d kIdentity(1.0, 0.0, 0.0, 0.0);

TEST(Covariance3d, ClosedForms) {
    EXPECT_TRUE(covariance_3d(kIdentity, Eigen::Vector3d::Zero()).isApprox(Eigen::Matrix3d::Identity(), 1e-15));

    const Eigen::Vector3d stretched(std::log(2.0), 0.0, 0.0);
    EXPECT_TRUE(covariance_3d(kIdentity, stretched).isApprox(Eigen::Vector3d(4, 1, 1).asDiagonal().toDenseMatrix(), 1e-14));

    const double h = std::sqrt(0.5);
    const Eigen::Vector4d quarter_turn_z(h, 0.0, 0.0, h);
    const Eigen::Matrix3d rotated = covariance_3d(quarter_turn_z, stretched);
    EXPECT_LT((rotated - Eigen::Vector3d(1, 4, 1).asDiagonal().toDenseMatrix()).norm(), 1e-14);
}

TEST(Covariance3d, UnnormalisedQuaternionIsNormalised) {
    const Eigen::Vector4d q(0.3, -0.2, 0.7, 0.1);
    const Eigen::Vector3d s(0.1, -0.4, 0.2);
    EXPECT_LT((covariance_3d(q, s) - covariance_3d(5.0 * q, s)).norm(), 1e-14);
}

TEST(Covariance3d, ZeroQuaternionRejected) {
    try {
        covariance_3d(Eigen::Vector4d::Zero(), Eigen::Vector3d::Zero());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::kInvalidArgument);
    }
}

TEST(Covariance3d, SymmetricPositiveDefiniteWithScaleEigenvalues) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Vector4d q(normal(rng), normal(rng), normal(rng), normal(rng));
        const Eigen::Vector3d s(normal(rng), normal(rng), normal(rng));
        const Eigen::Matrix3d sigma = covariance_3d(q, s);
        EXPECT_LT((sigma - sigma.transpose()).norm(), 1e-12 * sigma.norm());
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(sigma);
        Eigen::Vector3d expected = (2.0 * s).array().exp();
        std::sort(expected.data(), expected.data() + 3);
        const Eigen::Vector3d got = solver.eigenvalues();
        for (int i = 0; i < 3; ++i) {
            EXPECT_GT(got[i], 0.0);
            EXPECT_NEAR(got[i], expected[i], 1e-10 * expected.maxCoeff());
        }
    }
}

TEST(Quaternion, AgreesWithEigenAndRoundTrips) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::Vector4d q(normal(rng), normal(rng), normal(rng), normal(rng));
        const Eigen::Matrix3d r = rotation_from_quaternion(q);
        const Eigen::Quaterniond eq(q[0], q[1], q[2], q[3]);
        EXPECT_LT((r - eq.normalized().toRotationMatrix()).norm(), 1e-12);
        const Eigen::Vector4d back = quaternion_from_rotation(r);
        EXPECT_GE(back[0], 0.0);
        EXPECT_LT((rotation_from_quaternion(back) - r).norm(), 1e-12);
    }
}

TEST(ProjectCovariance, OnAxisClosedForm) {
    Camera cam;
    cam.intrinsics = {100.0, 80.0, 32.0, 32.0, 64, 64};
    const double sigma2 = 0.04, depth = 4.0;
    const auto projected = project_covariance(sigma2 * Eigen::Matrix3d::Identity(), cam, Eigen::Vector3d(0, 0, depth));
    ASSERT_TRUE(projected.has_value());
    EXPECT_NEAR((*projected)(0, 0), sigma2 * 100.0 * 100.0 / (depth * depth) + kDilation, 1e-12);
    EXPECT_NEAR((*projected)(1, 1), sigma2 * 80.0 * 80.0 / (depth * depth) + kDilation, 1e-12);
    EXPECT_NEAR((*projected)(0, 1), 0.0, 1e-15);
}

TEST(ProjectCovariance, IdentityStubKeepsUpperBlock) {
    Eigen::Matrix3d sigma;
    sigma << 2.0, 0.5, 0.1, 0.5, 3.0, 0.2, 0.1, 0.2, 4.0;
    Matrix23d j = Matrix23d::Zero();
    j(0, 0) = j(1, 1) = 1.0;
    const Eigen::Matrix2d p = project_covariance(sigma, j, Eigen::Matrix3d::Identity());
    EXPECT_DOUBLE_EQ(p(0, 0), 2.0 + kDilation);
    EXPECT_DOUBLE_EQ(p(1, 1), 3.0 + kDilation);
    EXPECT_DOUBLE_EQ(p(0, 1), 0.5);
    EXPECT_DOUBLE_EQ(p(1, 0), 0.5);
}

TEST(ProjectCovariance, DoublingDepthHalvesStdDev) {
    Camera cam;
    cam.intrinsics = {50.0, 50.0, 16.0, 16.0, 32, 32};
    const Eigen::Matrix3d sigma = covariance_3d(Eigen::Vector4d(0.9, 0.1, -0.2, 0.3), Eigen::Vector3d(-1.0, -1.5, -2.0));
    const Eigen::Vector3d mu(0.2, -0.1, 2.0);
    const Eigen::Matrix2d near = *project_covariance(sigma, cam, mu) - kDilation * Eigen::Matrix2d::Identity();
    const Eigen::Matrix2d far = *project_covariance(sigma, cam, 2.0 * mu) - kDilation * Eigen::Matrix2d::Identity();
    // Scaling the whole camera-space point by 2 scales J by 1/2, i.e. covariance by 1/4.
    EXPECT_LT((far - 0.25 * near).norm(), 1e-12 * near.norm());
}

TEST(ProjectCovariance, CullsAtNearPlane) {
    Camera cam;
    cam.intrinsics = {10.0, 10.0, 4.0, 4.0, 8, 8};
    EXPECT_FALSE(project_covariance(Eigen::Matrix3d::Identity(), cam, Eigen::Vector3d(0, 0, kNearPlane)).has_value());
    EXPECT_FALSE(project_covariance(Eigen::Matrix3d::Identity(), cam, Eigen::Vector3d(0, 0, -1.0)).has_value());
    EXPECT_TRUE(project_covariance(Eigen::Matrix3d::Identity(), cam, Eigen::Vector3d(0, 0, 0.02)).has_value());
}

TEST(ProjectCovariance, SymmetricPositiveDeterminant) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const Camera cam = testing::tilted_camera(32, 30.0, rng);
        const Scene scene = testing::random_scene(1, rng);
        const Eigen::Matrix3d sigma = covariance_3d(scene[0].rotation, scene[0].log_scale);
        const auto p = project_covariance(sigma, cam, cam.to_camera(scene[0].mean));
        ASSERT_TRUE(p.has_value());
        EXPECT_EQ((*p)(0, 1), (*p)(1, 0));
        EXPECT_GT(p->determinant(), 0.0);
    }
}

TEST(GaussianWeight, Values) {
    const Eigen::Matrix2d id = Eigen::Matrix2d::Identity();
    EXPECT_EQ(*gaussian_weight(Eigen::Vector2d::Zero(), id), 1.0);
    EXPECT_NEAR(*gaussian_weight(Eigen::Vector2d(1.0, 0.0), id), 0.6065306597126334, 1e-15);
    Eigen::Matrix2d cov;
    cov << 2.0, 0.3, 0.3, 1.0;
    const Eigen::Vector2d d(0.7, -1.1);
    EXPECT_EQ(*gaussian_weight(d, cov), *gaussian_weight(-d, cov));
    EXPECT_FALSE(gaussian_weight(d, Eigen::Matrix2d::Zero()).has_value());
}

TEST(GaussianWeight, DecreasesAlongRays) {
    Eigen::Matrix2d cov;
    cov << 3.0, -0.8, -0.8, 1.5;
    std::mt19937_64 rng(4);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Vector2d dir(normal(rng), normal(rng));
        double previous = 1.0;
        for (double t = 0.1; t < 5.0; t += 0.1) {
            const double w = *gaussian_weight(t * dir, cov);
            EXPECT_LT(w, previous);
            previous = w;
        }
    }
}

TEST(Camera, ValidationAndCentre) {
    Camera cam;
    cam.intrinsics = {10.0, 10.0, 4.0, 4.0, 8, 8};
    EXPECT_NO_THROW(validate_camera(cam));
    cam.translation = {0.0, 0.0, 3.0};
    EXPECT_LT((cam.center() - Eigen::Vector3d(0, 0, -3)).norm(), 1e-15);
    cam.rotation(0, 0) = 1.1;
    EXPECT_THROW(validate_camera(cam), Error);
    cam.rotation.setIdentity();
    cam.intrinsics.fx = 0.0;
    EXPECT_THROW(validate_camera(cam), Error);
}

TEST(SceneFile, RoundTripIsExactAndByteIdentical) {
    testing::TempDir dir("scene");
    std::mt19937_64 rng(5);
    Scene scene = testing::random_scene(25, rng);
    scene[3].color = {1.0 / 3.0, 1e-300, -0.0};
    write_scene(dir / "a.scene", scene);
    const Scene loaded = read_scene(dir / "a.scene");
    ASSERT_EQ(loaded.size(), scene.size());
    for (std::size_t i = 0; i < scene.size(); ++i) {
        EXPECT_EQ(loaded[i].mean, scene[i].mean);
        EXPECT_EQ(loaded[i].rotation, scene[i].rotation);
        EXPECT_EQ(loaded[i].log_scale, scene[i].log_scale);
        EXPECT_EQ(loaded[i].opacity_logit, scene[i].opacity_logit);
        EXPECT_EQ(loaded[i].color, scene[i].color);
    }
    write_scene(dir / "b.scene", loaded);
    std::ifstream fa(dir / "a.scene"), fb(dir / "b.scene");
    const std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
    EXPECT_EQ(sa, sb);
}

TEST(SceneFile, Diagnostics) {
    testing::TempDir dir("scene_bad");
    std::ofstream(dir / "nohdr.scene") << "0 0 0 1 0 0 0 0 0 0 0 0 0 0\n";
    std::ofstream(dir / "short.scene") << "# evsplat scene format_version 1\n0 0 0 1 0 0 0\n";
    std::ofstream(dir / "zero_q.scene") << "# evsplat scene format_version 1\n0 0 0 0 0 0 0 0 0 0 0 0 0 0\n";
    auto code = [](const std::filesystem::path& p) {
        try {
            read_scene(p);
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::kInvalidArgument;
    };
    EXPECT_EQ(code(dir / "nohdr.scene"), ErrorCode::kParseError);
    EXPECT_EQ(code(dir / "short.scene"), ErrorCode::kParseError);
    EXPECT_EQ(code(dir / "zero_q.scene"), ErrorCode::kInvalidScene);
    EXPECT_EQ(code(dir / "absent.scene"), ErrorCode::kMissingFile);
}

} // namespace
} // namespace evsplat
