#include "evsplat/config.hpp"
#include "evsplat/dataset.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <fstream>

namespace evsplat {
namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), {});
}

TEST(TrainConfigFile, FormatReadRoundTrip) {
    testing::TempDir dir("config");
    TrainConfig c;
    c.iterations = 1234;
    c.seed = 18446744073709551615ull;
    c.deterministic = false;
    c.threads = 3;
    c.event_pairs = 2;
    c.single_pose = true;
    c.checkpoint_every = 7;
    c.spatial_extent = 1.0 / 3.0;
    c.background = {0.1, 0.2, 1e-300};
    c.weights.w_dssim = 0.25;
    c.weights.w_event = 0.0;
    c.weights.n = 7;
    c.weights.thresholds = {0.15, 0.35};
    c.learning_rates = {1e-3, 1e-5, 2e-3, 3e-2, 4e-3, 5e-4};
    c.output_dir = "runs/a b";
    std::ofstream(dir / "c.txt") << format_train_config(c);
    const TrainConfig back = read_train_config(dir / "c.txt");
    EXPECT_EQ(format_train_config(back), format_train_config(c));
    EXPECT_EQ(back.seed, c.seed);
    EXPECT_EQ(back.background, c.background);
    EXPECT_EQ(back.output_dir, c.output_dir);
    EXPECT_EQ(back.learning_rates.rotation, 5e-4);
}

TEST(TrainConfigFile, CommentsBlanksAndBaseValues) {
    testing::TempDir dir("config_partial");
    std::ofstream(dir / "c.txt") << "# header\n\n  iterations=50   # trailing\nw_event = 0.01\n";
    TrainConfig base;
    base.seed = 99;
    const TrainConfig c = read_train_config(dir / "c.txt", base);
    EXPECT_EQ(c.iterations, 50);
    EXPECT_EQ(c.weights.w_event, 0.01);
    EXPECT_EQ(c.seed, 99u);
}

TEST(TrainConfigFile, ErrorsNameLineAndKey) {
    testing::TempDir dir("config_bad");
    auto message = [&](const std::string& text) {
        std::ofstream(dir / "c.txt") << text;
        try {
            read_train_config(dir / "c.txt");
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::kParseError);
            return std::string(e.what());
        }
        return std::string("no error");
    };
    EXPECT_NE(message("iterations = 5\nlearning_rate = 1\n").find("c.txt:2"), std::string::npos);
    EXPECT_NE(message("iterations = 5\nlearning_rate = 1\n").find("learning_rate"), std::string::npos);
    EXPECT_NE(message("iterations = five\n").find("iterations"), std::string::npos);
    EXPECT_NE(message("\n\nseed\n").find("c.txt:3"), std::string::npos);
    EXPECT_NE(message("background = 1 2\n").find("background"), std::string::npos);
    EXPECT_NE(message("deterministic = maybe\n").find("deterministic"), std::string::npos);
    EXPECT_THROW(read_train_config(dir / "absent.txt"), Error);
}

TEST(CameraFileFormat, RoundTripIsByteIdentical) {
    testing::TempDir dir("camera");
    CameraFile c{{60.5, 61.25, 31.5, 30.0, 64, 62}, {{0.9, 0.1, -0.2, 0.3}, {0.5, -1.0 / 3.0, 3.0}}, {0.2, 0.2, 0.2}};
    write_camera_file(dir / "a.json", c);
    const CameraFile back = read_camera_file(dir / "a.json");
    EXPECT_EQ(back.intrinsics, c.intrinsics);
    EXPECT_EQ(back.pose, c.pose);
    EXPECT_EQ(back.background, c.background);
    write_camera_file(dir / "b.json", back);
    EXPECT_EQ(slurp(dir / "a.json"), slurp(dir / "b.json"));
}

TEST(CameraFileFormat, Diagnostics) {
    testing::TempDir dir("camera_bad");
    std::ofstream(dir / "no_pose.json")
        << R"({"format_version": 1, "intrinsics": {"fx": 1, "fy": 1, "cx": 0, "cy": 0, "width": 4, "height": 4}})";
    std::ofstream(dir / "version.json") << R"({"format_version": 2})";
    std::ofstream(dir / "garbage.json") << "{ not json";
    for (const char* name : {"no_pose.json", "version.json", "garbage.json"}) {
        try {
            read_camera_file(dir / name);
            ADD_FAILURE() << name;
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::kParseError) << name;
        }
    }
}

} // namespace
} // namespace evsplat
