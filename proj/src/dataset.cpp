#include "evsplat/dataset.hpp"

#include "evsplat/image_io.hpp"
#include "evsplat/objective.hpp"
#include "text_util.hpp"

#include <json.hpp>

#include <Eigen/Geometry>

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>

namespace evsplat {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

[[noreturn]] void manifest_error(const fs::path& path, const std::string& message) {
    fail(ErrorCode::kParseError, path.string() + ": " + message);
}

const Json& field(const Json& object, const char* key, const fs::path& path, const std::string& where) {
    if (!object.is_object() || !object.contains(key)) manifest_error(path, where + ": missing key '" + key + "'");
    return object.at(key);
}

template <typename T>
T get_as(const Json& object, const char* key, const fs::path& path, const std::string& where) {
    const Json& value = field(object, key, path, where);
    try {
        return value.get<T>();
    } catch (const nlohmann::json::exception&) {
        manifest_error(path, where + ": key '" + key + "' has the wrong type");
    }
}

Json pose_to_json(const Pose& pose) {
    Json j;
    j["q"] = {pose.rotation[0], pose.rotation[1], pose.rotation[2], pose.rotation[3]};
    j["t"] = {pose.translation[0], pose.translation[1], pose.translation[2]};
    return j;
}

Pose pose_from_json(const Json& j, const fs::path& path, const std::string& where) {
    const auto q = get_as<std::vector<double>>(j, "q", path, where);
    const auto t = get_as<std::vector<double>>(j, "t", path, where);
    if (q.size() != 4 || t.size() != 3) manifest_error(path, where + ": pose needs q[4] and t[3]");
    Pose pose;
    pose.rotation = {q[0], q[1], q[2], q[3]};
    pose.translation = {t[0], t[1], t[2]};
    if (!(pose.rotation.norm() > 0.0) || !pose.rotation.allFinite() || !pose.translation.allFinite()) {
        manifest_error(path, where + ": pose is not a finite rigid transform");
    }
    return pose;
}

Json intrinsics_to_json(const Intrinsics& k) {
    return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

Intrinsics intrinsics_from_json(const Json& k, const fs::path& path) {
    Intrinsics out;
    out.fx = get_as<double>(k, "fx", path, "intrinsics");
    out.fy = get_as<double>(k, "fy", path, "intrinsics");
    out.cx = get_as<double>(k, "cx", path, "intrinsics");
    out.cy = get_as<double>(k, "cy", path, "intrinsics");
    out.width = get_as<int>(k, "width", path, "intrinsics");
    out.height = get_as<int>(k, "height", path, "intrinsics");
    if (!(out.fx > 0.0) || !(out.fy > 0.0) || out.width <= 0 || out.height <= 0) {
        manifest_error(path, "intrinsics must have positive focal lengths and size");
    }
    return out;
}

Json read_json(const fs::path& path) {
    auto in = detail::open_for_reading(path);
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        manifest_error(path, e.what());
    }
}

} // namespace

CameraFile read_camera_file(const fs::path& path) {
    const Json root = read_json(path);
    const int version = get_as<int>(root, "format_version", path, "camera");
    if (version != kManifestFormatVersion) manifest_error(path, "unsupported format_version " + std::to_string(version));
    CameraFile c;
    c.intrinsics = intrinsics_from_json(field(root, "intrinsics", path, "camera"), path);
    c.pose = pose_from_json(field(root, "pose", path, "camera"), path, "camera");
    if (root.contains("background")) {
        const auto bg = get_as<std::vector<double>>(root, "background", path, "camera");
        if (bg.size() != 3) manifest_error(path, "background needs three components");
        c.background = {bg[0], bg[1], bg[2]};
    }
    return c;
}

void write_camera_file(const fs::path& path, const CameraFile& camera) {
    Json root;
    root["format_version"] = kManifestFormatVersion;
    root["intrinsics"] = intrinsics_to_json(camera.intrinsics);
    root["pose"] = pose_to_json(camera.pose);
    root["background"] = {camera.background[0], camera.background[1], camera.background[2]};
    auto out = detail::open_for_writing(path);
    out << root.dump(2) << '\n';
    if (!out) fail(ErrorCode::kInvalidArgument, "failed writing " + path.string());
}

Manifest read_manifest(const fs::path& path) {
    const Json root = read_json(path);
    Manifest m;
    m.format_version = get_as<int>(root, "format_version", path, "manifest");
    if (m.format_version != kManifestFormatVersion) {
        manifest_error(path, "unsupported format_version " + std::to_string(m.format_version));
    }
    m.intrinsics = intrinsics_from_json(field(root, "intrinsics", path, "manifest"), path);
    m.n_latents = get_as<int>(root, "n_latents", path, "manifest");
    if (m.n_latents < 2) manifest_error(path, "n_latents must be >= 2");
    const Json& thr = field(root, "thresholds", path, "manifest");
    m.thresholds.c_pos = get_as<double>(thr, "c_pos", path, "thresholds");
    m.thresholds.c_neg = get_as<double>(thr, "c_neg", path, "thresholds");
    if (!(m.thresholds.c_pos > 0.0) || !(m.thresholds.c_neg > 0.0)) manifest_error(path, "thresholds must be positive");
    const auto bg = get_as<std::vector<double>>(root, "background", path, "manifest");
    if (bg.size() != 3) manifest_error(path, "background needs three components");
    m.background = {bg[0], bg[1], bg[2]};
    m.points = get_as<std::string>(root, "points", path, "manifest");

    for (const Json& jv : field(root, "views", path, "manifest")) {
        ManifestView v;
        v.name = get_as<std::string>(jv, "name", path, "view");
        const std::string where = "view '" + v.name + "'";
        v.blurry = get_as<std::string>(jv, "blurry", path, where);
        if (jv.contains("blurry_png")) v.blurry_png = get_as<std::string>(jv, "blurry_png", path, where);
        const auto exposure = get_as<std::vector<double>>(jv, "exposure", path, where);
        if (exposure.size() != 2 || !(exposure[1] > exposure[0])) {
            manifest_error(path, where + ": exposure must be [t_start, t_end] with t_start < t_end");
        }
        v.t_start = exposure[0];
        v.t_end = exposure[1];
        const Json& poses = field(jv, "poses", path, where);
        if (!poses.is_array()) manifest_error(path, where + ": poses must be an array");
        for (const Json& jp : poses) v.poses.push_back(pose_from_json(jp, path, where));
        if (static_cast<int>(v.poses.size()) != m.n_latents) {
            fail(ErrorCode::kPoseCountMismatch, path.string() + ": " + where + " has " + std::to_string(v.poses.size()) +
                                                    " poses, expected n_latents = " + std::to_string(m.n_latents));
        }
        v.events = get_as<std::string>(jv, "events", path, where);
        if (jv.contains("sharp")) v.sharp = get_as<std::string>(jv, "sharp", path, where);
        if (jv.contains("latents")) v.latents = get_as<std::vector<std::string>>(jv, "latents", path, where);
        if (!v.latents.empty() && static_cast<int>(v.latents.size()) != m.n_latents) {
            fail(ErrorCode::kPoseCountMismatch, path.string() + ": " + where + " lists " +
                                                    std::to_string(v.latents.size()) + " latent frames, expected " +
                                                    std::to_string(m.n_latents));
        }
        m.views.push_back(std::move(v));
    }
    if (root.contains("test_views")) {
        for (const Json& jt : root.at("test_views")) {
            ManifestTestView t;
            t.name = get_as<std::string>(jt, "name", path, "test view");
            const std::string where = "test view '" + t.name + "'";
            t.pose = pose_from_json(field(jt, "pose", path, where), path, where);
            t.sharp = get_as<std::string>(jt, "sharp", path, where);
            m.test_views.push_back(std::move(t));
        }
    }
    return m;
}

void write_manifest(const fs::path& path, const Manifest& m) {
    Json root;
    root["format_version"] = m.format_version;
    root["intrinsics"] = intrinsics_to_json(m.intrinsics);
    root["n_latents"] = m.n_latents;
    root["thresholds"] = {{"c_pos", m.thresholds.c_pos}, {"c_neg", m.thresholds.c_neg}};
    root["background"] = {m.background[0], m.background[1], m.background[2]};
    root["points"] = m.points;
    root["views"] = Json::array();
    for (const ManifestView& v : m.views) {
        Json jv;
        jv["name"] = v.name;
        jv["blurry"] = v.blurry;
        if (!v.blurry_png.empty()) jv["blurry_png"] = v.blurry_png;
        jv["exposure"] = {v.t_start, v.t_end};
        jv["poses"] = Json::array();
        for (const Pose& p : v.poses) jv["poses"].push_back(pose_to_json(p));
        jv["events"] = v.events;
        if (!v.sharp.empty()) jv["sharp"] = v.sharp;
        if (!v.latents.empty()) jv["latents"] = v.latents;
        root["views"].push_back(std::move(jv));
    }
    root["test_views"] = Json::array();
    for (const ManifestTestView& t : m.test_views) {
        root["test_views"].push_back({{"name", t.name}, {"pose", pose_to_json(t.pose)}, {"sharp", t.sharp}});
    }
    auto out = detail::open_for_writing(path);
    out << root.dump(2) << '\n';
    if (!out) fail(ErrorCode::kInvalidArgument, "failed writing " + path.string());
}

PointCloud read_points(const fs::path& path) {
    auto in = detail::open_for_reading(path);
    PointCloud cloud;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::is_blank_or_comment(line)) continue;
        const auto fields = detail::split_fields(line);
        double v[6] = {};
        bool ok = fields.size() == 3 || fields.size() == 6;
        for (std::size_t i = 0; ok && i < fields.size(); ++i) ok = detail::parse_number(fields[i], v[i]);
        if (!ok) fail(ErrorCode::kParseError, detail::where(path, line_no) + ": expected `x y z [r g b]`");
        const bool has_color = fields.size() == 6;
        if (!cloud.positions.empty() && has_color != !cloud.colors.empty()) {
            fail(ErrorCode::kParseError, detail::where(path, line_no) + ": mixed points with and without colour");
        }
        cloud.positions.emplace_back(v[0], v[1], v[2]);
        if (has_color) cloud.colors.emplace_back(v[3], v[4], v[5]);
    }
    if (cloud.positions.empty()) fail(ErrorCode::kParseError, path.string() + ": no points");
    return cloud;
}

void write_points(const fs::path& path, const PointCloud& points) {
    auto out = detail::open_for_writing(path);
    out << (points.colors.empty() ? "# x y z\n" : "# x y z r g b\n");
    for (std::size_t i = 0; i < points.positions.size(); ++i) {
        const auto& p = points.positions[i];
        out << detail::format_double(p.x()) << ' ' << detail::format_double(p.y()) << ' ' << detail::format_double(p.z());
        if (!points.colors.empty()) {
            const auto& c = points.colors[i];
            out << ' ' << detail::format_double(c.x()) << ' ' << detail::format_double(c.y()) << ' '
                << detail::format_double(c.z());
        }
        out << '\n';
    }
}

Dataset load_dataset(const fs::path& manifest_path) {
    const Manifest m = read_manifest(manifest_path);
    const fs::path root = manifest_path.parent_path();
    auto resolve = [&](const std::string& rel, const std::string& where) {
        const fs::path p = root / rel;
        if (!fs::exists(p)) fail(ErrorCode::kMissingFile, where + ": referenced file " + p.string() + " does not exist");
        return p;
    };
    auto load_image = [&](const std::string& rel, const std::string& where, int channels) {
        Image img = read_float_image(resolve(rel, where));
        if (img.width() != m.intrinsics.width || img.height() != m.intrinsics.height || img.channels() != channels) {
            fail(ErrorCode::kInvalidArgument, where + ": " + rel + " does not match the intrinsics");
        }
        return img;
    };

    Dataset d;
    d.intrinsics = m.intrinsics;
    d.n_latents = m.n_latents;
    d.thresholds = m.thresholds;
    d.background = m.background;
    d.points = read_points(resolve(m.points, "points"));
    for (const ManifestView& mv : m.views) {
        const std::string where = "view '" + mv.name + "'";
        View v;
        v.name = mv.name;
        v.intrinsics = m.intrinsics;
        v.t_start = mv.t_start;
        v.t_end = mv.t_end;
        v.poses = mv.poses;
        v.blurry = load_image(mv.blurry, where, 3);
        v.stream = read_event_file(resolve(mv.events, where), mv.t_start, mv.t_end, m.intrinsics.width,
                                   m.intrinsics.height);
        validate_view(v, m.n_latents);
        d.sharp.push_back(mv.sharp.empty() ? std::nullopt : std::optional<Image>(load_image(mv.sharp, where, 3)));
        std::vector<Image> latents;
        for (const std::string& rel : mv.latents) latents.push_back(load_image(rel, where, 3));
        d.latents.push_back(std::move(latents));
        d.views.push_back(std::move(v));
    }
    for (const ManifestTestView& mt : m.test_views) {
        const std::string where = "test view '" + mt.name + "'";
        d.test_views.push_back(TestView{mt.name, mt.pose, load_image(mt.sharp, where, 3)});
    }
    return d;
}

Pose interpolate_pose(const Pose& start, const Pose& end, double s) {
    const Eigen::Quaterniond a(start.rotation[0], start.rotation[1], start.rotation[2], start.rotation[3]);
    const Eigen::Quaterniond b(end.rotation[0], end.rotation[1], end.rotation[2], end.rotation[3]);
    const Eigen::Quaterniond q = a.normalized().slerp(s, b.normalized());
    Pose out;
    out.rotation = {q.w(), q.x(), q.y(), q.z()};
    out.translation = (1.0 - s) * start.translation + s * end.translation;
    return out;
}

void validate_synthetic_spec(const SyntheticSpec& spec) {
    if (spec.scene.empty()) fail(ErrorCode::kInvalidSpec, "ground-truth scene is empty");
    try {
        validate_scene(spec.scene);
        validate_camera(make_camera(Pose{}, spec.intrinsics));
        validate_thresholds(spec.thresholds);
    } catch (const Error& e) {
        fail(ErrorCode::kInvalidSpec, e.what());
    }
    if (spec.views.empty()) fail(ErrorCode::kInvalidSpec, "no views");
    if (spec.n_latents < 2) fail(ErrorCode::kInvalidSpec, "n_latents must be >= 2");
    if (!(spec.exposure > 0.0)) fail(ErrorCode::kInvalidSpec, "exposure must be positive");
    if (!spec.background.allFinite()) fail(ErrorCode::kInvalidSpec, "background must be finite");
}

namespace {

Eigen::Matrix3d axis_rotation(const Eigen::Vector3d& axis, double angle) {
    return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

// World-to-camera pose of a camera orbiting the origin at `distance`, looking at it.
Pose orbit_pose(double azimuth, double elevation, double distance) {
    const Eigen::Matrix3d cam_to_world =
        axis_rotation(Eigen::Vector3d::UnitY(), azimuth) * axis_rotation(Eigen::Vector3d::UnitX(), elevation);
    Pose pose;
    pose.rotation = quaternion_from_rotation(cam_to_world.transpose());
    pose.translation = Eigen::Vector3d(0.0, 0.0, distance);
    return pose;
}

Eigen::Vector3d random_unit(std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::Vector3d v;
    do {
        v = {normal(rng), normal(rng), normal(rng)};
    } while (v.norm() < 1e-9);
    return v.normalized();
}

Pose perturb(const Pose& pose, const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation) {
    Pose out;
    out.rotation = quaternion_from_rotation(rotation * rotation_from_quaternion(pose.rotation));
    out.translation = rotation * pose.translation + translation;
    return out;
}

std::string indexed(const char* prefix, std::size_t i) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%s_%03zu", prefix, i);
    return buffer;
}

} // namespace

SyntheticSpec standard_harness(const HarnessOptions& o) {
    if (o.width <= 0 || o.height <= 0 || o.gaussians < 1 || o.views < 1 || o.test_views < 0 || o.n_latents < 2) {
        fail(ErrorCode::kInvalidSpec, "harness options out of range");
    }
    std::mt19937_64 rng(o.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

    SyntheticSpec spec;
    spec.seed = o.seed;
    spec.n_latents = o.n_latents;
    spec.thresholds = o.thresholds;
    spec.background = Eigen::Vector3d::Constant(0.2);
    const double focal = 1.0 * o.width;
    spec.intrinsics = Intrinsics{focal, focal, 0.5 * (o.width - 1), 0.5 * (o.height - 1), o.width, o.height};

    // A gently curved relief with a colour field that has both smooth and per-splat variation.
    const double phase[3] = {uniform(0.0, 6.3), uniform(0.0, 6.3), uniform(0.0, 6.3)};
    for (int i = 0; i < o.gaussians; ++i) {
        Gaussian3D g;
        const double x = uniform(-1.3, 1.3);
        const double y = uniform(-1.3, 1.3);
        const double z = 0.15 * std::sin(2.0 * x) * std::cos(3.0 * y) + uniform(-0.05, 0.05);
        g.mean = {x, y, z};
        const Eigen::Matrix3d r = axis_rotation(random_unit(rng), uniform(0.0, std::numbers::pi));
        g.rotation = quaternion_from_rotation(r);
        const double base = std::log(uniform(0.08, 0.16));
        g.log_scale = {base + uniform(-0.4, 0.4), base + uniform(-0.4, 0.4), base - 0.7};
        g.opacity_logit = logit(uniform(0.6, 0.95));
        for (int c = 0; c < 3; ++c) {
            const double smooth = std::sin(2.5 * x + 1.7 * c * y + phase[c]);
            g.color[c] = std::clamp(0.5 + 0.3 * smooth + uniform(-0.2, 0.2), 0.02, 0.98);
        }
        spec.scene.push_back(g);
    }

    for (const Gaussian3D& g : spec.scene) {
        std::normal_distribution<double> noise(0.0, o.point_noise);
        spec.init_points.positions.push_back(g.mean + Eigen::Vector3d(noise(rng), noise(rng), noise(rng)));
    }

    constexpr double kDistance = 3.0;
    for (int v = 0; v < o.views; ++v) {
        const double azimuth = o.views == 1 ? 0.0 : -0.35 + 0.7 * v / (o.views - 1);
        const double elevation = 0.2 * std::sin(1.3 * v + 0.5);
        const Pose base = orbit_pose(azimuth, elevation, kDistance);
        const Eigen::Matrix3d half_turn = axis_rotation(random_unit(rng), 0.5 * o.shake_rotation * uniform(0.5, 1.0));
        const Eigen::Vector3d half_shift = 0.5 * o.shake_translation * uniform(0.5, 1.0) * random_unit(rng);
        spec.views.push_back(ShakeTrajectory{perturb(base, half_turn.transpose(), -half_shift),
                                             perturb(base, half_turn, half_shift)});
    }
    for (int t = 0; t < o.test_views; ++t) {
        spec.test_poses.push_back(orbit_pose(uniform(-0.3, 0.3), uniform(-0.15, 0.15), kDistance));
    }
    return spec;
}

SyntheticDataset generate_synthetic(const SyntheticSpec& spec, const fs::path& out_dir, int threads) {
    validate_synthetic_spec(spec);
    const bool write = !out_dir.empty();
    const RenderSettings settings{threads, true, true};
    const int n = spec.n_latents;

    SyntheticDataset out;
    Manifest& m = out.manifest;
    Dataset& d = out.dataset;
    m.intrinsics = d.intrinsics = spec.intrinsics;
    m.n_latents = d.n_latents = n;
    m.thresholds = d.thresholds = spec.thresholds;
    m.background = d.background = spec.background;
    m.points = "points.txt";
    d.points = spec.init_points;

    for (std::size_t v = 0; v < spec.views.size(); ++v) {
        const std::string name = indexed("view", v);
        View view;
        view.name = name;
        view.intrinsics = spec.intrinsics;
        view.t_start = 0.1 * static_cast<double>(v);
        view.t_end = view.t_start + spec.exposure;
        const auto timestamps = exposure_timestamps(view.t_start, view.t_end, n);

        std::vector<Image> latents;
        std::vector<Image> gray;
        bool any_visible = false;
        for (int i = 0; i < n; ++i) {
            const double s = static_cast<double>(i) / (n - 1);
            view.poses.push_back(interpolate_pose(spec.views[v].start, spec.views[v].end, s));
            RenderOutput r = render(spec.scene, make_camera(view.poses.back(), spec.intrinsics), spec.background, settings);
            for (double a : r.alpha.data()) any_visible = any_visible || a > 0.0;
            gray.push_back(to_grayscale(r.image));
            latents.push_back(std::move(r.image));
        }
        if (!any_visible) fail(ErrorCode::kInvalidSpec, name + ": every Gaussian is culled or off-screen");
        view.blurry = synthesize_blur(latents);
        view.stream = simulate_events(gray, timestamps, spec.thresholds, threads);

        ManifestView mv;
        mv.name = name;
        mv.blurry = "views/" + name + "/blurry.f32";
        mv.blurry_png = "views/" + name + "/blurry.png";
        mv.t_start = view.t_start;
        mv.t_end = view.t_end;
        mv.poses = view.poses;
        mv.events = "views/" + name + "/events.txt";
        mv.sharp = "views/" + name + "/sharp.f32";
        for (int i = 0; i < n; ++i) mv.latents.push_back("views/" + name + "/" + indexed("latent", i) + ".f32");
        if (write) {
            write_float_image(out_dir / mv.blurry, view.blurry);
            write_png(out_dir / mv.blurry_png, view.blurry);
            write_event_file(out_dir / mv.events, view.stream);
            write_float_image(out_dir / mv.sharp, latents[mid_exposure_index(n)]);
            write_png(out_dir / ("views/" + name + "/sharp.png"), latents[mid_exposure_index(n)]);
            for (int i = 0; i < n; ++i) write_float_image(out_dir / mv.latents[i], latents[i]);
        }
        m.views.push_back(std::move(mv));
        d.sharp.emplace_back(latents[mid_exposure_index(n)]);
        d.latents.push_back(latents);
        d.views.push_back(std::move(view));
        out.latents.push_back(std::move(latents));
    }

    for (std::size_t t = 0; t < spec.test_poses.size(); ++t) {
        const std::string name = indexed("test", t);
        Image sharp = render(spec.scene, make_camera(spec.test_poses[t], spec.intrinsics), spec.background, settings).image;
        ManifestTestView mt{name, spec.test_poses[t], "test/" + name + ".f32"};
        if (write) {
            write_float_image(out_dir / mt.sharp, sharp);
            write_png(out_dir / ("test/" + name + ".png"), sharp);
        }
        m.test_views.push_back(mt);
        d.test_views.push_back(TestView{name, spec.test_poses[t], std::move(sharp)});
    }

    if (write) {
        write_points(out_dir / m.points, spec.init_points);
        write_scene(out_dir / "ground_truth.scene", spec.scene);
        write_manifest(out_dir / "manifest.json", m);
    }
    return out;
}

EvalMode parse_eval_mode(std::string_view text) {
    if (text == "deblur") return EvalMode::kDeblur;
    if (text == "novel-view") return EvalMode::kNovelView;
    fail(ErrorCode::kInvalidArgument, "unknown evaluation mode '" + std::string(text) + "' (deblur | novel-view)");
}

MetricsTable evaluate(const Scene& scene, const Dataset& dataset, EvalMode mode, const RenderSettings& settings) {
    MetricsTable table;
    auto score = [&](const std::string& name, const Pose& pose, const Image& truth) {
        const Image pred = render(scene, make_camera(pose, dataset.intrinsics), dataset.background, settings).image;
        table.rows.push_back(MetricsRow{name, psnr(pred, truth), ssim_metric(pred, truth)});
    };
    if (mode == EvalMode::kDeblur) {
        for (std::size_t v = 0; v < dataset.views.size(); ++v) {
            if (v >= dataset.sharp.size() || !dataset.sharp[v]) {
                fail(ErrorCode::kModeUnavailable, "view '" + dataset.views[v].name + "' has no sharp ground truth");
            }
            const View& view = dataset.views[v];
            score(view.name, view.poses[mid_exposure_index(dataset.n_latents)], *dataset.sharp[v]);
        }
    } else {
        for (const TestView& t : dataset.test_views) score(t.name, t.pose, t.sharp);
    }
    if (table.rows.empty()) fail(ErrorCode::kModeUnavailable, "no ground-truth images for this evaluation mode");
    table.mean.name = "mean";
    for (const MetricsRow& row : table.rows) {
        table.mean.psnr += row.psnr;
        table.mean.ssim += row.ssim;
    }
    table.mean.psnr /= static_cast<double>(table.rows.size());
    table.mean.ssim /= static_cast<double>(table.rows.size());
    return table;
}

std::string format_metrics_csv(const MetricsTable& table) {
    std::ostringstream out;
    out << "view,psnr,ssim\n";
    for (const MetricsRow& row : table.rows) {
        out << row.name << ',' << detail::format_double(row.psnr) << ',' << detail::format_double(row.ssim) << '\n';
    }
    out << table.mean.name << ',' << detail::format_double(table.mean.psnr) << ','
        << detail::format_double(table.mean.ssim) << '\n';
    return out.str();
}

std::string format_metrics_table(const MetricsTable& table) {
    std::size_t width = 4;
    for (const MetricsRow& row : table.rows) width = std::max(width, row.name.size());
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof(line), "%-*s  %9s  %7s\n", static_cast<int>(width), "view", "PSNR(dB)", "SSIM");
    out << line;
    auto emit = [&](const MetricsRow& row) {
        std::snprintf(line, sizeof(line), "%-*s  %9.3f  %7.4f\n", static_cast<int>(width), row.name.c_str(), row.psnr,
                      row.ssim);
        out << line;
    };
    for (const MetricsRow& row : table.rows) emit(row);
    out << std::string(width + 20, '-') << '\n';
    emit(table.mean);
    return out.str();
}

} // namespace evsplat
