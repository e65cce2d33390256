#include "evsplat/trainer.hpp"

#include "text_util.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace evsplat {

void validate_config(const TrainConfig& config) {
    if (config.iterations < 1) fail(ErrorCode::kInvalidArgument, "iterations must be >= 1");
    validate_weights(config.weights);
    const auto& lr = config.learning_rates;
    for (double rate : {lr.position, lr.position_final, lr.color, lr.opacity, lr.scale, lr.rotation}) {
        if (!(rate >= 0.0) || !std::isfinite(rate)) fail(ErrorCode::kInvalidArgument, "learning rates must be finite and >= 0");
    }
    if (config.event_pairs < 1) fail(ErrorCode::kInvalidArgument, "event_pairs must be >= 1");
    if (config.checkpoint_every < 1) fail(ErrorCode::kInvalidArgument, "checkpoint_every must be >= 1");
    if (config.single_pose && config.weights.w_event != 0.0) {
        fail(ErrorCode::kInvalidArgument, "single-pose fitting has no event term; set w_event = 0");
    }
    if (!config.background.allFinite()) fail(ErrorCode::kInvalidArgument, "background must be finite");
}

void validate_view(const View& view, int n) {
    const std::string tag = "view '" + view.name + "'";
    if (static_cast<int>(view.poses.size()) != n) {
        fail(ErrorCode::kPoseCountMismatch, tag + ": has " + std::to_string(view.poses.size()) +
                                                " poses, expected " + std::to_string(n));
    }
    if (view.blurry.width() != view.intrinsics.width || view.blurry.height() != view.intrinsics.height ||
        view.blurry.channels() != 3) {
        fail(ErrorCode::kInvalidArgument, tag + ": blurry image does not match the intrinsics");
    }
    if (view.stream.t_start != view.t_start || view.stream.t_end != view.t_end) {
        fail(ErrorCode::kMalformedStream, tag + ": event window differs from the exposure");
    }
    try {
        validate_stream(view.stream, view.intrinsics.width, view.intrinsics.height);
    } catch (const Error& e) {
        fail(e.code(), tag + ": " + e.what());
    }
}

Scene init_scene_from_points(const PointCloud& points) {
    const auto& p = points.positions;
    if (p.empty()) fail(ErrorCode::kInvalidArgument, "cannot initialise a scene from zero points");
    if (!points.colors.empty() && points.colors.size() != p.size()) {
        fail(ErrorCode::kInvalidArgument, "point colours must match the point count");
    }
    Scene scene(p.size());
    const std::size_t neighbours = std::min<std::size_t>(3, p.size() - 1);
    std::vector<double> distances;
    for (std::size_t i = 0; i < p.size(); ++i) {
        double scale = 0.1;
        if (neighbours > 0) {
            distances.clear();
            for (std::size_t j = 0; j < p.size(); ++j)
                if (j != i) distances.push_back((p[i] - p[j]).norm());
            std::partial_sort(distances.begin(), distances.begin() + neighbours, distances.end());
            double mean = 0.0;
            for (std::size_t k = 0; k < neighbours; ++k) mean += distances[k];
            mean /= static_cast<double>(neighbours);
            // Coincident points would give log(0).
            scale = std::max(mean, 1e-7);
        }
        Gaussian3D& g = scene[i];
        g.mean = p[i];
        g.rotation = Eigen::Vector4d(1.0, 0.0, 0.0, 0.0);
        g.log_scale = Eigen::Vector3d::Constant(std::log(scale));
        g.opacity_logit = logit(0.1);
        g.color = points.colors.empty() ? Eigen::Vector3d::Constant(0.5) : points.colors[i];
    }
    return scene;
}

AdamOptimizer::AdamOptimizer(std::size_t gaussians)
    : first_(gaussians * 14, 0.0), second_(gaussians * 14, 0.0) {}

void AdamOptimizer::step(Scene& scene, const SceneGradients& grads, const GroupRates& rates) {
    if (scene.size() * 14 != first_.size() || grads.size() != scene.size()) {
        fail(ErrorCode::kInvalidArgument, "optimizer state does not match the scene");
    }
    ++steps_;
    const double bias1 = 1.0 - std::pow(kBeta1, static_cast<double>(steps_));
    const double bias2 = 1.0 - std::pow(kBeta2, static_cast<double>(steps_));
    auto update = [&](std::size_t slot, double& param, double grad, double lr) {
        double& m = first_[slot];
        double& v = second_[slot];
        m = kBeta1 * m + (1.0 - kBeta1) * grad;
        v = kBeta2 * v + (1.0 - kBeta2) * grad * grad;
        if (lr == 0.0) return;
        param -= lr * (m / bias1) / (std::sqrt(v / bias2) + kEpsilon);
    };
    for (std::size_t i = 0; i < scene.size(); ++i) {
        Gaussian3D& g = scene[i];
        const GaussianGradient& d = grads[i];
        std::size_t slot = i * 14;
        for (int k = 0; k < 3; ++k) update(slot++, g.mean[k], d.mean[k], rates.position);
        for (int k = 0; k < 4; ++k) update(slot++, g.rotation[k], d.rotation[k], rates.rotation);
        for (int k = 0; k < 3; ++k) update(slot++, g.log_scale[k], d.log_scale[k], rates.scale);
        update(slot++, g.opacity_logit, d.opacity_logit, rates.opacity);
        for (int k = 0; k < 3; ++k) update(slot++, g.color[k], d.color[k], rates.color);
        if (rates.color != 0.0) g.color = g.color.cwiseMax(0.0).cwiseMin(1.0);
    }
}

double scene_extent(std::span<const View> views) {
    std::vector<Eigen::Vector3d> centers;
    for (const View& view : views)
        for (const Pose& pose : view.poses) centers.push_back(make_camera(pose, view.intrinsics).center());
    if (centers.empty()) return 1.0;
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& c : centers) mean += c;
    mean /= static_cast<double>(centers.size());
    double radius = 0.0;
    for (const auto& c : centers) radius = std::max(radius, (c - mean).norm());
    radius *= 1.1;
    return radius > 1e-6 ? radius : 1.0;
}

std::pair<int, int> draw_frame_pair(int count, std::mt19937_64& rng) {
    if (count < 2) fail(ErrorCode::kInvalidArgument, "need at least two frames for a pair");
    const int pairs = count * (count - 1) / 2;
    int k = std::uniform_int_distribution<int>(0, pairs - 1)(rng);
    for (int n = 0; n < count - 1; ++n) {
        const int row = count - 1 - n;
        if (k < row) return {n, n + 1 + k};
        k -= row;
    }
    return {count - 2, count - 1};
}

struct Trainer::Prepared {
    std::vector<Camera> cameras;
    std::vector<Image> renders;
    std::vector<EventBinImage> bins;
    std::vector<EventPairTarget> pairs;
};

Trainer::Trainer(Scene initial, TrainConfig config, double extent)
    : scene_(std::move(initial)), config_(std::move(config)), extent_(extent), adam_(scene_.size()),
      rng_(config_.seed) {
    validate_config(config_);
    validate_scene(scene_);
}

Trainer::Prepared Trainer::prepare(const View& view, std::mt19937_64& rng) const {
    const int n = config_.weights.n;
    validate_view(view, n);
    RenderSettings settings{config_.threads, true, config_.deterministic};

    Prepared prep;
    if (config_.single_pose) {
        prep.cameras.push_back(make_camera(view.poses[mid_exposure_index(n)], view.intrinsics));
    } else {
        for (const Pose& pose : view.poses) prep.cameras.push_back(make_camera(pose, view.intrinsics));
    }
    for (const Camera& cam : prep.cameras) prep.renders.push_back(render(scene_, cam, config_.background, settings).image);

    if (!config_.single_pose && config_.weights.w_event > 0.0) {
        const auto ts = exposure_timestamps(view.t_start, view.t_end, n);
        prep.bins.reserve(config_.event_pairs);
        for (int k = 0; k < config_.event_pairs; ++k) {
            const auto [a, b] = draw_frame_pair(n, rng);
            prep.bins.push_back(accumulate_window(view.stream, ts[a], ts[b], view.intrinsics.width, view.intrinsics.height));
            prep.pairs.push_back(EventPairTarget{a, b, nullptr});
        }
        for (std::size_t k = 0; k < prep.pairs.size(); ++k) prep.pairs[k].counts = &prep.bins[k];
    }
    return prep;
}

LossBreakdown Trainer::evaluate(const View& view, std::mt19937_64& pair_rng) const {
    const Prepared prep = prepare(view, pair_rng);
    ViewLossInput input{prep.renders, &view.blurry, prep.pairs};
    return evaluate_view_loss(input, config_.weights).breakdown;
}

LossBreakdown Trainer::step(const View& view) {
    const Prepared prep = prepare(view, rng_);
    ViewLossInput input{prep.renders, &view.blurry, prep.pairs};
    const ViewLoss loss = evaluate_view_loss(input, config_.weights);
    if (!std::isfinite(loss.breakdown.total)) {
        fail(ErrorCode::kTrainingDiverged, "non-finite loss at iteration " + std::to_string(iteration_));
    }

    RenderSettings settings{config_.threads, true, config_.deterministic};
    SceneGradients grads(scene_.size());
    for (std::size_t i = 0; i < prep.cameras.size(); ++i) {
        const SceneGradients part = render_backward(scene_, prep.cameras[i], config_.background, loss.render_grads[i], settings);
        for (std::size_t g = 0; g < grads.size(); ++g) grads[g] += part[g];
    }

    const auto& lr = config_.learning_rates;
    const double progress = std::clamp(static_cast<double>(iteration_) / config_.iterations, 0.0, 1.0);
    double position_lr = 0.0;
    if (lr.position > 0.0 && lr.position_final > 0.0) {
        position_lr = std::exp((1.0 - progress) * std::log(lr.position) + progress * std::log(lr.position_final));
    }
    AdamOptimizer::GroupRates rates{position_lr * extent_, lr.rotation, lr.scale, lr.opacity, lr.color};
    adam_.step(scene_, grads, rates);

    ++iteration_;
    if (densify_ && iteration_ % 100 == 0) densify_(scene_, iteration_);
    return loss.breakdown;
}

namespace {

void append_log_row(std::ofstream& log, int iteration, const LossBreakdown& b) {
    log << iteration << ',' << detail::format_double(b.l1) << ',' << detail::format_double(b.dssim) << ','
        << detail::format_double(b.blur_loss) << ',' << detail::format_double(b.event_loss) << ','
        << detail::format_double(b.total) << '\n';
}

std::string checkpoint_name(int iteration) {
    std::string digits = std::to_string(iteration);
    return "checkpoint_" + std::string(digits.size() < 6 ? 6 - digits.size() : 0, '0') + digits + ".scene";
}

} // namespace

TrainResult train(std::span<const View> dataset, const Scene& initial, const TrainConfig& config) {
    if (dataset.empty()) fail(ErrorCode::kInvalidArgument, "training needs at least one view");
    validate_config(config);
    for (const View& view : dataset) validate_view(view, config.weights.n);
    const double extent = config.spatial_extent > 0.0 ? config.spatial_extent : scene_extent(dataset);

    Trainer trainer(initial, config, extent);
    std::ofstream log;
    const bool write_outputs = !config.output_dir.empty();
    if (write_outputs) {
        log = detail::open_for_writing(config.output_dir / "train_log.csv");
        log << "iter,l1,dssim,blur,event,total\n";
    }

    TrainResult result;
    result.history.reserve(config.iterations);
    std::uniform_int_distribution<int> pick(0, static_cast<int>(dataset.size()) - 1);
    for (int it = 0; it < config.iterations; ++it) {
        const int v = pick(trainer.rng());
        const LossBreakdown b = trainer.step(dataset[v]);
        result.history.push_back(b);
        if (!write_outputs) continue;
        append_log_row(log, it + 1, b);
        if ((it + 1) % config.checkpoint_every == 0) {
            log.flush();
            write_scene(config.output_dir / "checkpoints" / checkpoint_name(it + 1), trainer.scene());
        }
    }
    result.scene = trainer.scene();
    if (write_outputs) write_scene(config.output_dir / "final.scene", result.scene);
    return result;
}

double psnr(const Image& a, const Image& b) {
    require_same_shape(a, b, "psnr");
    if (a.empty()) fail(ErrorCode::kInvalidArgument, "psnr on empty images");
    double sum = 0.0;
    const auto x = a.data(), y = b.data();
    for (std::size_t i = 0; i < x.size(); ++i) sum += (x[i] - y[i]) * (x[i] - y[i]);
    const double mse = sum / static_cast<double>(x.size());
    if (mse < 1e-10) return 100.0;
    return -10.0 * std::log10(mse);
}

double ssim_metric(const Image& a, const Image& b) { return ssim(a, b); }

} // namespace evsplat
