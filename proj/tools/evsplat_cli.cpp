// evsplat command-line tool: simulate, deblur, train, render, eval, bench.

#include "evsplat/bench.hpp"
#include "evsplat/config.hpp"
#include "evsplat/dataset.hpp"
#include "evsplat/edi.hpp"
#include "evsplat/image_io.hpp"
#include "evsplat/rasterizer.hpp"
#include "evsplat/trainer.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace evsplat;

namespace {

struct Common {
    std::uint64_t seed = 0;
    bool deterministic = true;
    fs::path output_dir;
    int threads = 1;
};

void add_threads(CLI::App* app, Common& c) {
    app->add_option("--threads", c.threads, "Worker threads (0 = hardware concurrency)")->check(CLI::Range(0, 1024));
}

void add_deterministic(CLI::App* app, Common& c) {
    app->add_flag("--deterministic,!--no-deterministic", c.deterministic,
                  "Fixed-order gradient reduction (bit-identical across thread counts)");
}

RenderSettings render_settings(const Common& c) { return RenderSettings{c.threads, true, c.deterministic}; }

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) fail(ErrorCode::kInvalidArgument, "cannot write " + path.string());
}

std::string latent_name(int i) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "latent_%02d", i);
    return buffer;
}

// ---- simulate ---------------------------------------------------------------------------------

struct SimulateArgs {
    HarnessOptions harness;
};

void run_simulate(const SimulateArgs& a, const Common& c) {
    if (c.output_dir.empty()) fail(ErrorCode::kInvalidArgument, "simulate needs --output-dir");
    HarnessOptions o = a.harness;
    o.seed = c.seed;
    const SyntheticSpec spec = standard_harness(o);
    const SyntheticDataset out = generate_synthetic(spec, c.output_dir, c.threads);
    // One camera file per held-out pose so render / bench can run straight off a dataset.
    for (const TestView& t : out.dataset.test_views) {
        write_camera_file(c.output_dir / "cameras" / (t.name + ".json"), {out.dataset.intrinsics, t.pose, out.dataset.background});
    }
    std::size_t events = 0;
    for (const View& v : out.dataset.views) events += v.stream.events.size();
    std::cout << "wrote " << (c.output_dir / "manifest.json").string() << ": " << out.dataset.views.size() << " views, "
              << out.dataset.test_views.size() << " test views, " << spec.scene.size() << " Gaussians, " << events
              << " events\n";
}

// ---- deblur -----------------------------------------------------------------------------------

struct DeblurArgs {
    fs::path manifest;
    std::vector<std::string> views;
    bool no_clamp = false;
};

void run_deblur(const DeblurArgs& a, const Common& c, std::optional<int> n_latents) {
    if (c.output_dir.empty()) fail(ErrorCode::kInvalidArgument, "deblur needs --output-dir");
    const Dataset d = load_dataset(a.manifest);
    const int n = n_latents.value_or(d.n_latents);
    if (n < 2) fail(ErrorCode::kInvalidArgument, "--n-latents must be >= 2");
    int done = 0;
    for (const View& v : d.views) {
        if (!a.views.empty() && std::find(a.views.begin(), a.views.end(), v.name) == a.views.end()) continue;
        const LatentSet set = reconstruct_latents(v.blurry, v.stream, n, d.thresholds,
                                                  a.no_clamp ? LatentClamp::kNone : LatentClamp::kUnitRange, c.threads);
        for (int i = 0; i < n; ++i) {
            write_png(c.output_dir / v.name / (latent_name(i) + ".png"), set.images[i]);
            write_float_image(c.output_dir / v.name / (latent_name(i) + ".f32"), set.images[i]);
        }
        ++done;
    }
    for (const std::string& name : a.views) {
        if (std::none_of(d.views.begin(), d.views.end(), [&](const View& v) { return v.name == name; })) {
            fail(ErrorCode::kInvalidArgument, "no view named '" + name + "' in " + a.manifest.string());
        }
    }
    std::cout << "deblurred " << done << " view(s) into " << n << " latents each under " << c.output_dir.string() << '\n';
}

// ---- train ------------------------------------------------------------------------------------

struct TrainArgs {
    fs::path manifest;
    fs::path config;
    fs::path init;
    std::optional<int> iterations;
    std::optional<double> w_event;
};

void run_train(const TrainArgs& a, const Common& c, const CLI::App& sub, std::optional<int> n_latents) {
    const Dataset d = load_dataset(a.manifest);
    TrainConfig cfg;
    cfg.background = d.background;
    cfg.weights.n = d.n_latents;
    cfg.weights.thresholds = d.thresholds;
    if (!a.config.empty()) cfg = read_train_config(a.config, cfg);
    // Flags given explicitly win over the config file.
    if (sub.count("--seed")) cfg.seed = c.seed;
    if (sub.count("--deterministic") || sub.count("--no-deterministic")) cfg.deterministic = c.deterministic;
    if (sub.count("--output-dir")) cfg.output_dir = c.output_dir;
    if (sub.count("--threads")) cfg.threads = c.threads;
    if (a.iterations) cfg.iterations = *a.iterations;
    if (a.w_event) cfg.weights.w_event = *a.w_event;
    if (n_latents) cfg.weights.n = *n_latents;
    if (cfg.weights.n != d.n_latents) {
        fail(ErrorCode::kInvalidArgument, "n_latents = " + std::to_string(cfg.weights.n) + " but the dataset has " +
                                              std::to_string(d.n_latents) + " poses per view");
    }
    if (cfg.output_dir.empty()) fail(ErrorCode::kInvalidArgument, "train needs an output directory (--output-dir or output_dir)");
    validate_config(cfg);

    const Scene initial = a.init.empty() ? init_scene_from_points(d.points) : read_scene(a.init);
    write_text(cfg.output_dir / "config.txt", format_train_config(cfg));
    const auto start = std::chrono::steady_clock::now();
    const TrainResult r = train(d.views, initial, cfg);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const LossBreakdown& last = r.history.back();
    std::printf("trained %d iterations in %.1f s; final loss %.6f (blur %.6f, event %.6f); wrote %s\n", cfg.iterations,
                secs, last.total, last.blur_loss, last.event_loss, (cfg.output_dir / "final.scene").string().c_str());
}

// ---- render -----------------------------------------------------------------------------------

struct RenderArgs {
    fs::path scene;
    fs::path camera;
    fs::path output;
    fs::path float_output;
};

void run_render(const RenderArgs& a, const Common& c) {
    const Scene scene = read_scene(a.scene);
    const CameraFile cam = read_camera_file(a.camera);
    const RenderOutput out = render(scene, make_camera(cam.pose, cam.intrinsics), cam.background, render_settings(c));
    write_png(a.output, out.image);
    if (!a.float_output.empty()) write_float_image(a.float_output, out.image);
    std::cout << "wrote " << a.output.string() << " (" << out.image.width() << "x" << out.image.height() << ")\n";
}

// ---- eval -------------------------------------------------------------------------------------

struct EvalArgs {
    fs::path scene;
    fs::path manifest;
    std::string mode = "deblur";
};

void run_eval(const EvalArgs& a, const Common& c) {
    const EvalMode mode = parse_eval_mode(a.mode);
    const Scene scene = read_scene(a.scene);
    const Dataset d = load_dataset(a.manifest);
    const MetricsTable table = evaluate(scene, d, mode, render_settings(c));
    std::cout << format_metrics_table(table);
    if (!c.output_dir.empty()) write_text(c.output_dir / ("metrics_" + a.mode + ".csv"), format_metrics_csv(table));
}

// ---- bench ------------------------------------------------------------------------------------

struct BenchArgs {
    fs::path scene;
    fs::path camera;
    int repeats = 10;
    int frames = 0;
    double seconds = 0.5;
};

void run_bench(const BenchArgs& a, const Common& c) {
    const Scene scene = read_scene(a.scene);
    const CameraFile cam = read_camera_file(a.camera);
    BenchOptions opt;
    opt.repeats = a.repeats;
    opt.frames_per_repeat = a.frames;
    opt.target_seconds = a.seconds;
    opt.settings = render_settings(c);
    const BenchResult r = bench_render(scene, make_camera(cam.pose, cam.intrinsics), cam.background, opt);
    std::printf("%d Gaussians, %dx%d, %d thread(s)\n", static_cast<int>(scene.size()), cam.intrinsics.width,
                cam.intrinsics.height, resolve_threads(c.threads));
    std::printf("ms/frame %.4f  FPS %.2f  spread %.2f%%  (%d repeats x %d frames)\n", r.ms_per_frame, r.fps,
                100.0 * r.spread, opt.repeats, r.frames_per_repeat);
    if (!c.output_dir.empty()) {
        std::string csv = "repeat,ms_per_frame\n";
        for (std::size_t i = 0; i < r.repeat_ms_per_frame.size(); ++i) {
            char line[64];
            std::snprintf(line, sizeof(line), "%zu,%.6f\n", i, r.repeat_ms_per_frame[i]);
            csv += line;
        }
        write_text(c.output_dir / "bench.csv", csv);
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Event-enhanced Gaussian splatting: simulate, deblur, train, render, eval, bench"};
    app.require_subcommand(1);
    Common common;
    std::optional<int> n_latents;

    auto* simulate = app.add_subcommand("simulate", "Generate the synthetic blur + event harness dataset");
    SimulateArgs sim;
    simulate->add_option("--output-dir", common.output_dir, "Dataset directory")->required();
    simulate->add_option("--seed", common.seed, "Scene and trajectory seed");
    simulate->add_option("--n-latents", sim.harness.n_latents, "Latent instants per exposure")->check(CLI::Range(2, 1000));
    simulate->add_option("--width", sim.harness.width)->check(CLI::Range(11, 4096));
    simulate->add_option("--height", sim.harness.height)->check(CLI::Range(11, 4096));
    simulate->add_option("--gaussians", sim.harness.gaussians)->check(CLI::Range(1, 1000000));
    simulate->add_option("--views", sim.harness.views)->check(CLI::Range(1, 100000));
    simulate->add_option("--test-views", sim.harness.test_views)->check(CLI::Range(0, 100000));
    simulate->add_option("--c-pos", sim.harness.thresholds.c_pos)->check(CLI::PositiveNumber);
    simulate->add_option("--c-neg", sim.harness.thresholds.c_neg)->check(CLI::PositiveNumber);
    simulate->add_option("--shake-rotation", sim.harness.shake_rotation, "Radians of in-exposure rotation");
    simulate->add_option("--shake-translation", sim.harness.shake_translation, "Scene units of in-exposure translation");
    add_threads(simulate, common);

    auto* deblur = app.add_subcommand("deblur", "EDI latent reconstruction from blur + events");
    DeblurArgs deb;
    deblur->add_option("--manifest", deb.manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
    deblur->add_option("--view", deb.views, "View name(s); default all");
    deblur->add_option("--output-dir", common.output_dir, "Output directory")->required();
    deblur->add_option("--n-latents", n_latents, "Latent count (default: manifest)");
    deblur->add_flag("--no-clamp", deb.no_clamp, "Keep values outside [0,1]");
    add_threads(deblur, common);

    auto* trainc = app.add_subcommand("train", "Optimise a Gaussian scene against blur + event losses");
    TrainArgs tr;
    trainc->add_option("--manifest", tr.manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
    trainc->add_option("--config", tr.config, "key = value config file")->check(CLI::ExistingFile);
    trainc->add_option("--init", tr.init, "Initial scene (default: from the manifest's points)")->check(CLI::ExistingFile);
    trainc->add_option("--seed", common.seed);
    add_deterministic(trainc, common);
    trainc->add_option("--output-dir", common.output_dir, "Log, checkpoints, final.scene");
    trainc->add_option("--iterations", tr.iterations)->check(CLI::Range(1, 100000000));
    trainc->add_option("--w-event", tr.w_event, "Event loss weight")->check(CLI::NonNegativeNumber);
    trainc->add_option("--n-latents", n_latents, "Must match the dataset's poses per view");
    add_threads(trainc, common);

    auto* renderc = app.add_subcommand("render", "Render a scene from a camera file to PNG");
    RenderArgs rd;
    renderc->add_option("--scene", rd.scene)->required()->check(CLI::ExistingFile);
    renderc->add_option("--camera", rd.camera, "Camera JSON")->required()->check(CLI::ExistingFile);
    renderc->add_option("--output", rd.output, "PNG path")->required();
    renderc->add_option("--float-output", rd.float_output, "Optional float dump");
    add_deterministic(renderc, common);
    add_threads(renderc, common);

    auto* evalc = app.add_subcommand("eval", "PSNR / SSIM of a scene against a dataset's ground truth");
    EvalArgs ev;
    evalc->add_option("--scene", ev.scene)->required()->check(CLI::ExistingFile);
    evalc->add_option("--manifest", ev.manifest)->required()->check(CLI::ExistingFile);
    evalc->add_option("--mode", ev.mode, "deblur | novel-view");
    evalc->add_option("--output-dir", common.output_dir, "Write metrics_<mode>.csv here");
    add_deterministic(evalc, common);
    add_threads(evalc, common);

    auto* benchc = app.add_subcommand("bench", "Wall-clock render timing over repeats");
    BenchArgs be;
    benchc->add_option("--scene", be.scene)->required()->check(CLI::ExistingFile);
    benchc->add_option("--camera", be.camera, "Camera JSON")->required()->check(CLI::ExistingFile);
    benchc->add_option("--repeats", be.repeats)->check(CLI::Range(1, 100000));
    benchc->add_option("--frames", be.frames, "Frames per repeat (0 = calibrate)")->check(CLI::Range(0, 100000000));
    benchc->add_option("--seconds", be.seconds, "Target seconds per repeat when calibrating")->check(CLI::PositiveNumber);
    benchc->add_option("--output-dir", common.output_dir, "Write bench.csv here");
    add_deterministic(benchc, common);
    add_threads(benchc, common);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*simulate) run_simulate(sim, common);
        else if (*deblur) run_deblur(deb, common, n_latents);
        else if (*trainc) run_train(tr, common, *trainc, n_latents);
        else if (*renderc) run_render(rd, common);
        else if (*evalc) run_eval(ev, common);
        else if (*benchc) run_bench(be, common);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
