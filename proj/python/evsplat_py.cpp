// Python bindings: images are numpy float64 arrays shaped (H, W) or (H, W, C).

#include "evsplat/bench.hpp"
#include "evsplat/config.hpp"
#include "evsplat/dataset.hpp"
#include "evsplat/edi.hpp"
#include "evsplat/events.hpp"
#include "evsplat/objective.hpp"
#include "evsplat/rasterizer.hpp"
#include "evsplat/trainer.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace evsplat;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Image to_image(const Array& a) {
    if (a.ndim() != 2 && a.ndim() != 3) throw py::value_error("image must be (H, W) or (H, W, C)");
    const int h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
    const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
    Image img(w, h, c);
    std::copy(a.data(), a.data() + a.size(), img.data().begin());
    return img;
}

Array to_array(const Image& img) {
    std::vector<py::ssize_t> shape{img.height(), img.width()};
    if (img.channels() != 1) shape.push_back(img.channels());
    Array out(shape);
    std::copy(img.data().begin(), img.data().end(), out.mutable_data());
    return out;
}

std::vector<Image> to_images(const std::vector<Array>& arrays) {
    std::vector<Image> out;
    for (const Array& a : arrays) out.push_back(to_image(a));
    return out;
}

py::list to_arrays(const std::vector<Image>& images) {
    py::list out;
    for (const Image& img : images) out.append(to_array(img));
    return out;
}

py::array_t<int> bin_to_array(const EventBinImage& b) {
    py::array_t<int> out({b.height, b.width});
    std::copy(b.counts.begin(), b.counts.end(), out.mutable_data());
    return out;
}

Camera camera_from(const Pose& pose, const Intrinsics& k) { return make_camera(pose, k); }

py::dict breakdown_dict(const LossBreakdown& b) {
    py::dict d;
    d["l1"] = b.l1;
    d["dssim"] = b.dssim;
    d["blur"] = b.blur_loss;
    d["event"] = b.event_loss;
    d["total"] = b.total;
    return d;
}

} // namespace

PYBIND11_MODULE(_evsplat, m) {
    m.doc() = "Event-enhanced Gaussian splatting core";

    static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::set_error(error, (std::string(to_string(e.code())) + ": " + e.what()).c_str());
        }
    });

    py::class_<Thresholds>(m, "Thresholds")
        .def(py::init([](double c_pos, double c_neg) { return Thresholds{c_pos, c_neg}; }), py::arg("c_pos") = 0.2,
             py::arg("c_neg") = 0.3)
        .def_readwrite("c_pos", &Thresholds::c_pos)
        .def_readwrite("c_neg", &Thresholds::c_neg);

    py::class_<EventStream>(m, "EventStream")
        .def(py::init([](py::array_t<double> t, py::array_t<int> x, py::array_t<int> y, py::array_t<int> p,
                         double t_start, double t_end) {
                 if (t.size() != x.size() || t.size() != y.size() || t.size() != p.size()) {
                     throw py::value_error("t, x, y, p must have equal length");
                 }
                 EventStream s;
                 s.t_start = t_start;
                 s.t_end = t_end;
                 auto tt = t.unchecked<1>();
                 auto xx = x.unchecked<1>();
                 auto yy = y.unchecked<1>();
                 auto pp = p.unchecked<1>();
                 for (py::ssize_t i = 0; i < tt.shape(0); ++i) s.events.push_back(Event{xx(i), yy(i), tt(i), pp(i)});
                 validate_stream(s);
                 return s;
             }),
             py::arg("t"), py::arg("x"), py::arg("y"), py::arg("p"), py::arg("t_start"), py::arg("t_end"))
        .def_readonly("t_start", &EventStream::t_start)
        .def_readonly("t_end", &EventStream::t_end)
        .def("__len__", [](const EventStream& s) { return s.events.size(); })
        .def_property_readonly("t", [](const EventStream& s) {
            py::array_t<double> a(static_cast<py::ssize_t>(s.events.size()));
            for (std::size_t i = 0; i < s.events.size(); ++i) a.mutable_at(i) = s.events[i].tau;
            return a;
        })
        .def_property_readonly("x", [](const EventStream& s) {
            py::array_t<int> a(static_cast<py::ssize_t>(s.events.size()));
            for (std::size_t i = 0; i < s.events.size(); ++i) a.mutable_at(i) = s.events[i].x;
            return a;
        })
        .def_property_readonly("y", [](const EventStream& s) {
            py::array_t<int> a(static_cast<py::ssize_t>(s.events.size()));
            for (std::size_t i = 0; i < s.events.size(); ++i) a.mutable_at(i) = s.events[i].y;
            return a;
        })
        .def_property_readonly("p", [](const EventStream& s) {
            py::array_t<int> a(static_cast<py::ssize_t>(s.events.size()));
            for (std::size_t i = 0; i < s.events.size(); ++i) a.mutable_at(i) = s.events[i].p;
            return a;
        });

    m.def("read_event_file", &read_event_file, py::arg("path"), py::arg("t_start"), py::arg("t_end"),
          py::arg("width") = 0, py::arg("height") = 0);
    m.def("write_event_file", &write_event_file, py::arg("path"), py::arg("stream"));
    m.def("exposure_timestamps", &exposure_timestamps, py::arg("t_start"), py::arg("t_end"), py::arg("n"));

    m.def(
        "simulate_events",
        [](const std::vector<Array>& latents, const std::vector<double>& timestamps, const Thresholds& thr, int threads) {
            const auto images = to_images(latents);
            py::gil_scoped_release release;
            return simulate_events(images, timestamps, thr, threads);
        },
        py::arg("latents"), py::arg("timestamps"), py::arg("thresholds") = Thresholds{}, py::arg("threads") = 1,
        "Ideal event camera over single-channel intensity frames.");
    m.def(
        "accumulate_window",
        [](const EventStream& s, double t_begin, double t_end, int width, int height) {
            return bin_to_array(accumulate_window(s, t_begin, t_end, width, height));
        },
        py::arg("stream"), py::arg("t_begin"), py::arg("t_end"), py::arg("width"), py::arg("height"),
        "Signed per-pixel event count over (t_begin, t_end], shaped (H, W).");

    m.def(
        "reconstruct_latents",
        [](const Array& blurry, const EventStream& s, int n, const Thresholds& thr, bool clamp, int threads) {
            const Image b = to_image(blurry);
            const LatentSet set =
                reconstruct_latents(b, s, n, thr, clamp ? LatentClamp::kUnitRange : LatentClamp::kNone, threads);
            return to_arrays(set.images);
        },
        py::arg("blurry"), py::arg("stream"), py::arg("n"), py::arg("thresholds") = Thresholds{}, py::arg("clamp") = true,
        py::arg("threads") = 1);
    m.def(
        "estimate_event_bin",
        [](const Array& l_n, const Array& l_m, const Thresholds& thr, bool quantize) {
            return to_array(estimate_event_bin(to_image(l_n), to_image(l_m), thr,
                                               quantize ? Quantization::kTruncate : Quantization::kNone));
        },
        py::arg("l_n"), py::arg("l_m"), py::arg("thresholds") = Thresholds{}, py::arg("quantize") = true);
    m.def(
        "synthesize_blur", [](const std::vector<Array>& frames) { return to_array(synthesize_blur(to_images(frames))); },
        py::arg("frames"));
    m.def(
        "to_grayscale", [](const Array& rgb) { return to_array(to_grayscale(to_image(rgb))); }, py::arg("rgb"));
    m.def(
        "psnr", [](const Array& a, const Array& b) { return psnr(to_image(a), to_image(b)); }, py::arg("a"), py::arg("b"));
    m.def(
        "ssim", [](const Array& a, const Array& b) { return ssim_metric(to_image(a), to_image(b)); }, py::arg("a"),
        py::arg("b"));

    py::class_<Gaussian3D>(m, "Gaussian")
        .def(py::init<>())
        .def_readwrite("mean", &Gaussian3D::mean)
        .def_readwrite("rotation", &Gaussian3D::rotation, "quaternion (w, x, y, z)")
        .def_readwrite("log_scale", &Gaussian3D::log_scale)
        .def_readwrite("opacity_logit", &Gaussian3D::opacity_logit)
        .def_readwrite("color", &Gaussian3D::color)
        .def("__eq__", [](const Gaussian3D& a, const Gaussian3D& b) { return a == b; });
    m.def("read_scene", &read_scene, py::arg("path"));
    m.def("write_scene", &write_scene, py::arg("path"), py::arg("scene"));

    py::class_<Intrinsics>(m, "Intrinsics")
        .def(py::init([](double fx, double fy, double cx, double cy, int width, int height) {
                 return Intrinsics{fx, fy, cx, cy, width, height};
             }),
             py::arg("fx"), py::arg("fy"), py::arg("cx"), py::arg("cy"), py::arg("width"), py::arg("height"))
        .def_readwrite("fx", &Intrinsics::fx)
        .def_readwrite("fy", &Intrinsics::fy)
        .def_readwrite("cx", &Intrinsics::cx)
        .def_readwrite("cy", &Intrinsics::cy)
        .def_readwrite("width", &Intrinsics::width)
        .def_readwrite("height", &Intrinsics::height);
    py::class_<Pose>(m, "Pose")
        .def(py::init([](const Eigen::Vector4d& q, const Eigen::Vector3d& t) { return Pose{q, t}; }),
             py::arg("rotation") = Eigen::Vector4d(1, 0, 0, 0), py::arg("translation") = Eigen::Vector3d::Zero())
        .def_readwrite("rotation", &Pose::rotation, "world-to-camera quaternion (w, x, y, z)")
        .def_readwrite("translation", &Pose::translation);
    py::class_<Camera>(m, "Camera")
        .def(py::init(&camera_from), py::arg("pose"), py::arg("intrinsics"))
        .def_readonly("rotation", &Camera::rotation)
        .def_readonly("translation", &Camera::translation)
        .def_readonly("intrinsics", &Camera::intrinsics)
        .def("center", &Camera::center);
    py::class_<CameraFile>(m, "CameraFile")
        .def_readonly("intrinsics", &CameraFile::intrinsics)
        .def_readonly("pose", &CameraFile::pose)
        .def_readonly("background", &CameraFile::background)
        .def("camera", [](const CameraFile& c) { return make_camera(c.pose, c.intrinsics); });
    m.def("read_camera_file", &read_camera_file, py::arg("path"));

    m.def(
        "render",
        [](const Scene& scene, const Camera& cam, const Eigen::Vector3d& bg, int threads, bool tiled) {
            RenderOutput out;
            {
                py::gil_scoped_release release;
                out = render(scene, cam, bg, RenderSettings{threads, tiled, true});
            }
            return py::make_tuple(to_array(out.image), to_array(out.alpha));
        },
        py::arg("scene"), py::arg("camera"), py::arg("background") = Eigen::Vector3d::Zero().eval(),
        py::arg("threads") = 1, py::arg("tiled") = true, "Returns (image (H, W, 3), alpha (H, W)).");

    m.def(
        "bench_render",
        [](const Scene& scene, const Camera& cam, const Eigen::Vector3d& bg, int repeats, int frames, int threads) {
            BenchOptions opt;
            opt.repeats = repeats;
            opt.frames_per_repeat = frames;
            opt.settings.threads = threads;
            const BenchResult r = bench_render(scene, cam, bg, opt);
            py::dict d;
            d["ms_per_frame"] = r.ms_per_frame;
            d["fps"] = r.fps;
            d["spread"] = r.spread;
            d["frames_per_repeat"] = r.frames_per_repeat;
            d["repeat_ms_per_frame"] = r.repeat_ms_per_frame;
            return d;
        },
        py::arg("scene"), py::arg("camera"), py::arg("background") = Eigen::Vector3d::Zero().eval(),
        py::arg("repeats") = 10, py::arg("frames") = 0, py::arg("threads") = 1);

    m.def(
        "simulate_dataset",
        [](const std::filesystem::path& out_dir, std::uint64_t seed, int width, int height, int gaussians, int views,
           int test_views, int n_latents, int threads) {
            HarnessOptions o;
            o.seed = seed;
            o.width = width;
            o.height = height;
            o.gaussians = gaussians;
            o.views = views;
            o.test_views = test_views;
            o.n_latents = n_latents;
            const SyntheticSpec spec = standard_harness(o);
            generate_synthetic(spec, out_dir, threads);
            return out_dir / "manifest.json";
        },
        py::arg("out_dir"), py::arg("seed") = 0, py::arg("width") = 64, py::arg("height") = 64,
        py::arg("gaussians") = 200, py::arg("views") = 8, py::arg("test_views") = 4, py::arg("n_latents") = 5,
        py::arg("threads") = 1, "Writes the synthetic blur + event harness; returns the manifest path.");

    py::class_<Dataset>(m, "Dataset")
        .def_readonly("intrinsics", &Dataset::intrinsics)
        .def_readonly("n_latents", &Dataset::n_latents)
        .def_readonly("thresholds", &Dataset::thresholds)
        .def_readonly("background", &Dataset::background)
        .def_property_readonly("view_names",
                               [](const Dataset& d) {
                                   std::vector<std::string> names;
                                   for (const View& v : d.views) names.push_back(v.name);
                                   return names;
                               })
        .def("blurry", [](const Dataset& d, std::size_t i) { return to_array(d.views.at(i).blurry); })
        .def("events", [](const Dataset& d, std::size_t i) { return d.views.at(i).stream; })
        .def("poses", [](const Dataset& d, std::size_t i) { return d.views.at(i).poses; })
        .def("initial_scene", [](const Dataset& d) { return init_scene_from_points(d.points); });
    m.def("load_dataset", &load_dataset, py::arg("manifest"));

    m.def(
        "evaluate",
        [](const Scene& scene, const Dataset& d, const std::string& mode, int threads) {
            const MetricsTable t = evaluate(scene, d, parse_eval_mode(mode), RenderSettings{threads, true, true});
            py::dict out;
            py::list rows;
            for (const MetricsRow& r : t.rows) rows.append(py::make_tuple(r.name, r.psnr, r.ssim));
            out["rows"] = rows;
            out["psnr"] = t.mean.psnr;
            out["ssim"] = t.mean.ssim;
            return out;
        },
        py::arg("scene"), py::arg("dataset"), py::arg("mode") = "deblur", py::arg("threads") = 1);

    m.def(
        "train",
        [](const Dataset& d, const Scene& initial, const py::dict& overrides) {
            TrainConfig cfg;
            cfg.background = d.background;
            cfg.weights.n = d.n_latents;
            cfg.weights.thresholds = d.thresholds;
            for (const auto& [key, value] : overrides) {
                apply_config_entry(cfg, py::str(key).cast<std::string>(), py::str(value).cast<std::string>());
            }
            TrainResult r;
            {
                py::gil_scoped_release release;
                r = train(d.views, initial, cfg);
            }
            py::list history;
            for (const LossBreakdown& b : r.history) history.append(breakdown_dict(b));
            return py::make_tuple(r.scene, history);
        },
        py::arg("dataset"), py::arg("initial"), py::arg("config") = py::dict(),
        "Config keys as in the key = value file (iterations, seed, w_event, ...). Returns (scene, history).");
}
