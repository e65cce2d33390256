#include "evsplat/events.hpp"

#include "text_util.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>

namespace evsplat {

void validate_thresholds(const Thresholds& thresholds) {
    if (!(thresholds.c_pos > 0.0) || !(thresholds.c_neg > 0.0)) {
        fail(ErrorCode::kInvalidArgument, "contrast thresholds must be positive");
    }
}

void validate_stream(const EventStream& stream, int width, int height) {
    if (!(stream.t_end > stream.t_start)) {
        fail(ErrorCode::kMalformedStream, "exposure window must satisfy t_start < t_end");
    }
    double previous = stream.t_start;
    for (std::size_t i = 0; i < stream.events.size(); ++i) {
        const Event& e = stream.events[i];
        const std::string tag = "event " + std::to_string(i);
        if (e.p != 1 && e.p != -1) fail(ErrorCode::kMalformedStream, tag + ": polarity must be +1 or -1");
        if (!(e.tau > stream.t_start) || e.tau > stream.t_end) {
            fail(ErrorCode::kMalformedStream, tag + ": timestamp outside the exposure window");
        }
        if (e.tau < previous) fail(ErrorCode::kMalformedStream, tag + ": timestamps not sorted");
        previous = e.tau;
        if (width > 0 && height > 0 && (e.x < 0 || e.x >= width || e.y < 0 || e.y >= height)) {
            fail(ErrorCode::kMalformedStream, tag + ": coordinate outside the sensor");
        }
    }
}

std::vector<double> exposure_timestamps(double t_start, double t_end, int n) {
    if (n < 2) fail(ErrorCode::kInvalidArgument, "need at least two timestamps");
    if (!(t_end > t_start)) fail(ErrorCode::kInvalidArgument, "exposure window must satisfy t_start < t_end");
    std::vector<double> ts(n);
    const double step = (t_end - t_start) / (n - 1);
    for (int i = 0; i < n; ++i) ts[i] = t_start + step * i;
    ts.back() = t_end;
    return ts;
}

int bin_index(std::span<const double> timestamps, double tau) {
    if (timestamps.size() < 2 || !(tau > timestamps.front()) || tau > timestamps.back()) return -1;
    const auto it = std::lower_bound(timestamps.begin() + 1, timestamps.end(), tau);
    return static_cast<int>(it - (timestamps.begin() + 1));
}

std::vector<EventBin> bin_events(const EventStream& stream, int n) {
    if (n < 2) fail(ErrorCode::kInvalidArgument, "bin_events needs n >= 2");
    validate_stream(stream);
    const auto ts = exposure_timestamps(stream.t_start, stream.t_end, n);
    std::vector<EventBin> bins(n - 1);
    for (int i = 0; i + 1 < n; ++i) {
        bins[i].t_begin = ts[i];
        bins[i].t_end = ts[i + 1];
    }
    for (const Event& e : stream.events) bins[bin_index(ts, e.tau)].events.push_back(e);
    return bins;
}

EventBinImage accumulate_bin_image(std::span<const Event> events, double t_begin, double t_end,
                                   int width, int height) {
    if (width <= 0 || height <= 0) fail(ErrorCode::kInvalidArgument, "sensor size must be positive");
    EventBinImage image{width, height, std::vector<int>(static_cast<std::size_t>(width) * height, 0),
                        t_begin, t_end};
    for (const Event& e : events) {
        if (e.x < 0 || e.x >= width || e.y < 0 || e.y >= height) {
            fail(ErrorCode::kMalformedStream, "event coordinate outside the sensor");
        }
        if (!(e.tau > t_begin) || e.tau > t_end) {
            fail(ErrorCode::kMalformedStream, "event timestamp outside the accumulation interval");
        }
        image.at(e.x, e.y) += e.p;
    }
    return image;
}

EventBinImage accumulate_window(const EventStream& stream, double t_begin, double t_end, int width,
                                int height) {
    const auto first = std::upper_bound(stream.events.begin(), stream.events.end(), t_begin,
                                        [](double t, const Event& e) { return t < e.tau; });
    const auto last = std::upper_bound(first, stream.events.end(), t_end,
                                       [](double t, const Event& e) { return t < e.tau; });
    return accumulate_bin_image(std::span<const Event>(first, last),
                                t_begin, t_end, width, height);
}

EventStream simulate_events(std::span<const Image> latents, std::span<const double> timestamps,
                            const Thresholds& thresholds, int threads) {
    validate_thresholds(thresholds);
    if (latents.size() < 2) fail(ErrorCode::kInvalidArgument, "simulate_events needs >= 2 frames");
    if (timestamps.size() != latents.size()) {
        fail(ErrorCode::kInvalidArgument, "one timestamp per frame is required");
    }
    for (std::size_t i = 1; i < timestamps.size(); ++i) {
        if (!(timestamps[i] > timestamps[i - 1])) {
            fail(ErrorCode::kInvalidArgument, "timestamps must be strictly increasing");
        }
    }
    const int width = latents[0].width();
    const int height = latents[0].height();
    for (const Image& frame : latents) {
        if (frame.width() != width || frame.height() != height || frame.channels() != 1) {
            fail(ErrorCode::kInvalidArgument, "latent frames must be single-channel with equal size");
        }
    }

    // Rows are simulated independently, then merged into canonical order.
    std::vector<std::vector<Event>> per_row(height);
    parallel_for(0, height, threads, [&](int y) {
        auto& out = per_row[y];
        for (int x = 0; x < width; ++x) {
            double reference = floored_log(latents[0].at(x, y));
            for (std::size_t i = 0; i + 1 < latents.size(); ++i) {
                const double level = floored_log(latents[i + 1].at(x, y));
                const double delta = level - reference;
                int polarity = 0;
                long count = 0;
                if (delta >= thresholds.c_pos) {
                    polarity = 1;
                    count = static_cast<long>(std::floor(delta / thresholds.c_pos));
                    reference += count * thresholds.c_pos;
                } else if (-delta >= thresholds.c_neg) {
                    polarity = -1;
                    count = static_cast<long>(std::floor(-delta / thresholds.c_neg));
                    reference -= count * thresholds.c_neg;
                }
                const double t0 = timestamps[i];
                const double t1 = timestamps[i + 1];
                for (long j = 1; j <= count; ++j) {
                    const double tau = (j == count) ? t1 : t0 + (t1 - t0) * static_cast<double>(j) / count;
                    out.push_back(Event{x, y, tau, polarity});
                }
            }
        }
    });

    EventStream stream;
    stream.t_start = timestamps.front();
    stream.t_end = timestamps.back();
    for (auto& row : per_row) stream.events.insert(stream.events.end(), row.begin(), row.end());
    std::sort(stream.events.begin(), stream.events.end(), [](const Event& a, const Event& b) {
        return std::tie(a.tau, a.y, a.x, a.p) < std::tie(b.tau, b.y, b.x, b.p);
    });
    return stream;
}

EventStream read_event_file(const std::filesystem::path& path, double t_start, double t_end,
                            int width, int height) {
    auto in = detail::open_for_reading(path);
    EventStream stream;
    stream.t_start = t_start;
    stream.t_end = t_end;
    std::string line;
    std::size_t line_no = 0;
    double previous = t_start;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::is_blank_or_comment(line)) continue;
        const auto fields = detail::split_fields(line);
        Event e;
        if (fields.size() != 4 || !detail::parse_number(fields[0], e.tau) ||
            !detail::parse_number(fields[1], e.x) || !detail::parse_number(fields[2], e.y) ||
            !detail::parse_number(fields[3], e.p)) {
            fail(ErrorCode::kParseError, detail::where(path, line_no) + ": expected `tau x y p`");
        }
        if (e.p != 1 && e.p != -1) {
            fail(ErrorCode::kMalformedStream, detail::where(path, line_no) + ": polarity must be 1 or -1");
        }
        if (e.x < 0 || e.x >= width || e.y < 0 || e.y >= height) {
            fail(ErrorCode::kMalformedStream,
                 detail::where(path, line_no) + ": pixel (" + std::to_string(e.x) + ", " +
                     std::to_string(e.y) + ") outside the sensor");
        }
        if (!(e.tau > t_start) || e.tau > t_end) {
            fail(ErrorCode::kOutOfWindow,
                 detail::where(path, line_no) + ": timestamp " + detail::format_double(e.tau) +
                     " outside exposure (" + detail::format_double(t_start) + ", " +
                     detail::format_double(t_end) + "]");
        }
        if (e.tau < previous) {
            fail(ErrorCode::kUnsortedEvents, detail::where(path, line_no) + ": timestamps not sorted");
        }
        previous = e.tau;
        stream.events.push_back(e);
    }
    return stream;
}

void write_event_file(const std::filesystem::path& path, const EventStream& stream) {
    auto out = detail::open_for_writing(path);
    out << "# tau x y p\n";
    for (const Event& e : stream.events) {
        out << detail::format_double(e.tau) << ' ' << e.x << ' ' << e.y << ' ' << e.p << '\n';
    }
    if (!out) fail(ErrorCode::kInvalidArgument, "failed writing " + path.string());
}

} // namespace evsplat
