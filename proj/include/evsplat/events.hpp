#pragma once

#include "evsplat/common.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace evsplat {

/// One brightness-change report: pixel (x, y) at time tau with polarity +1 or -1.
struct Event {
    int x = 0;
    int y = 0;
    double tau = 0.0;
    int p = 1;

    friend bool operator==(const Event&, const Event&) = default;
};

/// Events of one exposure, sorted by tau, every tau in (t_start, t_end].
struct EventStream {
    std::vector<Event> events;
    double t_start = 0.0;
    double t_end = 0.0;
};

/// Events with t_begin < tau <= t_end.
struct EventBin {
    std::vector<Event> events;
    double t_begin = 0.0;
    double t_end = 0.0;
};

/// Per-pixel signed event count over (t_begin, t_end]. Opposite polarities cancel.
struct EventBinImage {
    int width = 0;
    int height = 0;
    std::vector<int> counts;
    double t_begin = 0.0;
    double t_end = 0.0;

    int at(int x, int y) const { return counts[static_cast<std::size_t>(y) * width + x]; }
    int& at(int x, int y) { return counts[static_cast<std::size_t>(y) * width + x]; }
};

/// Log-intensity contrast thresholds for positive and negative events.
struct Thresholds {
    double c_pos = 0.2;
    double c_neg = 0.3;
};

void validate_thresholds(const Thresholds& thresholds);

/// Checks ordering, the exposure window and (when width/height > 0) sensor bounds.
/// Throws Error(kMalformedStream).
void validate_stream(const EventStream& stream, int width = 0, int height = 0);

/// n equally spaced instants t_1 = t_start ... t_n = t_end.
std::vector<double> exposure_timestamps(double t_start, double t_end, int n);

/// Index i of the interval (t_i, t_{i+1}] holding tau, or -1 if tau is outside (t_1, t_n].
int bin_index(std::span<const double> timestamps, double tau);

/// Splits the stream into n - 1 consecutive half-open bins (t_i, t_{i+1}].
std::vector<EventBin> bin_events(const EventStream& stream, int n);

EventBinImage accumulate_bin_image(std::span<const Event> events, double t_begin, double t_end,
                                   int width, int height);

/// Convenience: signed counts of the stream's events inside (t_begin, t_end].
EventBinImage accumulate_window(const EventStream& stream, double t_begin, double t_end, int width,
                                int height);

/// Ideal event camera driven by a sampled intensity sequence.
///
/// Each pixel keeps a reference log-intensity initialised from the first frame. Crossing the
/// reference by k whole thresholds between frames i and i+1 emits k events spaced uniformly in
/// (t_i, t_{i+1}], and the reference moves by exactly k thresholds so the residual carries over.
/// Output order is canonical: tau, then y, x, polarity.
EventStream simulate_events(std::span<const Image> latents, std::span<const double> timestamps,
                            const Thresholds& thresholds, int threads = 1);

/// Text format: one `tau x y p` per line, `#` comments ignored.
EventStream read_event_file(const std::filesystem::path& path, double t_start, double t_end,
                            int width, int height);
void write_event_file(const std::filesystem::path& path, const EventStream& stream);

} // namespace evsplat
