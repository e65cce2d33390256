#include "evsplat/edi.hpp"

#include <cmath>

namespace evsplat {

std::vector<Image> exposure_factors(const EventStream& stream, int n, const Thresholds& thresholds,
                                    int width, int height) {
    validate_thresholds(thresholds);
    const auto bins = bin_events(stream, n);
    if (width <= 0 || height <= 0) fail(ErrorCode::kInvalidArgument, "sensor size must be positive");

    // Accumulate in the log domain; exponentiate once per instant.
    std::vector<double> log_factor(static_cast<std::size_t>(width) * height, 0.0);
    std::vector<Image> factors;
    factors.reserve(n);
    factors.emplace_back(width, height, 1, 1.0);
    for (const EventBin& bin : bins) {
        for (const Event& e : bin.events) {
            if (e.x < 0 || e.x >= width || e.y < 0 || e.y >= height) {
                fail(ErrorCode::kMalformedStream, "event coordinate outside the sensor");
            }
            log_factor[static_cast<std::size_t>(e.y) * width + e.x] +=
                e.p > 0 ? thresholds.c_pos : -thresholds.c_neg;
        }
        Image factor(width, height, 1);
        auto out = factor.data();
        for (std::size_t i = 0; i < log_factor.size(); ++i) out[i] = std::exp(log_factor[i]);
        factors.push_back(std::move(factor));
    }
    return factors;
}

LatentSet reconstruct_latents(const Image& blurry, const EventStream& stream, int n,
                              const Thresholds& thresholds, LatentClamp clamp, int threads) {
    if (blurry.empty()) fail(ErrorCode::kInvalidArgument, "blurry image is empty");
    const int width = blurry.width();
    const int height = blurry.height();
    const int channels = blurry.channels();
    for (const Event& e : stream.events) {
        if (e.x < 0 || e.x >= width || e.y < 0 || e.y >= height) {
            fail(ErrorCode::kInvalidArgument, "event stream does not match the blurry image size");
        }
    }
    const auto factors = exposure_factors(stream, n, thresholds, width, height);

    LatentSet set;
    set.timestamps = exposure_timestamps(stream.t_start, stream.t_end, n);
    set.images.assign(n, Image(width, height, channels));
    parallel_for(0, height, threads, [&](int y) {
        for (int x = 0; x < width; ++x) {
            double factor_sum = 0.0;
            for (int i = 0; i < n; ++i) factor_sum += factors[i].at(x, y);
            for (int c = 0; c < channels; ++c) {
                const double first = n * blurry.at(x, y, c) / factor_sum;
                for (int i = 0; i < n; ++i) {
                    double value = first * factors[i].at(x, y);
                    if (clamp == LatentClamp::kUnitRange) value = std::clamp(value, 0.0, 1.0);
                    set.images[i].at(x, y, c) = value;
                }
            }
        }
    });
    return set;
}

} // namespace evsplat
