#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace evsplat {

enum class ErrorCode {
    kInvalidArgument,
    kMalformedStream,
    kInvalidScene,
    kTrainingDiverged,
    kInvalidSpec,
    kModeUnavailable,
    kMissingFile,
    kParseError,
    kPoseCountMismatch,
    kUnsortedEvents,
    kOutOfWindow,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; `code()` distinguishes the failure class.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

/// Intensities are floored before every logarithm so black pixels stay finite.
inline constexpr double kLogFloor = 1e-4;

inline double floored_log(double intensity) { return std::log(std::max(intensity, kLogFloor)); }

/// Row-major H x W x C image of doubles. Channel count is 1 (intensity) or 3 (RGB).
class Image {
public:
    Image() = default;
    Image(int width, int height, int channels, double fill = 0.0);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int channels() const noexcept { return channels_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
    double at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    bool same_shape(const Image& other) const noexcept {
        return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
    }

    friend bool operator==(const Image&, const Image&) = default;

private:
    std::size_t index(int x, int y, int c) const noexcept {
        return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
    }

    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<double> data_;
};

void require_same_shape(const Image& a, const Image& b, std::string_view what);

/// Runs fn(i) for i in [begin, end). Iterations must be independent; with threads <= 1
/// everything runs on the calling thread.
void parallel_for(int begin, int end, int threads, const std::function<void(int)>& fn);

/// Resolves a user-facing thread count (0 = hardware concurrency).
int resolve_threads(int requested);

} // namespace evsplat
