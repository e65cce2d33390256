#include "evsplat/common.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace evsplat {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kMalformedStream: return "malformed-stream";
    case ErrorCode::kInvalidScene: return "invalid-scene";
    case ErrorCode::kTrainingDiverged: return "training-diverged";
    case ErrorCode::kInvalidSpec: return "invalid-spec";
    case ErrorCode::kModeUnavailable: return "mode-unavailable";
    case ErrorCode::kMissingFile: return "missing-file";
    case ErrorCode::kParseError: return "parse-error";
    case ErrorCode::kPoseCountMismatch: return "pose-count-mismatch";
    case ErrorCode::kUnsortedEvents: return "unsorted-events";
    case ErrorCode::kOutOfWindow: return "out-of-window";
    }
    return "unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

Image::Image(int width, int height, int channels, double fill)
    : width_(width), height_(height), channels_(channels) {
    if (width < 0 || height < 0 || channels < 1) {
        fail(ErrorCode::kInvalidArgument, "image dimensions must be non-negative with >= 1 channel");
    }
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

void require_same_shape(const Image& a, const Image& b, std::string_view what) {
    if (!a.same_shape(b)) {
        fail(ErrorCode::kInvalidArgument,
             std::string(what) + ": image shapes differ (" + std::to_string(a.width()) + "x" +
                 std::to_string(a.height()) + "x" + std::to_string(a.channels()) + " vs " +
                 std::to_string(b.width()) + "x" + std::to_string(b.height()) + "x" +
                 std::to_string(b.channels()) + ")");
    }
}

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(int begin, int end, int threads, const std::function<void(int)>& fn) {
    const int count = end - begin;
    if (count <= 0) return;
    const int workers = std::min(threads, count);
    if (workers <= 1) {
        for (int i = begin; i < end; ++i) fn(i);
        return;
    }

    std::atomic<int> next{begin};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto work = [&] {
        for (int i = next.fetch_add(1); i < end; i = next.fetch_add(1)) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };

    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (int t = 1; t < workers; ++t) pool.emplace_back(work);
    work();
    pool.clear();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace evsplat
