#pragma once

#include "evsplat/common.hpp"
#include "evsplat/events.hpp"

#include <span>
#include <utility>
#include <vector>

namespace evsplat {

/// SSIM window and stabilising constants for images on the [0, 1] range.
inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

struct LossWeights {
    double w_dssim = 0.2;
    double w_event = 0.005;
    int n = 5;
    Thresholds thresholds;
};

void validate_weights(const LossWeights& weights);

struct LossBreakdown {
    double l1 = 0.0;
    double dssim = 0.0;
    double blur_loss = 0.0;
    double event_loss = 0.0;
    double total = 0.0;

    friend bool operator==(const LossBreakdown&, const LossBreakdown&) = default;
};

/// Per-pixel mean of equally sized images.
Image synthesize_blur(std::span<const Image> images);

double l1_loss(const Image& a, const Image& b);
/// d l1_loss / d a.
Image l1_loss_grad(const Image& a, const Image& b);

/// Mean SSIM over channels and valid (unpadded) window positions.
double ssim(const Image& a, const Image& b);
/// SSIM together with d SSIM / d a.
std::pair<double, Image> ssim_with_grad(const Image& a, const Image& b);
/// (1 - SSIM) / 2.
double dssim(const Image& a, const Image& b);

/// (1 - w) * L1 + w * D-SSIM.
double blur_loss(const Image& pred, const Image& target, double w_dssim);

/// BT.601 luma.
Image to_grayscale(const Image& rgb);
/// Pulls a gradient on the luma image back onto the RGB image.
Image to_grayscale_grad(const Image& upstream);

/// kTruncate is the forward quantizer; kNone keeps d / C unrounded (the straight-through surrogate).
enum class Quantization { kTruncate, kNone };

/// Predicted signed event count between two intensity images: d = log L_m - log L_n, then
/// floor(d / c_pos) for d > 0 and ceil(d / c_neg) otherwise.
Image estimate_event_bin(const Image& l_n, const Image& l_m, const Thresholds& thresholds,
                         Quantization quantization = Quantization::kTruncate);

/// Straight-through backward of estimate_event_bin: quantization is treated as identity, so
/// the gradient flows through d / C. Returns (dL/dl_n, dL/dl_m).
std::pair<Image, Image> estimate_event_bin_grad(const Image& l_n, const Image& l_m, const Thresholds& thresholds,
                                                const Image& upstream);

/// Mean over pixels of (estimated - ground_truth)^2.
double event_loss(const Image& estimated, const EventBinImage& ground_truth);
Image event_loss_grad(const Image& estimated, const EventBinImage& ground_truth);

LossBreakdown total_loss(double l1, double dssim_value, double event_loss_value, const LossWeights& weights);

/// Ground-truth signed counts between two of a view's renders (0-based, frame_n < frame_m).
struct EventPairTarget {
    int frame_n = 0;
    int frame_m = 1;
    const EventBinImage* counts = nullptr;
};

/// Everything needed to score one training view.
struct ViewLossInput {
    std::span<const Image> renders; ///< one render per in-exposure pose
    const Image* target_blur = nullptr;
    /// Event term targets; the event loss is their mean. Empty disables the term.
    std::span<const EventPairTarget> event_pairs;
};

struct ViewLoss {
    LossBreakdown breakdown;
    std::vector<Image> render_grads; ///< dTotal / dRender_i
};

/// Blur synthesis, blur loss, event estimate and event loss combined, with gradients with
/// respect to each render.
ViewLoss evaluate_view_loss(const ViewLossInput& input, const LossWeights& weights,
                            Quantization quantization = Quantization::kTruncate);

} // namespace evsplat
