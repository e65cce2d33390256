#include "evsplat/objective.hpp"

#include <array>
#include <cmath>

namespace evsplat {

void validate_weights(const LossWeights& weights) {
    if (!(weights.w_dssim >= 0.0 && weights.w_dssim <= 1.0)) {
        fail(ErrorCode::kInvalidArgument, "w_dssim must lie in [0, 1]");
    }
    if (!(weights.w_event >= 0.0)) fail(ErrorCode::kInvalidArgument, "w_event must be non-negative");
    if (weights.n < 2) fail(ErrorCode::kInvalidArgument, "latent count n must be >= 2");
    validate_thresholds(weights.thresholds);
}

Image synthesize_blur(std::span<const Image> images) {
    if (images.size() < 2) fail(ErrorCode::kInvalidArgument, "blur synthesis needs at least two images");
    Image mean(images[0].width(), images[0].height(), images[0].channels());
    auto out = mean.data();
    for (const Image& img : images) {
        require_same_shape(images[0], img, "synthesize_blur");
        const auto in = img.data();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += in[i];
    }
    const double inv = 1.0 / static_cast<double>(images.size());
    for (double& v : out) v *= inv;
    return mean;
}

double l1_loss(const Image& a, const Image& b) {
    require_same_shape(a, b, "l1_loss");
    if (a.empty()) fail(ErrorCode::kInvalidArgument, "l1_loss on empty images");
    double sum = 0.0;
    const auto x = a.data(), y = b.data();
    for (std::size_t i = 0; i < x.size(); ++i) sum += std::abs(x[i] - y[i]);
    return sum / static_cast<double>(x.size());
}

Image l1_loss_grad(const Image& a, const Image& b) {
    require_same_shape(a, b, "l1_loss_grad");
    Image grad(a.width(), a.height(), a.channels());
    const double scale = 1.0 / static_cast<double>(a.size());
    const auto x = a.data(), y = b.data();
    auto g = grad.data();
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        g[i] = d > 0.0 ? scale : (d < 0.0 ? -scale : 0.0);
    }
    return grad;
}

namespace {

std::array<double, kSsimWindow> ssim_kernel() {
    std::array<double, kSsimWindow> k{};
    double sum = 0.0;
    const int half = kSsimWindow / 2;
    for (int i = 0; i < kSsimWindow; ++i) {
        const double d = i - half;
        k[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
        sum += k[i];
    }
    for (double& v : k) v /= sum;
    return k;
}

// Separable correlation without padding: (w x h) -> (w - 10) x (h - 10).
std::vector<double> filter_valid(const std::vector<double>& src, int w, int h) {
    static const auto k = ssim_kernel();
    const int ow = w - kSsimWindow + 1, oh = h - kSsimWindow + 1;
    std::vector<double> tmp(static_cast<std::size_t>(ow) * h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < kSsimWindow; ++i) s += k[i] * src[static_cast<std::size_t>(y) * w + x + i];
            tmp[static_cast<std::size_t>(y) * ow + x] = s;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(ow) * oh);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < kSsimWindow; ++i) s += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = s;
        }
    }
    return out;
}

// Transpose of filter_valid: scatters a (w - 10) x (h - 10) map back to w x h.
std::vector<double> filter_adjoint(const std::vector<double>& src, int w, int h) {
    static const auto k = ssim_kernel();
    const int ow = w - kSsimWindow + 1, oh = h - kSsimWindow + 1;
    std::vector<double> tmp(static_cast<std::size_t>(ow) * h, 0.0);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            const double v = src[static_cast<std::size_t>(y) * ow + x];
            for (int i = 0; i < kSsimWindow; ++i) tmp[static_cast<std::size_t>(y + i) * ow + x] += k[i] * v;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(w) * h, 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < ow; ++x) {
            const double v = tmp[static_cast<std::size_t>(y) * ow + x];
            for (int i = 0; i < kSsimWindow; ++i) out[static_cast<std::size_t>(y) * w + x + i] += k[i] * v;
        }
    }
    return out;
}

std::vector<double> plane(const Image& img, int c) {
    std::vector<double> p(static_cast<std::size_t>(img.width()) * img.height());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) p[static_cast<std::size_t>(y) * img.width() + x] = img.at(x, y, c);
    return p;
}

std::pair<double, Image> ssim_impl(const Image& a, const Image& b, bool want_grad) {
    require_same_shape(a, b, "ssim");
    const int w = a.width(), h = a.height();
    if (w < kSsimWindow || h < kSsimWindow) {
        fail(ErrorCode::kInvalidArgument, "images smaller than the 11x11 SSIM window");
    }
    const int ow = w - kSsimWindow + 1, oh = h - kSsimWindow + 1;
    const std::size_t positions = static_cast<std::size_t>(ow) * oh;
    const double norm = 1.0 / (static_cast<double>(positions) * a.channels());

    double total = 0.0;
    Image grad;
    if (want_grad) grad = Image(w, h, a.channels());
    for (int c = 0; c < a.channels(); ++c) {
        const auto x = plane(a, c), y = plane(b, c);
        std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            xx[i] = x[i] * x[i];
            yy[i] = y[i] * y[i];
            xy[i] = x[i] * y[i];
        }
        const auto mu_x = filter_valid(x, w, h), mu_y = filter_valid(y, w, h);
        const auto e_xx = filter_valid(xx, w, h), e_yy = filter_valid(yy, w, h), e_xy = filter_valid(xy, w, h);

        std::vector<double> g_lin, g_sq, g_cross;
        if (want_grad) {
            g_lin.resize(positions);
            g_sq.resize(positions);
            g_cross.resize(positions);
        }
        for (std::size_t i = 0; i < positions; ++i) {
            const double mx = mu_x[i], my = mu_y[i];
            const double var_x = e_xx[i] - mx * mx;
            const double var_y = e_yy[i] - my * my;
            const double cov = e_xy[i] - mx * my;
            const double n1 = 2.0 * mx * my + kSsimC1, n2 = 2.0 * cov + kSsimC2;
            const double d1 = mx * mx + my * my + kSsimC1, d2 = var_x + var_y + kSsimC2;
            const double s = (n1 * n2) / (d1 * d2);
            total += s;
            if (!want_grad) continue;
            const double ds_dmu = (2.0 * my * n2) / (d1 * d2) - s * 2.0 * mx / d1;
            const double ds_dvar = -s / d2;
            const double ds_dcov = 2.0 * n1 / (d1 * d2);
            // var_x = E[x^2] - mu_x^2 and cov = E[xy] - mu_x mu_y re-expressed over filtered terms.
            g_lin[i] = norm * (ds_dmu - 2.0 * ds_dvar * mx - ds_dcov * my);
            g_sq[i] = norm * 2.0 * ds_dvar;
            g_cross[i] = norm * ds_dcov;
        }
        if (!want_grad) continue;
        const auto back_lin = filter_adjoint(g_lin, w, h);
        const auto back_sq = filter_adjoint(g_sq, w, h);
        const auto back_cross = filter_adjoint(g_cross, w, h);
        for (int py = 0; py < h; ++py) {
            for (int px = 0; px < w; ++px) {
                const std::size_t i = static_cast<std::size_t>(py) * w + px;
                grad.at(px, py, c) = back_lin[i] + x[i] * back_sq[i] + y[i] * back_cross[i];
            }
        }
    }
    return {total * norm, std::move(grad)};
}

} // namespace

double ssim(const Image& a, const Image& b) { return ssim_impl(a, b, false).first; }

std::pair<double, Image> ssim_with_grad(const Image& a, const Image& b) { return ssim_impl(a, b, true); }

double dssim(const Image& a, const Image& b) { return 0.5 * (1.0 - ssim(a, b)); }

double blur_loss(const Image& pred, const Image& target, double w_dssim) {
    const double l1 = l1_loss(pred, target);
    if (w_dssim == 0.0) return l1;
    return (1.0 - w_dssim) * l1 + w_dssim * dssim(pred, target);
}

Image to_grayscale(const Image& rgb) {
    if (rgb.channels() != 3) fail(ErrorCode::kInvalidArgument, "to_grayscale expects an RGB image");
    Image gray(rgb.width(), rgb.height(), 1);
    for (int y = 0; y < rgb.height(); ++y)
        for (int x = 0; x < rgb.width(); ++x)
            gray.at(x, y) = 0.299 * rgb.at(x, y, 0) + 0.587 * rgb.at(x, y, 1) + 0.114 * rgb.at(x, y, 2);
    return gray;
}

Image to_grayscale_grad(const Image& upstream) {
    if (upstream.channels() != 1) fail(ErrorCode::kInvalidArgument, "grayscale gradient must be single-channel");
    Image grad(upstream.width(), upstream.height(), 3);
    for (int y = 0; y < upstream.height(); ++y) {
        for (int x = 0; x < upstream.width(); ++x) {
            const double g = upstream.at(x, y);
            grad.at(x, y, 0) = 0.299 * g;
            grad.at(x, y, 1) = 0.587 * g;
            grad.at(x, y, 2) = 0.114 * g;
        }
    }
    return grad;
}

Image estimate_event_bin(const Image& l_n, const Image& l_m, const Thresholds& thresholds,
                         Quantization quantization) {
    require_same_shape(l_n, l_m, "estimate_event_bin");
    validate_thresholds(thresholds);
    Image out(l_n.width(), l_n.height(), l_n.channels());
    const auto a = l_n.data(), b = l_m.data();
    auto o = out.data();
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = floored_log(b[i]) - floored_log(a[i]);
        const double ratio = d > 0.0 ? d / thresholds.c_pos : d / thresholds.c_neg;
        if (quantization == Quantization::kNone) {
            o[i] = ratio;
        } else {
            o[i] = d > 0.0 ? std::floor(ratio) : std::ceil(ratio);
        }
    }
    return out;
}

std::pair<Image, Image> estimate_event_bin_grad(const Image& l_n, const Image& l_m, const Thresholds& thresholds,
                                                const Image& upstream) {
    require_same_shape(l_n, l_m, "estimate_event_bin_grad");
    require_same_shape(l_n, upstream, "estimate_event_bin_grad");
    Image g_n(l_n.width(), l_n.height(), l_n.channels());
    Image g_m(l_n.width(), l_n.height(), l_n.channels());
    const auto a = l_n.data(), b = l_m.data(), up = upstream.data();
    auto gn = g_n.data(), gm = g_m.data();
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = floored_log(b[i]) - floored_log(a[i]);
        const double g_d = up[i] / (d > 0.0 ? thresholds.c_pos : thresholds.c_neg);
        gm[i] = b[i] > kLogFloor ? g_d / b[i] : 0.0;
        gn[i] = a[i] > kLogFloor ? -g_d / a[i] : 0.0;
    }
    return {std::move(g_n), std::move(g_m)};
}

namespace {
void require_matching_bins(const Image& estimated, const EventBinImage& gt) {
    if (estimated.channels() != 1 || estimated.width() != gt.width || estimated.height() != gt.height) {
        fail(ErrorCode::kInvalidArgument, "estimated event image does not match the ground-truth bin image");
    }
}
} // namespace

double event_loss(const Image& estimated, const EventBinImage& ground_truth) {
    require_matching_bins(estimated, ground_truth);
    const auto e = estimated.data();
    double sum = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
        const double d = e[i] - ground_truth.counts[i];
        sum += d * d;
    }
    return sum / static_cast<double>(e.size());
}

Image event_loss_grad(const Image& estimated, const EventBinImage& ground_truth) {
    require_matching_bins(estimated, ground_truth);
    Image grad(estimated.width(), estimated.height(), 1);
    const auto e = estimated.data();
    auto g = grad.data();
    const double scale = 2.0 / static_cast<double>(e.size());
    for (std::size_t i = 0; i < e.size(); ++i) g[i] = scale * (e[i] - ground_truth.counts[i]);
    return grad;
}

LossBreakdown total_loss(double l1, double dssim_value, double event_loss_value, const LossWeights& weights) {
    LossBreakdown out;
    out.l1 = l1;
    out.dssim = dssim_value;
    out.blur_loss = (1.0 - weights.w_dssim) * l1 + weights.w_dssim * dssim_value;
    out.event_loss = event_loss_value;
    out.total = out.blur_loss + weights.w_event * event_loss_value;
    return out;
}

ViewLoss evaluate_view_loss(const ViewLossInput& input, const LossWeights& weights, Quantization quantization) {
    if (input.renders.empty() || input.target_blur == nullptr) {
        fail(ErrorCode::kInvalidArgument, "view loss needs renders and a blurry target");
    }
    const std::size_t n = input.renders.size();
    const Image blur = n == 1 ? input.renders[0] : synthesize_blur(input.renders);
    const Image& target = *input.target_blur;
    require_same_shape(blur, target, "evaluate_view_loss");

    const double l1 = l1_loss(blur, target);
    Image g_blur = l1_loss_grad(blur, target);
    for (double& v : g_blur.data()) v *= (1.0 - weights.w_dssim);
    double dssim_value = 0.0;
    if (weights.w_dssim > 0.0) {
        auto [s, g_ssim] = ssim_with_grad(blur, target);
        dssim_value = 0.5 * (1.0 - s);
        auto gb = g_blur.data();
        const auto gs = g_ssim.data();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += weights.w_dssim * -0.5 * gs[i];
    }

    ViewLoss result;
    result.render_grads.assign(n, g_blur);
    if (n > 1) {
        const double inv = 1.0 / static_cast<double>(n);
        for (Image& g : result.render_grads)
            for (double& v : g.data()) v *= inv;
    }

    double ev = 0.0;
    if (!input.event_pairs.empty() && weights.w_event > 0.0) {
        const double pair_scale = 1.0 / static_cast<double>(input.event_pairs.size());
        for (const EventPairTarget& pair : input.event_pairs) {
            if (pair.counts == nullptr || pair.frame_n < 0 || pair.frame_n >= pair.frame_m ||
                pair.frame_m >= static_cast<int>(n)) {
                fail(ErrorCode::kInvalidArgument, "event frame pair must satisfy 0 <= n < m < N");
            }
            const Image l_n = to_grayscale(input.renders[pair.frame_n]);
            const Image l_m = to_grayscale(input.renders[pair.frame_m]);
            const Image estimate = estimate_event_bin(l_n, l_m, weights.thresholds, quantization);
            ev += pair_scale * event_loss(estimate, *pair.counts);
            Image g_est = event_loss_grad(estimate, *pair.counts);
            for (double& v : g_est.data()) v *= weights.w_event * pair_scale;
            auto [g_ln, g_lm] = estimate_event_bin_grad(l_n, l_m, weights.thresholds, g_est);
            const Image rgb_n = to_grayscale_grad(g_ln);
            const Image rgb_m = to_grayscale_grad(g_lm);
            auto dst_n = result.render_grads[pair.frame_n].data();
            auto dst_m = result.render_grads[pair.frame_m].data();
            for (std::size_t i = 0; i < dst_n.size(); ++i) {
                dst_n[i] += rgb_n.data()[i];
                dst_m[i] += rgb_m.data()[i];
            }
        }
    }
    result.breakdown = total_loss(l1, dssim_value, ev, weights);
    return result;
}

} // namespace evsplat
