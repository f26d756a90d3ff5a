#include "evsr/metrics.hpp"

#include <cmath>
#include <string>

#include "evsr/common.hpp"

namespace evsr {

namespace {

void require_same_dims(const Image& a, const Image& b, const char* who) {
    if (a.width != b.width || a.height != b.height)
        throw ShapeError(std::string(who) + ": dimension mismatch (" + std::to_string(a.width) +
                         "x" + std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                         std::to_string(b.height) + ")");
}

constexpr int kWin = 11;
constexpr double kSigma = 1.5;

// Valid-mode separable convolution of a double plane with the normalized 1-D
// Gaussian; output is (w - kWin + 1) x (h - kWin + 1).
std::vector<double> gauss_valid(const std::vector<double>& in, int w, int h,
                                const double* k1d) {
    const int ow = w - kWin + 1;
    const int oh = h - kWin + 1;
    std::vector<double> horiz(static_cast<std::size_t>(ow) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int k = 0; k < kWin; ++k) s += k1d[k] * in[static_cast<std::size_t>(y) * w + x + k];
            horiz[static_cast<std::size_t>(y) * ow + x] = s;
        }
    std::vector<double> out(static_cast<std::size_t>(ow) * oh);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int k = 0; k < kWin; ++k) s += k1d[k] * horiz[static_cast<std::size_t>(y + k) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = s;
        }
    return out;
}

} // namespace

double mse(const Image& o, const Image& g) {
    require_same_dims(o, g, "mse");
    double acc = 0.0;
    for (std::size_t i = 0; i < o.size(); ++i) {
        const double d = static_cast<double>(o.px[i]) - static_cast<double>(g.px[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(o.size());
}

double psnr(const Image& o, const Image& g, double peak) {
    const double m = mse(o, g);
    if (m <= 0.0) return 99.0;
    const double db = 10.0 * std::log10(peak * peak / m);
    return db > 99.0 ? 99.0 : db;
}

double ssim(const Image& o, const Image& g) {
    require_same_dims(o, g, "ssim");
    if (o.width < kWin || o.height < kWin)
        throw ShapeError("ssim: image too small, need at least 11x11, got " +
                         std::to_string(o.width) + "x" + std::to_string(o.height));

    double k1d[kWin];
    double ksum = 0.0;
    for (int i = 0; i < kWin; ++i) {
        const double d = i - (kWin - 1) / 2;
        k1d[i] = std::exp(-(d * d) / (2.0 * kSigma * kSigma));
        ksum += k1d[i];
    }
    for (int i = 0; i < kWin; ++i) k1d[i] /= ksum;

    const int w = o.width, h = o.height;
    const std::size_t n = o.size();
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = o.px[i];
        y[i] = g.px[i];
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    const std::vector<double> mx = gauss_valid(x, w, h, k1d);
    const std::vector<double> my = gauss_valid(y, w, h, k1d);
    const std::vector<double> mxx = gauss_valid(xx, w, h, k1d);
    const std::vector<double> myy = gauss_valid(yy, w, h, k1d);
    const std::vector<double> mxy = gauss_valid(xy, w, h, k1d);

    constexpr double kC1 = 0.01 * 0.01; // (K1 * L)^2, L = 1
    constexpr double kC2 = 0.03 * 0.03;
    double acc = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
        const double vx = mxx[i] - mx[i] * mx[i];
        const double vy = myy[i] - my[i] * my[i];
        const double cxy = mxy[i] - mx[i] * my[i];
        acc += ((2.0 * mx[i] * my[i] + kC1) * (2.0 * cxy + kC2)) /
               ((mx[i] * mx[i] + my[i] * my[i] + kC1) * (vx + vy + kC2));
    }
    return acc / static_cast<double>(mx.size());
}

WarpErrorResult warp_error(const Image& f_t, const Image& f_next, const FlowField& flow,
                           const OcclusionMask& mask) {
    require_same_dims(f_t, f_next, "warp_error");
    if (f_t.width != flow.width || f_t.height != flow.height || f_t.width != mask.width ||
        f_t.height != mask.height)
        throw ShapeError("warp_error: flow/mask dimensions must match the frames");

    const WarpResult warped = warp_image(f_next, flow);
    double acc = 0.0;
    std::size_t selected = 0;
    for (std::size_t i = 0; i < f_t.size(); ++i) {
        if (!mask.m[i]) continue;
        const double d = static_cast<double>(f_t.px[i]) - static_cast<double>(warped.image.px[i]);
        acc += d * d;
        ++selected;
    }
    if (selected == 0) return {0.0, true};
    return {acc / static_cast<double>(selected), false};
}

MetricReport make_report(std::vector<FrameMetrics> frames) {
    MetricReport r;
    r.frames = std::move(frames);
    r.count = static_cast<int>(r.frames.size());
    for (const FrameMetrics& f : r.frames) {
        r.mean_psnr += f.psnr;
        r.mean_ssim += f.ssim;
        r.mean_mse += f.mse;
        if (f.has_warp) {
            r.mean_warp += f.e_warp;
            ++r.warp_count;
        }
    }
    if (r.count > 0) {
        r.mean_psnr /= r.count;
        r.mean_ssim /= r.count;
        r.mean_mse /= r.count;
    }
    if (r.warp_count > 0) r.mean_warp /= r.warp_count;
    return r;
}

} // namespace evsr
