#pragma once

#include <vector>

#include "evsr/flow.hpp"
#include "evsr/image.hpp"

namespace evsr {

// Mean squared error, accumulated in double. Throws ShapeError on mismatch.
double mse(const Image& o, const Image& g);

// 10*log10(peak^2 / mse), capped at 99 dB (the identical-image sentinel).
double psnr(const Image& o, const Image& g, double peak = 1.0);

// Single-scale SSIM with an 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
// K2 = 0.03, dynamic range 1.0, averaged over fully-interior windows.
// Throws ShapeError when either dimension is below 11.
double ssim(const Image& o, const Image& g);

struct WarpErrorResult {
    double value = 0.0;
    bool degenerate = false; // mask selected no pixels
};

// Masked temporal error: warp f_next back through `flow`, then average the
// squared difference against f_t over mask-selected pixels. An empty mask
// yields {0, degenerate}.
WarpErrorResult warp_error(const Image& f_t, const Image& f_next, const FlowField& flow,
                           const OcclusionMask& mask);

struct FrameMetrics {
    int frame_index = 0;
    double psnr = 0.0;
    double ssim = 0.0;
    double mse = 0.0;
    double e_warp = 0.0;
    bool has_warp = false; // last frame of a sequence has no successor
    bool warp_degenerate = false;
};

// Aggregates are arithmetic means; e_warp averages only frames that have one.
struct MetricReport {
    std::vector<FrameMetrics> frames;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
    double mean_mse = 0.0;
    double mean_warp = 0.0;
    int count = 0;
    int warp_count = 0;
};

MetricReport make_report(std::vector<FrameMetrics> frames);

} // namespace evsr
