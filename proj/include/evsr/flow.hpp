#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evsr/image.hpp"
#include "evsr/stacking.hpp"

namespace evsr {

// Dense per-pixel displacement field. Convention: flow maps a -> b, i.e.
// a(p) ~= b(p + f(p)), so warping b by f reconstructs a's frame.
struct FlowField {
    int width = 0;
    int height = 0;
    std::vector<float> dx;  // row-major h*w
    std::vector<float> dy;

    FlowField() = default;
    FlowField(int w, int h)
        : width(w), height(h), dx(size_t(w) * h, 0.0f), dy(size_t(w) * h, 0.0f) {}

    float& fx(int y, int x) { return dx[size_t(y) * width + x]; }
    float& fy(int y, int x) { return dy[size_t(y) * width + x]; }
    float fx(int y, int x) const { return dx[size_t(y) * width + x]; }
    float fy(int y, int x) const { return dy[size_t(y) * width + x]; }
};

// Binary non-occlusion mask: 1 = consistent (non-occluded), 0 = occluded.
struct OcclusionMask {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> m;

    OcclusionMask() = default;
    OcclusionMask(int w, int h, uint8_t fill = 1)
        : width(w), height(h), m(size_t(w) * h, fill) {}

    uint8_t& at(int y, int x) { return m[size_t(y) * width + x]; }
    uint8_t at(int y, int x) const { return m[size_t(y) * width + x]; }
};

struct FlowOptions {
    int window_radius = 3;   // box window half-size for the local system
    int iterations = 3;      // warp/refine sweeps per pyramid level
    int min_level_size = 8;  // stop coarsening below this min(h, w)
    double lambda = 1e-3;    // Tikhonov term; keeps flat regions at zero flow
};

// Coarse-to-fine pyramidal Lucas-Kanade on grayscale images.
// Throws ShapeError on dimension mismatch or inputs smaller than 8x8.
FlowField estimate_flow(const Image& a, const Image& b, const FlowOptions& opt = {});

// Stack overload: channel-averaged grayscale views of each stack.
FlowField estimate_flow(const EventStack& a, const EventStack& b,
                        const FlowOptions& opt = {});

struct WarpResult {
    Image image;                 // backward-warped input; invalid pixels are 0
    std::vector<uint8_t> valid;  // 1 where the sample position was in bounds
};

// Backward bilinear warp: out(p) = image(p + flow(p)). A sample is valid when
// its position lies inside [0, w-1] x [0, h-1]; zero flow is a bit-level
// identity. Throws ShapeError on dimension mismatch.
WarpResult warp_image(const Image& image, const FlowField& flow);

// Forward-backward consistency: pixel p is non-occluded iff
//   |f_fwd(p) + f_bwd(p + f_fwd(p))|^2 <= 0.01*(|f_fwd|^2 + |f_bwd|^2) + 0.5
// with f_bwd sampled bilinearly (clamped at borders).
OcclusionMask occlusion_mask(const FlowField& fwd, const FlowField& bwd);

// Middlebury-style .flo dump: float magic 202021.25, int32 width, int32
// height, then row-major interleaved (dx, dy) float32, all little-endian.
void write_flo(const std::string& path, const FlowField& flow);

}  // namespace evsr
