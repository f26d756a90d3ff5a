#pragma once

#include <filesystem>
#include <vector>

#include "evsr/common.hpp"

namespace evsr {

// Grayscale raster, row-major, nominal range [0, 1]. Arithmetic on pixel data
// is done in double by the routines below; float storage keeps frames compact.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<float> px;

    Image() = default;
    Image(int w, int h, float fill = 0.0f)
        : width(w), height(h), px(static_cast<std::size_t>(w) * h, fill) {}

    float& at(int y, int x) { return px[static_cast<std::size_t>(y) * width + x]; }
    float at(int y, int x) const { return px[static_cast<std::size_t>(y) * width + x]; }

    std::size_t size() const { return px.size(); }
    bool empty() const { return px.empty(); }
};

// Reads PGM (P2/P5) and PPM (P3/P6); color input is collapsed to luma
// (0.299 R + 0.587 G + 0.114 B). 8- and 16-bit samples are accepted and
// scaled to [0, 1].
Image read_image(const std::filesystem::path& path);

// Writes an 8-bit binary PGM, or 16-bit big-endian when depth16 is set.
// Values are clamped to [0, 1] before quantization.
void write_pgm(const std::filesystem::path& path, const Image& img, bool depth16 = false);

// Mean over factor x factor blocks. Width and height must be divisible by
// the factor.
Image box_downsample(const Image& img, int factor);

// Half-resolution image for pyramid construction; odd trailing rows/columns
// are folded into the last output cell. Output dims are (w+1)/2 x (h+1)/2.
Image downsample2(const Image& img);

// Bilinear resize to an arbitrary size, used to upscale flow between pyramid
// levels. Sampling is aligned so that corner pixel centers map to corner
// pixel centers.
Image resize_bilinear(const Image& img, int out_w, int out_h);

// Bilinear lookup at a continuous position, coordinates clamped to the valid
// domain [0, w-1] x [0, h-1]. Exact at integer coordinates.
double bilinear_at(const Image& img, double x, double y);

} // namespace evsr
