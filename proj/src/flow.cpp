#include "evsr/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "evsr/common.hpp"

namespace evsr {

namespace {

// Clamped bilinear lookup on a raw row-major plane; mirrors bilinear_at.
double sample_plane(const std::vector<float>& p, int w, int h, double x, double y) {
    x = std::clamp(x, 0.0, static_cast<double>(w - 1));
    y = std::clamp(y, 0.0, static_cast<double>(h - 1));
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const int x1 = std::min(x0 + 1, w - 1);
    const int y1 = std::min(y0 + 1, h - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    const auto v = [&](int yy, int xx) {
        return static_cast<double>(p[static_cast<std::size_t>(yy) * w + xx]);
    };
    return (1.0 - fy) * ((1.0 - fx) * v(y0, x0) + fx * v(y0, x1)) +
           fy * ((1.0 - fx) * v(y1, x0) + fx * v(y1, x1));
}

// In-place unnormalized box sum over a clamped (2r+1)^2 window, separable
// prefix-sum passes.
void box_sum(std::vector<float>& plane, int w, int h, int r, std::vector<float>& tmp,
             std::vector<double>& prefix) {
    tmp.resize(plane.size());
    // horizontal
    prefix.resize(static_cast<std::size_t>(w) + 1);
    for (int y = 0; y < h; ++y) {
        const float* row = plane.data() + static_cast<std::size_t>(y) * w;
        prefix[0] = 0.0;
        for (int x = 0; x < w; ++x) prefix[x + 1] = prefix[x] + row[x];
        float* out = tmp.data() + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            const int lo = std::max(x - r, 0);
            const int hi = std::min(x + r, w - 1);
            out[x] = static_cast<float>(prefix[hi + 1] - prefix[lo]);
        }
    }
    // vertical
    prefix.resize(static_cast<std::size_t>(h) + 1);
    for (int x = 0; x < w; ++x) {
        prefix[0] = 0.0;
        for (int y = 0; y < h; ++y)
            prefix[y + 1] = prefix[y] + tmp[static_cast<std::size_t>(y) * w + x];
        for (int y = 0; y < h; ++y) {
            const int lo = std::max(y - r, 0);
            const int hi = std::min(y + r, h - 1);
            plane[static_cast<std::size_t>(y) * w + x] =
                static_cast<float>(prefix[hi + 1] - prefix[lo]);
        }
    }
}

// Central-difference gradients, one-sided at the borders.
void gradients(const Image& img, std::vector<float>& gx, std::vector<float>& gy) {
    const int w = img.width, h = img.height;
    gx.resize(img.size());
    gy.resize(img.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            if (x == 0)
                gx[i] = img.at(y, 1) - img.at(y, 0);
            else if (x == w - 1)
                gx[i] = img.at(y, w - 1) - img.at(y, w - 2);
            else
                gx[i] = 0.5f * (img.at(y, x + 1) - img.at(y, x - 1));
            if (y == 0)
                gy[i] = img.at(1, x) - img.at(0, x);
            else if (y == h - 1)
                gy[i] = img.at(h - 1, x) - img.at(h - 2, x);
            else
                gy[i] = 0.5f * (img.at(y + 1, x) - img.at(y - 1, x));
        }
    }
}

// One pyramid level: iteratively warp b toward a and solve the regularized
// local 2x2 system per pixel.
void refine_level(const Image& a, const Image& b, FlowField& f, const FlowOptions& opt) {
    const int w = a.width, h = a.height;
    const std::size_t n = a.size();
    std::vector<float> ix, iy;
    gradients(a, ix, iy);

    std::vector<float> sxx(n), sxy(n), syy(n), sxt(n), syt(n);
    std::vector<float> tmp;
    std::vector<double> prefix;
    const double lam = opt.lambda;
    const double step_cap = opt.window_radius;

    for (int iter = 0; iter < opt.iterations; ++iter) {
        const WarpResult bw = warp_image(b, f);
        for (std::size_t i = 0; i < n; ++i) {
            if (!bw.valid[i]) {
                sxx[i] = sxy[i] = syy[i] = sxt[i] = syt[i] = 0.0f;
                continue;
            }
            const float gx = ix[i], gy = iy[i];
            const float it = bw.image.px[i] - a.px[i];
            sxx[i] = gx * gx;
            sxy[i] = gx * gy;
            syy[i] = gy * gy;
            sxt[i] = gx * it;
            syt[i] = gy * it;
        }
        box_sum(sxx, w, h, opt.window_radius, tmp, prefix);
        box_sum(sxy, w, h, opt.window_radius, tmp, prefix);
        box_sum(syy, w, h, opt.window_radius, tmp, prefix);
        box_sum(sxt, w, h, opt.window_radius, tmp, prefix);
        box_sum(syt, w, h, opt.window_radius, tmp, prefix);
        for (std::size_t i = 0; i < n; ++i) {
            const double a11 = sxx[i] + lam;
            const double a12 = sxy[i];
            const double a22 = syy[i] + lam;
            const double b1 = -sxt[i];
            const double b2 = -syt[i];
            const double det = a11 * a22 - a12 * a12;  // >= lam^2 since G is PSD
            double ddx = (a22 * b1 - a12 * b2) / det;
            double ddy = (a11 * b2 - a12 * b1) / det;
            ddx = std::clamp(ddx, -step_cap, step_cap);
            ddy = std::clamp(ddy, -step_cap, step_cap);
            f.dx[i] += static_cast<float>(ddx);
            f.dy[i] += static_cast<float>(ddy);
        }
    }
}

Image plane_as_image(const std::vector<float>& p, int w, int h) {
    Image img(w, h);
    img.px = p;
    return img;
}

FlowField upscale_flow(const FlowField& f, int out_w, int out_h) {
    FlowField out(out_w, out_h);
    const Image rx = resize_bilinear(plane_as_image(f.dx, f.width, f.height), out_w, out_h);
    const Image ry = resize_bilinear(plane_as_image(f.dy, f.width, f.height), out_w, out_h);
    const float scale_x = static_cast<float>(out_w) / static_cast<float>(f.width);
    const float scale_y = static_cast<float>(out_h) / static_cast<float>(f.height);
    for (std::size_t i = 0; i < out.dx.size(); ++i) {
        out.dx[i] = rx.px[i] * scale_x;
        out.dy[i] = ry.px[i] * scale_y;
    }
    return out;
}

}  // namespace

FlowField estimate_flow(const Image& a, const Image& b, const FlowOptions& opt) {
    if (a.width != b.width || a.height != b.height)
        throw ShapeError("estimate_flow: dimension mismatch (" + std::to_string(a.width) + "x" +
                         std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                         std::to_string(b.height) + ")");
    if (a.width < 8 || a.height < 8)
        throw ShapeError("estimate_flow: inputs must be at least 8x8, got " +
                         std::to_string(a.width) + "x" + std::to_string(a.height));

    std::vector<Image> pa{a}, pb{b};
    while (true) {
        Image na = downsample2(pa.back());
        if (std::min(na.width, na.height) < opt.min_level_size) break;
        pa.push_back(std::move(na));
        pb.push_back(downsample2(pb.back()));
    }

    FlowField f(pa.back().width, pa.back().height);
    for (int lvl = static_cast<int>(pa.size()) - 1; lvl >= 0; --lvl) {
        if (f.width != pa[lvl].width || f.height != pa[lvl].height)
            f = upscale_flow(f, pa[lvl].width, pa[lvl].height);
        refine_level(pa[lvl], pb[lvl], f, opt);
    }
    return f;
}

FlowField estimate_flow(const EventStack& a, const EventStack& b, const FlowOptions& opt) {
    return estimate_flow(stack_to_gray(a), stack_to_gray(b), opt);
}

WarpResult warp_image(const Image& image, const FlowField& flow) {
    if (image.width != flow.width || image.height != flow.height)
        throw ShapeError("warp_image: image " + std::to_string(image.width) + "x" +
                         std::to_string(image.height) + " vs flow " + std::to_string(flow.width) +
                         "x" + std::to_string(flow.height));
    WarpResult out;
    out.image = Image(image.width, image.height);
    out.valid.assign(image.size(), 0);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * image.width + x;
            const double sx = x + static_cast<double>(flow.dx[i]);
            const double sy = y + static_cast<double>(flow.dy[i]);
            if (sx < 0.0 || sx > image.width - 1 || sy < 0.0 || sy > image.height - 1) continue;
            out.valid[i] = 1;
            out.image.px[i] = static_cast<float>(bilinear_at(image, sx, sy));
        }
    }
    return out;
}

OcclusionMask occlusion_mask(const FlowField& fwd, const FlowField& bwd) {
    if (fwd.width != bwd.width || fwd.height != bwd.height)
        throw ShapeError("occlusion_mask: flow dimension mismatch");
    OcclusionMask out(fwd.width, fwd.height, 0);
    for (int y = 0; y < fwd.height; ++y) {
        for (int x = 0; x < fwd.width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * fwd.width + x;
            const double fx = fwd.dx[i], fy = fwd.dy[i];
            const double bx = sample_plane(bwd.dx, bwd.width, bwd.height, x + fx, y + fy);
            const double by = sample_plane(bwd.dy, bwd.width, bwd.height, x + fx, y + fy);
            const double ex = fx + bx, ey = fy + by;
            const double lhs = ex * ex + ey * ey;
            const double rhs = 0.01 * (fx * fx + fy * fy + bx * bx + by * by) + 0.5;
            out.m[i] = lhs <= rhs ? 1 : 0;
        }
    }
    return out;
}

void write_flo(const std::string& path, const FlowField& flow) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path + " for writing");
    const auto put_f32 = [&os](float v) {
        char b[4];
        std::memcpy(b, &v, 4);
        os.write(b, 4);
    };
    const auto put_i32 = [&os](int32_t v) {
        char b[4];
        std::memcpy(b, &v, 4);
        os.write(b, 4);
    };
    put_f32(202021.25f);
    put_i32(flow.width);
    put_i32(flow.height);
    for (int y = 0; y < flow.height; ++y) {
        for (int x = 0; x < flow.width; ++x) {
            put_f32(flow.fx(y, x));
            put_f32(flow.fy(y, x));
        }
    }
    if (!os) throw IoError("write failed: " + path);
}

}  // namespace evsr
