#include "evsr/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>

namespace evsr {

namespace {

// Reads the next whitespace-delimited token of a PNM header, skipping
// '#' comments.
int next_header_value(std::istream& in, const std::filesystem::path& path) {
    while (true) {
        int ch = in.peek();
        if (ch == EOF)
            throw IoError("truncated PNM header in " + path.string());
        if (ch == '#') {
            std::string junk;
            std::getline(in, junk);
            continue;
        }
        if (std::isspace(ch)) {
            in.get();
            continue;
        }
        break;
    }
    int value = 0;
    if (!(in >> value) || value < 0)
        throw IoError("bad PNM header value in " + path.string());
    return value;
}

double read_sample(std::istream& in, bool binary, int maxval, const std::filesystem::path& path) {
    if (binary) {
        if (maxval < 256) {
            int b = in.get();
            if (b == EOF)
                throw IoError("truncated PNM payload in " + path.string());
            return static_cast<double>(b) / maxval;
        }
        int hi = in.get();
        int lo = in.get();
        if (hi == EOF || lo == EOF)
            throw IoError("truncated PNM payload in " + path.string());
        return static_cast<double>(hi * 256 + lo) / maxval;
    }
    int v = 0;
    if (!(in >> v))
        throw IoError("truncated PNM payload in " + path.string());
    return static_cast<double>(v) / maxval;
}

} // namespace

Image read_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());

    char p = 0, kind = 0;
    in.get(p);
    in.get(kind);
    if (p != 'P' || (kind != '2' && kind != '3' && kind != '5' && kind != '6'))
        throw IoError("unsupported image format in " + path.string() + " (want PGM/PPM)");

    const bool color = (kind == '3' || kind == '6');
    const bool binary = (kind == '5' || kind == '6');
    const int w = next_header_value(in, path);
    const int h = next_header_value(in, path);
    const int maxval = next_header_value(in, path);
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535)
        throw IoError("bad PNM dimensions in " + path.string());
    if (binary)
        in.get(); // single whitespace byte before the payload

    Image img(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double v;
            if (color) {
                double r = read_sample(in, binary, maxval, path);
                double g = read_sample(in, binary, maxval, path);
                double b = read_sample(in, binary, maxval, path);
                v = 0.299 * r + 0.587 * g + 0.114 * b;
            } else {
                v = read_sample(in, binary, maxval, path);
            }
            img.at(y, x) = static_cast<float>(v);
        }
    }
    return img;
}

void write_pgm(const std::filesystem::path& path, const Image& img, bool depth16) {
    if (img.empty())
        throw IoError("refusing to write empty image to " + path.string());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write " + path.string());

    const int maxval = depth16 ? 65535 : 255;
    out << "P5\n" << img.width << " " << img.height << "\n" << maxval << "\n";
    for (float f : img.px) {
        double v = std::clamp(static_cast<double>(f), 0.0, 1.0);
        long q = std::lround(v * maxval);
        if (depth16) {
            out.put(static_cast<char>((q >> 8) & 0xff));
            out.put(static_cast<char>(q & 0xff));
        } else {
            out.put(static_cast<char>(q & 0xff));
        }
    }
    if (!out)
        throw IoError("short write to " + path.string());
}

Image box_downsample(const Image& img, int factor) {
    if (factor <= 0)
        throw ShapeError("box_downsample: factor must be positive");
    if (img.width % factor != 0 || img.height % factor != 0)
        throw ShapeError("box_downsample: image dims not divisible by factor");

    Image out(img.width / factor, img.height / factor);
    const double inv = 1.0 / (static_cast<double>(factor) * factor);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            double acc = 0.0;
            for (int dy = 0; dy < factor; ++dy)
                for (int dx = 0; dx < factor; ++dx)
                    acc += img.at(y * factor + dy, x * factor + dx);
            out.at(y, x) = static_cast<float>(acc * inv);
        }
    }
    return out;
}

Image downsample2(const Image& img) {
    const int ow = (img.width + 1) / 2;
    const int oh = (img.height + 1) / 2;
    Image out(ow, oh);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            int x0 = 2 * x, y0 = 2 * y;
            int x1 = std::min(x0 + 1, img.width - 1);
            int y1 = std::min(y0 + 1, img.height - 1);
            out.at(y, x) = static_cast<float>(
                0.25 * (static_cast<double>(img.at(y0, x0)) + img.at(y0, x1) +
                        img.at(y1, x0) + img.at(y1, x1)));
        }
    }
    return out;
}

Image resize_bilinear(const Image& img, int out_w, int out_h) {
    if (out_w <= 0 || out_h <= 0)
        throw ShapeError("resize_bilinear: output dims must be positive");
    Image out(out_w, out_h);
    const double sx = out_w > 1 ? static_cast<double>(img.width - 1) / (out_w - 1) : 0.0;
    const double sy = out_h > 1 ? static_cast<double>(img.height - 1) / (out_h - 1) : 0.0;
    for (int y = 0; y < out_h; ++y)
        for (int x = 0; x < out_w; ++x)
            out.at(y, x) = static_cast<float>(bilinear_at(img, x * sx, y * sy));
    return out;
}

double bilinear_at(const Image& img, double x, double y) {
    x = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
    y = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const int x1 = std::min(x0 + 1, img.width - 1);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    return (1.0 - fy) * ((1.0 - fx) * img.at(y0, x0) + fx * img.at(y0, x1)) +
           fy * ((1.0 - fx) * img.at(y1, x0) + fx * img.at(y1, x1));
}

} // namespace evsr
