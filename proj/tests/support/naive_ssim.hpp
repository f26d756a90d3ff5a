#pragma once

// Direct sliding-window SSIM used as an oracle: per-window nested loops with
// explicitly materialized 2-D Gaussian weights, no separable shortcuts.

#include <cmath>
#include <vector>

#include "evsr/image.hpp"

namespace refimpl {

inline double naive_ssim(const evsr::Image& a, const evsr::Image& b) {
    constexpr int win = 11;
    constexpr double sigma = 1.5;
    double w2d[win][win];
    double total = 0.0;
    for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
            const double di = i - 5, dj = j - 5;
            w2d[i][j] = std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
            total += w2d[i][j];
        }
    for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) w2d[i][j] /= total;

    const double c1 = 0.01 * 0.01;
    const double c2 = 0.03 * 0.03;
    double acc = 0.0;
    int count = 0;
    for (int y0 = 0; y0 + win <= a.height; ++y0) {
        for (int x0 = 0; x0 + win <= a.width; ++x0) {
            double mx = 0, my = 0;
            for (int i = 0; i < win; ++i)
                for (int j = 0; j < win; ++j) {
                    mx += w2d[i][j] * a.at(y0 + i, x0 + j);
                    my += w2d[i][j] * b.at(y0 + i, x0 + j);
                }
            double vx = 0, vy = 0, cxy = 0;
            for (int i = 0; i < win; ++i)
                for (int j = 0; j < win; ++j) {
                    const double dx = a.at(y0 + i, x0 + j) - mx;
                    const double dy = b.at(y0 + i, x0 + j) - my;
                    vx += w2d[i][j] * dx * dx;
                    vy += w2d[i][j] * dy * dy;
                    cxy += w2d[i][j] * dx * dy;
                }
            acc += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) /
                   ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++count;
        }
    }
    return acc / count;
}

} // namespace refimpl
