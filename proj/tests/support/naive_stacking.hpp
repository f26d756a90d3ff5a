#pragma once

// Straight-line reference for event stacking, kept independent of the library
// implementation on purpose: plain loops, separate bookkeeping, no shared
// helpers. Tests compare the two byte for byte.

#include <cstdint>
#include <span>
#include <vector>

#include "evsr/events.hpp"

namespace refimpl {

struct NaiveStackResult {
    std::vector<std::uint8_t> raster; // channel-major c*h*w
    double t_start = 0.0;
    double t_end = 0.0;
};

inline NaiveStackResult naive_stack(std::span<const evsr::Event> all, std::size_t start,
                                    int width, int height, int per_channel, int channels,
                                    int cap) {
    NaiveStackResult r;
    r.raster.assign(static_cast<std::size_t>(channels) * height * width, 128);
    const std::size_t total = static_cast<std::size_t>(per_channel) * channels;
    r.t_start = all[start].t;
    r.t_end = all[start + total - 1].t;

    for (int c = 0; c < channels; ++c) {
        std::vector<int> touched(static_cast<std::size_t>(height) * width, 0);
        bool halted = false;
        for (int i = 0; i < per_channel && !halted; ++i) {
            const evsr::Event& e = all[start + static_cast<std::size_t>(c) * per_channel + i];
            std::size_t px = static_cast<std::size_t>(e.y) * width + e.x;
            std::size_t cell = static_cast<std::size_t>(c) * height * width + px;
            r.raster[cell] = e.polarity > 0 ? 255 : 0;
            touched[px] += 1;
            if (touched[px] > cap)
                halted = true;
        }
    }
    return r;
}

// Expected stack start indices for an anchored sequence, recomputed from the
// stated index arithmetic: anchor event = first event with t >= anchor, the
// central window centers it by count, neighbors step by (stack size - overlap).
inline std::vector<long> naive_sequence_starts(std::span<const evsr::Event> all, double anchor,
                                               long stack_size, int seq_len, int overlap) {
    long anchor_idx = 0;
    while (anchor_idx < static_cast<long>(all.size()) && all[anchor_idx].t < anchor)
        ++anchor_idx;
    long central = anchor_idx - stack_size / 2;
    std::vector<long> starts;
    for (int i = 0; i < seq_len; ++i)
        starts.push_back(central + (i - seq_len / 2) * (stack_size - overlap));
    return starts;
}

} // namespace refimpl
