#pragma once

#include <cstdint>
#include <vector>

#include "evsr/events.hpp"
#include "evsr/image.hpp"
#include "evsr/tensor.hpp"

namespace evsr {

// Stacking-by-number parameters. A stack consumes events_per_stack()
// consecutive events, events_per_channel per channel in arrival order.
struct StackConfig {
    int events_per_channel = 200; // events filled into each channel
    int channels = 3;
    int override_cap = 50; // per-pixel overwrite budget within one channel

    // How to_network_input maps the 8-bit raster to network range:
    //   raw8:        v / 255            -> {0, ~0.502, 1}
    //   signed_unit: (v - 128) / 128    -> {-1, 0, 127/128}
    enum class Normalize { raw8, signed_unit };
    Normalize normalize = Normalize::signed_unit;

    int events_per_stack() const { return events_per_channel * channels; }
};

// One stacked representation. Channel-major (c, h, w) raster of 8-bit values:
// 128 where no event landed, 255 for the last positive event, 0 for the last
// negative one. The index window [first_index, last_index] and the matching
// time window are kept for sequence bookkeeping.
struct EventStack {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> raw; // channels * height * width
    double t_start = 0.0;
    double t_end = 0.0;
    std::size_t first_index = 0;
    std::size_t last_index = 0;
    StackConfig::Normalize normalize = StackConfig::Normalize::signed_unit;

    std::uint8_t& at(int c, int y, int x) {
        return raw[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    std::uint8_t at(int c, int y, int x) const {
        return raw[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
};

// Fills one stack from `config.events_per_stack()` events starting at
// `start`. Each channel takes the next events_per_channel events in order and
// overwrites its raster per event polarity. Once a single pixel of a channel
// has been written more than override_cap times, the rest of that channel's
// events are dropped (the window still advances by the full event count, so
// stack boundaries stay deterministic). Throws ShortStreamError when fewer
// than events_per_stack() events remain.
EventStack build_stack(const EventStream& stream, std::size_t start, const StackConfig& config);

// Odd-length run of stacks around a time anchor. Consecutive stacks start
// overlap events closer than a disjoint tiling would, i.e. stack i+1 begins
// events_per_stack() - overlap events after stack i.
struct StackSequence {
    std::vector<EventStack> stacks;
    int central_index = 0;
    int overlap = 0;
};

// Builds `sequence_length` stacks (odd, >= 3) such that the central stack's
// [t_start, t_end] window contains anchor_time, with the anchor's event
// position centered in the window by count. Throws Error when the anchor is
// outside the stream's time range and ShortStreamError when the stream lacks
// context on either side.
StackSequence build_sequence(const EventStream& stream, double anchor_time,
                             const StackConfig& config, int sequence_length, int overlap);

// Lifts the raster into a (1, c, h, w) tensor using the stack's normalize
// mode. In signed_unit mode 0 -> -1, 128 -> 0, 255 -> 127/128 exactly.
template <typename T>
Tensor<T> to_network_input(const EventStack& stack) {
    Tensor<T> out = Tensor<T>::zeros(Shape{1, stack.channels, stack.height, stack.width});
    for (std::size_t i = 0; i < stack.raw.size(); ++i) {
        if (stack.normalize == StackConfig::Normalize::signed_unit)
            out.data[i] = static_cast<T>((static_cast<int>(stack.raw[i]) - 128) / T(128));
        else
            out.data[i] = static_cast<T>(stack.raw[i] / T(255));
    }
    return out;
}

// Channel mean of the raw raster scaled to [0, 1]; flow estimation runs on
// this single-channel view.
Image stack_to_gray(const EventStack& stack);

} // namespace evsr
