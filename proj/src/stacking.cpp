#include "evsr/stacking.hpp"

#include <algorithm>

namespace evsr {

EventStack build_stack(const EventStream& stream, std::size_t start, const StackConfig& config) {
    if (config.events_per_channel <= 0 || config.channels <= 0)
        throw Error("build_stack: events_per_channel and channels must be positive");
    if (config.override_cap <= 0)
        throw Error("build_stack: override_cap must be positive");

    const std::size_t m = static_cast<std::size_t>(config.events_per_stack());
    if (start > stream.size() || stream.size() - start < m)
        throw ShortStreamError("build_stack: need " + std::to_string(m) + " events at index " +
                                   std::to_string(start) + " but only " +
                                   std::to_string(stream.size() - std::min(start, stream.size())) +
                                   " remain",
                               stream.size() - std::min(start, stream.size()));

    EventStack stack;
    stack.width = stream.width();
    stack.height = stream.height();
    stack.channels = config.channels;
    stack.normalize = config.normalize;
    stack.raw.assign(static_cast<std::size_t>(config.channels) * stack.height * stack.width, 128);
    stack.first_index = start;
    stack.last_index = start + m - 1;
    stack.t_start = stream[start].t;
    stack.t_end = stream[stack.last_index].t;

    std::vector<int> writes(static_cast<std::size_t>(stack.height) * stack.width);
    for (int c = 0; c < config.channels; ++c) {
        std::fill(writes.begin(), writes.end(), 0);
        const std::size_t c_begin = start + static_cast<std::size_t>(c) * config.events_per_channel;
        for (int i = 0; i < config.events_per_channel; ++i) {
            const Event& e = stream[c_begin + i];
            stack.at(c, e.y, e.x) = e.polarity > 0 ? 255 : 0;
            int& n = writes[static_cast<std::size_t>(e.y) * stack.width + e.x];
            if (++n > config.override_cap)
                break; // this channel is saturated; drop its remaining events
        }
    }
    return stack;
}

StackSequence build_sequence(const EventStream& stream, double anchor_time,
                             const StackConfig& config, int sequence_length, int overlap) {
    if (sequence_length < 3 || sequence_length % 2 == 0)
        throw Error("build_sequence: sequence_length must be odd and >= 3");
    const long m = config.events_per_stack();
    if (overlap < 0 || overlap >= m)
        throw Error("build_sequence: overlap must be in [0, events_per_stack)");
    if (stream.empty())
        throw ShortStreamError("build_sequence: empty stream", 0);
    if (anchor_time < stream.t_first() || anchor_time > stream.t_last())
        throw Error("build_sequence: anchor time outside stream range");

    // First event at or after the anchor; all earlier events are strictly
    // before it, so centering the window by count brackets the anchor in time.
    const auto evs = stream.events();
    auto it = std::lower_bound(evs.begin(), evs.end(), anchor_time,
                               [](const Event& e, double t) { return e.t < t; });
    const long anchor_idx = it - evs.begin();

    const long stride = m - overlap;
    const long central_start = anchor_idx - m / 2;
    const long first_start = central_start - (sequence_length / 2) * stride;
    const long last_end = central_start + (sequence_length / 2) * stride + m;
    if (first_start < 0 || last_end > static_cast<long>(stream.size()))
        throw ShortStreamError(
            "build_sequence: needs events [" + std::to_string(first_start) + ", " +
                std::to_string(last_end) + ") around the anchor but the stream has " +
                std::to_string(stream.size()),
            stream.size());

    StackSequence seq;
    seq.central_index = sequence_length / 2;
    seq.overlap = overlap;
    seq.stacks.reserve(sequence_length);
    for (int i = 0; i < sequence_length; ++i)
        seq.stacks.push_back(
            build_stack(stream, static_cast<std::size_t>(first_start + i * stride), config));
    return seq;
}

Image stack_to_gray(const EventStack& stack) {
    Image out(stack.width, stack.height);
    const double inv = 1.0 / (255.0 * stack.channels);
    for (int y = 0; y < stack.height; ++y) {
        for (int x = 0; x < stack.width; ++x) {
            double acc = 0.0;
            for (int c = 0; c < stack.channels; ++c)
                acc += stack.at(c, y, x);
            out.at(y, x) = static_cast<float>(acc * inv);
        }
    }
    return out;
}

} // namespace evsr
