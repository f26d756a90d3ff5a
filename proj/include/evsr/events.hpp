#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "evsr/common.hpp"

namespace evsr {

// One sensor event. Polarity is +1 (brightness increase) or -1 (decrease);
// the on-disk encoding uses 1/0 instead. Timestamps are seconds.
struct Event {
    double t = 0.0;
    int x = 0;
    int y = 0;
    int polarity = 1;

    bool operator==(const Event&) const = default;
};

// Chronologically ordered event recording for one sensor. Immutable after
// construction; the constructor rejects unsorted, out-of-bounds or otherwise
// malformed data so that every reachable stream is valid.
class EventStream {
public:
    EventStream(int width, int height, std::vector<Event> events);

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return events_.size(); }
    bool empty() const { return events_.empty(); }
    const Event& operator[](std::size_t i) const { return events_[i]; }
    std::span<const Event> events() const { return events_; }

    double t_first() const { return events_.front().t; }
    double t_last() const { return events_.back().t; }

private:
    int width_;
    int height_;
    std::vector<Event> events_;
};

// Lightweight window into a stream: `count` events starting at index `first`.
struct EventSlice {
    const EventStream* stream = nullptr;
    std::size_t first = 0;
    std::size_t count = 0;

    std::span<const Event> events() const { return stream->events().subspan(first, count); }
    int width() const { return stream->width(); }
    int height() const { return stream->height(); }
};

// Contiguous window of `count` events starting at `first`. Concatenating
// adjacent slices reproduces the original stream.
EventSlice slice_by_count(const EventStream& stream, std::size_t first, std::size_t count);

// Parses the "t x y p" text format (one event per line, p in {0,1}, seconds
// as decimal fractions). Blank lines are ignored. Sensor bounds, polarity,
// non-negative and non-decreasing timestamps are enforced; violations raise
// ParseError with the offending line number.
EventStream parse_event_text(std::istream& in, int width, int height);
EventStream read_event_file(const std::filesystem::path& path, int width, int height);

// Writes the same text format with timestamps at fixed 9-decimal precision
// (1 ns resolution). parse(serialize(s)) equals s whenever timestamps sit on
// that grid; serialize is idempotent after one round trip regardless.
void serialize_event_text(const EventStream& stream, std::ostream& out);
void write_event_file(const EventStream& stream, const std::filesystem::path& path);

} // namespace evsr
