#include "evsr/events.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace evsr {

namespace {

const char* skip_ws(const char* p, const char* end) {
    while (p != end && (*p == ' ' || *p == '\t' || *p == '\r'))
        ++p;
    return p;
}

bool all_ws(const char* p, const char* end) {
    return skip_ws(p, end) == end;
}

template <typename T>
const char* parse_number(const char* p, const char* end, T& out) {
    auto [next, ec] = std::from_chars(p, end, out);
    if (ec != std::errc())
        return nullptr;
    return next;
}

} // namespace

EventStream::EventStream(int width, int height, std::vector<Event> events)
    : width_(width), height_(height), events_(std::move(events)) {
    if (width_ <= 0 || height_ <= 0)
        throw Error("EventStream: sensor dimensions must be positive");
    double prev_t = 0.0;
    for (std::size_t i = 0; i < events_.size(); ++i) {
        const Event& e = events_[i];
        if (!std::isfinite(e.t) || e.t < 0.0)
            throw Error("EventStream: event " + std::to_string(i) + " has invalid timestamp");
        if (i > 0 && e.t < prev_t)
            throw Error("EventStream: event " + std::to_string(i) + " breaks time ordering");
        if (e.x < 0 || e.x >= width_ || e.y < 0 || e.y >= height_)
            throw Error("EventStream: event " + std::to_string(i) + " is outside the sensor");
        if (e.polarity != 1 && e.polarity != -1)
            throw Error("EventStream: event " + std::to_string(i) + " has polarity outside {-1,+1}");
        prev_t = e.t;
    }
}

EventSlice slice_by_count(const EventStream& stream, std::size_t first, std::size_t count) {
    if (first > stream.size() || count > stream.size() - first)
        throw ShortStreamError(
            "slice_by_count: window [" + std::to_string(first) + ", " +
                std::to_string(first + count) + ") exceeds stream of " +
                std::to_string(stream.size()) + " events",
            stream.size() - std::min(first, stream.size()));
    return EventSlice{&stream, first, count};
}

EventStream parse_event_text(std::istream& in, int width, int height) {
    std::vector<Event> events;
    std::string line;
    std::size_t lineno = 0;
    double prev_t = 0.0;
    while (std::getline(in, line)) {
        ++lineno;
        const char* p = line.data();
        const char* end = line.data() + line.size();
        p = skip_ws(p, end);
        if (p == end)
            continue; // blank line

        Event e;
        int pol = 0;
        p = parse_number(p, end, e.t);
        if (!p) throw ParseError("cannot parse timestamp", lineno);
        p = skip_ws(p, end);
        p = parse_number(p, end, e.x);
        if (!p) throw ParseError("cannot parse x coordinate", lineno);
        p = skip_ws(p, end);
        p = parse_number(p, end, e.y);
        if (!p) throw ParseError("cannot parse y coordinate", lineno);
        p = skip_ws(p, end);
        p = parse_number(p, end, pol);
        if (!p) throw ParseError("cannot parse polarity", lineno);
        if (!all_ws(p, end))
            throw ParseError("trailing characters after polarity", lineno);

        if (!std::isfinite(e.t) || e.t < 0.0)
            throw ParseError("timestamp must be a finite non-negative number", lineno);
        if (!events.empty() && e.t < prev_t)
            throw ParseError("timestamp decreases", lineno);
        if (e.x < 0 || e.x >= width || e.y < 0 || e.y >= height)
            throw ParseError("coordinates outside " + std::to_string(width) + "x" +
                                 std::to_string(height) + " sensor",
                             lineno);
        if (pol != 0 && pol != 1)
            throw ParseError("polarity must be 0 or 1", lineno);
        e.polarity = pol == 1 ? 1 : -1;
        prev_t = e.t;
        events.push_back(e);
    }
    return EventStream(width, height, std::move(events));
}

EventStream read_event_file(const std::filesystem::path& path, int width, int height) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path.string());
    return parse_event_text(in, width, height);
}

void serialize_event_text(const EventStream& stream, std::ostream& out) {
    char buf[64];
    for (const Event& e : stream.events()) {
        int n = std::snprintf(buf, sizeof buf, "%.9f %d %d %d\n", e.t, e.x, e.y,
                              e.polarity > 0 ? 1 : 0);
        out.write(buf, n);
    }
}

void write_event_file(const EventStream& stream, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write " + path.string());
    serialize_event_text(stream, out);
    if (!out)
        throw IoError("short write to " + path.string());
}

} // namespace evsr
