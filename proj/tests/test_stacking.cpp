#include <doctest.h>

#include <random>

#include "evsr/stacking.hpp"
#include "support/naive_stacking.hpp"

using namespace evsr;

namespace {

EventStream random_stream(std::mt19937_64& rng, int w, int h, int n, bool hot_pixel = false) {
    std::uniform_real_distribution<double> dt(0.0, 1e-3);
    std::uniform_int_distribution<int> dx(0, w - 1), dy(0, h - 1), dp(0, 1);
    // A hot pixel concentrates a burst of traffic so the override cap triggers.
    std::uniform_int_distribution<int> hot(0, 3);
    std::vector<Event> evs;
    double t = 0.0;
    for (int i = 0; i < n; ++i) {
        t += dt(rng);
        Event e{t, dx(rng), dy(rng), dp(rng) ? 1 : -1};
        if (hot_pixel && hot(rng) == 0) {
            e.x = w / 2;
            e.y = h / 2;
        }
        evs.push_back(e);
    }
    return EventStream(w, h, std::move(evs));
}

} // namespace

TEST_CASE("stacks match the straight-line reference on randomized streams") {
    std::mt19937_64 rng(1234);
    for (int trial = 0; trial < 200; ++trial) {
        const int w = 4 + static_cast<int>(rng() % 13);
        const int h = 4 + static_cast<int>(rng() % 13);
        StackConfig cfg;
        cfg.events_per_channel = 5 + static_cast<int>(rng() % 60);
        cfg.channels = 1 + static_cast<int>(rng() % 4);
        cfg.override_cap = 1 + static_cast<int>(rng() % 8); // small so it actually fires
        const int m = cfg.events_per_stack();
        const int n = m + static_cast<int>(rng() % 50);
        EventStream s = random_stream(rng, w, h, n, trial % 2 == 0);
        const std::size_t start = rng() % (n - m + 1);

        EventStack stack = build_stack(s, start, cfg);
        auto ref = refimpl::naive_stack(s.events(), start, w, h, cfg.events_per_channel,
                                        cfg.channels, cfg.override_cap);

        REQUIRE(stack.raw == ref.raster);
        CHECK(stack.t_start == ref.t_start);
        CHECK(stack.t_end == ref.t_end);
        CHECK(stack.first_index == start);
        CHECK(stack.last_index == start + m - 1);
    }
}

TEST_CASE("building the same stack twice gives identical bytes") {
    std::mt19937_64 rng(5);
    EventStream s = random_stream(rng, 10, 10, 400);
    StackConfig cfg;
    cfg.events_per_channel = 100;
    EventStack a = build_stack(s, 17, cfg);
    EventStack b = build_stack(s, 17, cfg);
    CHECK(a.raw == b.raw);
}

TEST_CASE("untouched pixels stay at 128, events overwrite to 255/0") {
    std::vector<Event> evs;
    evs.push_back(Event{0.0, 1, 1, 1});
    evs.push_back(Event{0.1, 2, 2, -1});
    evs.push_back(Event{0.2, 1, 1, -1}); // later event wins the pixel
    EventStream s(4, 4, std::move(evs));
    StackConfig cfg;
    cfg.events_per_channel = 3;
    cfg.channels = 1;
    EventStack stack = build_stack(s, 0, cfg);
    CHECK(stack.at(0, 1, 1) == 0);
    CHECK(stack.at(0, 2, 2) == 0);
    CHECK(stack.at(0, 0, 0) == 128);
    CHECK(stack.at(0, 3, 3) == 128);
}

TEST_CASE("override cap halts one channel after the write that exceeds it") {
    // 52 alternating events on one pixel, then traffic elsewhere in the same
    // channel; a second channel follows. Cap 50: the 51st write lands (the
    // pixel keeps that event's polarity), everything after it in channel 0 is
    // dropped, channel 1 is unaffected.
    std::vector<Event> evs;
    double t = 0.0;
    for (int i = 0; i < 52; ++i)
        evs.push_back(Event{t += 1e-4, 3, 3, i % 2 == 0 ? 1 : -1});
    for (int i = 0; i < 8; ++i)
        evs.push_back(Event{t += 1e-4, 1, 1, 1});
    for (int i = 0; i < 60; ++i)
        evs.push_back(Event{t += 1e-4, 2, 2, -1});
    EventStream s(8, 8, std::move(evs));

    StackConfig cfg;
    cfg.events_per_channel = 60;
    cfg.channels = 2;
    cfg.override_cap = 50;
    EventStack stack = build_stack(s, 0, cfg);

    CHECK(stack.at(0, 3, 3) == 255); // 51st write is event index 50, positive
    CHECK(stack.at(0, 1, 1) == 128); // skipped after the halt
    CHECK(stack.at(1, 2, 2) == 0);   // next channel fills normally
}

TEST_CASE("short streams raise an error carrying the available count") {
    std::mt19937_64 rng(9);
    EventStream s = random_stream(rng, 8, 8, 100);
    StackConfig cfg; // needs 600
    try {
        build_stack(s, 10, cfg);
        FAIL("expected ShortStreamError");
    } catch (const ShortStreamError& e) {
        CHECK(e.available() == 90);
    }
}

TEST_CASE("sequences center the anchor and step by stack size minus overlap") {
    std::mt19937_64 rng(42);
    StackConfig cfg;
    cfg.events_per_channel = 10;
    cfg.channels = 3; // stack size 30
    const int m = cfg.events_per_stack();

    for (int trial = 0; trial < 50; ++trial) {
        EventStream s = random_stream(rng, 8, 8, 400);
        const int seq_len = trial % 2 == 0 ? 3 : 7;
        const int overlap = static_cast<int>(rng() % m);
        const double anchor = s[200].t;

        StackSequence seq = build_sequence(s, anchor, cfg, seq_len, overlap);
        REQUIRE(static_cast<int>(seq.stacks.size()) == seq_len);
        CHECK(seq.central_index == seq_len / 2);

        auto starts = refimpl::naive_sequence_starts(s.events(), anchor, m, seq_len, overlap);
        for (int i = 0; i < seq_len; ++i)
            CHECK(static_cast<long>(seq.stacks[i].first_index) == starts[i]);

        const EventStack& central = seq.stacks[seq.central_index];
        CHECK(central.t_start <= anchor);
        CHECK(central.t_end >= anchor);

        // index overlap between consecutive stacks is exactly `overlap`
        for (int i = 0; i + 1 < seq_len; ++i) {
            long shared = static_cast<long>(seq.stacks[i].last_index) + 1 -
                          static_cast<long>(seq.stacks[i + 1].first_index);
            CHECK(shared == overlap);
        }
    }
}

TEST_CASE("sequence errors") {
    std::mt19937_64 rng(77);
    EventStream s = random_stream(rng, 8, 8, 200);
    StackConfig cfg;
    cfg.events_per_channel = 10;
    cfg.channels = 3;

    SUBCASE("anchor outside the stream time range") {
        CHECK_THROWS_WITH_AS(build_sequence(s, s.t_last() + 1.0, cfg, 3, 0),
                             doctest::Contains("anchor"), Error);
    }
    SUBCASE("anchor at the first event lacks left context") {
        CHECK_THROWS_AS(build_sequence(s, s.t_first(), cfg, 3, 0), ShortStreamError);
    }
    SUBCASE("even or too-short sequence length") {
        CHECK_THROWS_AS(build_sequence(s, s[100].t, cfg, 4, 0), Error);
        CHECK_THROWS_AS(build_sequence(s, s[100].t, cfg, 1, 0), Error);
    }
    SUBCASE("overlap must stay below the stack size") {
        CHECK_THROWS_AS(build_sequence(s, s[100].t, cfg, 3, 30), Error);
        CHECK_THROWS_AS(build_sequence(s, s[100].t, cfg, 3, -1), Error);
    }
    SUBCASE("not enough events on the right") {
        CHECK_THROWS_AS(build_sequence(s, s[195].t, cfg, 3, 0), ShortStreamError);
    }
}

TEST_CASE("network input mapping is exact") {
    std::vector<Event> evs{Event{0.0, 0, 0, 1}, Event{0.1, 1, 0, -1}};
    EventStream s(2, 1, std::move(evs));
    StackConfig cfg;
    cfg.events_per_channel = 2;
    cfg.channels = 1;

    SUBCASE("signed_unit: 0 -> -1, 128 -> 0, 255 -> 127/128") {
        cfg.normalize = StackConfig::Normalize::signed_unit;
        EventStack stack = build_stack(s, 0, cfg);
        auto t = to_network_input<double>(stack);
        CHECK(t.shape == Shape{1, 1, 1, 2});
        CHECK(t.at(0, 0, 0, 0) == 127.0 / 128.0);
        CHECK(t.at(0, 0, 0, 1) == -1.0);
    }
    SUBCASE("raw8 maps through v/255") {
        cfg.normalize = StackConfig::Normalize::raw8;
        EventStack stack = build_stack(s, 0, cfg);
        auto t = to_network_input<double>(stack);
        CHECK(t.at(0, 0, 0, 0) == 1.0);
        CHECK(t.at(0, 0, 0, 1) == 0.0);
    }
    SUBCASE("untouched pixel maps to 0 in signed mode") {
        EventStream wide(4, 1, {Event{0.0, 0, 0, 1}, Event{0.1, 1, 0, -1}});
        EventStack stack = build_stack(wide, 0, cfg);
        auto t = to_network_input<double>(stack);
        CHECK(t.at(0, 0, 0, 2) == 0.0);
    }
}
