#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <vector>

#include <json.hpp>

#include "evsr/common.hpp"
#include "evsr/image.hpp"
#include "evsr/simulator.hpp"
#include "support/naive_events.hpp"

using namespace evsr;
namespace fs = std::filesystem;

namespace {

Image noise_texture(std::mt19937_64& rng, int w, int h) {
    return procedural_texture(rng, w, h);
}

Trajectory static_traj(double t1, const Pose& pose = {}) {
    Trajectory t;
    t.times = {0.0, t1};
    t.poses = {pose, pose};
    return t;
}

std::map<std::string, std::vector<char>> read_tree(const fs::path& root) {
    std::map<std::string, std::vector<char>> files;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        std::ifstream is(entry.path(), std::ios::binary);
        files[fs::relative(entry.path(), root).string()] =
            std::vector<char>((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    }
    return files;
}

} // namespace

TEST_CASE("identity pose reproduces the texture exactly") {
    std::mt19937_64 rng(21);
    const Image tex = noise_texture(rng, 31, 31);
    const Image frame = render_frame(tex, Pose{}, Intrinsics{31, 31, 55.0});
    REQUIRE(frame.width == 31);
    REQUIRE(frame.height == 31);
    for (std::size_t i = 0; i < tex.size(); ++i) CHECK(frame.px[i] == tex.px[i]);
}

TEST_CASE("pure x-translation shifts the sampled texture") {
    std::mt19937_64 rng(22);
    const Image tex = noise_texture(rng, 30, 20);
    Pose pose;
    pose.tx = 2.0;
    const Image frame = render_frame(tex, pose, Intrinsics{30, 20, 70.0});
    for (int v = 0; v < 20; ++v) {
        for (int u = 0; u < 28; ++u) CHECK(frame.at(v, u) == tex.at(v, u + 2));
        // sample positions past the texture edge fall back to mid-gray
        CHECK(frame.at(v, 28) == 0.5f);
        CHECK(frame.at(v, 29) == 0.5f);
    }
}

TEST_CASE("90 degree roll maps rows to columns") {
    std::mt19937_64 rng(23);
    const int n = 41; // odd: integer center
    const Image tex = noise_texture(rng, n, n);
    Pose pose;
    pose.rz = M_PI / 2.0;
    const Image frame = render_frame(tex, pose, Intrinsics{n, n, 48.0});
    const int c = (n - 1) / 2;
    // ray for pixel (u, v) lands at texture (x, y) = (2c - v, u)
    CHECK(frame.at(c, c) == doctest::Approx(tex.at(c, c)).epsilon(1e-9));
    CHECK(frame.at(1, 1) == doctest::Approx(tex.at(1, n - 2)).epsilon(1e-9));
    CHECK(frame.at(2, 5) == doctest::Approx(tex.at(5, n - 3)).epsilon(1e-9));
    CHECK(frame.at(n - 2, 3) == doctest::Approx(tex.at(3, 1)).epsilon(1e-9));
}

TEST_CASE("camera on the plane is rejected") {
    std::mt19937_64 rng(24);
    const Image tex = noise_texture(rng, 16, 16);
    Pose pose;
    pose.tz = 50.0; // cancels the rest offset exactly
    CHECK_THROWS_AS(render_frame(tex, pose, Intrinsics{16, 16, 50.0}), Error);
}

TEST_CASE("trajectory interpolation and validation") {
    Trajectory t;
    t.times = {0.0, 1.0, 3.0};
    Pose a, b, c;
    a.tx = 0.0;
    b.tx = 2.0;
    b.ry = 0.4;
    c.tx = 6.0;
    t.poses = {a, b, c};
    CHECK(t.at(-1.0).tx == 0.0);
    CHECK(t.at(0.5).tx == doctest::Approx(1.0));
    CHECK(t.at(0.5).ry == doctest::Approx(0.2));
    CHECK(t.at(2.0).tx == doctest::Approx(4.0));
    CHECK(t.at(9.0).tx == 6.0);

    Trajectory bad;
    bad.times = {0.0, 0.0};
    bad.poses = {a, b};
    CHECK_THROWS_AS(bad.validate(), Error);
    CHECK_THROWS_AS(Trajectory{}.validate(), Error);
}

TEST_CASE("static scene emits no events") {
    std::mt19937_64 rng(25);
    const Image tex = noise_texture(rng, 64, 64);
    const CameraPair cams{16, 16, 2, 30.0};
    const SimulatedSequence seq =
        generate_events(tex, static_traj(0.1), cams, ThresholdModel{0.2, 0.2}, 100.0, 0.0, 0.1, {0.05});
    CHECK(seq.events.size() == 0);
    REQUIRE(seq.gt_frames.size() == 1);
    CHECK(seq.gt_frames[0].width == 32);
    CHECK(seq.lr_frames[0].width == 16);
}

TEST_CASE("linear ramp crossing emitter") {
    SUBCASE("rise of exactly 3 thresholds gives 3 events at thirds") {
        std::vector<Event> out;
        double ref = 1.0;
        const double theta = 0.2;
        emit_crossings(2.0, 0.3, 1.0, 1.0 + 3 * theta, ref, theta, theta, 4, 7, out);
        REQUIRE(out.size() == 3);
        CHECK(std::abs(out[0].t - (2.0 + 0.3 / 3)) < 1e-9);
        CHECK(std::abs(out[1].t - (2.0 + 0.6 / 3)) < 1e-9);
        CHECK(std::abs(out[2].t - 2.3) < 1e-9);
        for (const Event& e : out) {
            CHECK(e.polarity == 1);
            CHECK(e.x == 4);
            CHECK(e.y == 7);
        }
        CHECK(ref == doctest::Approx(1.6).epsilon(1e-12));
    }
    SUBCASE("negated ramp flips polarity, keeps timestamps") {
        const double theta = 0.17;
        std::vector<Event> up, down;
        double ref_up = 0.5, ref_down = -0.5;
        emit_crossings(1.0, 0.5, 0.5, 0.5 + 2.6 * theta, ref_up, theta, theta, 0, 0, up);
        emit_crossings(1.0, 0.5, -0.5, -0.5 - 2.6 * theta, ref_down, theta, theta, 0, 0, down);
        REQUIRE(up.size() == down.size());
        REQUIRE(up.size() == 2);
        for (std::size_t i = 0; i < up.size(); ++i) {
            CHECK(std::abs(up[i].t - down[i].t) < 1e-9);
            CHECK(up[i].polarity == 1);
            CHECK(down[i].polarity == -1);
        }
    }
    SUBCASE("sub-threshold change emits nothing") {
        std::vector<Event> out;
        double ref = 0.0;
        emit_crossings(0.0, 1.0, 0.0, 0.09, ref, 0.1, 0.1, 0, 0, out);
        CHECK(out.empty());
        CHECK(ref == 0.0);
    }
}

TEST_CASE("event counts match the floor-arithmetic oracle") {
    // incommensurate sine product: strong gradients everywhere in the window
    Image tex(128, 128);
    for (int y = 0; y < 128; ++y)
        for (int x = 0; x < 128; ++x)
            tex.at(y, x) = static_cast<float>(
                0.5 + 0.35 * std::sin(2.0 * M_PI * x / 7.3) * std::sin(2.0 * M_PI * y / 9.1));
    const CameraPair cams{24, 24, 2, 40.0};
    const ThresholdModel thresholds{0.08, 0.1};
    const double fs = 200.0, t1 = 0.2;

    Trajectory traj;
    traj.times = {0.0, 0.1, 0.2};
    Pose p0, p1, p2;
    p1.tx = 6.0;
    p1.ty = -4.0;
    p2.tx = 10.0;
    p2.ty = 3.0;
    p2.rz = 0.03;
    traj.poses = {p0, p1, p2};

    const SimulatedSequence seq =
        generate_events(tex, traj, cams, thresholds, fs, 0.0, t1, {});
    REQUIRE(seq.events.size() > 500);

    // independent sampling of the same grid: t_k = k / fs, last clamped to t1
    const int segments = static_cast<int>(std::lround(t1 * fs));
    std::vector<std::vector<double>> logs(24 * 24);
    for (int k = 0; k <= segments; ++k) {
        const double t = std::min(static_cast<double>(k) / fs, t1);
        const Image frame = render_frame(tex, traj.at(t), cams.lr());
        for (std::size_t i = 0; i < frame.size(); ++i)
            logs[i].push_back(std::log(static_cast<double>(frame.px[i]) + 1e-3));
    }

    std::vector<long> got_pos(24 * 24, 0), got_neg(24 * 24, 0);
    for (std::size_t i = 0; i < seq.events.size(); ++i) {
        const Event& e = seq.events[i];
        const std::size_t p = static_cast<std::size_t>(e.y) * 24 + e.x;
        (e.polarity > 0 ? got_pos : got_neg)[p]++;
    }

    long total_got = 0, total_ref = 0, mismatched = 0;
    for (std::size_t i = 0; i < logs.size(); ++i) {
        const refimpl::CrossingCounts ref =
            refimpl::naive_crossing_counts(logs[i], thresholds.theta_pos, thresholds.theta_neg);
        CHECK(std::abs(got_pos[i] - ref.positive) <= segments);
        CHECK(std::abs(got_neg[i] - ref.negative) <= segments);
        if (got_pos[i] != ref.positive || got_neg[i] != ref.negative) ++mismatched;
        total_got += got_pos[i] + got_neg[i];
        total_ref += ref.total();
    }
    // the two integrators agree except at razor-edge exact multiples
    CHECK(mismatched <= static_cast<long>(logs.size() / 100 + 1));
    CHECK(std::abs(total_got - total_ref) <= static_cast<long>(logs.size() / 100 + 1));
}

TEST_CASE("monotone brightening emits only positive events") {
    const int tw = 64;
    Image ramp(tw, tw);
    for (int y = 0; y < tw; ++y)
        for (int x = 0; x < tw; ++x)
            ramp.at(y, x) = 0.1f + 0.8f * static_cast<float>(x) / (tw - 1);

    Trajectory traj;
    traj.times = {0.0, 0.5};
    Pose end;
    end.tx = 8.0; // slides toward brighter texture columns at every pixel
    traj.poses = {Pose{}, end};

    const CameraPair cams{32, 32, 2, 50.0};
    const SimulatedSequence seq =
        generate_events(ramp, traj, cams, ThresholdModel{0.05, 0.05}, 100.0, 0.0, 0.5, {});
    REQUIRE(seq.events.size() > 100);
    for (std::size_t i = 0; i < seq.events.size(); ++i) CHECK(seq.events[i].polarity == 1);
}

TEST_CASE("LR render matches the box-downsampled HR render") {
    std::mt19937_64 rng(27);
    const Image tex = noise_texture(rng, 256, 256);
    const CameraPair cams{32, 32, 2, 40.0};
    Pose pose;
    pose.tx = 1.3;
    pose.ty = -0.7;
    pose.rz = 0.02;
    const Image lr = render_frame(tex, pose, cams.lr());
    const Image hr = render_frame(tex, pose, cams.hr());
    const Image down = box_downsample(hr, 2);
    double acc = 0.0;
    for (std::size_t i = 0; i < lr.size(); ++i)
        acc += std::abs(static_cast<double>(lr.px[i]) - down.px[i]);
    CHECK(acc / lr.size() < 2.0 / 255.0);
}

TEST_CASE("generate_events input validation") {
    std::mt19937_64 rng(28);
    const Image tex = noise_texture(rng, 32, 32);
    const CameraPair cams{16, 16, 2, 30.0};
    CHECK_THROWS_AS(
        generate_events(tex, static_traj(0.1), cams, ThresholdModel{0.2, 0.2}, 0.0, 0.0, 0.1, {}),
        Error);
    CHECK_THROWS_AS(
        generate_events(tex, Trajectory{}, cams, ThresholdModel{0.2, 0.2}, 100.0, 0.0, 0.1, {}),
        Error);
    CHECK_THROWS_AS(
        generate_events(tex, static_traj(0.1), cams, ThresholdModel{0.0, 0.2}, 100.0, 0.0, 0.1, {}),
        Error);
}

TEST_CASE("dataset generation is reproducible and well-formed") {
    SimConfig cfg;
    cfg.sequences = 2;
    cfg.lr_width = 24;
    cfg.lr_height = 24;
    cfg.scale = 2;
    cfg.focal_lr = 40.0;
    cfg.fs = 400.0;
    cfg.duration = 0.25;
    cfg.gt_count = 3;
    cfg.theta_min = 0.1;
    cfg.theta_max = 0.5;
    cfg.amp_translate = 4.0;
    cfg.amp_z = 1.0;
    cfg.amp_rot = 0.03;
    cfg.seed = 99;

    const fs::path base = fs::temp_directory_path() / "evsr_sim_test";
    fs::remove_all(base);
    cfg.out_dir = (base / "a").string();
    generate_dataset(cfg);
    cfg.out_dir = (base / "b").string();
    generate_dataset(cfg);

    SUBCASE("byte-identical across runs with the same seed") {
        const auto ta = read_tree(base / "a");
        const auto tb = read_tree(base / "b");
        REQUIRE(ta.size() == tb.size());
        for (const auto& [name, bytes] : ta) {
            REQUIRE(tb.count(name) == 1);
            CHECK(bytes == tb.at(name));
        }
    }
    SUBCASE("structure and metadata") {
        REQUIRE(fs::is_regular_file(base / "a" / "dataset.json"));
        std::ifstream ms(base / "a" / "dataset.json");
        const nlohmann::json manifest = nlohmann::json::parse(ms);
        CHECK(manifest["sequences"] == 2);
        REQUIRE(manifest["dirs"].size() == 2);
        for (const auto& dir : manifest["dirs"]) {
            const fs::path sd = base / "a" / dir.get<std::string>();
            REQUIRE(fs::is_regular_file(sd / "events.txt"));
            REQUIRE(fs::is_regular_file(sd / "events.json"));
            REQUIRE(fs::is_regular_file(sd / "seq.json"));
            REQUIRE(fs::is_regular_file(sd / "gt_0000.pgm"));
            REQUIRE(fs::is_regular_file(sd / "lr_0002.pgm"));

            std::ifstream ss(sd / "seq.json");
            const nlohmann::json meta = nlohmann::json::parse(ss);
            const double tp = meta["theta_pos"].get<double>();
            const double tn = meta["theta_neg"].get<double>();
            CHECK(tp >= 0.1);
            CHECK(tp <= 0.5);
            CHECK(tn >= 0.1);
            CHECK(tn <= 0.5);

            std::ifstream es(sd / "events.json");
            const nlohmann::json geom = nlohmann::json::parse(es);
            const EventStream stream =
                read_event_file(sd / "events.txt", geom["width"], geom["height"]);
            CHECK(stream.size() > 0);

            const Image gt = read_image(sd / "gt_0000.pgm");
            CHECK(gt.width == 48);
            CHECK(gt.height == 48);
            const Image lr = read_image(sd / "lr_0000.pgm");
            CHECK(lr.width == 24);
        }
    }
    fs::remove_all(base);
}
