#include "evsr/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "evsr/common.hpp"

namespace evsr {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Mat3 {
    double m[3][3];
};

// Rodrigues: axis-angle (rx, ry, rz) to a rotation matrix.
Mat3 rotation_matrix(double rx, double ry, double rz) {
    const double theta = std::sqrt(rx * rx + ry * ry + rz * rz);
    Mat3 r{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    if (theta < 1e-12) return r;
    const double kx = rx / theta, ky = ry / theta, kz = rz / theta;
    const double c = std::cos(theta), s = std::sin(theta), v = 1.0 - c;
    r.m[0][0] = c + kx * kx * v;
    r.m[0][1] = kx * ky * v - kz * s;
    r.m[0][2] = kx * kz * v + ky * s;
    r.m[1][0] = ky * kx * v + kz * s;
    r.m[1][1] = c + ky * ky * v;
    r.m[1][2] = ky * kz * v - kx * s;
    r.m[2][0] = kz * kx * v - ky * s;
    r.m[2][1] = kz * ky * v + kx * s;
    r.m[2][2] = c + kz * kz * v;
    return r;
}

} // namespace

Pose Trajectory::at(double t) const {
    validate();
    if (t <= times.front()) return poses.front();
    if (t >= times.back()) return poses.back();
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const std::size_t i = static_cast<std::size_t>(it - times.begin()) - 1;
    const double u = (t - times[i]) / (times[i + 1] - times[i]);
    const Pose& a = poses[i];
    const Pose& b = poses[i + 1];
    const auto lerp = [u](double p, double q) { return p + u * (q - p); };
    return {lerp(a.tx, b.tx), lerp(a.ty, b.ty), lerp(a.tz, b.tz),
            lerp(a.rx, b.rx), lerp(a.ry, b.ry), lerp(a.rz, b.rz)};
}

void Trajectory::validate() const {
    if (times.empty() || poses.empty()) throw Error("trajectory is empty");
    if (times.size() != poses.size()) throw Error("trajectory times/poses size mismatch");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1])) throw Error("trajectory times must be strictly increasing");
}

Image render_frame(const Image& texture, const Pose& pose, const Intrinsics& intr) {
    if (texture.empty()) throw Error("render_frame: empty texture");
    const double tcx = 0.5 * (texture.width - 1);
    const double tcy = 0.5 * (texture.height - 1);
    const double rest = intr.plane_dist > 0.0 ? intr.plane_dist : intr.focal;
    const double cx = tcx + pose.tx;
    const double cy = tcy + pose.ty;
    const double cz = -rest + pose.tz;
    if (std::abs(cz) < 1e-9)
        throw Error("render_frame: degenerate pose, camera center lies on the texture plane");
    const Mat3 r = rotation_matrix(pose.rx, pose.ry, pose.rz);
    const double pu = 0.5 * (intr.width - 1);
    const double pv = 0.5 * (intr.height - 1);

    Image out(intr.width, intr.height);
    for (int v = 0; v < intr.height; ++v) {
        for (int u = 0; u < intr.width; ++u) {
            const double dcx = (u - pu) / intr.focal;
            const double dcy = (v - pv) / intr.focal;
            // camera-to-world rotated ray direction
            const double dx = r.m[0][0] * dcx + r.m[0][1] * dcy + r.m[0][2];
            const double dy = r.m[1][0] * dcx + r.m[1][1] * dcy + r.m[1][2];
            const double dz = r.m[2][0] * dcx + r.m[2][1] * dcy + r.m[2][2];
            float value = 0.5f;
            if (std::abs(dz) > 1e-12) {
                const double s = -cz / dz; // ray-plane intersection at Z = 0
                if (s > 0.0) {
                    const double x = cx + s * dx;
                    const double y = cy + s * dy;
                    if (x >= 0.0 && x <= texture.width - 1 && y >= 0.0 && y <= texture.height - 1)
                        value = static_cast<float>(bilinear_at(texture, x, y));
                }
            }
            out.at(v, u) = value;
        }
    }
    return out;
}

void emit_crossings(double t0, double dt, double l0, double l1, double& ref, double theta_pos,
                    double theta_neg, int x, int y, std::vector<Event>& out) {
    const double dl = l1 - l0;
    if (dl > 0.0) {
        while (l1 - ref >= theta_pos) {
            const double level = ref + theta_pos;
            out.push_back({t0 + dt * ((level - l0) / dl), x, y, +1});
            ref = level;
        }
    } else if (dl < 0.0) {
        while (ref - l1 >= theta_neg) {
            const double level = ref - theta_neg;
            out.push_back({t0 + dt * ((level - l0) / dl), x, y, -1});
            ref = level;
        }
    }
}

SimulatedSequence generate_events(const Image& texture, const Trajectory& traj,
                                  const CameraPair& cams, const ThresholdModel& thresholds,
                                  double fs, double t0, double t1,
                                  const std::vector<double>& gt_times) {
    if (fs <= 0.0) throw Error("generate_events: fs must be positive");
    traj.validate();
    if (!(thresholds.theta_pos > 0.0) || !(thresholds.theta_neg > 0.0))
        throw Error("generate_events: thresholds must be positive");
    if (!(t1 > t0)) throw Error("generate_events: need t1 > t0");

    const Intrinsics lr = cams.lr();
    const double dt = 1.0 / fs;
    constexpr double kLogEps = 1e-3;

    // sample instants: t0 + k/fs, with the final sample clamped to t1
    std::vector<double> samples;
    for (std::size_t k = 0;; ++k) {
        const double t = t0 + static_cast<double>(k) * dt;
        if (t >= t1 - 1e-12) {
            samples.push_back(t1);
            break;
        }
        samples.push_back(t);
    }

    const std::size_t npx = static_cast<std::size_t>(lr.width) * lr.height;
    std::vector<double> prev_log(npx), cur_log(npx), ref(npx);

    const auto log_frame = [&](double t, std::vector<double>& dst) {
        const Image frame = render_frame(texture, traj.at(t), lr);
        for (std::size_t i = 0; i < npx; ++i)
            dst[i] = std::log(static_cast<double>(frame.px[i]) + kLogEps);
    };

    log_frame(samples[0], prev_log);
    ref = prev_log;

    std::vector<Event> events;
    std::vector<Event> interval;
    for (std::size_t k = 1; k < samples.size(); ++k) {
        log_frame(samples[k], cur_log);
        const double step = samples[k] - samples[k - 1];
        interval.clear();
        for (int y = 0; y < lr.height; ++y)
            for (int x = 0; x < lr.width; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * lr.width + x;
                emit_crossings(samples[k - 1], step, prev_log[i], cur_log[i], ref[i],
                               thresholds.theta_pos, thresholds.theta_neg, x, y, interval);
            }
        std::stable_sort(interval.begin(), interval.end(),
                         [](const Event& a, const Event& b) { return a.t < b.t; });
        events.insert(events.end(), interval.begin(), interval.end());
        std::swap(prev_log, cur_log);
    }

    SimulatedSequence seq{EventStream(lr.width, lr.height, std::move(events)), gt_times, {}, {}};
    const Intrinsics hr = cams.hr();
    for (double t : gt_times) {
        const Pose pose = traj.at(t);
        seq.gt_frames.push_back(render_frame(texture, pose, hr));
        seq.lr_frames.push_back(render_frame(texture, pose, lr));
    }
    return seq;
}

Image procedural_texture(std::mt19937_64& rng, int w, int h) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Image acc(w, h, 0.0f);
    // value-noise octaves with feature sizes of ~16/8/4 pixels, independent of
    // texture dims, so any camera window sees usable gradients
    const int m = std::min(w, h);
    double amp = 1.0, amp_sum = 0.0;
    for (int cell : {16, 8, 4}) {
        const int grid = std::max(4, m / cell);
        Image coarse(grid, grid);
        for (auto& v : coarse.px) v = static_cast<float>(unit(rng));
        const Image up = resize_bilinear(coarse, w, h);
        for (std::size_t i = 0; i < acc.px.size(); ++i)
            acc.px[i] += static_cast<float>(amp * up.px[i]);
        amp_sum += amp;
        amp *= 0.5;
    }
    for (auto& v : acc.px) v = static_cast<float>(v / amp_sum);
    // soft disks add step-like structure for event generation
    const int shapes = 6 + static_cast<int>(rng() % 5);
    for (int s = 0; s < shapes; ++s) {
        const double cx = unit(rng) * (w - 1);
        const double cy = unit(rng) * (h - 1);
        const double radius = (0.05 + 0.10 * unit(rng)) * std::min(w, h);
        const double delta = (unit(rng) - 0.5) * 0.8;
        const double edge = 1.5; // soft edge width in pixels
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double d = std::hypot(x - cx, y - cy);
                if (d > radius + edge) continue;
                const double f = d < radius - edge ? 1.0 : 0.5 - 0.5 * (d - radius) / edge;
                acc.at(y, x) += static_cast<float>(delta * std::clamp(f, 0.0, 1.0));
            }
    }
    float lo = acc.px[0], hi = acc.px[0];
    for (float v : acc.px) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const float span = hi > lo ? hi - lo : 1.0f;
    for (auto& v : acc.px) v = 0.05f + 0.9f * (v - lo) / span;
    return acc;
}

namespace {

std::mt19937_64 sequence_rng(std::uint64_t master_seed, int index) {
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                      static_cast<std::uint32_t>(master_seed >> 32),
                      static_cast<std::uint32_t>(index)};
    return std::mt19937_64(seq);
}

json pose_json(const Pose& p) {
    return json{{"tx", p.tx}, {"ty", p.ty}, {"tz", p.tz},
                {"rx", p.rx}, {"ry", p.ry}, {"rz", p.rz}};
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os << j.dump(2) << "\n";
    if (!os) throw IoError("write failed: " + path.string());
}

} // namespace

void generate_dataset(const SimConfig& config) {
    if (config.sequences <= 0) throw Error("generate_dataset: sequences must be positive");
    if (config.theta_min <= 0.0 || config.theta_max < config.theta_min)
        throw Error("generate_dataset: bad threshold range");

    std::vector<fs::path> textures;
    if (!config.textures_dir.empty()) {
        if (!fs::is_directory(config.textures_dir))
            throw IoError("texture directory not found: " + config.textures_dir);
        for (const auto& entry : fs::directory_iterator(config.textures_dir)) {
            const std::string ext = entry.path().extension().string();
            if (ext == ".pgm" || ext == ".ppm") textures.push_back(entry.path());
        }
        if (textures.empty())
            throw IoError("no .pgm/.ppm textures in " + config.textures_dir);
        std::sort(textures.begin(), textures.end());
    }

    fs::create_directories(config.out_dir);
    const fs::path root(config.out_dir);

    json manifest;
    manifest["sequences"] = config.sequences;
    manifest["lr_width"] = config.lr_width;
    manifest["lr_height"] = config.lr_height;
    manifest["scale"] = config.scale;
    manifest["focal_lr"] = config.focal_lr;
    manifest["fs"] = config.fs;
    manifest["duration"] = config.duration;
    manifest["gt_count"] = config.gt_count;
    manifest["theta_range"] = {config.theta_min, config.theta_max};
    manifest["seed"] = config.seed;
    manifest["dirs"] = json::array();

    const CameraPair cams{config.lr_width, config.lr_height, config.scale, config.focal_lr};

    for (int i = 0; i < config.sequences; ++i) {
        std::mt19937_64 rng = sequence_rng(config.seed, i);
        std::uniform_real_distribution<double> unit(0.0, 1.0);

        char name[32];
        std::snprintf(name, sizeof(name), "seq_%04d", i);
        const fs::path dir = root / name;
        fs::create_directories(dir);

        // texture: file pick or procedural, sized with margin for motion
        std::string texture_name = "procedural";
        Image texture;
        if (!textures.empty()) {
            const std::size_t pick = static_cast<std::size_t>(rng() % textures.size());
            texture = read_image(textures[pick]);
            texture_name = textures[pick].filename().string();
        } else {
            const int tw = config.lr_width * config.scale * 2;
            const int th = config.lr_height * config.scale * 2;
            texture = procedural_texture(rng, tw, th);
        }

        const ThresholdModel thresholds{
            config.theta_min + (config.theta_max - config.theta_min) * unit(rng),
            config.theta_min + (config.theta_max - config.theta_min) * unit(rng)};

        Trajectory traj;
        const int cp = std::max(2, config.control_points);
        for (int k = 0; k < cp; ++k) {
            traj.times.push_back(config.duration * k / (cp - 1));
            Pose p;
            p.tx = (2.0 * unit(rng) - 1.0) * config.amp_translate;
            p.ty = (2.0 * unit(rng) - 1.0) * config.amp_translate;
            p.tz = (2.0 * unit(rng) - 1.0) * config.amp_z;
            p.rx = (2.0 * unit(rng) - 1.0) * config.amp_rot;
            p.ry = (2.0 * unit(rng) - 1.0) * config.amp_rot;
            p.rz = (2.0 * unit(rng) - 1.0) * config.amp_rot;
            traj.poses.push_back(p);
        }

        std::vector<double> gt_times;
        for (int k = 0; k < config.gt_count; ++k)
            gt_times.push_back(config.duration * (k + 1) / (config.gt_count + 1));

        const SimulatedSequence seq = generate_events(texture, traj, cams, thresholds, config.fs,
                                                      0.0, config.duration, gt_times);

        write_event_file(seq.events, dir / "events.txt");
        write_json(dir / "events.json",
                   json{{"width", config.lr_width}, {"height", config.lr_height}});

        for (std::size_t k = 0; k < seq.gt_frames.size(); ++k) {
            char frame[32];
            std::snprintf(frame, sizeof(frame), "gt_%04zu.pgm", k);
            write_pgm(dir / frame, seq.gt_frames[k]);
            std::snprintf(frame, sizeof(frame), "lr_%04zu.pgm", k);
            write_pgm(dir / frame, seq.lr_frames[k]);
        }

        json meta;
        meta["index"] = i;
        meta["texture"] = texture_name;
        meta["theta_pos"] = thresholds.theta_pos;
        meta["theta_neg"] = thresholds.theta_neg;
        meta["fs"] = config.fs;
        meta["duration"] = config.duration;
        meta["gt_times"] = gt_times;
        meta["event_count"] = seq.events.size();
        json jt = json::array();
        for (std::size_t k = 0; k < traj.times.size(); ++k) {
            json entry = pose_json(traj.poses[k]);
            entry["t"] = traj.times[k];
            jt.push_back(entry);
        }
        meta["trajectory"] = jt;
        write_json(dir / "seq.json", meta);

        manifest["dirs"].push_back(name);
    }

    write_json(root / "dataset.json", manifest);
}

} // namespace evsr
