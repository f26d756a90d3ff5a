#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "evsr/events.hpp"
#include "evsr/image.hpp"

namespace evsr {

// Pinhole camera over a textured plane. The texture spans the world rectangle
// [0, tw-1] x [0, th-1] at Z = 0 with pixel centers on integers; the camera
// rest position is centered over the texture at Z = -focal, looking along +Z.
struct Intrinsics {
    int width = 0;
    int height = 0;
    double focal = 0.0;      // pixels; principal point is ((w-1)/2, (h-1)/2)
    double plane_dist = 0.0; // rest distance to the plane; 0 means focal
};

// Camera offset from the rest position (translation in texture pixels) plus
// an axis-angle rotation applied camera-to-world.
struct Pose {
    double tx = 0.0, ty = 0.0, tz = 0.0;
    double rx = 0.0, ry = 0.0, rz = 0.0;
};

// Piecewise-linear interpolation of each pose component over key times.
struct Trajectory {
    std::vector<double> times; // strictly increasing
    std::vector<Pose> poses;

    Pose at(double t) const; // clamped at both ends
    void validate() const;   // throws Error on bad structure
};

// Low/high-resolution camera pair sharing position and field of view: both
// cameras sit at the same spot (rest height focal_lr over the plane); the HR
// camera scales the frame size and focal length together, so block-averaging
// an HR frame lands exactly on the LR sample grid.
struct CameraPair {
    int lr_width = 128;
    int lr_height = 128;
    int scale = 2;
    double focal_lr = 100.0;

    Intrinsics lr() const { return {lr_width, lr_height, focal_lr, focal_lr}; }
    Intrinsics hr() const {
        return {lr_width * scale, lr_height * scale, focal_lr * scale, focal_lr};
    }
};

// Contrast thresholds in log-intensity units.
struct ThresholdModel {
    double theta_pos = 0.2;
    double theta_neg = 0.2;
};

// Renders the plane through the pose's homography with bilinear texture
// lookup. Rays missing the texture (or parallel to the plane) produce
// mid-gray 0.5. Throws Error when the camera center lies on the plane.
Image render_frame(const Image& texture, const Pose& pose, const Intrinsics& intr);

// Threshold-crossing emitter for one pixel across one linear log-intensity
// segment [l0, l1] spanning [t0, t0+dt]. Each full crossing of ref +/- theta
// appends an event with a linearly interpolated timestamp and advances ref;
// exact multiples of theta fire.
void emit_crossings(double t0, double dt, double l0, double l1, double& ref, double theta_pos,
                    double theta_neg, int x, int y, std::vector<Event>& out);

struct SimulatedSequence {
    EventStream events;           // LR stream
    std::vector<double> gt_times;
    std::vector<Image> gt_frames; // HR renders at gt_times
    std::vector<Image> lr_frames; // LR renders at gt_times
};

// Samples the LR camera at rate fs over [t0, t1], emits threshold crossings
// of log(I + 1e-3) per pixel, and renders HR/LR ground-truth frames at
// gt_times. Throws Error on fs <= 0 or an empty trajectory.
SimulatedSequence generate_events(const Image& texture, const Trajectory& traj,
                                  const CameraPair& cams, const ThresholdModel& thresholds,
                                  double fs, double t0, double t1,
                                  const std::vector<double>& gt_times);

// Smooth pseudo-random texture (value noise plus soft shapes) in [0.05, 0.95].
Image procedural_texture(std::mt19937_64& rng, int w, int h);

struct SimConfig {
    int sequences = 4;
    std::string textures_dir; // empty: procedural textures
    std::string out_dir;
    int lr_width = 128;
    int lr_height = 128;
    int scale = 2;
    double focal_lr = 100.0;
    double fs = 1000.0;
    double duration = 1.0;  // seconds simulated per sequence
    int gt_count = 12;      // ground-truth timestamps per sequence
    double theta_min = 0.1; // per-sequence thresholds drawn from this range
    double theta_max = 0.5;
    double amp_translate = 6.0; // trajectory amplitude, texture pixels
    double amp_z = 2.0;
    double amp_rot = 0.05; // radians
    int control_points = 5;
    std::uint64_t seed = 1;
};

// Writes `sequences` independent simulated sequences under out_dir:
//   dataset.json                     top-level manifest
//   seq_NNNN/events.txt              LR event stream
//   seq_NNNN/events.json             sensor geometry sidecar
//   seq_NNNN/seq.json                thresholds, trajectory, gt timestamps
//   seq_NNNN/gt_KKKK.pgm             HR ground truth
//   seq_NNNN/lr_KKKK.pgm             LR render at the same instant
// Per-sequence RNG streams derive from (seed, index), so output is
// byte-reproducible and independent of scheduling.
void generate_dataset(const SimConfig& config);

} // namespace evsr
