// evsr: reconstruct super-resolved intensity images from event streams.
//
// Subcommands cover the full pipeline: simulate (synthetic datasets), stack
// (event rasters), train, infer, eval, and smoke (end-to-end self check).
// Every subcommand is deterministic given its inputs and --seed; reruns
// produce byte-identical outputs. A --config JSON file supplies defaults for
// any long option (keys are the option names without dashes); command-line
// flags win.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "evsr/checkpoint.hpp"
#include "evsr/common.hpp"
#include "evsr/dataset.hpp"
#include "evsr/simulator.hpp"
#include "evsr/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace evsr;

namespace {

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw IoError(path + ": cannot open config file");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw IoError(path + ": " + e.what());
    }
}

// Fills `value` from the config file when the flag was not given on the
// command line.
template <typename T>
void merge(const CLI::App& cmd, const std::string& flag, const json& cfg, T& value) {
    const CLI::Option* opt = cmd.get_option(flag);
    if (opt->count() > 0) return;
    const std::string key = flag.substr(2);
    if (cfg.contains(key)) value = cfg.at(key).get<T>();
}

void write_json_file(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError(path.string() + ": cannot open for writing");
    out << j.dump(2) << "\n";
}

void echo_config(const fs::path& out_dir, json j) {
    fs::create_directories(out_dir);
    write_json_file(out_dir / "effective_config.json", std::move(j));
}

StackConfig::Normalize parse_norm(const std::string& s) {
    if (s == "signed-unit" || s == "signed_unit") return StackConfig::Normalize::signed_unit;
    if (s == "raw8") return StackConfig::Normalize::raw8;
    throw Error("unknown stack mode: " + s + " (expected signed-unit or raw8)");
}

PipelineMode parse_mode(const std::string& s) {
    if (s == "main") return PipelineMode::main;
    if (s == "duo" || s == "duo_pass" || s == "duo-pass") return PipelineMode::duo_pass;
    if (s == "complementary") return PipelineMode::complementary;
    throw Error("unknown mode: " + s + " (expected main, duo_pass, or complementary)");
}

FlowSource parse_flow(const std::string& s) {
    if (s == "estimated") return FlowSource::estimated;
    if (s == "zeroed" || s == "zero") return FlowSource::zeroed;
    throw Error("unknown flow source: " + s + " (expected estimated or zeroed)");
}

// Sensor geometry from an explicit --sensor-size or the events.json sidecar
// next to the stream file.
EventStream load_stream(const std::string& events_path, const std::vector<int>& sensor) {
    const fs::path path(events_path);
    if (!fs::exists(path)) throw IoError(events_path + ": no such event file");
    if (!sensor.empty()) {
        if (sensor.size() != 2 || sensor[0] < 1 || sensor[1] < 1)
            throw Error("--sensor-size expects positive width and height");
        return read_event_file(path, sensor[0], sensor[1]);
    }
    const fs::path sidecar = path.parent_path() / "events.json";
    if (!fs::exists(sidecar))
        throw IoError("no events.json sidecar next to " + events_path +
                      "; pass --sensor-size W H");
    std::ifstream in(sidecar);
    const json j = json::parse(in);
    return read_event_file(path, j.at("width").get<int>(), j.at("height").get<int>());
}

// One stack channel as a grayscale image; 8-bit emission reproduces the raw
// 0/128/255 raster bytes exactly.
Image channel_view(const EventStack& st, int c) {
    Image img(st.width, st.height);
    for (int y = 0; y < st.height; ++y)
        for (int x = 0; x < st.width; ++x)
            img.px[static_cast<std::size_t>(y) * st.width + x] = st.at(c, y, x) / 255.0f;
    return img;
}

void write_metrics_csv(const fs::path& path, const MetricReport& report) {
    std::FILE* f = std::fopen(path.string().c_str(), "w");
    if (!f) throw IoError(path.string() + ": cannot open for writing");
    std::fprintf(f, "frame,psnr,ssim,mse,e_warp,has_warp\n");
    for (const FrameMetrics& m : report.frames)
        std::fprintf(f, "%d,%.17g,%.17g,%.17g,%.17g,%d\n", m.frame_index, m.psnr, m.ssim, m.mse,
                     m.e_warp, m.has_warp ? 1 : 0);
    std::fclose(f);
}

void write_aggregate(const fs::path& path, const MetricReport& report) {
    write_json_file(path, json{{"mean_psnr", report.mean_psnr},
                               {"mean_ssim", report.mean_ssim},
                               {"mean_mse", report.mean_mse},
                               {"mean_warp", report.mean_warp},
                               {"frames", report.count},
                               {"warp_frames", report.warp_count}});
}

void write_train_logs(const fs::path& dir, const TrainLog& log) {
    std::FILE* f = std::fopen((dir / "steps.csv").string().c_str(), "w");
    if (!f) throw IoError((dir / "steps.csv").string() + ": cannot open for writing");
    std::fprintf(f, "epoch,step,l1,lpips,total,lr\n");
    for (const StepRecord& s : log.steps)
        std::fprintf(f, "%d,%d,%.17g,%.17g,%.17g,%.17g\n", s.epoch, s.step, s.l1, s.lpips,
                     s.total, s.lr);
    std::fclose(f);

    f = std::fopen((dir / "epochs.csv").string().c_str(), "w");
    if (!f) throw IoError((dir / "epochs.csv").string() + ": cannot open for writing");
    std::fprintf(f, "epoch,mean_loss,val_psnr,val_ssim,lr\n");
    for (const EpochRecord& e : log.epochs)
        std::fprintf(f, "%d,%.17g,%.17g,%.17g,%.17g\n", e.epoch, e.mean_loss, e.val_psnr,
                     e.val_ssim, e.lr);
    std::fclose(f);

    write_json_file(dir / "train_summary.json",
                    json{{"restarts", log.restarts},
                         {"lr0_used", log.lr0_used},
                         {"steps", log.steps.size()},
                         {"encoder_fixed",
                          log.encoder_checksum_before == log.encoder_checksum_after}});
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    std::string out, textures;
    int sequences = 8, lr_width = 32, lr_height = 32, scale = 2, gt_count = 5;
    int control_points = 5;
    double focal = 64.0, fs = 500.0, duration = 2.0;
    double theta_min = 0.1, theta_max = 0.25;
    double amp_translate = 6.0, amp_z = 1.0, amp_rot = 0.05;
};

void run_simulate(const SimulateArgs& a, std::uint64_t seed) {
    if (!a.textures.empty() && !fs::is_directory(a.textures))
        throw IoError(a.textures + ": textures directory not found");
    SimConfig c;
    c.sequences = a.sequences;
    c.textures_dir = a.textures;
    c.out_dir = a.out;
    c.lr_width = a.lr_width;
    c.lr_height = a.lr_height;
    c.scale = a.scale;
    c.focal_lr = a.focal;
    c.fs = a.fs;
    c.duration = a.duration;
    c.gt_count = a.gt_count;
    c.theta_min = a.theta_min;
    c.theta_max = a.theta_max;
    c.amp_translate = a.amp_translate;
    c.amp_z = a.amp_z;
    c.amp_rot = a.amp_rot;
    c.control_points = a.control_points;
    c.seed = seed;
    generate_dataset(c);
    echo_config(a.out, json{{"subcommand", "simulate"},
                            {"out", a.out},
                            {"textures", a.textures},
                            {"sequences", a.sequences},
                            {"lr-width", a.lr_width},
                            {"lr-height", a.lr_height},
                            {"scale", a.scale},
                            {"focal", a.focal},
                            {"fs", a.fs},
                            {"duration", a.duration},
                            {"gt-count", a.gt_count},
                            {"theta-min", a.theta_min},
                            {"theta-max", a.theta_max},
                            {"amp-translate", a.amp_translate},
                            {"amp-z", a.amp_z},
                            {"amp-rot", a.amp_rot},
                            {"control-points", a.control_points},
                            {"seed", seed}});
    std::printf("simulated %d sequences into %s\n", a.sequences, a.out.c_str());
}

// ------------------------------------------------------------------- stack

struct StackArgs {
    std::string events, out, stack_mode = "signed-unit";
    std::vector<int> sensor_size;
    std::vector<double> anchors;
    int ne = 200, channels = 3, cap = 50, seq_len = 3, overlap = 0;
};

void run_stack(const StackArgs& a) {
    const EventStream stream = load_stream(a.events, a.sensor_size);
    StackConfig sc;
    sc.events_per_channel = a.ne;
    sc.channels = a.channels;
    sc.override_cap = a.cap;
    sc.normalize = parse_norm(a.stack_mode);

    fs::create_directories(a.out);
    json manifest;
    manifest["width"] = stream.width();
    manifest["height"] = stream.height();
    manifest["channels"] = a.channels;
    manifest["stack_mode"] = a.stack_mode;
    manifest["anchors"] = json::array();

    for (std::size_t i = 0; i < a.anchors.size(); ++i) {
        StackSequence seq;
        try {
            seq = build_sequence(stream, a.anchors[i], sc, a.seq_len, a.overlap);
        } catch (const Error& e) {
            throw Error("anchor " + std::to_string(a.anchors[i]) + ": " + e.what());
        }
        json ja;
        ja["t"] = a.anchors[i];
        ja["central_index"] = seq.central_index;
        ja["stacks"] = json::array();
        for (std::size_t s = 0; s < seq.stacks.size(); ++s) {
            const EventStack& st = seq.stacks[s];
            json js;
            js["t_start"] = st.t_start;
            js["t_end"] = st.t_end;
            js["first_index"] = st.first_index;
            js["last_index"] = st.last_index;
            js["files"] = json::array();
            for (int c = 0; c < st.channels; ++c) {
                char name[64];
                std::snprintf(name, sizeof(name), "stack_a%04zu_s%02zu_c%02d.pgm", i, s, c);
                write_pgm(fs::path(a.out) / name, channel_view(st, c));
                js["files"].push_back(name);
            }
            ja["stacks"].push_back(js);
        }
        manifest["anchors"].push_back(ja);
    }
    write_json_file(fs::path(a.out) / "stacks.json", manifest);
    std::printf("wrote %zu stack sequences into %s\n", a.anchors.size(), a.out.c_str());
}

// ------------------------------------------------------------------- train

struct TrainArgs {
    std::string dataset, out, stack_mode = "signed-unit";
    int epochs = 2, batch = 4, scale = 2, seq_len = 3, channels = 3;
    int ne = 200, cap = 50, overlap = 0;
    int filters = 32, efr_filters = 32, c_blocks = 15, abd_blocks = 5, mixer_filters = 32;
    double lr0 = 0.01, lambda = 0.01, val_fraction = 0.1;
    int nan_retries = 5;
    bool no_step_log = false;
};

TrainConfig make_train_config(const TrainArgs& a, std::uint64_t seed) {
    TrainConfig tc;
    tc.arch.stack_channels = a.channels;
    tc.arch.scale = a.scale;
    tc.arch.filters = a.filters;
    tc.arch.efr_filters = a.efr_filters;
    tc.arch.rnet_c_blocks = a.c_blocks;
    tc.arch.rnet_abd_blocks = a.abd_blocks;
    tc.arch.mixer_filters = a.mixer_filters;
    tc.arch.sequence_length = a.seq_len;
    tc.stack.events_per_channel = a.ne;
    tc.stack.channels = a.channels;
    tc.stack.override_cap = a.cap;
    tc.stack.normalize = parse_norm(a.stack_mode);
    tc.overlap = a.overlap;
    tc.batch_size = a.batch;
    tc.lr0 = a.lr0;
    tc.epochs = a.epochs;
    tc.lambda = a.lambda;
    tc.seed = seed;
    tc.val_fraction = a.val_fraction;
    tc.nan_retries = a.nan_retries;
    tc.out_dir = a.out;
    tc.step_records = !a.no_step_log;
    return tc;
}

json train_args_json(const TrainArgs& a, std::uint64_t seed) {
    return json{{"subcommand", "train"},   {"dataset", a.dataset},
                {"out", a.out},            {"epochs", a.epochs},
                {"batch", a.batch},        {"lr0", a.lr0},
                {"lambda", a.lambda},      {"scale", a.scale},
                {"seq-len", a.seq_len},    {"channels", a.channels},
                {"ne", a.ne},              {"cap", a.cap},
                {"overlap", a.overlap},    {"stack-mode", a.stack_mode},
                {"filters", a.filters},    {"efr-filters", a.efr_filters},
                {"c-blocks", a.c_blocks},  {"abd-blocks", a.abd_blocks},
                {"mixer-filters", a.mixer_filters},
                {"val-fraction", a.val_fraction},
                {"nan-retries", a.nan_retries},
                {"seed", seed}};
}

void run_train(const TrainArgs& a, std::uint64_t seed) {
    const Dataset data = load_dataset(a.dataset);
    const TrainConfig tc = make_train_config(a, seed);
    echo_config(a.out, train_args_json(a, seed));
    auto [model, log] = train(data, tc);
    write_train_logs(a.out, log);
    const double final_loss = log.epochs.empty() ? 0.0 : log.epochs.back().mean_loss;
    std::printf("trained %d epochs, %zu steps, final mean loss %.6g, model in %s\n", a.epochs,
                log.steps.size(), final_loss, a.out.c_str());
}

// ------------------------------------------------------------------- infer

struct InferArgs {
    std::string events, checkpoint, out, mode = "main", flow = "estimated";
    std::string lr_frame, stack_mode = "signed-unit";
    std::vector<int> sensor_size;
    std::vector<double> anchors;
    int ne = 200, cap = 50, overlap = 0;
    bool depth16 = false;
};

void run_infer(const InferArgs& a) {
    const PipelineMode mode = parse_mode(a.mode);
    const FlowSource flow = parse_flow(a.flow);
    if (mode == PipelineMode::complementary && a.lr_frame.empty())
        throw Error("complementary mode needs --lr-frame");
    if (a.anchors.empty()) throw Error("infer needs at least one --anchor");

    const Checkpoint ck = load_checkpoint(a.checkpoint);
    SRNet<float> model = model_from_checkpoint(ck);
    const EventStream stream = load_stream(a.events, a.sensor_size);

    StackConfig sc;
    sc.events_per_channel = a.ne;
    sc.channels = model.arch.stack_channels;
    sc.override_cap = a.cap;
    sc.normalize = parse_norm(a.stack_mode);

    Image lr_img;
    if (!a.lr_frame.empty()) lr_img = read_image(a.lr_frame);

    fs::create_directories(a.out);
    for (std::size_t i = 0; i < a.anchors.size(); ++i) {
        StackSequence seq;
        try {
            seq = build_sequence(stream, a.anchors[i], sc, model.arch.sequence_length, a.overlap);
        } catch (const Error& e) {
            throw Error("anchor " + std::to_string(a.anchors[i]) + ": " + e.what());
        }
        const PipelineResult<float> result = pipeline_forward(
            model, seq, mode, flow, a.lr_frame.empty() ? nullptr : &lr_img);

        char name[64];
        std::snprintf(name, sizeof(name), "recon_%04zu.pgm", i);
        write_pgm(fs::path(a.out) / name, tensor_to_image(result.output->value), a.depth16);
        if (result.first_pass) {
            std::snprintf(name, sizeof(name), "pass1_%04zu.pgm", i);
            write_pgm(fs::path(a.out) / name, tensor_to_image(result.first_pass->value),
                      a.depth16);
        }
        const EventStack& central = seq.stacks[seq.central_index];
        for (int c = 0; c < central.channels; ++c) {
            std::snprintf(name, sizeof(name), "central_%04zu_c%02d.pgm", i, c);
            write_pgm(fs::path(a.out) / name, channel_view(central, c));
        }
    }
    echo_config(a.out, json{{"subcommand", "infer"},
                            {"events", a.events},
                            {"checkpoint", a.checkpoint},
                            {"out", a.out},
                            {"mode", a.mode},
                            {"flow", a.flow},
                            {"lr-frame", a.lr_frame},
                            {"stack-mode", a.stack_mode},
                            {"anchor", a.anchors},
                            {"ne", a.ne},
                            {"cap", a.cap},
                            {"overlap", a.overlap},
                            {"depth16", a.depth16}});
    std::printf("reconstructed %zu anchors into %s\n", a.anchors.size(), a.out.c_str());
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
    std::string dataset, checkpoint, out, split = "all", flow = "estimated";
    std::string stack_mode = "signed-unit";
    int ne = 200, cap = 50, overlap = 0;
    double val_fraction = 0.1;
};

void run_eval(const EvalArgs& a, std::uint64_t seed) {
    const FlowSource flow = parse_flow(a.flow);
    if (a.split != "all" && a.split != "train" && a.split != "val")
        throw Error("unknown split: " + a.split + " (expected all, train, or val)");

    const Dataset data = load_dataset(a.dataset);
    const Checkpoint ck = load_checkpoint(a.checkpoint);
    const SRNet<float> model = model_from_checkpoint(ck);

    std::vector<int> seqs;
    for (int i = 0; i < static_cast<int>(data.sequences.size()); ++i) {
        const bool val = is_validation_sequence(seed, i, a.val_fraction);
        if (a.split == "all" || (a.split == "val" && val) || (a.split == "train" && !val))
            seqs.push_back(i);
    }
    if (seqs.empty()) throw Error("eval: the requested split selects no sequences");

    StackConfig sc;
    sc.events_per_channel = a.ne;
    sc.channels = model.arch.stack_channels;
    sc.override_cap = a.cap;
    sc.normalize = parse_norm(a.stack_mode);

    const MetricReport report = evaluate_model(model, data, seqs, sc, a.overlap, flow);
    fs::create_directories(a.out);
    write_metrics_csv(fs::path(a.out) / "metrics.csv", report);
    write_aggregate(fs::path(a.out) / "aggregate.json", report);
    echo_config(a.out, json{{"subcommand", "eval"},
                            {"dataset", a.dataset},
                            {"checkpoint", a.checkpoint},
                            {"out", a.out},
                            {"split", a.split},
                            {"flow", a.flow},
                            {"stack-mode", a.stack_mode},
                            {"ne", a.ne},
                            {"cap", a.cap},
                            {"overlap", a.overlap},
                            {"val-fraction", a.val_fraction},
                            {"seed", seed}});
    std::printf("evaluated %d frames: psnr %.4f dB, ssim %.4f, warp %.6g (%d pairs)\n",
                report.count, report.mean_psnr, report.mean_ssim, report.mean_warp,
                report.warp_count);
}

// ------------------------------------------------------------------- smoke

struct SmokeArgs {
    std::string out = "smoke_out";
    std::string textures;
};

void run_smoke(const SmokeArgs& a, std::uint64_t seed) {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    const auto elapsed = [&] {
        return std::chrono::duration<double>(clock::now() - t0).count();
    };
    if (!a.textures.empty() && !fs::is_directory(a.textures))
        throw IoError(a.textures + ": textures directory not found");

    const fs::path root(a.out);
    fs::remove_all(root);
    fs::create_directories(root);

    // 1. simulate four tiny sequences
    SimConfig sim;
    sim.sequences = 4;
    sim.textures_dir = a.textures;
    sim.out_dir = (root / "data").string();
    sim.lr_width = 12;
    sim.lr_height = 12;
    sim.scale = 2;
    sim.focal_lr = 24.0;
    sim.fs = 120.0;
    sim.duration = 1.5;
    sim.gt_count = 3;
    sim.theta_min = 0.05;
    sim.theta_max = 0.09;
    sim.amp_translate = 5.0;
    sim.amp_z = 1.0;
    sim.amp_rot = 0.1;
    sim.control_points = 3;
    sim.seed = seed;
    generate_dataset(sim);
    const Dataset data = load_dataset(sim.out_dir);
    std::size_t total_events = 0;
    for (const SequenceData& s : data.sequences) total_events += s.events.size();
    std::printf("[smoke %5.1fs] simulate: %zu sequences, %zu events\n", elapsed(),
                data.sequences.size(), total_events);

    // 2. train two epochs on a small model
    TrainConfig tc;
    tc.arch.stack_channels = 3;
    tc.arch.scale = 2;
    tc.arch.filters = 8;
    tc.arch.efr_filters = 8;
    tc.arch.rnet_c_blocks = 2;
    tc.arch.rnet_abd_blocks = 1;
    tc.arch.mixer_filters = 8;
    tc.arch.sequence_length = 3;
    tc.stack.events_per_channel = 30;
    tc.stack.channels = 3;
    tc.batch_size = 2;
    tc.epochs = 2;
    tc.seed = seed;
    tc.out_dir = (root / "model").string();
    auto [model, log] = train(data, tc);
    write_train_logs(tc.out_dir, log);
    if (log.epochs.empty() || !std::isfinite(log.epochs.back().mean_loss))
        throw Error("smoke: training produced no finite loss");
    std::printf("[smoke %5.1fs] train: %zu steps, final mean loss %.6g\n", elapsed(),
                log.steps.size(), log.epochs.back().mean_loss);

    // 3. infer at the first sequence's ground-truth instants
    const SequenceData& seq0 = data.sequences.front();
    InferArgs infer;
    infer.events = (fs::path(seq0.dir) / "events.txt").string();
    infer.checkpoint = (fs::path(tc.out_dir) / "model.ckpt").string();
    infer.out = (root / "infer").string();
    infer.ne = tc.stack.events_per_channel;
    int written = 0;
    {
        const EventStream stream = load_stream(infer.events, {});
        StackConfig sc = tc.stack;
        fs::create_directories(infer.out);
        for (std::size_t k = 0; k < seq0.gt_times.size(); ++k) {
            StackSequence ss;
            try {
                ss = build_sequence(stream, seq0.gt_times[k], sc, tc.arch.sequence_length,
                                    tc.overlap);
            } catch (const Error&) {
                continue;
            }
            const PipelineResult<float> r = pipeline_forward(model, ss);
            char name[32];
            std::snprintf(name, sizeof(name), "recon_%04zu.pgm", k);
            write_pgm(fs::path(infer.out) / name, tensor_to_image(r.output->value));
            ++written;
        }
    }
    if (written == 0) throw Error("smoke: no anchor admitted a stack window");
    std::printf("[smoke %5.1fs] infer: %d reconstructions\n", elapsed(), written);

    // 4. evaluate on the whole toy set
    std::vector<int> all;
    for (int i = 0; i < static_cast<int>(data.sequences.size()); ++i) all.push_back(i);
    const MetricReport report = evaluate_model(model, data, all, tc.stack, tc.overlap);
    if (report.count == 0) throw Error("smoke: evaluation scored no frames");
    write_metrics_csv(root / "metrics.csv", report);
    write_aggregate(root / "aggregate.json", report);
    std::printf("[smoke %5.1fs] eval: %d frames, psnr %.4f dB, ssim %.4f\n", elapsed(),
                report.count, report.mean_psnr, report.mean_ssim);

    echo_config(root, json{{"subcommand", "smoke"},
                           {"out", a.out},
                           {"textures", a.textures},
                           {"seed", seed}});
    std::printf("[smoke %5.1fs] PASS\n", elapsed());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"event-stream super-resolution: simulate, stack, train, infer, eval"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed = 0;
    bool deterministic = false;
    int threads = 1;
    app.add_option("--config", config_path,
                   "JSON file of default option values (long names as keys)");
    app.add_option("--seed", seed, "master random seed (default 0)");
    app.add_flag("--deterministic", deterministic,
                 "accepted for compatibility; execution is always deterministic");
    app.add_option("--threads", threads, "worker thread cap (this build computes serially)")
        ->check(CLI::PositiveNumber);

    SimulateArgs sim;
    CLI::App* c_sim = app.add_subcommand("simulate", "generate a synthetic event dataset");
    c_sim->fallthrough();
    c_sim->add_option("--out", sim.out, "output dataset directory")->required();
    c_sim->add_option("--textures", sim.textures, "texture image directory (default procedural)");
    c_sim->add_option("--sequences", sim.sequences, "sequence count");
    c_sim->add_option("--lr-width", sim.lr_width, "sensor width");
    c_sim->add_option("--lr-height", sim.lr_height, "sensor height");
    c_sim->add_option("--scale", sim.scale, "ground-truth upscale factor");
    c_sim->add_option("--focal", sim.focal, "focal length, pixels");
    c_sim->add_option("--fs", sim.fs, "brightness sampling rate, Hz");
    c_sim->add_option("--duration", sim.duration, "seconds per sequence");
    c_sim->add_option("--gt-count", sim.gt_count, "ground-truth frames per sequence");
    c_sim->add_option("--theta-min", sim.theta_min, "contrast threshold range low");
    c_sim->add_option("--theta-max", sim.theta_max, "contrast threshold range high");
    c_sim->add_option("--amp-translate", sim.amp_translate, "motion amplitude, pixels");
    c_sim->add_option("--amp-z", sim.amp_z, "depth motion amplitude");
    c_sim->add_option("--amp-rot", sim.amp_rot, "rotation amplitude, radians");
    c_sim->add_option("--control-points", sim.control_points, "trajectory control points");

    StackArgs stk;
    CLI::App* c_stk = app.add_subcommand("stack", "rasterize an event stream into stacks");
    c_stk->fallthrough();
    c_stk->add_option("--events", stk.events, "event text file")->required();
    c_stk->add_option("--out", stk.out, "output directory")->required();
    c_stk->add_option("--anchor", stk.anchors, "anchor timestamp(s), seconds")->required();
    c_stk->add_option("--sensor-size", stk.sensor_size, "sensor W H when no sidecar")
        ->expected(2);
    c_stk->add_option("--ne", stk.ne, "events per stack channel");
    c_stk->add_option("--channels", stk.channels, "channels per stack");
    c_stk->add_option("--cap", stk.cap, "per-pixel overwrite budget");
    c_stk->add_option("--seq-len", stk.seq_len, "stacks per sequence, odd");
    c_stk->add_option("--overlap", stk.overlap, "events shared by neighboring stacks");
    c_stk->add_option("--stack-mode", stk.stack_mode, "signed-unit or raw8");

    TrainArgs trn;
    CLI::App* c_trn = app.add_subcommand("train", "optimize a model on a dataset");
    c_trn->fallthrough();
    c_trn->add_option("--dataset", trn.dataset, "dataset directory")->required();
    c_trn->add_option("--out", trn.out, "checkpoint and log directory")->required();
    c_trn->add_option("--epochs", trn.epochs, "training epochs");
    c_trn->add_option("--batch", trn.batch, "samples per optimizer step");
    c_trn->add_option("--lr0", trn.lr0, "initial learning rate");
    c_trn->add_option("--lambda", trn.lambda, "perceptual term weight");
    c_trn->add_option("--scale", trn.scale, "upscale factor, 2 or 4");
    c_trn->add_option("--seq-len", trn.seq_len, "stacks per reconstruction, odd");
    c_trn->add_option("--channels", trn.channels, "channels per stack");
    c_trn->add_option("--ne", trn.ne, "events per stack channel");
    c_trn->add_option("--cap", trn.cap, "per-pixel overwrite budget");
    c_trn->add_option("--overlap", trn.overlap, "events shared by neighboring stacks");
    c_trn->add_option("--stack-mode", trn.stack_mode, "signed-unit or raw8");
    c_trn->add_option("--filters", trn.filters, "recurrent core width");
    c_trn->add_option("--efr-filters", trn.efr_filters, "rectifier width");
    c_trn->add_option("--c-blocks", trn.c_blocks, "projection residual blocks");
    c_trn->add_option("--abd-blocks", trn.abd_blocks, "encoder/decoder residual blocks");
    c_trn->add_option("--mixer-filters", trn.mixer_filters, "mixer width");
    c_trn->add_option("--val-fraction", trn.val_fraction, "validation split fraction");
    c_trn->add_option("--nan-retries", trn.nan_retries, "first-epoch blowup restarts");
    c_trn->add_flag("--no-step-log", trn.no_step_log, "skip per-step records");

    InferArgs inf;
    CLI::App* c_inf = app.add_subcommand("infer", "reconstruct images at anchor times");
    c_inf->fallthrough();
    c_inf->add_option("--events", inf.events, "event text file")->required();
    c_inf->add_option("--checkpoint", inf.checkpoint, "model checkpoint")->required();
    c_inf->add_option("--out", inf.out, "output image directory")->required();
    c_inf->add_option("--anchor", inf.anchors, "anchor timestamp(s), seconds")->required();
    c_inf->add_option("--mode", inf.mode, "main, duo_pass, or complementary");
    c_inf->add_option("--flow", inf.flow, "estimated or zeroed");
    c_inf->add_option("--lr-frame", inf.lr_frame, "intensity frame for complementary mode");
    c_inf->add_option("--sensor-size", inf.sensor_size, "sensor W H when no sidecar")
        ->expected(2);
    c_inf->add_option("--ne", inf.ne, "events per stack channel");
    c_inf->add_option("--cap", inf.cap, "per-pixel overwrite budget");
    c_inf->add_option("--overlap", inf.overlap, "events shared by neighboring stacks");
    c_inf->add_option("--stack-mode", inf.stack_mode, "signed-unit or raw8");
    c_inf->add_flag("--depth16", inf.depth16, "write 16-bit grayscale");

    EvalArgs evl;
    CLI::App* c_evl = app.add_subcommand("eval", "score a model against ground truth");
    c_evl->fallthrough();
    c_evl->add_option("--dataset", evl.dataset, "dataset directory")->required();
    c_evl->add_option("--checkpoint", evl.checkpoint, "model checkpoint")->required();
    c_evl->add_option("--out", evl.out, "metrics output directory")->required();
    c_evl->add_option("--split", evl.split, "all, train, or val");
    c_evl->add_option("--flow", evl.flow, "estimated or zeroed");
    c_evl->add_option("--ne", evl.ne, "events per stack channel");
    c_evl->add_option("--cap", evl.cap, "per-pixel overwrite budget");
    c_evl->add_option("--overlap", evl.overlap, "events shared by neighboring stacks");
    c_evl->add_option("--stack-mode", evl.stack_mode, "signed-unit or raw8");
    c_evl->add_option("--val-fraction", evl.val_fraction, "validation split fraction");

    SmokeArgs smk;
    CLI::App* c_smk = app.add_subcommand("smoke", "end-to-end self check, under five minutes");
    c_smk->fallthrough();
    c_smk->add_option("--out", smk.out, "working directory (recreated)");
    c_smk->add_option("--textures", smk.textures, "texture image directory (default procedural)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        const json cfg = load_config(config_path);
        merge(app, "--seed", cfg, seed);
        merge(app, "--threads", cfg, threads);
        if (threads < 1) throw Error("--threads must be positive");

        if (c_sim->parsed()) {
            merge(*c_sim, "--textures", cfg, sim.textures);
            merge(*c_sim, "--sequences", cfg, sim.sequences);
            merge(*c_sim, "--lr-width", cfg, sim.lr_width);
            merge(*c_sim, "--lr-height", cfg, sim.lr_height);
            merge(*c_sim, "--scale", cfg, sim.scale);
            merge(*c_sim, "--focal", cfg, sim.focal);
            merge(*c_sim, "--fs", cfg, sim.fs);
            merge(*c_sim, "--duration", cfg, sim.duration);
            merge(*c_sim, "--gt-count", cfg, sim.gt_count);
            merge(*c_sim, "--theta-min", cfg, sim.theta_min);
            merge(*c_sim, "--theta-max", cfg, sim.theta_max);
            merge(*c_sim, "--amp-translate", cfg, sim.amp_translate);
            merge(*c_sim, "--amp-z", cfg, sim.amp_z);
            merge(*c_sim, "--amp-rot", cfg, sim.amp_rot);
            merge(*c_sim, "--control-points", cfg, sim.control_points);
            run_simulate(sim, seed);
        } else if (c_stk->parsed()) {
            merge(*c_stk, "--ne", cfg, stk.ne);
            merge(*c_stk, "--channels", cfg, stk.channels);
            merge(*c_stk, "--cap", cfg, stk.cap);
            merge(*c_stk, "--seq-len", cfg, stk.seq_len);
            merge(*c_stk, "--overlap", cfg, stk.overlap);
            merge(*c_stk, "--stack-mode", cfg, stk.stack_mode);
            run_stack(stk);
        } else if (c_trn->parsed()) {
            merge(*c_trn, "--epochs", cfg, trn.epochs);
            merge(*c_trn, "--batch", cfg, trn.batch);
            merge(*c_trn, "--lr0", cfg, trn.lr0);
            merge(*c_trn, "--lambda", cfg, trn.lambda);
            merge(*c_trn, "--scale", cfg, trn.scale);
            merge(*c_trn, "--seq-len", cfg, trn.seq_len);
            merge(*c_trn, "--channels", cfg, trn.channels);
            merge(*c_trn, "--ne", cfg, trn.ne);
            merge(*c_trn, "--cap", cfg, trn.cap);
            merge(*c_trn, "--overlap", cfg, trn.overlap);
            merge(*c_trn, "--stack-mode", cfg, trn.stack_mode);
            merge(*c_trn, "--filters", cfg, trn.filters);
            merge(*c_trn, "--efr-filters", cfg, trn.efr_filters);
            merge(*c_trn, "--c-blocks", cfg, trn.c_blocks);
            merge(*c_trn, "--abd-blocks", cfg, trn.abd_blocks);
            merge(*c_trn, "--mixer-filters", cfg, trn.mixer_filters);
            merge(*c_trn, "--val-fraction", cfg, trn.val_fraction);
            merge(*c_trn, "--nan-retries", cfg, trn.nan_retries);
            run_train(trn, seed);
        } else if (c_inf->parsed()) {
            merge(*c_inf, "--mode", cfg, inf.mode);
            merge(*c_inf, "--flow", cfg, inf.flow);
            merge(*c_inf, "--ne", cfg, inf.ne);
            merge(*c_inf, "--cap", cfg, inf.cap);
            merge(*c_inf, "--overlap", cfg, inf.overlap);
            merge(*c_inf, "--stack-mode", cfg, inf.stack_mode);
            run_infer(inf);
        } else if (c_evl->parsed()) {
            merge(*c_evl, "--split", cfg, evl.split);
            merge(*c_evl, "--flow", cfg, evl.flow);
            merge(*c_evl, "--ne", cfg, evl.ne);
            merge(*c_evl, "--cap", cfg, evl.cap);
            merge(*c_evl, "--overlap", cfg, evl.overlap);
            merge(*c_evl, "--stack-mode", cfg, evl.stack_mode);
            merge(*c_evl, "--val-fraction", cfg, evl.val_fraction);
            run_eval(evl, seed);
        } else if (c_smk->parsed()) {
            merge(*c_smk, "--textures", cfg, smk.textures);
            run_smoke(smk, seed);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
