#include "evsr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "evsr/checkpoint.hpp"
#include "evsr/common.hpp"

namespace evsr {

namespace fs = std::filesystem;

namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

Tensor<float> image_tensor(const Image& img) {
    Tensor<float> t = Tensor<float>::zeros(Shape{1, 1, img.height, img.width});
    std::copy(img.px.begin(), img.px.end(), t.data.begin());
    return t;
}

double encoder_checksum(const FeatureEncoder<float>& enc) {
    double acc = 0.0;
    for (const auto& w : enc.weights)
        for (float v : w->value.data) acc += v;
    for (const auto& b : enc.biases)
        for (float v : b->value.data) acc += v;
    return acc + enc.slope->value.data[0];
}

// Explicit Fisher-Yates so the order depends only on the generator stream,
// not on a library's shuffle implementation.
void shuffle_samples(std::vector<TrainSample>& s, std::mt19937_64& rng) {
    for (std::size_t i = s.size(); i > 1; --i)
        std::swap(s[i - 1], s[rng() % i]);
}

struct Adam {
    static constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    int t = 0;
    std::vector<Tensor<double>> m, v;

    void init(const std::vector<ag::Var<float>>& params) {
        t = 0;
        m.clear();
        v.clear();
        for (const auto& p : params) {
            m.push_back(Tensor<double>::zeros(p->value.shape));
            v.push_back(Tensor<double>::zeros(p->value.shape));
        }
    }

    void step(const std::vector<ag::Var<float>>& params, double lr) {
        ++t;
        const double bc1 = 1.0 - std::pow(beta1, t);
        const double bc2 = 1.0 - std::pow(beta2, t);
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& p = params[i];
            Tensor<float>& g = p->grad_buf();
            for (std::size_t k = 0; k < p->value.data.size(); ++k) {
                const double gk = g.data[k];
                m[i].data[k] = beta1 * m[i].data[k] + (1.0 - beta1) * gk;
                v[i].data[k] = beta2 * v[i].data[k] + (1.0 - beta2) * gk * gk;
                const double update =
                    lr * (m[i].data[k] / bc1) / (std::sqrt(v[i].data[k] / bc2) + eps);
                p->value.data[k] = static_cast<float>(p->value.data[k] - update);
            }
        }
    }
};

void scale_grads(const std::vector<ag::Var<float>>& params, double factor) {
    for (const auto& p : params)
        for (float& g : p->grad_buf().data) g = static_cast<float>(g * factor);
}

void clip_global_norm(const std::vector<ag::Var<float>>& params, double max_norm) {
    double sq = 0.0;
    for (const auto& p : params)
        for (float g : p->grad_buf().data) sq += static_cast<double>(g) * g;
    if (sq > max_norm * max_norm) scale_grads(params, max_norm / std::sqrt(sq));
}

} // namespace

void TrainConfig::validate() const {
    arch.validate();
    if (stack.events_per_channel < 1 || stack.override_cap < 1)
        throw Error("train: stack parameters must be positive");
    if (overlap < 0 || overlap >= stack.events_per_channel * arch.stack_channels)
        throw Error("train: overlap must lie in [0, events per stack)");
    if (batch_size < 1) throw Error("train: batch_size must be positive");
    if (epochs < 1) throw Error("train: epochs must be positive");
    if (lr0 <= 0.0) throw Error("train: lr0 must be positive");
    if (lambda < 0.0) throw Error("train: lambda must be >= 0");
    if (val_fraction < 0.0 || val_fraction >= 1.0)
        throw Error("train: val_fraction must lie in [0, 1)");
    if (nan_retries < 0) throw Error("train: nan_retries must be >= 0");
}

std::vector<int> lr_decay_epochs(int total_epochs) {
    std::vector<int> decays;
    int at = 0;
    int span = total_epochs;
    while (span >= 2) {
        at += span / 2;
        decays.push_back(at);
        span = total_epochs - at;
    }
    return decays;
}

double lr_at(int epoch, int total_epochs, double lr0) {
    if (epoch < 0 || epoch >= total_epochs)
        throw Error("lr_at: epoch " + std::to_string(epoch) + " outside [0, " +
                    std::to_string(total_epochs) + ")");
    double lr = lr0;
    for (int d : lr_decay_epochs(total_epochs))
        if (d <= epoch) lr /= 10.0;
    return lr;
}

bool is_validation_sequence(std::uint64_t seed, int seq_index, double val_fraction) {
    const std::uint64_t h = splitmix(splitmix(seed) ^ static_cast<std::uint64_t>(seq_index));
    return static_cast<double>(h % 10000) < val_fraction * 10000.0;
}

std::vector<TrainSample> usable_samples(const Dataset& data, const std::vector<int>& seqs,
                                        const StackConfig& stack, int seq_len, int overlap) {
    std::vector<TrainSample> out;
    for (int si : seqs) {
        const SequenceData& sd = data.sequences.at(si);
        for (int a = 0; a < static_cast<int>(sd.gt_times.size()); ++a) {
            try {
                (void)build_sequence(sd.events, sd.gt_times[a], stack, seq_len, overlap);
                out.push_back({si, a});
            } catch (const Error&) {
                // window does not fit around this anchor; drop it
            }
        }
    }
    return out;
}

std::pair<std::vector<int>, std::vector<int>> split_dataset(const Dataset& data,
                                                            const TrainConfig& config) {
    std::vector<int> train_seqs, val_seqs;
    for (int i = 0; i < static_cast<int>(data.sequences.size()); ++i) {
        if (is_validation_sequence(config.seed, i, config.val_fraction))
            val_seqs.push_back(i);
        else
            train_seqs.push_back(i);
    }
    if (train_seqs.empty()) {
        // a tiny dataset can hash entirely into validation; training wins
        train_seqs.swap(val_seqs);
    }
    return {std::move(train_seqs), std::move(val_seqs)};
}

std::pair<SRNet<float>, TrainLog> train(const Dataset& data, const TrainConfig& config) {
    config.validate();
    if (data.sequences.empty()) throw Error("train: dataset is empty");

    ArchConfig arch = config.arch;
    StackConfig stack = config.stack;
    stack.channels = arch.stack_channels;

    auto [train_seqs, val_seqs] = split_dataset(data, config);
    const std::vector<TrainSample> samples =
        usable_samples(data, train_seqs, stack, arch.sequence_length, config.overlap);
    if (samples.empty()) throw Error("train: no anchor admits a full stack window");

    const FeatureEncoder<float> encoder;

    double lr0 = config.lr0;
    for (int attempt = 0;; ++attempt) {
        TrainLog log;
        log.restarts = attempt;
        log.lr0_used = lr0;
        log.encoder_checksum_before = encoder_checksum(encoder);

        SRNet<float> model(arch, splitmix(config.seed ^ 0xE25ABC01ULL));
        const std::vector<ag::Var<float>> params = model.params.vars();
        Adam opt;
        opt.init(params);

        bool restart = false;
        int step_index = 0;
        for (int epoch = 0; epoch < config.epochs && !restart; ++epoch) {
            const double lr = lr_at(epoch, config.epochs, lr0);
            std::vector<TrainSample> order = samples;
            std::mt19937_64 shuffle_rng(splitmix(config.seed) ^
                                        (0x9E3779B97F4A7C15ULL * (epoch + 1)));
            shuffle_samples(order, shuffle_rng);

            double epoch_loss = 0.0;
            int epoch_steps = 0;
            for (std::size_t b0 = 0; b0 < order.size() && !restart;
                 b0 += static_cast<std::size_t>(config.batch_size)) {
                const std::size_t b1 =
                    std::min(order.size(), b0 + static_cast<std::size_t>(config.batch_size));
                ag::zero_grad(params);
                double l1_sum = 0.0, lpips_sum = 0.0, total_sum = 0.0;
                for (std::size_t i = b0; i < b1; ++i) {
                    const SequenceData& sd = data.sequences[order[i].seq];
                    const StackSequence ss = build_sequence(sd.events, sd.gt_times[order[i].anchor],
                                                            stack, arch.sequence_length,
                                                            config.overlap);
                    const PipelineResult<float> out = pipeline_forward(model, ss);
                    const ag::Var<float> gt =
                        ag::constant(image_tensor(sd.gt_frames[order[i].anchor]));
                    const LossValue<float> lv = sim_loss(out.output, gt, encoder, config.lambda);
                    ag::backward(lv.total);
                    l1_sum += lv.l1->value.data[0];
                    lpips_sum += lv.lpips ? lv.lpips->value.data[0] : 0.0;
                    total_sum += lv.total->value.data[0];
                }
                const double n = static_cast<double>(b1 - b0);
                const double mean_total = total_sum / n;
                if (!std::isfinite(mean_total)) {
                    if (epoch == 0 && attempt < config.nan_retries) {
                        restart = true;
                        break;
                    }
                    throw Error("train: non-finite loss at step " + std::to_string(step_index) +
                                " epoch " + std::to_string(epoch) + " (lr " + std::to_string(lr) +
                                ")");
                }
                scale_grads(params, 1.0 / n);
                clip_global_norm(params, 5.0);
                opt.step(params, lr);
                if (config.step_records)
                    log.steps.push_back(
                        {epoch, step_index, l1_sum / n, lpips_sum / n, mean_total, lr});
                epoch_loss += mean_total;
                ++epoch_steps;
                ++step_index;
            }
            if (restart) break;

            const std::vector<int>& eval_seqs = val_seqs.empty() ? train_seqs : val_seqs;
            const MetricReport val =
                evaluate_model(model, data, eval_seqs, stack, config.overlap);
            log.epochs.push_back({epoch, epoch_loss / std::max(1, epoch_steps), val.mean_psnr,
                                  val.mean_ssim, lr});

            if (!config.out_dir.empty()) {
                fs::create_directories(config.out_dir);
                char name[32];
                std::snprintf(name, sizeof(name), "ep%04d.ckpt", epoch);
                save_checkpoint((fs::path(config.out_dir) / name).string(), model);
            }
        }
        if (!restart) {
            log.encoder_checksum_after = encoder_checksum(encoder);
            if (!config.out_dir.empty()) {
                fs::create_directories(config.out_dir);
                save_checkpoint((fs::path(config.out_dir) / "model.ckpt").string(), model);
            }
            return {std::move(model), std::move(log)};
        }
        lr0 /= 2.0;
    }
}

MetricReport evaluate_predictions(const std::vector<std::vector<Image>>& predictions,
                                  const Dataset& data, const std::vector<int>& seqs,
                                  const std::vector<std::vector<int>>& anchors) {
    if (predictions.size() != seqs.size() || anchors.size() != seqs.size())
        throw Error("evaluate: one prediction and anchor list per sequence expected");
    std::vector<FrameMetrics> frames;
    int frame_index = 0;
    for (std::size_t j = 0; j < seqs.size(); ++j) {
        const SequenceData& sd = data.sequences.at(seqs[j]);
        const std::vector<Image>& preds = predictions[j];
        const std::vector<int>& idx = anchors[j];
        if (preds.size() != idx.size())
            throw Error("evaluate: prediction count disagrees with anchors");
        for (std::size_t i = 0; i < preds.size(); ++i) {
            const Image& gt = sd.gt_frames.at(idx[i]);
            FrameMetrics fm;
            fm.frame_index = frame_index++;
            fm.mse = mse(preds[i], gt);
            fm.psnr = psnr(preds[i], gt);
            fm.ssim = ssim(preds[i], gt);
            if (i + 1 < preds.size() && idx[i + 1] == idx[i] + 1) {
                const Image& gt_next = sd.gt_frames.at(idx[i + 1]);
                const FlowField fwd = estimate_flow(gt, gt_next);
                const FlowField bwd = estimate_flow(gt_next, gt);
                const OcclusionMask mask = occlusion_mask(fwd, bwd);
                const WarpErrorResult we = warp_error(preds[i], preds[i + 1], fwd, mask);
                fm.e_warp = we.value;
                fm.has_warp = true;
                fm.warp_degenerate = we.degenerate;
            }
            frames.push_back(fm);
        }
    }
    return make_report(std::move(frames));
}

MetricReport evaluate_model(const SRNet<float>& model, const Dataset& data,
                            const std::vector<int>& seqs, const StackConfig& stack, int overlap,
                            FlowSource flow_source) {
    StackConfig sc = stack;
    sc.channels = model.arch.stack_channels;
    std::vector<std::vector<Image>> predictions(seqs.size());
    std::vector<std::vector<int>> anchors(seqs.size());
    for (std::size_t j = 0; j < seqs.size(); ++j) {
        const SequenceData& sd = data.sequences.at(seqs[j]);
        for (int a = 0; a < static_cast<int>(sd.gt_times.size()); ++a) {
            StackSequence ss;
            try {
                ss = build_sequence(sd.events, sd.gt_times[a], sc,
                                    model.arch.sequence_length, overlap);
            } catch (const Error&) {
                continue;
            }
            const PipelineResult<float> out =
                pipeline_forward(model, ss, PipelineMode::main, flow_source);
            predictions[j].push_back(tensor_to_image(out.output->value));
            anchors[j].push_back(a);
        }
    }
    return evaluate_predictions(predictions, data, seqs, anchors);
}

Image dataset_mean_image(const Dataset& data, const std::vector<int>& seqs) {
    if (seqs.empty()) throw Error("mean image: no sequences given");
    const Image& first = data.sequences.at(seqs.front()).gt_frames.at(0);
    std::vector<double> acc(first.px.size(), 0.0);
    std::size_t count = 0;
    for (int si : seqs)
        for (const Image& g : data.sequences.at(si).gt_frames) {
            if (g.width != first.width || g.height != first.height)
                throw ShapeError("mean image: frame sizes disagree");
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g.px[i];
            ++count;
        }
    Image mean(first.width, first.height);
    for (std::size_t i = 0; i < acc.size(); ++i)
        mean.px[i] = static_cast<float>(acc[i] / static_cast<double>(count));
    return mean;
}

MetricReport evaluate_constant(const Image& prediction, const Dataset& data,
                               const std::vector<int>& seqs, const StackConfig& stack,
                               int seq_len, int overlap) {
    std::vector<std::vector<Image>> predictions(seqs.size());
    std::vector<std::vector<int>> anchors(seqs.size());
    for (std::size_t j = 0; j < seqs.size(); ++j) {
        const SequenceData& sd = data.sequences.at(seqs[j]);
        for (int a = 0; a < static_cast<int>(sd.gt_times.size()); ++a) {
            try {
                (void)build_sequence(sd.events, sd.gt_times[a], stack, seq_len, overlap);
            } catch (const Error&) {
                continue;
            }
            predictions[j].push_back(prediction);
            anchors[j].push_back(a);
        }
    }
    return evaluate_predictions(predictions, data, seqs, anchors);
}

} // namespace evsr
