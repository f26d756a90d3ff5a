#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "evsr/dataset.hpp"
#include "evsr/loss.hpp"
#include "evsr/metrics.hpp"
#include "evsr/network.hpp"
#include "evsr/stacking.hpp"

namespace evsr {

struct TrainConfig {
    ArchConfig arch;   // sequence_length, scale, stack_channels are authoritative here
    StackConfig stack; // events per channel, override cap, normalize mode
    int overlap = 0;
    int batch_size = 4;
    double lr0 = 0.01;
    int epochs = 2;
    double lambda = 0.01;
    std::uint64_t seed = 0;
    double val_fraction = 0.1;
    int nan_retries = 5;    // restarts allowed on a first-epoch blowup
    std::string out_dir;    // per-epoch checkpoints land here; empty disables
    bool step_records = true;

    void validate() const;
};

struct StepRecord {
    int epoch = 0;
    int step = 0; // global optimizer step index, monotone across epochs
    double l1 = 0.0;
    double lpips = 0.0;
    double total = 0.0;
    double lr = 0.0;
};

struct EpochRecord {
    int epoch = 0;
    double mean_loss = 0.0;
    double val_psnr = 0.0;
    double val_ssim = 0.0;
    double lr = 0.0;
};

struct TrainLog {
    std::vector<StepRecord> steps;
    std::vector<EpochRecord> epochs;
    int restarts = 0;        // first-epoch blowup restarts taken
    double lr0_used = 0.0;   // possibly halved by restarts
    double encoder_checksum_before = 0.0;
    double encoder_checksum_after = 0.0;
};

// Epochs at which the rate drops by 10x: each drop sits halfway through the
// epochs remaining after the previous one, stopping once fewer than two
// remain. total=50 gives {25, 37, 43, 46, 48, 49}; total=2 gives {1}.
std::vector<int> lr_decay_epochs(int total_epochs);

// Stepped rate for one epoch: lr0 divided by 10 once per decay epoch already
// reached. Throws Error when epoch is outside [0, total_epochs).
double lr_at(int epoch, int total_epochs, double lr0);

// Stable train/validation assignment: a sequence hashes into the validation
// split with probability val_fraction, independent of dataset size or
// iteration order.
bool is_validation_sequence(std::uint64_t seed, int seq_index, double val_fraction);

// One trainable anchor: sequence index and ground-truth frame index.
struct TrainSample {
    int seq = 0;
    int anchor = 0;
};

// Enumerates the anchors of the given sequences whose stack windows fit
// inside the stream (others are silently dropped, deterministically).
std::vector<TrainSample> usable_samples(const Dataset& data, const std::vector<int>& seqs,
                                        const StackConfig& stack, int seq_len, int overlap);

// Adam over the combined reconstruction loss with stepped decay, gradient
// clipping at global norm 5, per-epoch checkpoints, and a deterministic
// sample order. A non-finite loss in the first epoch restarts the run with
// lr0 halved (up to nan_retries times); later blowups abort with the step
// and rate in the message.
std::pair<SRNet<float>, TrainLog> train(const Dataset& data, const TrainConfig& config);

// Scores externally supplied predictions (ordered per sequence, one image
// per usable anchor, empty slot list = sequence skipped) against the
// high-resolution ground truth. Temporal stability warps each prediction
// onto its successor along flow estimated between the ground-truth frames.
MetricReport evaluate_predictions(const std::vector<std::vector<Image>>& predictions,
                                  const Dataset& data, const std::vector<int>& seqs,
                                  const std::vector<std::vector<int>>& anchors);

// Runs the model over every usable anchor of the given sequences and scores
// the reconstructions.
MetricReport evaluate_model(const SRNet<float>& model, const Dataset& data,
                            const std::vector<int>& seqs, const StackConfig& stack, int overlap,
                            FlowSource flow_source = FlowSource::estimated);

// Pixel-wise mean of the ground-truth frames of the given sequences; the
// weakest sensible predictor, used as a learning baseline.
Image dataset_mean_image(const Dataset& data, const std::vector<int>& seqs);

// Scores a constant prediction (e.g. the dataset mean image) on the same
// usable anchors a model with this window configuration would see.
MetricReport evaluate_constant(const Image& prediction, const Dataset& data,
                               const std::vector<int>& seqs, const StackConfig& stack,
                               int seq_len, int overlap);

// Train/validation sequence indices for a dataset under this config.
std::pair<std::vector<int>, std::vector<int>> split_dataset(const Dataset& data,
                                                            const TrainConfig& config);

} // namespace evsr
