#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evsr/events.hpp"
#include "evsr/image.hpp"

namespace evsr {

// One generated sequence as stored on disk: the event stream plus paired
// ground-truth renders at the annotated instants.
struct SequenceData {
    std::string dir;
    int index = 0;
    EventStream events;
    std::vector<double> gt_times;
    std::vector<Image> gt_frames; // high-resolution targets
    std::vector<Image> lr_frames; // matching low-resolution renders
};

struct Dataset {
    int lr_width = 0;
    int lr_height = 0;
    int scale = 0;
    std::uint64_t seed = 0;
    std::vector<SequenceData> sequences;
};

// Reads one sequence directory (events.txt + events.json sidecar + seq.json
// + numbered frame pairs). Throws IoError on missing or malformed files.
SequenceData load_sequence(const std::string& dir);

// Reads a dataset root written by generate_dataset: dataset.json manifest
// plus every listed sequence directory.
Dataset load_dataset(const std::string& root);

} // namespace evsr
