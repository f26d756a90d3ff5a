#include "evsr/dataset.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "evsr/common.hpp"

namespace evsr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path.string() + ": cannot open");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

} // namespace

SequenceData load_sequence(const std::string& dir) {
    const fs::path root(dir);
    const json sidecar = read_json(root / "events.json");
    const json meta = read_json(root / "seq.json");

    SequenceData seq{dir,
                     meta.value("index", 0),
                     read_event_file((root / "events.txt").string(),
                                     sidecar.at("width").get<int>(),
                                     sidecar.at("height").get<int>()),
                     meta.at("gt_times").get<std::vector<double>>(),
                     {},
                     {}};

    for (std::size_t k = 0; k < seq.gt_times.size(); ++k) {
        char name[32];
        std::snprintf(name, sizeof(name), "gt_%04zu.pgm", k);
        seq.gt_frames.push_back(read_image((root / name).string()));
        std::snprintf(name, sizeof(name), "lr_%04zu.pgm", k);
        seq.lr_frames.push_back(read_image((root / name).string()));
    }
    return seq;
}

Dataset load_dataset(const std::string& root) {
    const fs::path base(root);
    const json manifest = read_json(base / "dataset.json");

    Dataset data;
    data.lr_width = manifest.at("lr_width").get<int>();
    data.lr_height = manifest.at("lr_height").get<int>();
    data.scale = manifest.at("scale").get<int>();
    data.seed = manifest.at("seed").get<std::uint64_t>();
    for (const auto& name : manifest.at("dirs")) {
        SequenceData seq = load_sequence((base / name.get<std::string>()).string());
        if (seq.events.width() != data.lr_width || seq.events.height() != data.lr_height)
            throw IoError(seq.dir + ": sensor size disagrees with the manifest");
        data.sequences.push_back(std::move(seq));
    }
    return data;
}

} // namespace evsr
