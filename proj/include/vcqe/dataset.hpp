#pragma once

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vcqe/frame.hpp"
#include "vcqe/png_io.hpp"
#include "vcqe/rng.hpp"
#include "vcqe/util.hpp"

namespace vcqe {

// Clip directory layout:
//   <root>/original/<clip_id>/frame_<N>.png
//   <root>/qp<QP>/<clip_id>/frame_<N>.png
// Clip ids may be nested (e.g. "00001/0001"); frames are numbered from 0.

struct IndexEntry {
    std::string id;
    std::string original_dir;
    std::string decoded_dir;
    int frame_count = 0;
};

struct DatasetIndex {
    std::string split;  // "train" or "eval"
    int qp = 0;
    std::string root;
    std::vector<IndexEntry> entries;
    int skipped_incomplete = 0;  // missing/short decoded counterpart
    int skipped_short = 0;       // fewer than 4 frames
};

inline int count_contiguous_frames(const std::string& dir) {
    namespace fs = std::filesystem;
    int n = 0;
    while (fs::exists(fs::path(dir) / ("frame_" + std::to_string(n) + ".png"))) ++n;
    return n;
}

// Relative paths of directories under `tree` that contain frame_0.png.
inline std::vector<std::string> scan_clip_dirs(const std::string& tree) {
    namespace fs = std::filesystem;
    std::vector<std::string> ids;
    if (!fs::exists(tree)) return ids;
    if (fs::exists(fs::path(tree) / "frame_0.png")) {
        ids.push_back(".");
        return ids;
    }
    for (auto it = fs::recursive_directory_iterator(tree); it != fs::recursive_directory_iterator();
         ++it) {
        if (it->is_directory() && fs::exists(it->path() / "frame_0.png"))
            ids.push_back(fs::relative(it->path(), tree).string());
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

inline std::set<std::string> read_split_list(const std::string& path) {
    std::ifstream is(path);
    check(is.good(), "read_split_list: cannot open " + path);
    std::set<std::string> ids;
    std::string line;
    while (std::getline(is, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (!line.empty()) ids.insert(line);
    }
    return ids;
}

struct SkippedClip {
    std::string id;
    std::string reason;
};

// Builds a deterministic (id-ordered) index of clips that have a complete
// original/decoded pairing at the requested QP and at least 4 frames.
inline DatasetIndex build_index(const std::string& root, int qp, const std::string& split,
                                const std::optional<std::set<std::string>>& split_ids = std::nullopt,
                                std::vector<SkippedClip>* skipped_out = nullptr) {
    namespace fs = std::filesystem;
    DatasetIndex index;
    index.split = split;
    index.qp = qp;
    index.root = root;

    const std::string orig_root = (fs::path(root) / "original").string();
    const std::string dec_root = (fs::path(root) / ("qp" + std::to_string(qp))).string();
    for (const std::string& id : scan_clip_dirs(orig_root)) {
        if (split_ids && !split_ids->count(id)) continue;
        IndexEntry e;
        e.id = id;
        e.original_dir = (fs::path(orig_root) / id).lexically_normal().string();
        e.decoded_dir = (fs::path(dec_root) / id).lexically_normal().string();
        e.frame_count = count_contiguous_frames(e.original_dir);
        if (e.frame_count < 4) {
            ++index.skipped_short;
            if (skipped_out) skipped_out->push_back({id, "fewer than 4 frames"});
            continue;
        }
        const int dec_frames = count_contiguous_frames(e.decoded_dir);
        if (dec_frames < e.frame_count) {
            ++index.skipped_incomplete;
            if (skipped_out)
                skipped_out->push_back({id, "decoded frames " + std::to_string(dec_frames) + "/" +
                                                std::to_string(e.frame_count) + " at qp" +
                                                std::to_string(qp)});
            continue;
        }
        index.entries.push_back(std::move(e));
    }
    return index;
}

inline nlohmann::json index_to_json(const DatasetIndex& index) {
    nlohmann::json j;
    j["schema"] = "vcqe.dataset_index/1";
    j["split"] = index.split;
    j["qp"] = index.qp;
    j["root"] = index.root;
    j["skipped_incomplete"] = index.skipped_incomplete;
    j["skipped_short"] = index.skipped_short;
    j["entries"] = nlohmann::json::array();
    for (const auto& e : index.entries)
        j["entries"].push_back({{"id", e.id},
                                {"original", e.original_dir},
                                {"decoded", e.decoded_dir},
                                {"frames", e.frame_count}});
    return j;
}

inline DatasetIndex index_from_json(const nlohmann::json& j) {
    check(j.value("schema", "") == "vcqe.dataset_index/1", "dataset index: unknown schema");
    DatasetIndex index;
    index.split = j.value("split", "");
    index.qp = j.value("qp", 0);
    index.root = j.value("root", "");
    index.skipped_incomplete = j.value("skipped_incomplete", 0);
    index.skipped_short = j.value("skipped_short", 0);
    for (const auto& e : j["entries"]) {
        IndexEntry entry;
        entry.id = e["id"];
        entry.original_dir = e["original"];
        entry.decoded_dir = e["decoded"];
        entry.frame_count = e["frames"];
        index.entries.push_back(std::move(entry));
    }
    return index;
}

inline void save_index(const DatasetIndex& index, const std::string& path) {
    atomic_write_file(path, index_to_json(index).dump(2) + "\n");
}

inline DatasetIndex load_index(const std::string& path) {
    return index_from_json(nlohmann::json::parse(read_text_file(path)));
}

inline std::vector<Frame> load_clip_frames(const std::string& dir, int count,
                                           FrameVariant variant) {
    std::vector<Frame> frames;
    frames.reserve(static_cast<std::size_t>(count));
    for (int t = 0; t < count; ++t) {
        frames.push_back(load_frame(dir + "/frame_" + std::to_string(t) + ".png", t,
                                    t == 0 ? FrameKind::I : FrameKind::P, variant));
    }
    return frames;
}

// One I frame plus three P frames, original and decoded, cropped at the same
// random origin.
struct TrainingSample {
    std::vector<Frame> original;
    std::vector<Frame> decoded;
    int crop_row = 0;
    int crop_col = 0;
};

inline Tensor<float> crop_tensor_at(const Tensor<float>& t, int row, int col, int h, int w) {
    check(row >= 0 && col >= 0 && row + h <= t.dim(0) && col + w <= t.dim(1),
          "crop_tensor_at: window out of bounds");
    Tensor<float> out({h, w, t.dim(2)});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < t.dim(2); ++c) out.at3(y, x, c) = t.at3(row + y, col + x, c);
    return out;
}

inline TrainingSample sample(const IndexEntry& entry, int crop, Rng& rng) {
    check(entry.frame_count >= 4, "sample: clip " + entry.id + " has fewer than 4 frames");
    TrainingSample s;
    s.original = load_clip_frames(entry.original_dir, 4, FrameVariant::original);
    s.decoded = load_clip_frames(entry.decoded_dir, 4, FrameVariant::decoded);
    const int h = s.original[0].height(), w = s.original[0].width();
    for (const auto& f : s.original)
        check(f.height() == h && f.width() == w, "sample: original frame dims drift in " + entry.id);
    for (const auto& f : s.decoded)
        check(f.height() == h && f.width() == w,
              "sample: decoded frame dims differ from original in " + entry.id);
    check(h >= crop && w >= crop, "sample: frames of " + entry.id + " (" + std::to_string(h) + "x" +
                                      std::to_string(w) + ") smaller than crop " +
                                      std::to_string(crop));
    s.crop_row = rng.uniform_int(h - crop + 1);
    s.crop_col = rng.uniform_int(w - crop + 1);
    for (auto* seq : {&s.original, &s.decoded})
        for (auto& f : *seq) f.pixels = crop_tensor_at(f.pixels, s.crop_row, s.crop_col, crop, crop);
    return s;
}

}  // namespace vcqe
