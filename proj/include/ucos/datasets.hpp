#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ucos/core.hpp"

namespace ucos {

struct DatasetRecord {
    std::filesystem::path image_path;
    std::optional<std::filesystem::path> gt_path;
    std::string dataset_name;

    // Unique across datasets; used as cache and prediction file stem.
    std::string id() const;
};

struct SplitManifest {
    uint64_t seed = 0;
    std::vector<DatasetRecord> records;
    std::map<std::string, size_t> source_counts;
};

// Expects <root>/images/*.{jpg,jpeg,png} and an optional <root>/gt/ with
// same-stem 8-bit PNGs. Records come back sorted by filename. A gt whose
// decoded size differs from its image is an error naming the file.
std::vector<DatasetRecord> scan_dataset(const std::filesystem::path& root,
                                        const std::string& name);

// per_source records sampled without replacement from each source with the
// seeded generator; cod picks first, then sod, in draw order.
SplitManifest build_training_split(const std::vector<DatasetRecord>& cod_records,
                                   const std::vector<DatasetRecord>& sod_records,
                                   uint64_t seed, size_t per_source = 300);

// Line-oriented text: header "seed=<int>", then dataset\timage\tgt per
// record (empty third field when no ground truth).
void save_manifest(const SplitManifest& manifest, const std::filesystem::path& path);
SplitManifest load_manifest(const std::filesystem::path& path);
uint64_t manifest_digest(const SplitManifest& manifest);

struct LoadedSample {
    ImageTensor image;
    std::optional<BinaryMask> gt;
};

// Image: bilinear to target size, scaled to [0,1]. Ground truth: nearest
// neighbor, then thresholded at 128/255. Values far from 0/255 in the gt
// produce a stderr warning but are thresholded anyway.
LoadedSample load_and_resize(const DatasetRecord& record, int target_h = 512,
                             int target_w = 512);

}  // namespace ucos
