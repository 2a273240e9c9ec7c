#include "ucos/datasets.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ucos/errors.hpp"
#include "ucos/hash.hpp"
#include "ucos/imageio.hpp"
#include "ucos/resize.hpp"
#include "ucos/rng.hpp"

namespace ucos {

namespace fs = std::filesystem;

std::string DatasetRecord::id() const {
    return dataset_name + "_" + image_path.stem().string();
}

namespace {

bool has_image_ext(const fs::path& p) {
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
    return e == ".jpg" || e == ".jpeg" || e == ".png";
}

}  // namespace

std::vector<DatasetRecord> scan_dataset(const fs::path& root, const std::string& name) {
    fs::path images = root / "images";
    if (!fs::is_directory(images))
        throw ValidationError("dataset root has no images/ directory: " + root.string());

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(images))
        if (entry.is_regular_file() && has_image_ext(entry.path())) files.push_back(entry.path());
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });

    fs::path gt_dir = root / "gt";
    bool have_gt_dir = fs::is_directory(gt_dir);

    std::vector<DatasetRecord> records;
    records.reserve(files.size());
    for (const auto& img : files) {
        DatasetRecord rec;
        rec.image_path = img;
        rec.dataset_name = name;
        if (have_gt_dir) {
            fs::path gt = gt_dir / (img.stem().string() + ".png");
            if (fs::is_regular_file(gt)) {
                auto [gh, gw] = read_image_size(gt);
                auto [ih, iw] = read_image_size(img);
                if (gh != ih || gw != iw)
                    throw ValidationError("ground truth size mismatch for " + gt.string() + ": gt " +
                                          std::to_string(gh) + "x" + std::to_string(gw) + " vs image " +
                                          std::to_string(ih) + "x" + std::to_string(iw));
                rec.gt_path = gt;
            }
        }
        records.push_back(std::move(rec));
    }
    return records;
}

SplitManifest build_training_split(const std::vector<DatasetRecord>& cod_records,
                                   const std::vector<DatasetRecord>& sod_records,
                                   uint64_t seed, size_t per_source) {
    auto check = [&](const std::vector<DatasetRecord>& src, const char* which) {
        if (src.size() < per_source)
            throw ValidationError(std::string("training split: source '") + which + "' has " +
                                  std::to_string(src.size()) + " records, need " +
                                  std::to_string(per_source));
    };
    check(cod_records, "cod");
    check(sod_records, "sod");

    SplitManifest manifest;
    manifest.seed = seed;
    Rng rng(seed);
    for (const auto* source : {&cod_records, &sod_records}) {
        auto picks = sample_without_replacement(source->size(), per_source, rng);
        for (size_t idx : picks) manifest.records.push_back((*source)[idx]);
    }
    for (const auto& rec : manifest.records) manifest.source_counts[rec.dataset_name]++;
    return manifest;
}

void save_manifest(const SplitManifest& manifest, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write manifest: " + path.string());
    out << "seed=" << manifest.seed << "\n";
    for (const auto& rec : manifest.records) {
        out << rec.dataset_name << "\t" << rec.image_path.string() << "\t"
            << (rec.gt_path ? rec.gt_path->string() : "") << "\n";
    }
    if (!out) throw Error("manifest write failed: " + path.string());
}

SplitManifest load_manifest(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read manifest: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("seed=", 0) != 0)
        throw ValidationError("manifest missing seed header: " + path.string());

    SplitManifest manifest;
    manifest.seed = std::stoull(line.substr(5));
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        size_t t1 = line.find('\t');
        size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        if (t1 == std::string::npos || t2 == std::string::npos)
            throw ValidationError("malformed manifest line " + std::to_string(lineno) + " in " +
                                  path.string());
        DatasetRecord rec;
        rec.dataset_name = line.substr(0, t1);
        rec.image_path = line.substr(t1 + 1, t2 - t1 - 1);
        std::string gt = line.substr(t2 + 1);
        if (!gt.empty()) rec.gt_path = fs::path(gt);
        manifest.records.push_back(std::move(rec));
    }
    for (const auto& rec : manifest.records) manifest.source_counts[rec.dataset_name]++;
    return manifest;
}

uint64_t manifest_digest(const SplitManifest& manifest) {
    Fnv64 h;
    h.update_value(manifest.seed);
    for (const auto& rec : manifest.records) {
        h.update(rec.dataset_name).update("\t");
        h.update(rec.image_path.string()).update("\t");
        h.update(rec.gt_path ? rec.gt_path->string() : "").update("\n");
    }
    return h.digest();
}

LoadedSample load_and_resize(const DatasetRecord& record, int target_h, int target_w) {
    ImageU8 raw = read_image(record.image_path);

    LoadedSample out;
    ImageTensor& img = out.image;
    img.orig_height = raw.height;
    img.orig_width = raw.width;
    img.height = target_h;
    img.width = target_w;
    img.id = record.id();

    std::vector<float> rgb(static_cast<size_t>(raw.height) * raw.width * 3);
    const float inv = 1.f / 255.f;
    size_t n = static_cast<size_t>(raw.height) * raw.width;
    if (raw.channels == 3) {
        for (size_t i = 0; i < n * 3; ++i) rgb[i] = raw.data[i] * inv;
    } else {
        for (size_t i = 0; i < n; ++i) {
            float v = raw.data[i] * inv;
            rgb[i * 3] = rgb[i * 3 + 1] = rgb[i * 3 + 2] = v;
        }
    }
    img.data.resize(static_cast<size_t>(target_h) * target_w * 3);
    bilinear_resize_multi(rgb.data(), raw.height, raw.width, img.data.data(), target_h,
                          target_w, 3);

    if (record.gt_path) {
        ImageU8 gt_raw = read_image(*record.gt_path);
        std::vector<float> gray(static_cast<size_t>(gt_raw.height) * gt_raw.width);
        size_t gn = gray.size();
        size_t midrange = 0;
        for (size_t i = 0; i < gn; ++i) {
            uint8_t v = gt_raw.data[i * gt_raw.channels];
            if (v > 32 && v < 224) ++midrange;
            gray[i] = static_cast<float>(v);
        }
        if (midrange > 0)
            std::fprintf(stderr,
                         "warning: ground truth %s has %zu pixels far from 0/255; "
                         "thresholding at 128 anyway\n",
                         record.gt_path->string().c_str(), midrange);
        BinaryMask gt(target_h, target_w);
        std::vector<float> resized(static_cast<size_t>(target_h) * target_w);
        nearest_resize(gray.data(), gt_raw.height, gt_raw.width, resized.data(), target_h,
                       target_w);
        for (size_t i = 0; i < gt.data.size(); ++i) gt.data[i] = resized[i] >= 128.f ? 1.f : 0.f;
        out.gt = std::move(gt);
    }
    return out;
}

}  // namespace ucos
