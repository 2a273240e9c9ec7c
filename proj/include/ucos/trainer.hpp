#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ucos/backbone.hpp"
#include "ucos/datasets.hpp"
#include "ucos/fba.hpp"
#include "ucos/losses.hpp"
#include "ucos/segmenter.hpp"

namespace ucos {

struct TrainConfig {
    int epochs = 5;
    int image_h = 512;
    int image_w = 512;
    double lr_target = 5e-3;
    double lr_fba = 5e-4;
    int batch_size = 8;
    uint64_t seed = 0;
    std::string optimizer_id = "adam";
    int fba_c1 = 16;
    int fba_c2 = 8;

    void validate() const;
};

// Flat key=value text file mirroring TrainConfig; unknown keys rejected.
TrainConfig parse_train_config(const std::filesystem::path& path);
void save_train_config(const TrainConfig& config, const std::filesystem::path& path);
uint64_t config_digest(const TrainConfig& config);

// Adam moments for one parameter group.
struct AdamState {
    std::vector<float> m;
    std::vector<float> v;
    uint64_t step = 0;
};

struct ParamGroup {
    std::vector<float*> params;   // flattened views into the model
    double lr = 0.0;
};

void adam_step(const ParamGroup& group, const std::vector<float>& grads, AdamState& state);

struct Checkpoint {
    LinearHead head;
    FbaStack fba;
    AdamState adam_head;
    AdamState adam_fba;
    int epochs_completed = 0;
    uint64_t config_hash = 0;
    uint64_t manifest_hash = 0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
// force skips the config/manifest hash check on resume.
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct TrainLogEntry {
    int epoch = 0;
    int step = 0;
    double seg = 0.0;
    double adv = 0.0;
    double total = 0.0;
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<TrainLogEntry> log;
    size_t usable_samples = 0;
};

// Epoch loop over the pseudo-labeled pairs: frozen features, linear-head
// prediction, adversarial pairs, summed loss, one optimizer step per
// batch with the two learning-rate groups. Gradients reach the head both
// through the segmentation loss and, via a straight-through pass across
// the 0.5 binarization, through the adversarial branch.
TrainResult train(const TrainConfig& config, const SplitManifest& manifest,
                  const FeatureExtractor& extractor,
                  const std::map<std::string, std::filesystem::path>& pseudo_labels,
                  const std::filesystem::path* feature_cache = nullptr,
                  const Checkpoint* resume = nullptr, bool force = false);

void write_loss_log_csv(const std::vector<TrainLogEntry>& log,
                        const std::filesystem::path& path);

}  // namespace ucos
