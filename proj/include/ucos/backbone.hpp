#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ucos/core.hpp"

namespace ucos {

// h x w x d grid of per-patch features from the frozen source model.
struct PatchFeatureGrid {
    int rows = 0;
    int cols = 0;
    int dim = 0;
    int patch_size = 0;
    int image_height = 0;
    int image_width = 0;
    std::vector<float> data;  // rows * cols * dim

    size_t patches() const { return static_cast<size_t>(rows) * cols; }
    float* at(int r, int c) { return data.data() + (static_cast<size_t>(r) * cols + c) * dim; }
    const float* at(int r, int c) const {
        return data.data() + (static_cast<size_t>(r) * cols + c) * dim;
    }
    float* patch(size_t idx) { return data.data() + idx * dim; }
    const float* patch(size_t idx) const { return data.data() + idx * dim; }
};

// Copy with every patch vector scaled to unit L2 norm. A zero-norm patch
// is an error naming the patch index.
PatchFeatureGrid l2_normalized(const PatchFeatureGrid& grid);

struct VitConfig {
    std::string arch;
    int patch_size = 8;
    int embed_dim = 384;
    int depth = 12;
    int num_heads = 6;
    float mlp_ratio = 4.f;
    int base_grid = 28;  // pos-embed grid at pretraining resolution
    float pixel_mean[3] = {0.485f, 0.456f, 0.406f};
    float pixel_std[3] = {0.229f, 0.224f, 0.225f};
};

// Known architecture ids; unknown ids are accepted with dimensions taken
// from the weights header (used by tests with tiny models).
std::optional<VitConfig> known_vit_config(const std::string& arch_id);

// Tensor container for the on-disk weights file. Name/shape conventions
// follow the usual ViT checkpoint layout so conversion is mechanical.
struct VitTensors {
    std::map<std::string, std::vector<float>> values;
    std::map<std::string, std::vector<int>> shapes;
};

void save_vit_weights(const std::filesystem::path& path, const VitConfig& config,
                      const VitTensors& tensors);

// Frozen ViT. Exposes the key vectors of the final self-attention block,
// one d-vector per patch.
class VitModel {
public:
    static VitModel load(const std::filesystem::path& weights_path,
                         const std::string& architecture_id);

    PatchFeatureGrid extract_patch_features(const ImageTensor& image) const;
    const VitConfig& config() const { return config_; }
    // Digest over all parameter payloads; identical files hash identically
    // and training must leave it untouched.
    uint64_t weights_digest() const { return digest_; }

private:
    VitModel() = default;

    struct BlockWeights {
        const float* norm1_w;
        const float* norm1_b;
        const float* qkv_w;
        const float* qkv_b;
        const float* proj_w;
        const float* proj_b;
        const float* norm2_w;
        const float* norm2_b;
        const float* fc1_w;
        const float* fc1_b;
        const float* fc2_w;
        const float* fc2_b;
    };

    VitConfig config_;
    VitTensors tensors_;
    std::vector<BlockWeights> blocks_;
    uint64_t digest_ = 0;

    const std::vector<float>& tensor(const std::string& name) const;
    void wire_blocks();
};

// Anything that turns an image into a patch feature grid. The trainer and
// pseudo-labeler only see this interface.
class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    virtual PatchFeatureGrid extract(const ImageTensor& image) const = 0;
    virtual int patch_size() const = 0;
    virtual int feature_dim() const = 0;
    virtual std::string name() const = 0;
    // Keys the on-disk caches; covers architecture and parameters.
    virtual uint64_t signature() const = 0;
};

class VitExtractor final : public FeatureExtractor {
public:
    explicit VitExtractor(VitModel model);
    PatchFeatureGrid extract(const ImageTensor& image) const override;
    int patch_size() const override { return model_.config().patch_size; }
    int feature_dim() const override { return model_.config().embed_dim; }
    std::string name() const override { return model_.config().arch; }
    uint64_t signature() const override;
    const VitModel& model() const { return model_; }

private:
    VitModel model_;
};

// Weights-free stand-in extractor: per-patch RGB mean and deviation,
// standardized per image and scaled by `gain`, plus a constant channel.
// Good enough for the synthetic pipelines in the test suite and as a
// weights-free baseline.
class PatchStatsExtractor final : public FeatureExtractor {
public:
    explicit PatchStatsExtractor(int patch = 8, float gain = 1.f)
        : patch_(patch), gain_(gain) {}
    PatchFeatureGrid extract(const ImageTensor& image) const override;
    int patch_size() const override { return patch_; }
    int feature_dim() const override { return 7; }
    std::string name() const override { return "patch_stats_" + std::to_string(patch_); }
    uint64_t signature() const override;

private:
    int patch_;
    float gain_;
};

// On-disk feature cache keyed by (image id, extractor signature, image size).
std::filesystem::path feature_cache_path(const std::filesystem::path& dir,
                                         const std::string& image_id, uint64_t signature,
                                         int image_h, int image_w);
std::optional<PatchFeatureGrid> load_cached_features(const std::filesystem::path& dir,
                                                     const std::string& image_id,
                                                     uint64_t signature, int image_h,
                                                     int image_w);
void store_cached_features(const std::filesystem::path& dir, const std::string& image_id,
                           uint64_t signature, const PatchFeatureGrid& grid);
PatchFeatureGrid extract_with_cache(const FeatureExtractor& extractor,
                                    const ImageTensor& image,
                                    const std::filesystem::path* cache_dir);

}  // namespace ucos
