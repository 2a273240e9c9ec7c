#include "ucos/backbone.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ucos/errors.hpp"
#include "ucos/hash.hpp"
#include "ucos/kernels.hpp"
#include "ucos/resize.hpp"

namespace ucos {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kWeightsMagic[8] = {'U', 'V', 'I', 'T', 'W', '0', '0', '1'};
constexpr float kLayerNormEps = 1e-6f;

struct TensorSpec {
    std::string name;
    std::vector<int> shape;
};

size_t numel(const std::vector<int>& shape) {
    size_t n = 1;
    for (int s : shape) n *= static_cast<size_t>(s);
    return n;
}

std::string shape_str(const std::vector<int>& shape) {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

std::vector<TensorSpec> expected_tensors(const VitConfig& c) {
    const int d = c.embed_dim;
    const int m = static_cast<int>(std::lround(c.embed_dim * c.mlp_ratio));
    const int p = c.patch_size;
    std::vector<TensorSpec> specs;
    specs.push_back({"patch_embed.weight", {d, 3 * p * p}});
    specs.push_back({"patch_embed.bias", {d}});
    specs.push_back({"cls_token", {d}});
    specs.push_back({"pos_embed", {1 + c.base_grid * c.base_grid, d}});
    for (int i = 0; i < c.depth; ++i) {
        std::string b = "blocks." + std::to_string(i) + ".";
        specs.push_back({b + "norm1.weight", {d}});
        specs.push_back({b + "norm1.bias", {d}});
        specs.push_back({b + "attn.qkv.weight", {3 * d, d}});
        specs.push_back({b + "attn.qkv.bias", {3 * d}});
        specs.push_back({b + "attn.proj.weight", {d, d}});
        specs.push_back({b + "attn.proj.bias", {d}});
        specs.push_back({b + "norm2.weight", {d}});
        specs.push_back({b + "norm2.bias", {d}});
        specs.push_back({b + "mlp.fc1.weight", {m, d}});
        specs.push_back({b + "mlp.fc1.bias", {m}});
        specs.push_back({b + "mlp.fc2.weight", {d, m}});
        specs.push_back({b + "mlp.fc2.bias", {d}});
    }
    return specs;
}

void layer_norm(const float* x, const float* w, const float* b, float* out, int d) {
    float mean = kernels::sum(x, d) / d;
    float var = 0.f;
    for (int i = 0; i < d; ++i) {
        float c = x[i] - mean;
        var += c * c;
    }
    var /= d;
    float inv = 1.f / std::sqrt(var + kLayerNormEps);
    for (int i = 0; i < d; ++i) out[i] = (x[i] - mean) * inv * w[i] + b[i];
}

void add_bias_rows(float* x, const float* bias, size_t rows, size_t cols) {
    for (size_t r = 0; r < rows; ++r) kernels::axpy(1.f, bias, x + r * cols, cols);
}

float gelu(float x) { return 0.5f * x * (1.f + std::erff(x * 0.70710678118654752f)); }

}  // namespace

PatchFeatureGrid l2_normalized(const PatchFeatureGrid& grid) {
    PatchFeatureGrid out = grid;
    for (size_t p = 0; p < out.patches(); ++p) {
        float* f = out.patch(p);
        float norm2 = kernels::dot(f, f, out.dim);
        if (!(norm2 > 0.f))
            throw ValidationError("zero-norm feature vector at patch index " + std::to_string(p));
        kernels::scale(f, 1.f / std::sqrt(norm2), out.dim);
    }
    return out;
}

std::optional<VitConfig> known_vit_config(const std::string& arch_id) {
    if (arch_id == "vit_small_8") {
        VitConfig c;
        c.arch = arch_id;
        c.patch_size = 8;
        c.embed_dim = 384;
        c.depth = 12;
        c.num_heads = 6;
        c.base_grid = 28;
        return c;
    }
    if (arch_id == "vit_base_8") {
        VitConfig c;
        c.arch = arch_id;
        c.patch_size = 8;
        c.embed_dim = 768;
        c.depth = 12;
        c.num_heads = 12;
        c.base_grid = 28;
        return c;
    }
    return std::nullopt;
}

void save_vit_weights(const fs::path& path, const VitConfig& config,
                      const VitTensors& tensors) {
    json header;
    header["arch"] = config.arch;
    header["patch_size"] = config.patch_size;
    header["embed_dim"] = config.embed_dim;
    header["depth"] = config.depth;
    header["num_heads"] = config.num_heads;
    header["mlp_ratio"] = config.mlp_ratio;
    header["base_grid"] = config.base_grid;
    header["pixel_mean"] = {config.pixel_mean[0], config.pixel_mean[1], config.pixel_mean[2]};
    header["pixel_std"] = {config.pixel_std[0], config.pixel_std[1], config.pixel_std[2]};

    json tlist = json::array();
    size_t offset = 0;
    for (const auto& [name, values] : tensors.values) {
        auto it = tensors.shapes.find(name);
        if (it == tensors.shapes.end())
            throw Error("save_vit_weights: tensor without shape: " + name);
        if (numel(it->second) != values.size())
            throw Error("save_vit_weights: shape/payload mismatch for " + name);
        json t;
        t["name"] = name;
        t["shape"] = it->second;
        t["offset"] = offset;
        tlist.push_back(t);
        offset += values.size() * sizeof(float);
    }
    header["tensors"] = tlist;

    std::string hs = header.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write weights file: " + path.string());
    out.write(kWeightsMagic, sizeof(kWeightsMagic));
    uint32_t hlen = static_cast<uint32_t>(hs.size());
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(hs.data(), hs.size());
    for (const auto& [name, values] : tensors.values)
        out.write(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(float));
    if (!out) throw Error("weights write failed: " + path.string());
}

const std::vector<float>& VitModel::tensor(const std::string& name) const {
    auto it = tensors_.values.find(name);
    if (it == tensors_.values.end()) throw Error("missing tensor at runtime: " + name);
    return it->second;
}

void VitModel::wire_blocks() {
    blocks_.clear();
    blocks_.reserve(config_.depth);
    for (int i = 0; i < config_.depth; ++i) {
        std::string b = "blocks." + std::to_string(i) + ".";
        BlockWeights w;
        w.norm1_w = tensor(b + "norm1.weight").data();
        w.norm1_b = tensor(b + "norm1.bias").data();
        w.qkv_w = tensor(b + "attn.qkv.weight").data();
        w.qkv_b = tensor(b + "attn.qkv.bias").data();
        w.proj_w = tensor(b + "attn.proj.weight").data();
        w.proj_b = tensor(b + "attn.proj.bias").data();
        w.norm2_w = tensor(b + "norm2.weight").data();
        w.norm2_b = tensor(b + "norm2.bias").data();
        w.fc1_w = tensor(b + "mlp.fc1.weight").data();
        w.fc1_b = tensor(b + "mlp.fc1.bias").data();
        w.fc2_w = tensor(b + "mlp.fc2.weight").data();
        w.fc2_b = tensor(b + "mlp.fc2.bias").data();
        blocks_.push_back(w);
    }
}

VitModel VitModel::load(const fs::path& weights_path, const std::string& architecture_id) {
    std::ifstream in(weights_path, std::ios::binary);
    if (!in) throw ValidationError("weights file does not exist: " + weights_path.string());

    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kWeightsMagic, sizeof(magic)) != 0)
        throw ValidationError("not a ViT weights file: " + weights_path.string());

    uint32_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    if (!in) throw ValidationError("truncated weights header: " + weights_path.string());
    std::string hs(hlen, '\0');
    in.read(hs.data(), hlen);
    if (!in) throw ValidationError("truncated weights header: " + weights_path.string());

    json header;
    try {
        header = json::parse(hs);
    } catch (const json::exception& e) {
        throw ValidationError("corrupt weights header in " + weights_path.string() + ": " +
                              e.what());
    }

    VitModel model;
    VitConfig& c = model.config_;
    c.arch = header.at("arch").get<std::string>();
    c.patch_size = header.at("patch_size").get<int>();
    c.embed_dim = header.at("embed_dim").get<int>();
    c.depth = header.at("depth").get<int>();
    c.num_heads = header.at("num_heads").get<int>();
    c.mlp_ratio = header.at("mlp_ratio").get<float>();
    c.base_grid = header.at("base_grid").get<int>();
    if (header.contains("pixel_mean"))
        for (int i = 0; i < 3; ++i) c.pixel_mean[i] = header["pixel_mean"][i].get<float>();
    if (header.contains("pixel_std"))
        for (int i = 0; i < 3; ++i) c.pixel_std[i] = header["pixel_std"][i].get<float>();

    if (c.arch != architecture_id)
        throw ValidationError("weights file is for arch '" + c.arch + "', requested '" +
                              architecture_id + "'");
    if (auto reg = known_vit_config(architecture_id)) {
        if (reg->patch_size != c.patch_size || reg->embed_dim != c.embed_dim ||
            reg->depth != c.depth || reg->num_heads != c.num_heads)
            throw ValidationError("weights header dimensions do not match registered arch '" +
                                  architecture_id + "'");
    }
    if (c.embed_dim <= 0 || c.depth <= 0 || c.num_heads <= 0 || c.patch_size <= 0 ||
        c.embed_dim % c.num_heads != 0)
        throw ValidationError("invalid architecture dimensions in weights header");

    std::map<std::string, std::pair<std::vector<int>, size_t>> available;  // shape, offset
    for (const auto& t : header.at("tensors")) {
        available[t.at("name").get<std::string>()] = {t.at("shape").get<std::vector<int>>(),
                                                      t.at("offset").get<size_t>()};
    }

    std::vector<std::string> problems;
    auto specs = expected_tensors(c);
    for (const auto& spec : specs) {
        auto it = available.find(spec.name);
        if (it == available.end()) {
            problems.push_back(spec.name + " (missing)");
        } else if (it->second.first != spec.shape) {
            problems.push_back(spec.name + " (expected " + shape_str(spec.shape) + ", got " +
                               shape_str(it->second.first) + ")");
        }
    }
    if (!problems.empty()) {
        std::string msg = "weights/architecture mismatch in " + weights_path.string() + ":";
        for (const auto& p : problems) msg += "\n  " + p;
        throw ValidationError(msg);
    }

    size_t payload_start = sizeof(kWeightsMagic) + sizeof(hlen) + hlen;
    for (const auto& spec : specs) {
        const auto& [shape, offset] = available[spec.name];
        size_t n = numel(shape);
        std::vector<float> values(n);
        in.seekg(static_cast<std::streamoff>(payload_start + offset));
        in.read(reinterpret_cast<char*>(values.data()), n * sizeof(float));
        if (!in)
            throw ValidationError("truncated weights payload reading " + spec.name + " from " +
                                  weights_path.string());
        model.tensors_.values[spec.name] = std::move(values);
        model.tensors_.shapes[spec.name] = shape;
    }

    Fnv64 digest;
    for (const auto& [name, values] : model.tensors_.values) {
        digest.update(name);
        digest.update(values.data(), values.size() * sizeof(float));
    }
    model.digest_ = digest.digest();
    model.wire_blocks();
    return model;
}

PatchFeatureGrid VitModel::extract_patch_features(const ImageTensor& image) const {
    const VitConfig& c = config_;
    const int p = c.patch_size;
    if (image.height % p != 0 || image.width % p != 0)
        throw ValidationError("image dimensions " + std::to_string(image.height) + "x" +
                              std::to_string(image.width) + " not divisible by patch size " +
                              std::to_string(p));
    const int gh = image.height / p;
    const int gw = image.width / p;
    const size_t n_patches = static_cast<size_t>(gh) * gw;
    const size_t tokens = n_patches + 1;
    const int d = c.embed_dim;
    const int heads = c.num_heads;
    const int hd = d / heads;
    const int m = static_cast<int>(std::lround(d * c.mlp_ratio));

    // Patch embedding: flatten each patch in (channel, y, x) order after
    // pixel normalization, then one linear map.
    std::vector<float> patches(n_patches * 3 * p * p);
    for (int gy = 0; gy < gh; ++gy) {
        for (int gx = 0; gx < gw; ++gx) {
            float* v = patches.data() + (static_cast<size_t>(gy) * gw + gx) * 3 * p * p;
            for (int ch = 0; ch < 3; ++ch) {
                float mean = c.pixel_mean[ch];
                float inv_std = 1.f / c.pixel_std[ch];
                for (int py = 0; py < p; ++py) {
                    const float* row = image.px(gy * p + py, gx * p);
                    for (int px = 0; px < p; ++px)
                        v[ch * p * p + py * p + px] = (row[px * 3 + ch] - mean) * inv_std;
                }
            }
        }
    }

    std::vector<float> x(tokens * d);
    const auto& pe_w = tensor("patch_embed.weight");
    const auto& pe_b = tensor("patch_embed.bias");
    kernels::gemm_nt(n_patches, d, 3 * p * p, patches.data(), 3 * p * p, pe_w.data(),
                     3 * p * p, 0.f, x.data() + d, d);
    add_bias_rows(x.data() + d, pe_b.data(), n_patches, d);

    const auto& cls = tensor("cls_token");
    std::memcpy(x.data(), cls.data(), d * sizeof(float));

    // Positional embeddings; the patch part is resized when the grid
    // differs from the pretraining grid.
    const auto& pos = tensor("pos_embed");
    kernels::axpy(1.f, pos.data(), x.data(), d);
    if (gh == c.base_grid && gw == c.base_grid) {
        for (size_t t = 0; t < n_patches; ++t)
            kernels::axpy(1.f, pos.data() + (1 + t) * d, x.data() + (1 + t) * d, d);
    } else {
        std::vector<float> interp(n_patches * d);
        bilinear_resize_multi(pos.data() + d, c.base_grid, c.base_grid, interp.data(), gh, gw,
                              d);
        for (size_t t = 0; t < n_patches; ++t)
            kernels::axpy(1.f, interp.data() + t * d, x.data() + (1 + t) * d, d);
    }

    std::vector<float> normed(tokens * d);
    std::vector<float> qkv(tokens * 3 * d);
    std::vector<float> scores(tokens * tokens);
    std::vector<float> concat(tokens * d);
    std::vector<float> proj(tokens * d);
    std::vector<float> hidden(tokens * m);
    const float attn_scale = 1.f / std::sqrt(static_cast<float>(hd));

    for (int layer = 0; layer < c.depth; ++layer) {
        const BlockWeights& w = blocks_[layer];
        for (size_t t = 0; t < tokens; ++t)
            layer_norm(x.data() + t * d, w.norm1_w, w.norm1_b, normed.data() + t * d, d);

        if (layer == c.depth - 1) {
            // Final block: the features are the attention keys.
            PatchFeatureGrid grid;
            grid.rows = gh;
            grid.cols = gw;
            grid.dim = d;
            grid.patch_size = p;
            grid.image_height = image.height;
            grid.image_width = image.width;
            grid.data.resize(n_patches * d);
            kernels::gemm_nt(n_patches, d, d, normed.data() + d, d,
                             w.qkv_w + static_cast<size_t>(d) * d, d, 0.f, grid.data.data(), d);
            add_bias_rows(grid.data.data(), w.qkv_b + d, n_patches, d);
            return grid;
        }

        kernels::gemm_nt(tokens, 3 * d, d, normed.data(), d, w.qkv_w, d, 0.f, qkv.data(),
                         3 * d);
        add_bias_rows(qkv.data(), w.qkv_b, tokens, 3 * d);

        for (int h = 0; h < heads; ++h) {
            const float* q = qkv.data() + static_cast<size_t>(h) * hd;
            const float* k = qkv.data() + d + static_cast<size_t>(h) * hd;
            const float* v = qkv.data() + 2 * static_cast<size_t>(d) + static_cast<size_t>(h) * hd;
            kernels::gemm_nt(tokens, tokens, hd, q, 3 * d, k, 3 * d, 0.f, scores.data(), tokens);
            kernels::scale(scores.data(), attn_scale, tokens * tokens);
            for (size_t t = 0; t < tokens; ++t) {
                float* row = scores.data() + t * tokens;
                float mx = kernels::max_value(row, tokens);
                for (size_t j = 0; j < tokens; ++j) row[j] -= mx;
                kernels::vexp(row, row, tokens);
                float s = kernels::sum(row, tokens);
                kernels::scale(row, 1.f / s, tokens);
            }
            kernels::gemm_nn(tokens, hd, tokens, scores.data(), tokens, v, 3 * d, 0.f,
                             concat.data() + static_cast<size_t>(h) * hd, d);
        }

        kernels::gemm_nt(tokens, d, d, concat.data(), d, w.proj_w, d, 0.f, proj.data(), d);
        add_bias_rows(proj.data(), w.proj_b, tokens, d);
        kernels::axpy(1.f, proj.data(), x.data(), tokens * d);

        for (size_t t = 0; t < tokens; ++t)
            layer_norm(x.data() + t * d, w.norm2_w, w.norm2_b, normed.data() + t * d, d);
        kernels::gemm_nt(tokens, m, d, normed.data(), d, w.fc1_w, d, 0.f, hidden.data(), m);
        add_bias_rows(hidden.data(), w.fc1_b, tokens, m);
        for (float& h : hidden) h = gelu(h);
        kernels::gemm_nt(tokens, d, m, hidden.data(), m, w.fc2_w, m, 0.f, proj.data(), d);
        add_bias_rows(proj.data(), w.fc2_b, tokens, d);
        kernels::axpy(1.f, proj.data(), x.data(), tokens * d);
    }
    throw Error("unreachable: depth must be >= 1");
}

VitExtractor::VitExtractor(VitModel model) : model_(std::move(model)) {}

PatchFeatureGrid VitExtractor::extract(const ImageTensor& image) const {
    return model_.extract_patch_features(image);
}

uint64_t VitExtractor::signature() const {
    Fnv64 h;
    h.update(model_.config().arch);
    h.update("keys_last");
    h.update_value(model_.weights_digest());
    return h.digest();
}

PatchFeatureGrid PatchStatsExtractor::extract(const ImageTensor& image) const {
    const int p = patch_;
    if (image.height % p != 0 || image.width % p != 0)
        throw ValidationError("image dimensions not divisible by patch size " +
                              std::to_string(p));
    const int gh = image.height / p;
    const int gw = image.width / p;
    const int d = feature_dim();

    PatchFeatureGrid grid;
    grid.rows = gh;
    grid.cols = gw;
    grid.dim = d;
    grid.patch_size = p;
    grid.image_height = image.height;
    grid.image_width = image.width;
    grid.data.assign(static_cast<size_t>(gh) * gw * d, 0.f);

    const float inv_count = 1.f / (p * p);
    for (int gy = 0; gy < gh; ++gy) {
        for (int gx = 0; gx < gw; ++gx) {
            double sum[3] = {0, 0, 0}, sum2[3] = {0, 0, 0};
            for (int py = 0; py < p; ++py) {
                const float* row = image.px(gy * p + py, gx * p);
                for (int px = 0; px < p; ++px) {
                    for (int ch = 0; ch < 3; ++ch) {
                        float v = row[px * 3 + ch];
                        sum[ch] += v;
                        sum2[ch] += static_cast<double>(v) * v;
                    }
                }
            }
            float* f = grid.at(gy, gx);
            for (int ch = 0; ch < 3; ++ch) {
                double mean = sum[ch] * inv_count;
                double var = std::max(0.0, sum2[ch] * inv_count - mean * mean);
                f[ch] = static_cast<float>(mean);
                f[3 + ch] = static_cast<float>(std::sqrt(var));
            }
        }
    }

    // Standardize the statistics per image: centering keeps cosine
    // affinities from collapsing toward +1, unit variance gives the linear
    // head inputs on a learnable scale.
    size_t n = grid.patches();
    for (int ch = 0; ch < 6; ++ch) {
        double mean = 0;
        for (size_t i = 0; i < n; ++i) mean += grid.patch(i)[ch];
        mean /= static_cast<double>(n);
        double var = 0;
        for (size_t i = 0; i < n; ++i) {
            double c = grid.patch(i)[ch] - mean;
            var += c * c;
        }
        double scale = gain_ / std::max(std::sqrt(var / static_cast<double>(n)), 1e-6);
        for (size_t i = 0; i < n; ++i)
            grid.patch(i)[ch] = static_cast<float>((grid.patch(i)[ch] - mean) * scale);
    }
    for (size_t i = 0; i < n; ++i) grid.patch(i)[6] = 0.1f;
    return grid;
}

uint64_t PatchStatsExtractor::signature() const {
    Fnv64 h;
    h.update("patch_stats_v2");
    h.update_value(patch_);
    h.update_value(gain_);
    return h.digest();
}

// ---- feature cache --------------------------------------------------------

namespace {

constexpr char kFeatMagic[8] = {'U', 'C', 'F', 'E', 'A', 'T', '0', '1'};

struct FeatHeader {
    char magic[8];
    uint32_t rows, cols, dim, patch_size;
    uint32_t image_h, image_w;
    uint32_t dtype;  // 0 = float32
    uint32_t pad = 0;
    uint64_t signature;
};

}  // namespace

fs::path feature_cache_path(const fs::path& dir, const std::string& image_id,
                            uint64_t signature, int image_h, int image_w) {
    return dir / to_hex(signature) /
           (image_id + "_" + std::to_string(image_h) + "x" + std::to_string(image_w) + ".feat");
}

std::optional<PatchFeatureGrid> load_cached_features(const fs::path& dir,
                                                     const std::string& image_id,
                                                     uint64_t signature, int image_h,
                                                     int image_w) {
    fs::path path = feature_cache_path(dir, image_id, signature, image_h, image_w);
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    FeatHeader h;
    in.read(reinterpret_cast<char*>(&h), sizeof(h));
    if (!in || std::memcmp(h.magic, kFeatMagic, 8) != 0 || h.dtype != 0 ||
        h.signature != signature || h.image_h != static_cast<uint32_t>(image_h) ||
        h.image_w != static_cast<uint32_t>(image_w))
        return std::nullopt;
    PatchFeatureGrid grid;
    grid.rows = static_cast<int>(h.rows);
    grid.cols = static_cast<int>(h.cols);
    grid.dim = static_cast<int>(h.dim);
    grid.patch_size = static_cast<int>(h.patch_size);
    grid.image_height = image_h;
    grid.image_width = image_w;
    grid.data.resize(static_cast<size_t>(h.rows) * h.cols * h.dim);
    in.read(reinterpret_cast<char*>(grid.data.data()), grid.data.size() * sizeof(float));
    if (!in) return std::nullopt;
    return grid;
}

void store_cached_features(const fs::path& dir, const std::string& image_id,
                           uint64_t signature, const PatchFeatureGrid& grid) {
    fs::path path = feature_cache_path(dir, image_id, signature, grid.image_height,
                                       grid.image_width);
    fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp" + std::to_string(static_cast<unsigned long>(::getpid()));
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw Error("cannot write feature cache entry: " + tmp.string());
        FeatHeader h{};
        std::memcpy(h.magic, kFeatMagic, 8);
        h.rows = static_cast<uint32_t>(grid.rows);
        h.cols = static_cast<uint32_t>(grid.cols);
        h.dim = static_cast<uint32_t>(grid.dim);
        h.patch_size = static_cast<uint32_t>(grid.patch_size);
        h.image_h = static_cast<uint32_t>(grid.image_height);
        h.image_w = static_cast<uint32_t>(grid.image_width);
        h.dtype = 0;
        h.signature = signature;
        out.write(reinterpret_cast<const char*>(&h), sizeof(h));
        out.write(reinterpret_cast<const char*>(grid.data.data()),
                  grid.data.size() * sizeof(float));
        if (!out) throw Error("feature cache write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw Error("feature cache rename failed: " + ec.message());
    }
}

PatchFeatureGrid extract_with_cache(const FeatureExtractor& extractor,
                                    const ImageTensor& image, const fs::path* cache_dir) {
    if (cache_dir) {
        auto cached = load_cached_features(*cache_dir, image.id, extractor.signature(),
                                           image.height, image.width);
        if (cached) return std::move(*cached);
    }
    PatchFeatureGrid grid = extractor.extract(image);
    if (cache_dir) store_cached_features(*cache_dir, image.id, extractor.signature(), grid);
    return grid;
}

}  // namespace ucos
