#include "ucos/trainer.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ucos/errors.hpp"
#include "ucos/hash.hpp"
#include "ucos/imageio.hpp"
#include "ucos/rng.hpp"

namespace ucos {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
    if (epochs < 1) throw ValidationError("config: epochs must be >= 1");
    if (image_h <= 0 || image_w <= 0) throw ValidationError("config: image size must be positive");
    if (!(lr_target > 0) || !(lr_fba > 0))
        throw ValidationError("config: learning rates must be positive");
    if (batch_size < 1) throw ValidationError("config: batch_size must be >= 1");
    if (fba_c1 < 1 || fba_c2 < 1) throw ValidationError("config: fba channels must be >= 1");
    if (optimizer_id != "adam")
        throw ValidationError("config: unknown optimizer_id '" + optimizer_id + "'");
}

TrainConfig parse_train_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read config: " + path.string());
    TrainConfig cfg;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config line " + std::to_string(lineno) + " is not key=value");
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        try {
            if (key == "epochs") cfg.epochs = std::stoi(value);
            else if (key == "image_h") cfg.image_h = std::stoi(value);
            else if (key == "image_w") cfg.image_w = std::stoi(value);
            else if (key == "lr_target") cfg.lr_target = std::stod(value);
            else if (key == "lr_fba") cfg.lr_fba = std::stod(value);
            else if (key == "batch_size") cfg.batch_size = std::stoi(value);
            else if (key == "seed") cfg.seed = std::stoull(value);
            else if (key == "optimizer_id") cfg.optimizer_id = value;
            else if (key == "fba_c1") cfg.fba_c1 = std::stoi(value);
            else if (key == "fba_c2") cfg.fba_c2 = std::stoi(value);
            else
                throw ValidationError("config: unknown key '" + key + "' at line " +
                                      std::to_string(lineno));
        } catch (const std::invalid_argument&) {
            throw ValidationError("config: bad value for '" + key + "' at line " +
                                  std::to_string(lineno));
        }
    }
    cfg.validate();
    return cfg;
}

void save_train_config(const TrainConfig& config, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write config: " + path.string());
    out << "epochs=" << config.epochs << "\n";
    out << "image_h=" << config.image_h << "\n";
    out << "image_w=" << config.image_w << "\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", config.lr_target);
    out << "lr_target=" << buf << "\n";
    std::snprintf(buf, sizeof(buf), "%.17g", config.lr_fba);
    out << "lr_fba=" << buf << "\n";
    out << "batch_size=" << config.batch_size << "\n";
    out << "seed=" << config.seed << "\n";
    out << "optimizer_id=" << config.optimizer_id << "\n";
    out << "fba_c1=" << config.fba_c1 << "\n";
    out << "fba_c2=" << config.fba_c2 << "\n";
}

uint64_t config_digest(const TrainConfig& config) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "cfg1|epochs=%d|size=%dx%d|lrt=%.17g|lrf=%.17g|bs=%d|seed=%llu|opt=%s|c1=%d|c2=%d",
                  config.epochs, config.image_h, config.image_w, config.lr_target,
                  config.lr_fba, config.batch_size,
                  static_cast<unsigned long long>(config.seed), config.optimizer_id.c_str(),
                  config.fba_c1, config.fba_c2);
    return fnv64(std::string(buf));
}

void adam_step(const ParamGroup& group, const std::vector<float>& grads, AdamState& state) {
    const size_t n = group.params.size();
    if (grads.size() != n) throw Error("adam_step: gradient count mismatch");
    if (state.m.size() != n) {
        state.m.assign(n, 0.f);
        state.v.assign(n, 0.f);
        state.step = 0;
    }
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    state.step++;
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (size_t i = 0; i < n; ++i) {
        double g = grads[i];
        double m = beta1 * state.m[i] + (1.0 - beta1) * g;
        double v = beta2 * state.v[i] + (1.0 - beta2) * g * g;
        state.m[i] = static_cast<float>(m);
        state.v[i] = static_cast<float>(v);
        double update = group.lr * (m / bc1) / (std::sqrt(v / bc2) + eps);
        *group.params[i] -= static_cast<float>(update);
    }
}

// ---- checkpoint -----------------------------------------------------------

namespace {

constexpr char kCkptMagic[8] = {'U', 'C', 'K', 'P', 'T', '0', '0', '1'};

void put_bytes(std::string& buf, const void* data, size_t n) {
    buf.append(static_cast<const char*>(data), n);
}

template <typename T>
void put_value(std::string& buf, const T& v) {
    put_bytes(buf, &v, sizeof(T));
}

void put_floats(std::string& buf, const std::vector<float>& v) {
    uint64_t n = v.size();
    put_value(buf, n);
    put_bytes(buf, v.data(), v.size() * sizeof(float));
}

struct Reader {
    const std::string& buf;
    size_t pos = 0;
    explicit Reader(const std::string& b) : buf(b) {}
    void read(void* out, size_t n) {
        if (pos + n > buf.size()) throw ValidationError("checkpoint truncated");
        std::memcpy(out, buf.data() + pos, n);
        pos += n;
    }
    template <typename T>
    T value() {
        T v;
        read(&v, sizeof(T));
        return v;
    }
    std::vector<float> floats() {
        uint64_t n = value<uint64_t>();
        if (pos + n * sizeof(float) > buf.size()) throw ValidationError("checkpoint truncated");
        std::vector<float> v(n);
        read(v.data(), n * sizeof(float));
        return v;
    }
};

void put_adam(std::string& buf, const AdamState& s) {
    put_value(buf, s.step);
    put_floats(buf, s.m);
    put_floats(buf, s.v);
}

AdamState read_adam(Reader& r) {
    AdamState s;
    s.step = r.value<uint64_t>();
    s.m = r.floats();
    s.v = r.floats();
    return s;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
    std::string buf;
    put_bytes(buf, kCkptMagic, sizeof(kCkptMagic));
    put_value(buf, static_cast<uint32_t>(1));  // version
    put_value(buf, ckpt.config_hash);
    put_value(buf, ckpt.manifest_hash);
    put_value(buf, static_cast<uint32_t>(ckpt.epochs_completed));
    put_value(buf, static_cast<uint32_t>(ckpt.head.weight.size()));
    put_value(buf, static_cast<uint32_t>(ckpt.fba.cfg.c1));
    put_value(buf, static_cast<uint32_t>(ckpt.fba.cfg.c2));
    put_value(buf, ckpt.fba.cfg.negative_slope);
    put_floats(buf, ckpt.head.weight);
    put_value(buf, ckpt.head.bias);
    put_floats(buf, ckpt.fba.w1);
    put_floats(buf, ckpt.fba.b1);
    put_floats(buf, ckpt.fba.w2);
    put_floats(buf, ckpt.fba.b2);
    put_floats(buf, ckpt.fba.w3);
    put_value(buf, ckpt.fba.b3);
    put_adam(buf, ckpt.adam_head);
    put_adam(buf, ckpt.adam_fba);
    uint64_t digest = fnv64(buf.data(), buf.size());
    put_value(buf, digest);

    fs::path tmp = path;
    tmp += ".tmp" + std::to_string(static_cast<unsigned long>(::getpid()));
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw ValidationError("cannot write checkpoint: " + path.string());
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (!out) throw Error("checkpoint write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw Error("checkpoint rename failed: " + ec.message());
    }
}

Checkpoint load_checkpoint(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read checkpoint: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    std::string buf = ss.str();
    if (buf.size() < sizeof(kCkptMagic) + sizeof(uint64_t))
        throw ValidationError("checkpoint truncated: " + path.string());

    uint64_t stored_digest;
    std::memcpy(&stored_digest, buf.data() + buf.size() - sizeof(uint64_t), sizeof(uint64_t));
    uint64_t computed = fnv64(buf.data(), buf.size() - sizeof(uint64_t));
    if (stored_digest != computed)
        throw ValidationError("checkpoint digest mismatch (corrupt file): " + path.string());

    Reader r(buf);
    char magic[8];
    r.read(magic, sizeof(magic));
    if (std::memcmp(magic, kCkptMagic, sizeof(magic)) != 0)
        throw ValidationError("not a checkpoint file: " + path.string());
    uint32_t version = r.value<uint32_t>();
    if (version != 1) throw ValidationError("unsupported checkpoint version");

    Checkpoint ckpt;
    ckpt.config_hash = r.value<uint64_t>();
    ckpt.manifest_hash = r.value<uint64_t>();
    ckpt.epochs_completed = static_cast<int>(r.value<uint32_t>());
    uint32_t dim = r.value<uint32_t>();
    ckpt.fba.cfg.c1 = static_cast<int>(r.value<uint32_t>());
    ckpt.fba.cfg.c2 = static_cast<int>(r.value<uint32_t>());
    ckpt.fba.cfg.negative_slope = r.value<float>();
    ckpt.head.weight = r.floats();
    if (ckpt.head.weight.size() != dim) throw ValidationError("checkpoint head dimension corrupt");
    ckpt.head.bias = r.value<float>();
    ckpt.fba.w1 = r.floats();
    ckpt.fba.b1 = r.floats();
    ckpt.fba.w2 = r.floats();
    ckpt.fba.b2 = r.floats();
    ckpt.fba.w3 = r.floats();
    ckpt.fba.b3 = r.value<float>();
    ckpt.adam_head = read_adam(r);
    ckpt.adam_fba = read_adam(r);
    return ckpt;
}

// ---- training loop ----------------------------------------------------------

namespace {

BinaryMask load_pseudo_label_png(const fs::path& path, int expect_h, int expect_w) {
    ImageU8 img = read_image(path);
    if (img.height != expect_h || img.width != expect_w)
        throw ValidationError("pseudo-label size mismatch: " + path.string());
    BinaryMask mask(img.height, img.width);
    for (size_t i = 0; i < mask.data.size(); ++i)
        mask.data[i] = img.data[i * img.channels] >= 128 ? 1.f : 0.f;
    return mask;
}

std::vector<float> flatten_head_grad(const HeadGrad& g) {
    std::vector<float> out(g.weight);
    out.push_back(g.bias);
    return out;
}

std::vector<float> flatten_fba_grad(const FbaGrad& g) {
    std::vector<float> out;
    out.reserve(g.w1.size() + g.b1.size() + g.w2.size() + g.b2.size() + g.w3.size() + 1);
    auto append = [&](const std::vector<float>& v) { out.insert(out.end(), v.begin(), v.end()); };
    append(g.w1);
    append(g.b1);
    append(g.w2);
    append(g.b2);
    append(g.w3);
    out.push_back(g.b3);
    return out;
}

ParamGroup head_group(LinearHead& head, double lr) {
    ParamGroup g;
    g.lr = lr;
    g.params.reserve(head.weight.size() + 1);
    for (float& w : head.weight) g.params.push_back(&w);
    g.params.push_back(&head.bias);
    return g;
}

ParamGroup fba_group(FbaStack& fba, double lr) {
    ParamGroup g;
    g.lr = lr;
    g.params.reserve(fba.parameter_count());
    auto append = [&](std::vector<float>& v) {
        for (float& x : v) g.params.push_back(&x);
    };
    append(fba.w1);
    append(fba.b1);
    append(fba.w2);
    append(fba.b2);
    append(fba.w3);
    g.params.push_back(&fba.b3);
    return g;
}

}  // namespace

TrainResult train(const TrainConfig& config, const SplitManifest& manifest,
                  const FeatureExtractor& extractor,
                  const std::map<std::string, fs::path>& pseudo_labels,
                  const fs::path* feature_cache, const Checkpoint* resume, bool force) {
    config.validate();

    std::vector<size_t> usable;
    for (size_t i = 0; i < manifest.records.size(); ++i)
        if (pseudo_labels.count(manifest.records[i].id())) usable.push_back(i);
    if (usable.empty())
        throw ValidationError("empty usable training set: no cached pseudo-labels match the manifest");

    const uint64_t cfg_hash = config_digest(config);
    const uint64_t man_hash = manifest_digest(manifest);

    TrainResult result;
    Checkpoint& ckpt = result.checkpoint;
    int start_epoch = 0;
    if (resume) {
        if (!force) {
            if (resume->config_hash != cfg_hash)
                throw ValidationError("resume: config hash mismatch (use force to override)");
            if (resume->manifest_hash != man_hash)
                throw ValidationError("resume: split-manifest hash mismatch (use force to override)");
        }
        if (resume->head.weight.size() != static_cast<size_t>(extractor.feature_dim()))
            throw ValidationError("resume: checkpoint head dimension " +
                                  std::to_string(resume->head.weight.size()) +
                                  " does not match feature dimension " +
                                  std::to_string(extractor.feature_dim()));
        ckpt = *resume;
        start_epoch = resume->epochs_completed;
        if (start_epoch >= config.epochs)
            throw ValidationError("resume: checkpoint already has " +
                                  std::to_string(start_epoch) + " epochs of " +
                                  std::to_string(config.epochs));
    } else {
        ckpt.head = init_head(extractor.feature_dim(), config.seed);
        FbaConfig fcfg;
        fcfg.c1 = config.fba_c1;
        fcfg.c2 = config.fba_c2;
        ckpt.fba = init_fba(fcfg, config.seed + 1);
    }
    ckpt.config_hash = cfg_hash;
    ckpt.manifest_hash = man_hash;

    // Exactly two parameter groups, one per learning rate.
    ParamGroup g_head = head_group(ckpt.head, config.lr_target);
    ParamGroup g_fba = fba_group(ckpt.fba, config.lr_fba);

    result.usable_samples = usable.size();

    for (int epoch = start_epoch; epoch < config.epochs; ++epoch) {
        std::vector<size_t> order = usable;
        Rng shuffle_rng(config.seed, 1000 + static_cast<uint64_t>(epoch));
        shuffle(order, shuffle_rng);

        int step = 0;
        for (size_t batch_start = 0; batch_start < order.size();
             batch_start += static_cast<size_t>(config.batch_size)) {
            size_t batch_end =
                std::min(order.size(), batch_start + static_cast<size_t>(config.batch_size));
            size_t batch_n = batch_end - batch_start;

            HeadGrad head_grad;
            head_grad.resize(extractor.feature_dim());
            FbaGrad fba_grad;
            fba_grad.resize(ckpt.fba.cfg);
            double seg_sum = 0, adv_sum = 0;

            for (size_t bi = batch_start; bi < batch_end; ++bi) {
                const DatasetRecord& rec = manifest.records[order[bi]];
                LoadedSample sample = load_and_resize(rec, config.image_h, config.image_w);
                BinaryMask label = load_pseudo_label_png(pseudo_labels.at(rec.id()),
                                                         config.image_h, config.image_w);
                PatchFeatureGrid features =
                    extract_with_cache(extractor, sample.image, feature_cache);

                PredictCache pcache;
                SoftMask prediction =
                    predict_forward(ckpt.head, features, config.image_h, config.image_w, pcache);

                std::vector<float> grad_p(prediction.size(), 0.f);
                seg_sum += structure_loss(prediction, label, &grad_p);

                auto pairs = make_adversarial_pairs(sample.image, prediction);
                FbaCache fcache_fg, fcache_bg;
                ClassScoreMap score_fg =
                    fba_score_forward(ckpt.fba, sample.image, pairs[0].mask, fcache_fg);
                ClassScoreMap score_bg =
                    fba_score_forward(ckpt.fba, sample.image, pairs[1].mask, fcache_bg);

                std::vector<std::vector<float>> score_grads;
                adv_sum += adversarial_loss({&score_fg, &score_bg},
                                            {pairs[0].label, pairs[1].label}, &score_grads);

                std::vector<float> grad_mask_fg, grad_mask_bg;
                fba_backward(ckpt.fba, sample.image, pairs[0].mask, fcache_fg, score_grads[0],
                             fba_grad, &grad_mask_fg);
                fba_backward(ckpt.fba, sample.image, pairs[1].mask, fcache_bg, score_grads[1],
                             fba_grad, &grad_mask_bg);

                // Straight-through across the binarization: pair 0 carries
                // P', pair 1 carries 1-P'.
                for (size_t i = 0; i < grad_p.size(); ++i)
                    grad_p[i] += grad_mask_fg[i] - grad_mask_bg[i];

                predict_backward(features, pcache, grad_p, head_grad);
            }

            float inv_batch = 1.f / static_cast<float>(batch_n);
            std::vector<float> hg = flatten_head_grad(head_grad);
            for (float& g : hg) g *= inv_batch;
            std::vector<float> fg = flatten_fba_grad(fba_grad);
            for (float& g : fg) g *= inv_batch;

            adam_step(g_head, hg, ckpt.adam_head);
            adam_step(g_fba, fg, ckpt.adam_fba);

            TrainLogEntry entry;
            entry.epoch = epoch + 1;
            entry.step = ++step;
            entry.seg = seg_sum / static_cast<double>(batch_n);
            entry.adv = adv_sum / static_cast<double>(batch_n);
            entry.total = entry.seg + entry.adv;
            if (!std::isfinite(entry.total))
                throw Error("non-finite loss at epoch " + std::to_string(entry.epoch) +
                            ", step " + std::to_string(entry.step));
            result.log.push_back(entry);
        }
        ckpt.epochs_completed = epoch + 1;
    }
    return result;
}

void write_loss_log_csv(const std::vector<TrainLogEntry>& log, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write loss log: " + path.string());
    out << "epoch,step,seg,adv,total\n";
    char buf[200];
    for (const auto& e : log) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g,%.17g\n", e.epoch, e.step, e.seg,
                      e.adv, e.total);
        out << buf;
    }
}

}  // namespace ucos
