#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "ucos/hash.hpp"

#include "ucos/backbone.hpp"
#include "ucos/datasets.hpp"
#include "ucos/errors.hpp"
#include "ucos/imageio.hpp"
#include "ucos/kernels.hpp"
#include "ucos/metrics.hpp"
#include "ucos/parallel.hpp"
#include "ucos/pseudolabel.hpp"
#include "ucos/resize.hpp"
#include "ucos/trainer.hpp"

namespace fs = std::filesystem;
using namespace ucos;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;

std::unique_ptr<FeatureExtractor> make_extractor(const std::string& arch,
                                                 const std::string& weights) {
    if (arch.rfind("patch_stats_", 0) == 0) {
        int patch = std::stoi(arch.substr(std::string("patch_stats_").size()));
        return std::make_unique<PatchStatsExtractor>(patch);
    }
    if (weights.empty())
        throw ValidationError("--backbone-weights is required for arch '" + arch + "'");
    return std::make_unique<VitExtractor>(VitModel::load(weights, arch));
}

FbaConfig parse_fba_channels(const std::string& spec) {
    FbaConfig cfg;
    if (spec.empty()) return cfg;
    size_t comma = spec.find(',');
    if (comma == std::string::npos)
        throw ValidationError("--fba-channels expects C1,C2");
    cfg.c1 = std::stoi(spec.substr(0, comma));
    cfg.c2 = std::stoi(spec.substr(comma + 1));
    return cfg;
}

struct SplitArgs {
    std::string cod_root, sod_root, out = "split_manifest.tsv";
    uint64_t seed = 0;
    size_t per_source = 300;
};

int run_split(const SplitArgs& args) {
    auto cod = scan_dataset(args.cod_root, "cod");
    auto sod = scan_dataset(args.sod_root, "sod");
    SplitManifest manifest = build_training_split(cod, sod, args.seed, args.per_source);
    save_manifest(manifest, args.out);
    std::printf("wrote %zu records to %s (seed %llu)\n", manifest.records.size(),
                args.out.c_str(), static_cast<unsigned long long>(args.seed));
    return kExitOk;
}

struct PseudoLabelArgs {
    std::string split, arch = "vit_small_8", weights;
    std::string pl_cache = "cache/pseudo";
    std::string feature_cache;
    float tau = 0.2f;
    float eps = 1e-5f;
    int ncut_iters = 3;
    int image_size = 512;
};

int run_pseudo_label(const PseudoLabelArgs& args) {
    SplitManifest manifest = load_manifest(args.split);
    auto extractor = make_extractor(args.arch, args.weights);
    PseudoLabelConfig config;
    config.cut.tau = args.tau;
    config.cut.eps = args.eps;
    config.cut.iterations = args.ncut_iters;
    config.image_h = config.image_w = args.image_size;
    fs::path feat_cache = args.feature_cache;
    PseudoLabelResult result =
        generate_and_cache(manifest, *extractor, config, args.pl_cache,
                           args.feature_cache.empty() ? nullptr : &feat_cache);
    fs::path dir = fs::path(args.pl_cache) / to_hex(pseudo_label_param_hash(config, *extractor));
    std::printf("pseudo-labels: %zu computed, %zu reused, %zu degenerate-skipped\n",
                result.computed, result.reused, result.degenerate);
    std::printf("%s\n", dir.string().c_str());
    return kExitOk;
}

struct TrainArgs {
    std::string config, split, out = "run";
    std::string arch = "vit_small_8", weights;
    std::string pl_cache = "cache/pseudo";
    std::string feature_cache;
    std::string fba_channels;
    std::string resume;
    bool force = false;
    int64_t seed = -1;
    float tau = 0.2f;
    float eps = 1e-5f;
    int ncut_iters = 3;
};

int run_train(const TrainArgs& args) {
    TrainConfig config = args.config.empty() ? TrainConfig{} : parse_train_config(args.config);
    if (args.seed >= 0) config.seed = static_cast<uint64_t>(args.seed);
    if (!args.fba_channels.empty()) {
        FbaConfig f = parse_fba_channels(args.fba_channels);
        config.fba_c1 = f.c1;
        config.fba_c2 = f.c2;
    }
    config.validate();

    SplitManifest manifest = load_manifest(args.split);
    auto extractor = make_extractor(args.arch, args.weights);

    PseudoLabelConfig pl_config;
    pl_config.cut.tau = args.tau;
    pl_config.cut.eps = args.eps;
    pl_config.cut.iterations = args.ncut_iters;
    pl_config.image_h = config.image_h;
    pl_config.image_w = config.image_w;
    fs::path feat_cache = args.feature_cache;
    const fs::path* feat = args.feature_cache.empty() ? nullptr : &feat_cache;
    PseudoLabelResult labels =
        generate_and_cache(manifest, *extractor, pl_config, args.pl_cache, feat);

    Checkpoint resume_ckpt;
    const Checkpoint* resume = nullptr;
    if (!args.resume.empty()) {
        resume_ckpt = load_checkpoint(args.resume);
        resume = &resume_ckpt;
    }

    TrainResult result =
        train(config, manifest, *extractor, labels.labels, feat, resume, args.force);

    fs::create_directories(args.out);
    fs::path out_dir = args.out;
    save_checkpoint(result.checkpoint, out_dir / "checkpoint.bin");
    write_loss_log_csv(result.log, out_dir / "loss_log.csv");
    save_train_config(config, out_dir / "config_used.txt");
    std::printf("trained %d epochs on %zu samples; checkpoint at %s\n",
                result.checkpoint.epochs_completed, result.usable_samples,
                (out_dir / "checkpoint.bin").string().c_str());
    return kExitOk;
}

struct PredictArgs {
    std::string checkpoint, images, out = "predictions";
    std::string arch = "vit_small_8", weights;
    std::string feature_cache;
    int image_size = 512;
};

int run_predict(const PredictArgs& args) {
    Checkpoint ckpt = load_checkpoint(args.checkpoint);
    auto extractor = make_extractor(args.arch, args.weights);
    if (ckpt.head.weight.size() != static_cast<size_t>(extractor->feature_dim()))
        throw ValidationError("checkpoint head dimension " +
                              std::to_string(ckpt.head.weight.size()) +
                              " does not match feature dimension " +
                              std::to_string(extractor->feature_dim()));

    fs::path image_dir = args.images;
    if (fs::is_directory(image_dir / "images")) image_dir = image_dir / "images";
    if (!fs::is_directory(image_dir))
        throw ValidationError("image directory missing: " + image_dir.string());

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(image_dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        if (ext == ".jpg" || ext == ".jpeg" || ext == ".png") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ValidationError("no images in " + image_dir.string());

    fs::create_directories(args.out);
    fs::path feat_cache = args.feature_cache;
    const fs::path* feat = args.feature_cache.empty() ? nullptr : &feat_cache;

    parallel_for(files.size(), [&](size_t begin, size_t end) {
        for (size_t idx = begin; idx < end; ++idx) {
            DatasetRecord rec;
            rec.image_path = files[idx];
            rec.dataset_name = "predict";
            LoadedSample sample = load_and_resize(rec, args.image_size, args.image_size);
            PatchFeatureGrid features = extract_with_cache(*extractor, sample.image, feat);
            SoftMask pred =
                predict(ckpt.head, features, args.image_size, args.image_size);

            std::vector<float> native(static_cast<size_t>(sample.image.orig_height) *
                                      sample.image.orig_width);
            bilinear_resize(pred.data.data(), pred.height, pred.width, native.data(),
                            sample.image.orig_height, sample.image.orig_width);
            std::vector<uint8_t> bytes(native.size());
            for (size_t i = 0; i < native.size(); ++i) {
                long v = std::lround(255.0 * native[i]);
                bytes[i] = static_cast<uint8_t>(std::clamp(v, 0L, 255L));
            }
            fs::path out_path = fs::path(args.out) / (files[idx].stem().string() + ".png");
            write_png_gray(out_path, bytes.data(), sample.image.orig_height,
                           sample.image.orig_width);
        }
    });
    std::printf("wrote %zu predictions to %s\n", files.size(), args.out.c_str());
    return kExitOk;
}

struct EvalArgs {
    std::string pred, gt, out = "report.csv";
    std::string datasets;
    std::string name;
};

int run_eval(const EvalArgs& args) {
    std::vector<MetricReport> reports;
    if (args.datasets.empty()) {
        std::string name = args.name.empty() ? fs::path(args.pred).filename().string() : args.name;
        if (name.empty()) name = "dataset";
        reports.push_back(evaluate_dataset(args.pred, args.gt, name));
    } else {
        std::stringstream ss(args.datasets);
        std::string name;
        while (std::getline(ss, name, ',')) {
            if (name.empty()) continue;
            reports.push_back(evaluate_dataset(fs::path(args.pred) / name,
                                               fs::path(args.gt) / name, name));
        }
        if (reports.empty()) throw ValidationError("--datasets list is empty");
    }
    write_reports_csv(reports, args.out);
    std::fputs(render_reports_table(reports).c_str(), stdout);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    if (const char* backend = std::getenv("UCOS_KERNELS")) {
        std::string b = backend;
        if (b == "scalar") kernels::set_backend(kernels::Backend::scalar);
        else if (b == "avx2" && !kernels::set_backend(kernels::Backend::avx2)) {
            std::fprintf(stderr, "UCOS_KERNELS=avx2 requested but not supported on this CPU\n");
            return kExitUsage;
        }
    }

    CLI::App app{"Unsupervised camouflaged object segmentation pipeline"};
    app.require_subcommand(1);

    SplitArgs split_args;
    auto* split = app.add_subcommand("split", "Build the seeded 300+300 training split");
    split->add_option("--cod-root", split_args.cod_root, "Camouflaged training set root")
        ->required();
    split->add_option("--sod-root", split_args.sod_root, "Salient training set root")->required();
    split->add_option("--seed", split_args.seed, "Sampling seed")->capture_default_str();
    split->add_option("--per-source", split_args.per_source, "Images drawn per source")
        ->capture_default_str();
    split->add_option("--out", split_args.out, "Manifest output path")->capture_default_str();

    PseudoLabelArgs pl_args;
    auto* pl = app.add_subcommand("pseudo-label", "Generate and cache pseudo-labels");
    pl->add_option("--split", pl_args.split, "Split manifest")->required();
    pl->add_option("--arch", pl_args.arch,
                   "Backbone arch (vit_small_8, vit_base_8, patch_stats_8)")
        ->capture_default_str();
    pl->add_option("--backbone-weights", pl_args.weights, "ViT weights file");
    pl->add_option("--tau", pl_args.tau, "Affinity cosine threshold")->capture_default_str();
    pl->add_option("--eps", pl_args.eps, "Affinity floor")->capture_default_str();
    pl->add_option("--ncut-iters", pl_args.ncut_iters, "Normalized-cut iterations")
        ->capture_default_str();
    pl->add_option("--pl-cache", pl_args.pl_cache, "Pseudo-label cache directory")
        ->capture_default_str();
    pl->add_option("--feature-cache", pl_args.feature_cache, "Feature cache directory");
    pl->add_option("--image-size", pl_args.image_size, "Working resolution")
        ->capture_default_str();

    TrainArgs train_args;
    auto* tr = app.add_subcommand("train", "Co-train the linear head and the FBA module");
    tr->add_option("--config", train_args.config, "key=value training config file");
    tr->add_option("--split", train_args.split, "Split manifest")->required();
    tr->add_option("--out", train_args.out, "Output directory")->capture_default_str();
    tr->add_option("--arch", train_args.arch, "Backbone arch")->capture_default_str();
    tr->add_option("--backbone-weights", train_args.weights, "ViT weights file");
    tr->add_option("--pl-cache", train_args.pl_cache, "Pseudo-label cache directory")
        ->capture_default_str();
    tr->add_option("--feature-cache", train_args.feature_cache, "Feature cache directory");
    tr->add_option("--fba-channels", train_args.fba_channels, "FBA channels as C1,C2");
    tr->add_option("--seed", train_args.seed, "Overrides the config seed");
    tr->add_option("--tau", train_args.tau, "Affinity cosine threshold")->capture_default_str();
    tr->add_option("--eps", train_args.eps, "Affinity floor")->capture_default_str();
    tr->add_option("--ncut-iters", train_args.ncut_iters, "Normalized-cut iterations")
        ->capture_default_str();
    tr->add_option("--resume", train_args.resume, "Checkpoint to resume from");
    tr->add_flag("--force", train_args.force, "Ignore config/split hash mismatch on resume");

    PredictArgs pred_args;
    auto* pr = app.add_subcommand("predict", "Write soft predictions at native resolution");
    pr->add_option("--checkpoint", pred_args.checkpoint, "Trained checkpoint")->required();
    pr->add_option("--images", pred_args.images, "Image directory (or dataset root)")
        ->required();
    pr->add_option("--arch", pred_args.arch, "Backbone arch")->capture_default_str();
    pr->add_option("--backbone-weights", pred_args.weights, "ViT weights file");
    pr->add_option("--feature-cache", pred_args.feature_cache, "Feature cache directory");
    pr->add_option("--image-size", pred_args.image_size, "Working resolution")
        ->capture_default_str();
    pr->add_option("--out", pred_args.out, "Prediction output directory")->capture_default_str();

    EvalArgs eval_args;
    auto* ev = app.add_subcommand("eval", "Seven-metric benchmark evaluation");
    ev->add_option("--pred", eval_args.pred, "Prediction directory")->required();
    ev->add_option("--gt", eval_args.gt, "Ground truth directory")->required();
    ev->add_option("--datasets", eval_args.datasets,
                   "Comma-separated per-dataset subdirectories");
    ev->add_option("--name", eval_args.name, "Dataset label for single-directory runs");
    ev->add_option("--out", eval_args.out, "Report CSV path")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (split->parsed()) return run_split(split_args);
        if (pl->parsed()) return run_pseudo_label(pl_args);
        if (tr->parsed()) return run_train(train_args);
        if (pr->parsed()) return run_predict(pred_args);
        if (ev->parsed()) return run_eval(eval_args);
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return kExitInternal;
    }
    return kExitUsage;
}
