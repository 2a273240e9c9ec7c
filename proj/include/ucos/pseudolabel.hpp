#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ucos/backbone.hpp"
#include "ucos/core.hpp"
#include "ucos/datasets.hpp"

namespace ucos {

// Symmetric binarized patch affinity: W_ij = 1 when cos(f_i, f_j) >= tau,
// else eps. The eps floor keeps the graph connected.
struct AffinityGraph {
    size_t n = 0;
    float tau = 0.f;
    float eps = 0.f;
    std::vector<float> w;  // n * n, row-major

    float at(size_t i, size_t j) const { return w[i * n + j]; }
    float& at(size_t i, size_t j) { return w[i * n + j]; }
};

struct CutResult {
    std::vector<uint8_t> partition;     // 1 = side A (never empty, never full)
    std::vector<double> eigenvector;    // Fiedler vector of (D-W)y = lambda*D*y
    double ncut_value = 0.0;
};

// Features must be L2-normalized per patch (see l2_normalized).
AffinityGraph build_affinity(const PatchFeatureGrid& features, float tau, float eps);

// Solves the generalized eigenproblem through the symmetric form
// D^-1/2 (D-W) D^-1/2 and sweeps every sorted-eigenvector split for the
// minimum discrete Ncut value.
CutResult normalized_cut_bipartition(const AffinityGraph& graph);

// Ncut objective evaluated directly on (W, partition); the bipartition
// result must reproduce this to 1e-9.
double ncut_objective(const AffinityGraph& graph, const std::vector<uint8_t>& partition);

// Foreground = the side holding the largest-|entry| of the eigenvector,
// swapped when that side owns at least 3 of the 4 grid corners.
BinaryMask select_foreground(const CutResult& cut, int rows, int cols);

struct MaskCutParams {
    float tau = 0.2f;
    float eps = 1e-5f;
    int iterations = 3;
};

// Iterated cuts: after each round the selected patches' affinity rows and
// columns drop to eps. A round that adds fewer than 2 new patches or more
// than 80% of the remaining ones is discarded and stops the loop. Returns
// the union of the kept rounds.
BinaryMask maskcut(const PatchFeatureGrid& features, const MaskCutParams& params);

// Bilinear upsampling of a patch-level mask to pixel resolution,
// re-binarized at 0.5.
BinaryMask upsample_pseudo_label(const BinaryMask& patch_mask, int patch_size, int out_h,
                                 int out_w);

struct PseudoLabelConfig {
    MaskCutParams cut;
    int image_h = 512;
    int image_w = 512;
    // Skip-threshold pair for degenerate labels (fraction of pixels).
    double min_foreground = 0.005;
    double max_foreground = 0.95;
};

struct PseudoLabelResult {
    std::map<std::string, std::filesystem::path> labels;  // image id -> png
    size_t computed = 0;      // freshly generated this run
    size_t reused = 0;        // cache hits
    size_t degenerate = 0;    // dropped (near-empty or near-full)
};

uint64_t pseudo_label_param_hash(const PseudoLabelConfig& config,
                                 const FeatureExtractor& extractor);

// One 0/255 PNG per usable training image under
// <cache>/<param_hash>/<image_id>.png with a params.json sidecar.
// Existing entries with the same parameter hash are reused untouched.
PseudoLabelResult generate_and_cache(const SplitManifest& manifest,
                                     const FeatureExtractor& extractor,
                                     const PseudoLabelConfig& config,
                                     const std::filesystem::path& cache_dir,
                                     const std::filesystem::path* feature_cache = nullptr);

}  // namespace ucos
