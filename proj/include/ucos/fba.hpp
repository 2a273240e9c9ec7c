#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "ucos/core.hpp"

namespace ucos {

// Foreground-background-contrastive adversarial module: three 1x1 linear
// layers with leaky activations, applied per pixel to the concatenation
// of the image and a mask channel.
struct FbaConfig {
    int c1 = 16;
    int c2 = 8;
    float negative_slope = 0.01f;
};

struct FbaStack {
    FbaConfig cfg;
    std::vector<float> w1;  // c1 x 4, row-major
    std::vector<float> b1;  // c1
    std::vector<float> w2;  // c2 x c1
    std::vector<float> b2;  // c2
    std::vector<float> w3;  // 1 x c2
    float b3 = 0.f;

    size_t parameter_count() const {
        return w1.size() + b1.size() + w2.size() + b2.size() + w3.size() + 1;
    }
};

FbaStack init_fba(const FbaConfig& cfg, uint64_t seed);

// Per-pixel class score map sigma(FC3(LR(FC2(LR(FC1([x; p])))))).
ClassScoreMap fba_score(const FbaStack& stack, const ImageTensor& image,
                        const SoftMask& mask);

struct FbaCache {
    std::vector<float> h1;        // pixels * c1, post-activation
    std::vector<float> h2;        // pixels * c2, post-activation
    std::vector<float> score_raw; // sigmoid output before clamping
};

ClassScoreMap fba_score_forward(const FbaStack& stack, const ImageTensor& image,
                                const SoftMask& mask, FbaCache& cache);

struct FbaGrad {
    std::vector<float> w1, b1, w2, b2, w3;
    float b3 = 0.f;

    void resize(const FbaConfig& cfg) {
        w1.assign(static_cast<size_t>(cfg.c1) * 4, 0.f);
        b1.assign(cfg.c1, 0.f);
        w2.assign(static_cast<size_t>(cfg.c2) * cfg.c1, 0.f);
        b2.assign(cfg.c2, 0.f);
        w3.assign(cfg.c2, 0.f);
        b3 = 0.f;
    }
};

// Accumulates parameter gradients; when grad_mask is non-null also
// accumulates d(loss)/d(mask channel), the path the straight-through
// estimator feeds back into the segmenter.
void fba_backward(const FbaStack& stack, const ImageTensor& image, const SoftMask& mask,
                  const FbaCache& cache, const std::vector<float>& grad_score,
                  FbaGrad& grad, std::vector<float>* grad_mask);

// (X, P', 1) and (X, 1-P', 0) with P' = binarize(P, 0.5). The image
// pointer is non-owning and stays valid as long as the caller's image.
struct AdversarialPair {
    const ImageTensor* image = nullptr;
    SoftMask mask;
    int label = 0;
};

std::array<AdversarialPair, 2> make_adversarial_pairs(const ImageTensor& image,
                                                      const SoftMask& prediction);

}  // namespace ucos
