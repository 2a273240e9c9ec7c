#pragma once

#include <cstdint>
#include <vector>

#include "ucos/backbone.hpp"
#include "ucos/core.hpp"

namespace ucos {

// The trainable target model: one linear map over frozen patch features.
struct LinearHead {
    std::vector<float> weight;  // length d
    float bias = 0.f;
};

// weight ~ uniform(-1/sqrt(d), 1/sqrt(d)) from the seeded generator,
// bias = 0.
LinearHead init_head(int dim, uint64_t seed);

// Per-patch logits, bilinear upsampling of the logit grid, then sigmoid.
// Output values are clamped to the open interval (1e-7, 1 - 1e-7).
SoftMask predict(const LinearHead& head, const PatchFeatureGrid& features, int out_h,
                 int out_w);

// Forward state kept for the backward pass.
struct PredictCache {
    std::vector<float> patch_logits;   // rows * cols
    std::vector<float> prob_raw;       // sigmoid before clamping, out_h * out_w
    int rows = 0, cols = 0, out_h = 0, out_w = 0;
};

SoftMask predict_forward(const LinearHead& head, const PatchFeatureGrid& features,
                         int out_h, int out_w, PredictCache& cache);

struct HeadGrad {
    std::vector<float> weight;
    float bias = 0.f;

    void resize(int dim) {
        weight.assign(dim, 0.f);
        bias = 0.f;
    }
};

// Accumulates d(loss)/d(head params) given d(loss)/d(P); the chain runs
// backward through sigmoid and the bilinear upsampling adjoint.
void predict_backward(const PatchFeatureGrid& features, const PredictCache& cache,
                      const std::vector<float>& grad_prob, HeadGrad& grad);

}  // namespace ucos
