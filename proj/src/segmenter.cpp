#include "ucos/segmenter.hpp"

#include <cmath>

#include "ucos/errors.hpp"
#include "ucos/kernels.hpp"
#include "ucos/resize.hpp"
#include "ucos/rng.hpp"

namespace ucos {

namespace {
constexpr float kProbClamp = 1e-7f;
}

LinearHead init_head(int dim, uint64_t seed) {
    if (dim <= 0) throw ValidationError("init_head: dim must be positive");
    LinearHead head;
    head.weight.resize(dim);
    float bound = 1.f / std::sqrt(static_cast<float>(dim));
    Rng rng(seed);
    for (float& w : head.weight) w = rng.uniform(-bound, bound);
    head.bias = 0.f;
    return head;
}

SoftMask predict_forward(const LinearHead& head, const PatchFeatureGrid& features,
                         int out_h, int out_w, PredictCache& cache) {
    if (static_cast<int>(head.weight.size()) != features.dim)
        throw ValidationError("predict: head dimension " + std::to_string(head.weight.size()) +
                              " does not match feature dimension " +
                              std::to_string(features.dim));

    cache.rows = features.rows;
    cache.cols = features.cols;
    cache.out_h = out_h;
    cache.out_w = out_w;
    cache.patch_logits.resize(features.patches());
    for (size_t p = 0; p < features.patches(); ++p)
        cache.patch_logits[p] = kernels::dot(head.weight.data(), features.patch(p), features.dim) +
                                head.bias;

    std::vector<float> up(static_cast<size_t>(out_h) * out_w);
    bilinear_resize(cache.patch_logits.data(), features.rows, features.cols, up.data(), out_h,
                    out_w);

    cache.prob_raw.resize(up.size());
    kernels::vsigmoid(cache.prob_raw.data(), up.data(), up.size());

    SoftMask mask(out_h, out_w);
    for (size_t i = 0; i < up.size(); ++i) {
        float v = cache.prob_raw[i];
        mask.data[i] = v < kProbClamp ? kProbClamp : (v > 1.f - kProbClamp ? 1.f - kProbClamp : v);
    }
    return mask;
}

SoftMask predict(const LinearHead& head, const PatchFeatureGrid& features, int out_h,
                 int out_w) {
    PredictCache cache;
    return predict_forward(head, features, out_h, out_w, cache);
}

void predict_backward(const PatchFeatureGrid& features, const PredictCache& cache,
                      const std::vector<float>& grad_prob, HeadGrad& grad) {
    size_t n = static_cast<size_t>(cache.out_h) * cache.out_w;
    if (grad_prob.size() != n) throw Error("predict_backward: gradient size mismatch");
    if (grad.weight.size() != static_cast<size_t>(features.dim)) grad.resize(features.dim);

    std::vector<float> grad_logit_up(n);
    for (size_t i = 0; i < n; ++i) {
        float s = cache.prob_raw[i];
        grad_logit_up[i] = grad_prob[i] * s * (1.f - s);
    }

    std::vector<float> grad_patch(features.patches());
    bilinear_resize_adjoint(grad_logit_up.data(), cache.out_h, cache.out_w, grad_patch.data(),
                            cache.rows, cache.cols);

    for (size_t p = 0; p < features.patches(); ++p) {
        float g = grad_patch[p];
        if (g == 0.f) continue;
        kernels::axpy(g, features.patch(p), grad.weight.data(), features.dim);
        grad.bias += g;
    }
}

}  // namespace ucos
