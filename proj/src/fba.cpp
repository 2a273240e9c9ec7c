#include "ucos/fba.hpp"

#include <cmath>

#include "ucos/errors.hpp"
#include "ucos/kernels.hpp"
#include "ucos/rng.hpp"

namespace ucos {

namespace {

constexpr float kScoreClamp = 1e-7f;

void init_linear(std::vector<float>& w, std::vector<float>& b, int out, int in, Rng& rng) {
    w.resize(static_cast<size_t>(out) * in);
    b.assign(out, 0.f);
    float bound = 1.f / std::sqrt(static_cast<float>(in));
    for (float& v : w) v = rng.uniform(-bound, bound);
}

}  // namespace

FbaStack init_fba(const FbaConfig& cfg, uint64_t seed) {
    if (cfg.c1 <= 0 || cfg.c2 <= 0) throw ValidationError("init_fba: channels must be positive");
    FbaStack s;
    s.cfg = cfg;
    Rng rng(seed);
    init_linear(s.w1, s.b1, cfg.c1, 4, rng);
    init_linear(s.w2, s.b2, cfg.c2, cfg.c1, rng);
    std::vector<float> b3(1);
    init_linear(s.w3, b3, 1, cfg.c2, rng);
    s.b3 = 0.f;
    return s;
}

ClassScoreMap fba_score_forward(const FbaStack& stack, const ImageTensor& image,
                                const SoftMask& mask, FbaCache& cache) {
    if (image.height != mask.height || image.width != mask.width)
        throw ValidationError("fba_score: image and mask sizes differ");
    const int c1 = stack.cfg.c1, c2 = stack.cfg.c2;
    const float slope = stack.cfg.negative_slope;
    const size_t n = image.pixels();

    // Pixel inputs [r, g, b, mask], then two leaky layers and the scalar
    // head; GEMM over the pixel batch keeps this in the vector kernels.
    std::vector<float> input(n * 4);
    for (size_t i = 0; i < n; ++i) {
        input[i * 4 + 0] = image.data[i * 3 + 0];
        input[i * 4 + 1] = image.data[i * 3 + 1];
        input[i * 4 + 2] = image.data[i * 3 + 2];
        input[i * 4 + 3] = mask.data[i];
    }

    cache.h1.resize(n * c1);
    kernels::gemm_nt(n, c1, 4, input.data(), 4, stack.w1.data(), 4, 0.f, cache.h1.data(), c1);
    for (size_t i = 0; i < n; ++i) {
        float* row = cache.h1.data() + i * c1;
        for (int j = 0; j < c1; ++j) {
            float v = row[j] + stack.b1[j];
            row[j] = v > 0.f ? v : slope * v;
        }
    }

    cache.h2.resize(n * c2);
    kernels::gemm_nt(n, c2, c1, cache.h1.data(), c1, stack.w2.data(), c1, 0.f, cache.h2.data(),
                     c2);
    for (size_t i = 0; i < n; ++i) {
        float* row = cache.h2.data() + i * c2;
        for (int j = 0; j < c2; ++j) {
            float v = row[j] + stack.b2[j];
            row[j] = v > 0.f ? v : slope * v;
        }
    }

    std::vector<float> logits(n);
    for (size_t i = 0; i < n; ++i)
        logits[i] = kernels::dot(cache.h2.data() + i * c2, stack.w3.data(), c2) + stack.b3;

    cache.score_raw.resize(n);
    kernels::vsigmoid(cache.score_raw.data(), logits.data(), n);

    ClassScoreMap out(image.height, image.width);
    for (size_t i = 0; i < n; ++i) {
        float v = cache.score_raw[i];
        out.data[i] = v < kScoreClamp ? kScoreClamp : (v > 1.f - kScoreClamp ? 1.f - kScoreClamp : v);
    }
    return out;
}

ClassScoreMap fba_score(const FbaStack& stack, const ImageTensor& image,
                        const SoftMask& mask) {
    FbaCache cache;
    return fba_score_forward(stack, image, mask, cache);
}

void fba_backward(const FbaStack& stack, const ImageTensor& image, const SoftMask& mask,
                  const FbaCache& cache, const std::vector<float>& grad_score, FbaGrad& grad,
                  std::vector<float>* grad_mask) {
    const int c1 = stack.cfg.c1, c2 = stack.cfg.c2;
    const float slope = stack.cfg.negative_slope;
    const size_t n = image.pixels();
    if (grad_score.size() != n) throw Error("fba_backward: gradient size mismatch");
    if (grad.w1.size() != stack.w1.size()) grad.resize(stack.cfg);
    if (grad_mask && grad_mask->size() != n) grad_mask->assign(n, 0.f);

    std::vector<float> ga1(c1), ga2(c2);
    for (size_t i = 0; i < n; ++i) {
        float s = cache.score_raw[i];
        float g3 = grad_score[i] * s * (1.f - s);
        if (g3 == 0.f) continue;

        const float* h1 = cache.h1.data() + i * c1;
        const float* h2 = cache.h2.data() + i * c2;

        kernels::axpy(g3, h2, grad.w3.data(), c2);
        grad.b3 += g3;

        for (int j = 0; j < c2; ++j) {
            float gh2 = g3 * stack.w3[j];
            ga2[j] = (h2[j] > 0.f) ? gh2 : slope * gh2;
        }
        for (int j = 0; j < c2; ++j) {
            kernels::axpy(ga2[j], h1, grad.w2.data() + static_cast<size_t>(j) * c1, c1);
            grad.b2[j] += ga2[j];
        }

        for (int j = 0; j < c1; ++j) {
            float gh1 = 0.f;
            for (int l = 0; l < c2; ++l) gh1 += ga2[l] * stack.w2[static_cast<size_t>(l) * c1 + j];
            ga1[j] = (h1[j] > 0.f) ? gh1 : slope * gh1;
        }

        const float in[4] = {image.data[i * 3 + 0], image.data[i * 3 + 1],
                             image.data[i * 3 + 2], mask.data[i]};
        for (int j = 0; j < c1; ++j) {
            float* wrow = grad.w1.data() + static_cast<size_t>(j) * 4;
            for (int l = 0; l < 4; ++l) wrow[l] += ga1[j] * in[l];
            grad.b1[j] += ga1[j];
        }
        if (grad_mask) {
            float gm = 0.f;
            for (int j = 0; j < c1; ++j) gm += ga1[j] * stack.w1[static_cast<size_t>(j) * 4 + 3];
            (*grad_mask)[i] += gm;
        }
    }
}

std::array<AdversarialPair, 2> make_adversarial_pairs(const ImageTensor& image,
                                                      const SoftMask& prediction) {
    BinaryMask binarized = binarize(prediction, 0.5f);
    AdversarialPair fg;
    fg.image = &image;
    fg.mask = to_soft(binarized);
    fg.label = 1;
    AdversarialPair bg;
    bg.image = &image;
    bg.mask = complement(fg.mask);
    bg.label = 0;
    return {std::move(fg), std::move(bg)};
}

}  // namespace ucos
