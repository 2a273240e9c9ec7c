#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ucos/errors.hpp"
#include "ucos/fba.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace ucos;

namespace {

ImageTensor random_image(int h, int w, uint64_t seed) {
    Rng rng(seed);
    ImageTensor img;
    img.height = h;
    img.width = w;
    img.orig_height = h;
    img.orig_width = w;
    img.data.resize(static_cast<size_t>(h) * w * 3);
    for (float& v : img.data) v = rng.uniform();
    return img;
}

std::vector<float*> fba_params(FbaStack& s) {
    std::vector<float*> out;
    for (auto* vec : {&s.w1, &s.b1, &s.w2, &s.b2, &s.w3})
        for (float& v : *vec) out.push_back(&v);
    out.push_back(&s.b3);
    return out;
}

std::vector<float> fba_grad_flat(const FbaGrad& g) {
    std::vector<float> out;
    for (auto* vec : {&g.w1, &g.b1, &g.w2, &g.b2, &g.w3})
        out.insert(out.end(), vec->begin(), vec->end());
    out.push_back(g.b3);
    return out;
}

}  // namespace

TEST_CASE("init_fba determinism") {
    FbaConfig cfg;
    FbaStack a = init_fba(cfg, 3);
    FbaStack b = init_fba(cfg, 3);
    CHECK(a.w1 == b.w1);
    CHECK(a.w3 == b.w3);
    CHECK(a.b3 == 0.f);
    FbaStack c = init_fba(cfg, 4);
    CHECK(a.w1 != c.w1);
    CHECK(a.w1.size() == 16u * 4u);
    CHECK(a.w2.size() == 8u * 16u);
    CHECK(a.w3.size() == 8u);
}

TEST_CASE("zero final layer scores exactly 0.5") {
    FbaStack s = init_fba({}, 7);
    std::fill(s.w3.begin(), s.w3.end(), 0.f);
    s.b3 = 0.f;
    ImageTensor img = random_image(6, 5, 1);
    SoftMask mask(6, 5, 0.7f);
    ClassScoreMap score = fba_score(s, img, mask);
    for (float v : score.data) CHECK(v == 0.5f);
}

TEST_CASE("per-pixel locality") {
    FbaStack s = init_fba({}, 11);
    ImageTensor img = random_image(4, 4, 2);
    SoftMask mask(4, 4, 0.f);
    // duplicate pixel (0,0) at (3,3), mask too
    for (int c = 0; c < 3; ++c) img.px(3, 3)[c] = img.px(0, 0)[c];
    mask.at(0, 0) = 0.8f;
    mask.at(3, 3) = 0.8f;
    ClassScoreMap score = fba_score(s, img, mask);
    CHECK(score.data[0] == score.data[15]);

    // strictly inside (0,1)
    for (float v : score.data) {
        CHECK(v > 0.f);
        CHECK(v < 1.f);
    }
}

TEST_CASE("hand-computed toy stack") {
    // 4 -> 2 -> 2 -> 1 with hand-set weights on a single pixel.
    FbaConfig cfg;
    cfg.c1 = 2;
    cfg.c2 = 2;
    cfg.negative_slope = 0.01f;
    FbaStack s;
    s.cfg = cfg;
    s.w1 = {0.5f, -0.25f, 0.1f, 0.3f,
            -0.2f, 0.4f, -0.6f, 0.2f};
    s.b1 = {0.05f, -0.1f};
    s.w2 = {1.0f, -0.5f,
            0.25f, 0.75f};
    s.b2 = {0.f, 0.1f};
    s.w3 = {0.8f, -1.2f};
    s.b3 = 0.2f;

    ImageTensor img;
    img.height = img.width = 1;
    img.data = {0.3f, 0.6f, 0.9f};
    SoftMask mask(1, 1, 0.4f);

    auto lr = [](double v) { return v > 0 ? v : 0.01 * v; };
    double x[4] = {0.3, 0.6, 0.9, 0.4};
    double h1[2], h2[2];
    for (int j = 0; j < 2; ++j) {
        double acc = s.b1[j];
        for (int l = 0; l < 4; ++l) acc += s.w1[j * 4 + l] * x[l];
        h1[j] = lr(acc);
    }
    for (int j = 0; j < 2; ++j) {
        double acc = s.b2[j];
        for (int l = 0; l < 2; ++l) acc += s.w2[j * 2 + l] * h1[l];
        h2[j] = lr(acc);
    }
    double logit = s.b3 + s.w3[0] * h2[0] + s.w3[1] * h2[1];
    double want = 1.0 / (1.0 + std::exp(-logit));

    ClassScoreMap score = fba_score(s, img, mask);
    CHECK(score.data[0] == doctest::Approx(want).epsilon(1e-6));
}

TEST_CASE("spatial mismatch rejected") {
    FbaStack s = init_fba({}, 1);
    ImageTensor img = random_image(4, 4, 3);
    SoftMask mask(4, 5, 0.5f);
    CHECK_THROWS_AS(fba_score(s, img, mask), ValidationError);
}

TEST_CASE("make_adversarial_pairs") {
    ImageTensor img = random_image(3, 3, 4);

    SUBCASE("all ones prediction") {
        SoftMask p(3, 3, 1.f);
        auto pairs = make_adversarial_pairs(img, p);
        CHECK(pairs[0].label == 1);
        CHECK(pairs[1].label == 0);
        for (float v : pairs[0].mask.data) CHECK(v == 1.f);
        for (float v : pairs[1].mask.data) CHECK(v == 0.f);
        CHECK(pairs[0].image == &img);
    }

    SUBCASE("binarize idempotence: pairs from P and P' coincide") {
        Rng rng(5);
        SoftMask p = testutil::random_soft_mask(4, 4, rng);
        auto from_p = make_adversarial_pairs(img, p);
        auto from_pp = make_adversarial_pairs(img, from_p[0].mask);
        CHECK(from_p[0].mask.data == from_pp[0].mask.data);
        CHECK(from_p[1].mask.data == from_pp[1].mask.data);
    }

    SUBCASE("uniform 0.6 thresholds to ones/zeros") {
        ImageTensor small = random_image(2, 2, 8);
        SoftMask p(2, 2, 0.6f);
        auto pairs = make_adversarial_pairs(small, p);
        for (float v : pairs[0].mask.data) CHECK(v == 1.f);
        for (float v : pairs[1].mask.data) CHECK(v == 0.f);
    }
}

TEST_CASE("fba gradients match finite differences") {
    FbaConfig cfg;
    cfg.c1 = 6;
    cfg.c2 = 4;
    FbaStack s = init_fba(cfg, 9);
    ImageTensor img = random_image(8, 8, 6);
    Rng mrng(7);
    SoftMask mask = testutil::random_soft_mask(8, 8, mrng);

    FbaCache cache;
    ClassScoreMap score = fba_score_forward(s, img, mask, cache);

    // float forward agrees with the double-precision oracle
    double float_mean = 0;
    for (float v : score.data) float_mean += v;
    float_mean /= score.data.size();
    CHECK(oracle::relative_error(float_mean, oracle::fba_mean(s, img, mask)) < 1e-5);

    std::vector<float> gscore(score.size(), 1.f / static_cast<float>(score.size()));
    FbaGrad grad;
    grad.resize(cfg);
    std::vector<float> gmask;
    fba_backward(s, img, mask, cache, gscore, grad, &gmask);

    std::vector<float*> params = fba_params(s);
    std::vector<float> flat = fba_grad_flat(grad);
    REQUIRE(params.size() == flat.size());

    std::vector<float> packed(params.size());
    for (size_t i = 0; i < params.size(); ++i) packed[i] = *params[i];
    // FD runs on the double-precision oracle forward
    auto objective = [&]() {
        for (size_t i = 0; i < params.size(); ++i) *params[i] = packed[i];
        return oracle::fba_mean(s, img, mask);
    };

    Rng rng(12);
    const double eps = 1e-4;  // small enough to dodge the leaky-relu kinks
    for (int probe = 0; probe < 24; ++probe) {
        std::vector<float> dir(params.size());
        for (float& d : dir) d = rng.uniform() < 0.5f ? 1.f : -1.f;
        double err = oracle::gradient_probe_error(objective, packed, flat, dir, eps);
        CHECK(err < 1e-4);
    }
    for (size_t i = 0; i < params.size(); ++i) *params[i] = packed[i];

    // mask-channel gradient through the same probe machinery
    auto mask_objective = [&]() { return oracle::fba_mean(s, img, mask); };
    for (int probe = 0; probe < 8; ++probe) {
        std::vector<float> dir(mask.data.size());
        for (float& d : dir) d = rng.uniform() < 0.5f ? 1.f : -1.f;
        double err = oracle::gradient_probe_error(mask_objective, mask.data, gmask, dir, eps);
        CHECK(err < 1e-4);
    }
}
