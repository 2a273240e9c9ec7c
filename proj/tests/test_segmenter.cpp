#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ucos/errors.hpp"
#include "ucos/segmenter.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace ucos;

namespace {

PatchFeatureGrid random_grid(int rows, int cols, int dim, uint64_t seed) {
    Rng rng(seed);
    PatchFeatureGrid g;
    g.rows = rows;
    g.cols = cols;
    g.dim = dim;
    g.patch_size = 8;
    g.image_height = rows * 8;
    g.image_width = cols * 8;
    g.data.resize(static_cast<size_t>(rows) * cols * dim);
    for (float& v : g.data) v = rng.uniform(-1.f, 1.f);
    return g;
}

}  // namespace

TEST_CASE("init_head determinism and shape") {
    LinearHead a = init_head(384, 5);
    LinearHead b = init_head(384, 5);
    CHECK(a.weight.size() == 384);
    CHECK(a.bias == 0.f);
    CHECK(a.weight == b.weight);
    LinearHead c = init_head(384, 6);
    CHECK(a.weight != c.weight);
    float bound = 1.f / std::sqrt(384.f);
    for (float w : a.weight) {
        CHECK(w >= -bound);
        CHECK(w <= bound);
    }
    CHECK_THROWS_AS(init_head(0, 1), ValidationError);
}

TEST_CASE("predict basics") {
    PatchFeatureGrid g = random_grid(4, 4, 16, 9);

    SUBCASE("zero head gives exact 0.5") {
        LinearHead head;
        head.weight.assign(16, 0.f);
        head.bias = 0.f;
        SoftMask p = predict(head, g, 32, 32);
        CHECK(p.height == 32);
        CHECK(p.width == 32);
        for (float v : p.data) CHECK(v == 0.5f);
    }

    SUBCASE("large bias saturates above 0.999") {
        LinearHead head;
        head.weight.assign(16, 0.f);
        head.bias = 20.f;
        SoftMask p = predict(head, g, 32, 32);
        for (float v : p.data) {
            CHECK(v > 0.999f);
            CHECK(v < 1.f);  // clamped inside the open interval
        }
    }

    SUBCASE("aligned/anti-aligned patches split around 0.5") {
        PatchFeatureGrid bi = random_grid(2, 2, 4, 1);
        LinearHead head;
        head.weight = {1.f, 0.f, 0.f, 0.f};
        head.bias = 0.f;
        // two patches along +w, two along -w
        float dir[4] = {1.f, -1.f, 1.f, -1.f};
        for (size_t p = 0; p < 4; ++p) {
            bi.patch(p)[0] = dir[p] * 0.8f;
            bi.patch(p)[1] = bi.patch(p)[2] = bi.patch(p)[3] = 0.f;
        }
        SoftMask out = predict(head, bi, 2, 2);  // one pixel per patch
        CHECK(out.data[0] > 0.5f);
        CHECK(out.data[1] < 0.5f);
        CHECK(out.data[0] == doctest::Approx(1.f - out.data[1]).epsilon(1e-5));
    }

    SUBCASE("dim mismatch") {
        LinearHead head;
        head.weight.assign(8, 0.f);
        CHECK_THROWS_AS(predict(head, g, 32, 32), ValidationError);
    }

    SUBCASE("output shape follows request") {
        LinearHead head = init_head(16, 3);
        SoftMask p = predict(head, g, 17, 23);
        CHECK(p.height == 17);
        CHECK(p.width == 23);
        CHECK(p.data.size() == 17u * 23u);
    }
}

TEST_CASE("argmax invariance under positive logit scaling") {
    PatchFeatureGrid g = random_grid(3, 5, 12, 21);
    LinearHead head = init_head(12, 4);
    head.bias = 0.05f;
    SoftMask base = predict(head, g, 24, 40);

    LinearHead scaled = head;
    for (float& w : scaled.weight) w *= 3.f;
    scaled.bias *= 3.f;
    SoftMask big = predict(scaled, g, 24, 40);

    BinaryMask b0 = binarize(base, 0.5f);
    BinaryMask b1 = binarize(big, 0.5f);
    CHECK(b0.data == b1.data);
}

TEST_CASE("predict gradient matches finite differences") {
    PatchFeatureGrid g = random_grid(2, 2, 6, 33);
    LinearHead head = init_head(6, 7);
    const int out = 8;

    PredictCache cache;
    SoftMask p = predict_forward(head, g, out, out, cache);

    // float forward agrees with the double-precision oracle
    double float_mean = 0;
    for (float v : p.data) float_mean += v;
    float_mean /= p.data.size();
    CHECK(oracle::relative_error(float_mean,
                                 oracle::predict_mean(head.weight, head.bias, g, out, out)) <
          1e-5);

    std::vector<float> grad_prob(p.size(), 1.f / static_cast<float>(p.size()));
    HeadGrad grad;
    grad.resize(6);
    predict_backward(g, cache, grad_prob, grad);

    std::vector<float> packed(head.weight);
    packed.push_back(head.bias);
    std::vector<float> grad_packed(grad.weight);
    grad_packed.push_back(grad.bias);

    // FD runs on the double-precision oracle forward
    auto objective = [&]() {
        std::vector<float> w(packed.begin(), packed.end() - 1);
        return oracle::predict_mean(w, packed.back(), g, out, out);
    };

    Rng rng(55);
    const double eps = 1e-4;
    for (int probe = 0; probe < 16; ++probe) {
        std::vector<float> dir(7);
        for (float& d : dir) d = rng.uniform() < 0.5f ? 1.f : -1.f;
        double err = oracle::gradient_probe_error(objective, packed, grad_packed, dir, eps);
        CHECK(err < 1e-4);
    }
}
