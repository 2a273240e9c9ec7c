#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "ucos/kernels.hpp"
#include "ucos/rng.hpp"

using namespace ucos;
namespace k = ucos::kernels;

namespace {

std::vector<float> random_vec(size_t n, Rng& rng, float lo = -2.f, float hi = 2.f) {
    std::vector<float> v(n);
    for (float& x : v) x = rng.uniform(lo, hi);
    return v;
}

bool close_rel(double a, double b, double tol) {
    double denom = std::max({std::fabs(a), std::fabs(b), 1.0});
    return std::fabs(a - b) / denom <= tol;
}

}  // namespace

TEST_CASE("scalar and avx2 kernels agree") {
    const k::KernelTable& scalar = k::scalar_table();
    const k::KernelTable* avx2 = k::avx2_table();
    if (!avx2 || !k::backend_supported(k::Backend::avx2)) {
        MESSAGE("avx2 not available; equivalence suite skipped");
        return;
    }

    Rng rng(42);
    for (size_t n : {1u, 7u, 8u, 17u, 64u, 1000u}) {
        auto a = random_vec(n, rng);
        auto b = random_vec(n, rng);

        CHECK(close_rel(scalar.dot(a.data(), b.data(), n), avx2->dot(a.data(), b.data(), n), 1e-5));
        CHECK(close_rel(scalar.dot_acc(a.data(), b.data(), n), avx2->dot_acc(a.data(), b.data(), n),
                        1e-12));
        CHECK(close_rel(scalar.sum(a.data(), n), avx2->sum(a.data(), n), 1e-5));
        CHECK(close_rel(scalar.sum_abs_diff(a.data(), b.data(), n),
                        avx2->sum_abs_diff(a.data(), b.data(), n), 1e-5));
        CHECK(scalar.max_value(a.data(), n) == avx2->max_value(a.data(), n));

        auto y1 = b, y2 = b;
        scalar.axpy(0.37f, a.data(), y1.data(), n);
        avx2->axpy(0.37f, a.data(), y2.data(), n);
        for (size_t i = 0; i < n; ++i) CHECK(close_rel(y1[i], y2[i], 1e-6));

        auto s1 = a, s2 = a;
        scalar.scale(s1.data(), -1.7f, n);
        avx2->scale(s2.data(), -1.7f, n);
        for (size_t i = 0; i < n; ++i) CHECK(s1[i] == doctest::Approx(s2[i]).epsilon(1e-6));

        std::vector<float> m1(n), m2(n);
        scalar.vmul(m1.data(), a.data(), b.data(), n);
        avx2->vmul(m2.data(), a.data(), b.data(), n);
        for (size_t i = 0; i < n; ++i) CHECK(m1[i] == m2[i]);

        std::vector<float> e1(n), e2(n);
        scalar.vexp(e1.data(), a.data(), n);
        avx2->vexp(e2.data(), a.data(), n);
        for (size_t i = 0; i < n; ++i) CHECK(close_rel(e1[i], e2[i], 2e-6));

        std::vector<float> g1(n), g2(n);
        scalar.vsigmoid(g1.data(), a.data(), n);
        avx2->vsigmoid(g2.data(), a.data(), n);
        for (size_t i = 0; i < n; ++i) CHECK(close_rel(g1[i], g2[i], 2e-6));
    }
}

TEST_CASE("gemm variants match the straightforward triple loop") {
    Rng rng(7);
    for (auto [m, n, kk] : {std::tuple{1, 1, 1}, {3, 5, 7}, {8, 8, 8}, {13, 9, 21}, {16, 32, 24}}) {
        auto a = random_vec(static_cast<size_t>(m) * kk, rng);
        auto bt = random_vec(static_cast<size_t>(n) * kk, rng);  // n x k (for nt)
        auto b = random_vec(static_cast<size_t>(kk) * n, rng);   // k x n (for nn)

        std::vector<float> want_nn(static_cast<size_t>(m) * n, 0.f);
        for (int i = 0; i < m; ++i)
            for (int l = 0; l < kk; ++l)
                for (int j = 0; j < n; ++j)
                    want_nn[i * n + j] += a[i * kk + l] * b[l * n + j];

        std::vector<float> want_nt(static_cast<size_t>(m) * n, 0.f);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
                for (int l = 0; l < kk; ++l)
                    want_nt[i * n + j] += a[i * kk + l] * bt[j * kk + l];

        for (k::Backend backend : {k::Backend::scalar, k::Backend::avx2}) {
            if (!k::backend_supported(backend)) continue;
            REQUIRE(k::set_backend(backend));
            std::vector<float> got(static_cast<size_t>(m) * n, 0.f);
            k::gemm_nn(m, n, kk, a.data(), kk, b.data(), n, 0.f, got.data(), n);
            for (size_t i = 0; i < got.size(); ++i)
                CHECK(got[i] == doctest::Approx(want_nn[i]).epsilon(1e-4));

            std::fill(got.begin(), got.end(), 1.f);
            k::gemm_nt(m, n, kk, a.data(), kk, bt.data(), kk, 0.5f, got.data(), n);
            for (size_t i = 0; i < got.size(); ++i)
                CHECK(got[i] == doctest::Approx(want_nt[i] + 0.5f).epsilon(1e-4));
        }
        k::reset_backend();
    }
}

TEST_CASE("vexp tracks std::exp") {
    if (!k::backend_supported(k::Backend::avx2)) return;
    std::vector<float> xs;
    for (float x = -30.f; x <= 30.f; x += 0.37f) xs.push_back(x);
    std::vector<float> out(xs.size());
    k::avx2_table()->vexp(out.data(), xs.data(), xs.size());
    for (size_t i = 0; i < xs.size(); ++i)
        CHECK(close_rel(out[i], std::exp(static_cast<double>(xs[i])), 2e-6));
}

TEST_CASE("backend selection") {
    CHECK(k::backend_supported(k::Backend::scalar));
    REQUIRE(k::set_backend(k::Backend::scalar));
    CHECK(k::active_backend() == k::Backend::scalar);
    k::reset_backend();
    if (k::backend_supported(k::Backend::avx2))
        CHECK(k::active_backend() == k::Backend::avx2);
}
