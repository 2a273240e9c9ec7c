#include <cmath>
#include <cstring>

#include "ucos/kernels.hpp"

// Reference kernels. Plain loops, no reassociation tricks beyond what the
// compiler does at -O2; these define the semantics the SIMD variants are
// tested against.

namespace ucos::kernels {

namespace {

float dot_scalar(const float* a, const float* b, size_t n) {
    float acc = 0.f;
    for (size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double dot_acc_scalar(const float* a, const float* b, size_t n) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return acc;
}

float sum_scalar(const float* a, size_t n) {
    float acc = 0.f;
    for (size_t i = 0; i < n; ++i) acc += a[i];
    return acc;
}

float sum_abs_diff_scalar(const float* a, const float* b, size_t n) {
    float acc = 0.f;
    for (size_t i = 0; i < n; ++i) acc += std::fabs(a[i] - b[i]);
    return acc;
}

float max_value_scalar(const float* a, size_t n) {
    float m = a[0];
    for (size_t i = 1; i < n; ++i)
        if (a[i] > m) m = a[i];
    return m;
}

void axpy_scalar(float alpha, const float* x, float* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale_scalar(float* x, float alpha, size_t n) {
    for (size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void vmul_scalar(float* dst, const float* a, const float* b, size_t n) {
    for (size_t i = 0; i < n; ++i) dst[i] = a[i] * b[i];
}

void vexp_scalar(float* dst, const float* src, size_t n) {
    for (size_t i = 0; i < n; ++i) dst[i] = std::exp(src[i]);
}

void vsigmoid_scalar(float* dst, const float* src, size_t n) {
    for (size_t i = 0; i < n; ++i) dst[i] = 1.f / (1.f + std::exp(-src[i]));
}

void gemm_nn_scalar(size_t m, size_t n, size_t k, const float* a, size_t lda,
                    const float* b, size_t ldb, float beta, float* c, size_t ldc) {
    for (size_t i = 0; i < m; ++i) {
        float* crow = c + i * ldc;
        if (beta == 0.f) {
            std::memset(crow, 0, n * sizeof(float));
        } else if (beta != 1.f) {
            for (size_t j = 0; j < n; ++j) crow[j] *= beta;
        }
        const float* arow = a + i * lda;
        for (size_t l = 0; l < k; ++l) {
            float av = arow[l];
            const float* brow = b + l * ldb;
            for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void gemm_nt_scalar(size_t m, size_t n, size_t k, const float* a, size_t lda,
                    const float* b, size_t ldb, float beta, float* c, size_t ldc) {
    for (size_t i = 0; i < m; ++i) {
        const float* arow = a + i * lda;
        float* crow = c + i * ldc;
        for (size_t j = 0; j < n; ++j) {
            float acc = dot_scalar(arow, b + j * ldb, k);
            crow[j] = (beta == 0.f) ? acc : beta * crow[j] + acc;
        }
    }
}

}  // namespace

const KernelTable& scalar_table() {
    static const KernelTable table = {
        dot_scalar,      dot_acc_scalar, sum_scalar,  sum_abs_diff_scalar,
        max_value_scalar, axpy_scalar,   scale_scalar, vmul_scalar,
        vexp_scalar,     vsigmoid_scalar, gemm_nn_scalar, gemm_nt_scalar,
    };
    return table;
}

}  // namespace ucos::kernels
