#pragma once

#include <cstddef>
#include <string>

// Float inner loops shared by the backbone, affinity construction, the
// segmentation head, losses and metrics. Each kernel has a scalar
// reference implementation and an AVX2 variant; the active set is picked
// at runtime from CPU features and can be forced for testing.

namespace ucos::kernels {

enum class Backend { scalar, avx2 };

Backend active_backend();
const char* backend_name(Backend b);
bool backend_supported(Backend b);

// Forces a backend for the whole process. Returns false (and leaves the
// active set unchanged) if the CPU lacks the requested features. Not
// thread-safe against concurrent kernel calls; switch before compute.
bool set_backend(Backend b);
// Back to auto-detection.
void reset_backend();

float dot(const float* a, const float* b, size_t n);
// Double-accumulated dot of float inputs, for the spectral solver.
double dot_acc(const float* a, const float* b, size_t n);
float sum(const float* a, size_t n);
float sum_abs_diff(const float* a, const float* b, size_t n);
float max_value(const float* a, size_t n);  // n > 0
void axpy(float alpha, const float* x, float* y, size_t n);  // y += alpha*x
void scale(float* x, float alpha, size_t n);
void vmul(float* dst, const float* a, const float* b, size_t n);
void vexp(float* dst, const float* src, size_t n);
void vsigmoid(float* dst, const float* src, size_t n);

// Row-major GEMM, C = A*B + beta*C.  A is m x k (row stride lda),
// B is k x n (row stride ldb), C is m x n (row stride ldc).
void gemm_nn(size_t m, size_t n, size_t k, const float* a, size_t lda,
             const float* b, size_t ldb, float beta, float* c, size_t ldc);
// C = A*B^T + beta*C with B stored n x k; the usual layout for weights.
void gemm_nt(size_t m, size_t n, size_t k, const float* a, size_t lda,
             const float* b, size_t ldb, float beta, float* c, size_t ldc);

// Implementation table; scalar entries double as the reference oracle in
// the equivalence tests.
struct KernelTable {
    float (*dot)(const float*, const float*, size_t);
    double (*dot_acc)(const float*, const float*, size_t);
    float (*sum)(const float*, size_t);
    float (*sum_abs_diff)(const float*, const float*, size_t);
    float (*max_value)(const float*, size_t);
    void (*axpy)(float, const float*, float*, size_t);
    void (*scale)(float*, float, size_t);
    void (*vmul)(float*, const float*, const float*, size_t);
    void (*vexp)(float*, const float*, size_t);
    void (*vsigmoid)(float*, const float*, size_t);
    void (*gemm_nn)(size_t, size_t, size_t, const float*, size_t, const float*,
                    size_t, float, float*, size_t);
    void (*gemm_nt)(size_t, size_t, size_t, const float*, size_t, const float*,
                    size_t, float, float*, size_t);
};

const KernelTable& scalar_table();
const KernelTable* avx2_table();  // nullptr when not compiled in

}  // namespace ucos::kernels
