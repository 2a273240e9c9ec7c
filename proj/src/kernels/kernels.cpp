#include "ucos/kernels.hpp"

#include <atomic>

namespace ucos::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Backend pick_default() {
    if (avx2_table() != nullptr && cpu_has_avx2()) return Backend::avx2;
    return Backend::scalar;
}

std::atomic<Backend> g_backend{pick_default()};

const KernelTable& table_for(Backend b) {
    if (b == Backend::avx2) {
        const KernelTable* t = avx2_table();
        if (t) return *t;
    }
    return scalar_table();
}

inline const KernelTable& active() { return table_for(g_backend.load(std::memory_order_relaxed)); }

}  // namespace

Backend active_backend() { return g_backend.load(std::memory_order_relaxed); }

const char* backend_name(Backend b) { return b == Backend::avx2 ? "avx2" : "scalar"; }

bool backend_supported(Backend b) {
    if (b == Backend::scalar) return true;
    return avx2_table() != nullptr && cpu_has_avx2();
}

bool set_backend(Backend b) {
    if (!backend_supported(b)) return false;
    g_backend.store(b, std::memory_order_relaxed);
    return true;
}

void reset_backend() { g_backend.store(pick_default(), std::memory_order_relaxed); }

float dot(const float* a, const float* b, size_t n) { return active().dot(a, b, n); }
double dot_acc(const float* a, const float* b, size_t n) { return active().dot_acc(a, b, n); }
float sum(const float* a, size_t n) { return active().sum(a, n); }
float sum_abs_diff(const float* a, const float* b, size_t n) { return active().sum_abs_diff(a, b, n); }
float max_value(const float* a, size_t n) { return active().max_value(a, n); }
void axpy(float alpha, const float* x, float* y, size_t n) { active().axpy(alpha, x, y, n); }
void scale(float* x, float alpha, size_t n) { active().scale(x, alpha, n); }
void vmul(float* dst, const float* a, const float* b, size_t n) { active().vmul(dst, a, b, n); }
void vexp(float* dst, const float* src, size_t n) { active().vexp(dst, src, n); }
void vsigmoid(float* dst, const float* src, size_t n) { active().vsigmoid(dst, src, n); }

void gemm_nn(size_t m, size_t n, size_t k, const float* a, size_t lda, const float* b,
             size_t ldb, float beta, float* c, size_t ldc) {
    active().gemm_nn(m, n, k, a, lda, b, ldb, beta, c, ldc);
}

void gemm_nt(size_t m, size_t n, size_t k, const float* a, size_t lda, const float* b,
             size_t ldb, float beta, float* c, size_t ldc) {
    active().gemm_nt(m, n, k, a, lda, b, ldb, beta, c, ldc);
}

}  // namespace ucos::kernels
