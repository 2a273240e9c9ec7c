#include "ucos/resize.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

namespace ucos {

namespace {

struct Taps {
    std::vector<int> lo, hi;
    std::vector<float> frac;  // weight of hi
};

Taps make_taps(int src_n, int dst_n) {
    Taps t;
    t.lo.resize(dst_n);
    t.hi.resize(dst_n);
    t.frac.resize(dst_n);
    double scale = static_cast<double>(src_n) / dst_n;
    for (int d = 0; d < dst_n; ++d) {
        double s = (d + 0.5) * scale - 0.5;
        double fl = std::floor(s);
        int lo = static_cast<int>(fl);
        float frac = static_cast<float>(s - fl);
        int hi = lo + 1;
        if (lo < 0) { lo = 0; hi = 0; frac = 0.f; }
        if (hi >= src_n) { hi = src_n - 1; lo = hi; frac = 0.f; }
        t.lo[d] = lo;
        t.hi[d] = hi;
        t.frac[d] = frac;
    }
    return t;
}

}  // namespace

void bilinear_resize_multi(const float* src, int src_h, int src_w, float* dst, int dst_h,
                           int dst_w, int channels) {
    if (src_h == dst_h && src_w == dst_w) {
        std::memcpy(dst, src, static_cast<size_t>(src_h) * src_w * channels * sizeof(float));
        return;
    }
    Taps ty = make_taps(src_h, dst_h);
    Taps tx = make_taps(src_w, dst_w);
    size_t sstride = static_cast<size_t>(src_w) * channels;
    for (int y = 0; y < dst_h; ++y) {
        const float* r0 = src + static_cast<size_t>(ty.lo[y]) * sstride;
        const float* r1 = src + static_cast<size_t>(ty.hi[y]) * sstride;
        float fy = ty.frac[y];
        float* drow = dst + static_cast<size_t>(y) * dst_w * channels;
        for (int x = 0; x < dst_w; ++x) {
            size_t o0 = static_cast<size_t>(tx.lo[x]) * channels;
            size_t o1 = static_cast<size_t>(tx.hi[x]) * channels;
            float fx = tx.frac[x];
            for (int c = 0; c < channels; ++c) {
                float top = r0[o0 + c] + fx * (r0[o1 + c] - r0[o0 + c]);
                float bot = r1[o0 + c] + fx * (r1[o1 + c] - r1[o0 + c]);
                drow[static_cast<size_t>(x) * channels + c] = top + fy * (bot - top);
            }
        }
    }
}

void bilinear_resize(const float* src, int src_h, int src_w, float* dst, int dst_h,
                     int dst_w) {
    bilinear_resize_multi(src, src_h, src_w, dst, dst_h, dst_w, 1);
}

void bilinear_resize_adjoint(const float* grad_dst, int dst_h, int dst_w, float* grad_src,
                             int src_h, int src_w) {
    std::memset(grad_src, 0, static_cast<size_t>(src_h) * src_w * sizeof(float));
    if (src_h == dst_h && src_w == dst_w) {
        std::memcpy(grad_src, grad_dst, static_cast<size_t>(src_h) * src_w * sizeof(float));
        return;
    }
    Taps ty = make_taps(src_h, dst_h);
    Taps tx = make_taps(src_w, dst_w);
    for (int y = 0; y < dst_h; ++y) {
        float fy = ty.frac[y];
        size_t row0 = static_cast<size_t>(ty.lo[y]) * src_w;
        size_t row1 = static_cast<size_t>(ty.hi[y]) * src_w;
        const float* grow = grad_dst + static_cast<size_t>(y) * dst_w;
        for (int x = 0; x < dst_w; ++x) {
            float g = grow[x];
            if (g == 0.f) continue;
            float fx = tx.frac[x];
            int x0 = tx.lo[x], x1 = tx.hi[x];
            grad_src[row0 + x0] += g * (1.f - fy) * (1.f - fx);
            grad_src[row0 + x1] += g * (1.f - fy) * fx;
            grad_src[row1 + x0] += g * fy * (1.f - fx);
            grad_src[row1 + x1] += g * fy * fx;
        }
    }
}

void nearest_resize(const float* src, int src_h, int src_w, float* dst, int dst_h,
                    int dst_w) {
    if (src_h == dst_h && src_w == dst_w) {
        std::memcpy(dst, src, static_cast<size_t>(src_h) * src_w * sizeof(float));
        return;
    }
    double sy = static_cast<double>(src_h) / dst_h;
    double sx = static_cast<double>(src_w) / dst_w;
    for (int y = 0; y < dst_h; ++y) {
        int iy = std::min(src_h - 1, static_cast<int>((y + 0.5) * sy));
        const float* srow = src + static_cast<size_t>(iy) * src_w;
        float* drow = dst + static_cast<size_t>(y) * dst_w;
        for (int x = 0; x < dst_w; ++x) {
            int ix = std::min(src_w - 1, static_cast<int>((x + 0.5) * sx));
            drow[x] = srow[ix];
        }
    }
}

}  // namespace ucos
