#pragma once

#include <cstddef>

namespace ucos {

// All resizes use the half-pixel source mapping
//   src = (dst + 0.5) * src_size / dst_size - 0.5
// with edge clamping. Identity sizes reproduce the input exactly.

void bilinear_resize(const float* src, int src_h, int src_w, float* dst, int dst_h,
                     int dst_w);

// Interleaved resize with `channels` samples per pixel.
void bilinear_resize_multi(const float* src, int src_h, int src_w, float* dst, int dst_h,
                           int dst_w, int channels);

// Exact adjoint of bilinear_resize: scatters grad_dst back through the
// interpolation weights. grad_src is overwritten.
void bilinear_resize_adjoint(const float* grad_dst, int dst_h, int dst_w, float* grad_src,
                             int src_h, int src_w);

void nearest_resize(const float* src, int src_h, int src_w, float* dst, int dst_h,
                    int dst_w);

}  // namespace ucos
