#pragma once

// Brute-force reference implementations, written independently of the
// library code paths they check: plain nested loops, no shared helpers,
// no incremental tricks. Deliberately slow.

#include <algorithm>
#include <array>
#include <cfloat>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "ucos/backbone.hpp"
#include "ucos/core.hpp"
#include "ucos/fba.hpp"

namespace ucos::oracle {

// Double-precision bilinear resize with the same half-pixel mapping as
// the library kernel.
inline std::vector<double> bilinear_d(const std::vector<double>& src, int sh, int sw, int dh,
                                      int dw) {
    std::vector<double> dst(static_cast<size_t>(dh) * dw);
    for (int y = 0; y < dh; ++y) {
        double sy = (y + 0.5) * static_cast<double>(sh) / dh - 0.5;
        int y0 = static_cast<int>(std::floor(sy));
        double fy = sy - y0;
        int y1 = y0 + 1;
        if (y0 < 0) { y0 = 0; y1 = 0; fy = 0; }
        if (y1 >= sh) { y1 = sh - 1; y0 = y1; fy = 0; }
        for (int x = 0; x < dw; ++x) {
            double sx = (x + 0.5) * static_cast<double>(sw) / dw - 0.5;
            int x0 = static_cast<int>(std::floor(sx));
            double fx = sx - x0;
            int x1 = x0 + 1;
            if (x0 < 0) { x0 = 0; x1 = 0; fx = 0; }
            if (x1 >= sw) { x1 = sw - 1; x0 = x1; fx = 0; }
            double top = src[static_cast<size_t>(y0) * sw + x0] +
                         fx * (src[static_cast<size_t>(y0) * sw + x1] -
                               src[static_cast<size_t>(y0) * sw + x0]);
            double bot = src[static_cast<size_t>(y1) * sw + x0] +
                         fx * (src[static_cast<size_t>(y1) * sw + x1] -
                               src[static_cast<size_t>(y1) * sw + x0]);
            dst[static_cast<size_t>(y) * dw + x] = top + fy * (bot - top);
        }
    }
    return dst;
}

// Double-precision forward of the linear head; returns the mean output.
inline double predict_mean(const std::vector<float>& weight, float bias,
                           const PatchFeatureGrid& features, int out_h, int out_w) {
    std::vector<double> logits(features.patches());
    for (size_t p = 0; p < features.patches(); ++p) {
        double acc = bias;
        const float* f = features.patch(p);
        for (int i = 0; i < features.dim; ++i) acc += static_cast<double>(weight[i]) * f[i];
        logits[p] = acc;
    }
    std::vector<double> up = bilinear_d(logits, features.rows, features.cols, out_h, out_w);
    double mean = 0;
    for (double z : up) mean += 1.0 / (1.0 + std::exp(-z));
    return mean / static_cast<double>(up.size());
}

// Double-precision forward of the per-pixel stack; returns the mean score.
inline double fba_mean(const FbaStack& s, const ImageTensor& img, const SoftMask& mask) {
    const int c1 = s.cfg.c1, c2 = s.cfg.c2;
    const double slope = s.cfg.negative_slope;
    auto lrelu = [&](double v) { return v > 0 ? v : slope * v; };
    double mean = 0;
    for (size_t px = 0; px < img.pixels(); ++px) {
        double in[4] = {img.data[px * 3], img.data[px * 3 + 1], img.data[px * 3 + 2],
                        mask.data[px]};
        std::vector<double> h1(c1), h2(c2);
        for (int j = 0; j < c1; ++j) {
            double acc = s.b1[j];
            for (int l = 0; l < 4; ++l) acc += static_cast<double>(s.w1[j * 4 + l]) * in[l];
            h1[j] = lrelu(acc);
        }
        for (int j = 0; j < c2; ++j) {
            double acc = s.b2[j];
            for (int l = 0; l < c1; ++l) acc += static_cast<double>(s.w2[j * c1 + l]) * h1[l];
            h2[j] = lrelu(acc);
        }
        double logit = s.b3;
        for (int l = 0; l < c2; ++l) logit += static_cast<double>(s.w3[l]) * h2[l];
        mean += 1.0 / (1.0 + std::exp(-logit));
    }
    return mean / static_cast<double>(img.pixels());
}

// ---- structure loss ---------------------------------------------------------

inline double structure_loss(const SoftMask& p, const BinaryMask& y) {
    const int h = p.height, w = p.width;
    auto clampp = [](double v) {
        if (v < 1e-7) return 1e-7;
        if (v > 1.0 - 1e-7) return 1.0 - 1e-7;
        return v;
    };
    double wsum = 0, wbce = 0, inter = 0, uni = 0;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            double pooled = 0;
            for (int dr = -15; dr <= 15; ++dr) {
                for (int dc = -15; dc <= 15; ++dc) {
                    int rr = r + dr, cc = c + dc;
                    if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
                    pooled += y.at(rr, cc);
                }
            }
            pooled /= 961.0;
            double wt = 1.0 + 5.0 * std::fabs(pooled - y.at(r, c));
            double pv = clampp(p.at(r, c));
            double yv = y.at(r, c);
            wsum += wt;
            wbce += wt * -(yv * std::log(pv) + (1.0 - yv) * std::log(1.0 - pv));
            inter += wt * pv * yv;
            uni += wt * (pv + yv - pv * yv);
        }
    }
    return wbce / wsum + (1.0 - (inter + 1.0) / (uni + 1.0));
}

// ---- simple metrics ---------------------------------------------------------

inline double mae(const SoftMask& p, const BinaryMask& g) {
    double acc = 0;
    for (size_t i = 0; i < p.size(); ++i) acc += std::fabs(p.data[i] - g.data[i]);
    return acc / static_cast<double>(p.size());
}

inline std::pair<double, double> miou_acc(const SoftMask& p, const BinaryMask& g,
                                          float thr = 0.5f) {
    double inter = 0, uni = 0, agree = 0;
    for (size_t i = 0; i < p.size(); ++i) {
        bool pb = p.data[i] >= thr;
        bool gb = g.data[i] != 0.f;
        inter += (pb && gb);
        uni += (pb || gb);
        agree += (pb == gb);
    }
    return {uni == 0 ? 1.0 : inter / uni, agree / static_cast<double>(p.size())};
}

// Precision/recall by literally re-binarizing at every threshold.
inline void fbeta_curve(const SoftMask& p, const BinaryMask& g,
                        std::array<double, 256>& precision, std::array<double, 256>& recall) {
    double gsum = 0;
    for (float v : g.data) gsum += v;
    for (int tau = 0; tau < 256; ++tau) {
        double thr = tau / 255.0;
        double tp = 0, pred = 0;
        for (size_t i = 0; i < p.size(); ++i) {
            bool pb = static_cast<double>(p.data[i]) >= thr;
            if (pb) {
                pred += 1;
                if (g.data[i] != 0.f) tp += 1;
            }
        }
        precision[tau] = pred > 0 ? tp / pred : 0.0;
        recall[tau] = gsum > 0 ? tp / gsum : 0.0;
    }
}

inline std::pair<double, double> f_from_curves(
    const std::vector<std::array<double, 256>>& precisions,
    const std::vector<std::array<double, 256>>& recalls) {
    double fmax = 0, fsum = 0;
    for (int tau = 0; tau < 256; ++tau) {
        double pr = 0, re = 0;
        for (size_t i = 0; i < precisions.size(); ++i) {
            pr += precisions[i][tau];
            re += recalls[i][tau];
        }
        pr /= precisions.size();
        re /= precisions.size();
        double denom = 0.3 * pr + re;
        double f = denom > 0 ? 1.3 * pr * re / denom : 0.0;
        if (f > fmax) fmax = f;
        fsum += f;
    }
    return {fmax, fsum / 256.0};
}

// ---- weighted F-measure -----------------------------------------------------

inline double weighted_fbeta(const SoftMask& p, const BinaryMask& g) {
    const int h = g.height, w = g.width;
    const size_t n = g.size();

    std::vector<double> err(n);
    for (size_t i = 0; i < n; ++i) err[i] = std::fabs(p.data[i] - g.data[i]);

    // Nearest foreground pixel by exhaustive search; ties to the smallest
    // linear index.
    std::vector<int64_t> dist2(n), idx(n);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            int64_t best = std::numeric_limits<int64_t>::max();
            int64_t best_idx = -1;
            for (int rr = 0; rr < h; ++rr) {
                for (int cc = 0; cc < w; ++cc) {
                    if (g.at(rr, cc) == 0.f) continue;
                    int64_t d = static_cast<int64_t>(rr - r) * (rr - r) +
                                static_cast<int64_t>(cc - c) * (cc - c);
                    int64_t li = static_cast<int64_t>(rr) * w + cc;
                    if (d < best || (d == best && li < best_idx)) {
                        best = d;
                        best_idx = li;
                    }
                }
            }
            dist2[static_cast<size_t>(r) * w + c] = best;
            idx[static_cast<size_t>(r) * w + c] = best_idx;
        }
    }

    std::vector<double> et(n);
    for (size_t i = 0; i < n; ++i)
        et[i] = g.data[i] != 0.f ? err[i] : err[static_cast<size_t>(idx[i])];

    double kernel[7][7], ksum = 0;
    for (int i = 0; i < 7; ++i)
        for (int j = 0; j < 7; ++j) {
            kernel[i][j] = std::exp(-((i - 3) * (i - 3) + (j - 3) * (j - 3)) / 50.0);
            ksum += kernel[i][j];
        }

    double gsum = 0;
    for (float v : g.data) gsum += v;

    double fg_err = 0, bg_err = 0;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            size_t i = static_cast<size_t>(r) * w + c;
            double ea = 0;
            for (int kr = 0; kr < 7; ++kr)
                for (int kc = 0; kc < 7; ++kc) {
                    int rr = r + kr - 3, cc = c + kc - 3;
                    if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
                    ea += kernel[kr][kc] / ksum * et[static_cast<size_t>(rr) * w + cc];
                }
            bool fg = g.data[i] != 0.f;
            double me = (fg && ea < err[i]) ? ea : err[i];
            double b = fg ? 1.0 : 2.0 - std::exp(std::log(0.5) / 5.0 * std::sqrt((double)dist2[i]));
            if (fg)
                fg_err += me * b;
            else
                bg_err += me * b;
        }
    }
    double tpw = gsum - fg_err;
    double rec = 1.0 - fg_err / gsum;
    double prec = tpw / (DBL_EPSILON + tpw + bg_err);
    return 2.0 * rec * prec / (DBL_EPSILON + rec + prec);
}

// ---- S-measure --------------------------------------------------------------

namespace detail {

inline double ssim_block(const std::vector<double>& pv, const std::vector<double>& gv) {
    if (pv.empty()) return 0.0;
    double n = static_cast<double>(pv.size());
    double mx = 0, my = 0;
    for (size_t i = 0; i < pv.size(); ++i) {
        mx += pv[i];
        my += gv[i];
    }
    mx /= n;
    my /= n;
    double sx = 0, sy = 0, sxy = 0;
    for (size_t i = 0; i < pv.size(); ++i) {
        sx += (pv[i] - mx) * (pv[i] - mx);
        sy += (gv[i] - my) * (gv[i] - my);
        sxy += (pv[i] - mx) * (gv[i] - my);
    }
    sx /= n - 1 + DBL_EPSILON;
    sy /= n - 1 + DBL_EPSILON;
    sxy /= n - 1 + DBL_EPSILON;
    double alpha = 4 * mx * my * sxy;
    double beta = (mx * mx + my * my) * (sx + sy);
    if (alpha != 0) return alpha / (beta + DBL_EPSILON);
    return beta == 0 ? 1.0 : 0.0;
}

inline double object_part(const std::vector<double>& vals) {
    if (vals.empty()) return 0.0;
    double n = static_cast<double>(vals.size());
    double m = 0;
    for (double v : vals) m += v;
    m /= n;
    double var = 0;
    for (double v : vals) var += (v - m) * (v - m);
    double sd = vals.size() > 1 ? std::sqrt(var / (n - 1)) : 0.0;
    return 2 * m / (m * m + 1 + sd + DBL_EPSILON);
}

}  // namespace detail

inline double s_measure(const SoftMask& p, const BinaryMask& g) {
    const int h = g.height, w = g.width;
    double gmean = 0, pmean = 0;
    for (size_t i = 0; i < g.size(); ++i) {
        gmean += g.data[i];
        pmean += p.data[i];
    }
    gmean /= g.size();
    pmean /= p.size();
    if (gmean == 0) return std::min(1.0, std::max(0.0, 1 - pmean));
    if (gmean == 1) return std::min(1.0, std::max(0.0, pmean));

    std::vector<double> fg, bg;
    for (size_t i = 0; i < g.size(); ++i) {
        if (g.data[i] != 0.f)
            fg.push_back(p.data[i]);
        else
            bg.push_back(1.0 - p.data[i]);
    }
    double so = gmean * detail::object_part(fg) + (1 - gmean) * detail::object_part(bg);

    double total = 0, xs = 0, ys = 0;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            if (g.at(r, c) != 0.f) {
                total += 1;
                xs += c + 1;
                ys += r + 1;
            }
    auto mround = [](double v) { return static_cast<int>(std::floor(v + 0.5)); };
    int cx = std::min(w, std::max(1, mround(xs / total)));
    int cy = std::min(h, std::max(1, mround(ys / total)));

    auto collect = [&](int r0, int r1, int c0, int c1, std::vector<double>& pv,
                       std::vector<double>& gv) {
        for (int r = r0; r < r1; ++r)
            for (int c = c0; c < c1; ++c) {
                pv.push_back(p.at(r, c));
                gv.push_back(g.at(r, c));
            }
    };
    double sr = 0;
    const int r0s[4] = {0, 0, cy, cy}, r1s[4] = {cy, cy, h, h};
    const int c0s[4] = {0, cx, 0, cx}, c1s[4] = {cx, w, cx, w};
    for (int b = 0; b < 4; ++b) {
        std::vector<double> pv, gv;
        collect(r0s[b], r1s[b], c0s[b], c1s[b], pv, gv);
        double weight = static_cast<double>(pv.size()) / (static_cast<double>(h) * w);
        sr += weight * detail::ssim_block(pv, gv);
    }
    double s = 0.5 * so + 0.5 * sr;
    return std::min(1.0, std::max(0.0, s));
}

// ---- E-measure --------------------------------------------------------------

inline std::array<double, 256> e_curve(const SoftMask& p, const BinaryMask& g) {
    const size_t n = g.size();
    double gsum = 0;
    for (float v : g.data) gsum += v;

    std::array<double, 256> curve{};
    for (int tau = 0; tau < 256; ++tau) {
        double thr = tau / 255.0;
        std::vector<double> pb(n);
        for (size_t i = 0; i < n; ++i) pb[i] = static_cast<double>(p.data[i]) >= thr ? 1.0 : 0.0;

        double acc = 0;
        if (gsum == 0) {
            for (size_t i = 0; i < n; ++i) acc += 1.0 - pb[i];
        } else if (gsum == static_cast<double>(n)) {
            for (size_t i = 0; i < n; ++i) acc += pb[i];
        } else {
            double mg = gsum / n, mp = 0;
            for (double v : pb) mp += v;
            mp /= n;
            for (size_t i = 0; i < n; ++i) {
                double fg = g.data[i] - mg;
                double fp = pb[i] - mp;
                double denom = fg * fg + fp * fp;
                double xi = denom == 0 ? 1.0 : 2 * fg * fp / denom;
                acc += (xi + 1) * (xi + 1) / 4;
            }
        }
        curve[tau] = acc / n;
    }
    return curve;
}

// ---- normalized cut ---------------------------------------------------------

// Direct evaluation of cut/assoc sums from the dense matrix.
inline double ncut_value(const std::vector<float>& w, size_t n,
                         const std::vector<uint8_t>& side) {
    double cut = 0, da = 0, db = 0;
    for (size_t i = 0; i < n; ++i) {
        double deg = 0;
        for (size_t j = 0; j < n; ++j) {
            deg += w[i * n + j];
            if (side[i] != side[j]) cut += w[i * n + j];
        }
        if (side[i])
            da += deg;
        else
            db += deg;
    }
    cut /= 2;  // every cross edge counted twice above
    return cut / da + cut / db;
}

// Minimum Ncut over every split of the sorted eigenvector.
inline double sweep_min(const std::vector<float>& w, size_t n,
                        const std::vector<double>& eigenvector) {
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (eigenvector[a] != eigenvector[b]) return eigenvector[a] < eigenvector[b];
        return a < b;
    });
    double best = std::numeric_limits<double>::infinity();
    for (size_t k = 0; k + 1 < n; ++k) {
        std::vector<uint8_t> side(n, 0);
        for (size_t t = 0; t <= k; ++t) side[order[t]] = 1;
        best = std::min(best, ncut_value(w, n, side));
    }
    return best;
}

// ---- finite differences -------------------------------------------------------

inline double relative_error(double a, double b) {
    double denom = std::max({std::fabs(a), std::fabs(b), 1e-8});
    return std::fabs(a - b) / denom;
}

// Central-difference check along a probe direction. The analytic side is
// contracted with the perturbation as actually realized in float storage,
// so float quantization of x +- eps*dir drops out of the comparison. The
// denominator is floored at a fraction of |grad|*|dir| so that probes
// nearly orthogonal to the gradient do not blow up the ratio.
template <typename Fn>
double gradient_probe_error(Fn&& f, std::vector<float>& x, const std::vector<float>& grad,
                            const std::vector<float>& dir, double epsilon) {
    std::vector<float> saved = x;
    std::vector<float> plus(x.size()), minus(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        plus[i] = static_cast<float>(saved[i] + epsilon * dir[i]);
        minus[i] = static_cast<float>(saved[i] - epsilon * dir[i]);
    }
    x = plus;
    double fp = f();
    x = minus;
    double fm = f();
    x = saved;
    double fd = (fp - fm) / (2.0 * epsilon);
    double analytic = 0, gnorm2 = 0, unorm2 = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        double u = (static_cast<double>(plus[i]) - static_cast<double>(minus[i])) /
                   (2.0 * epsilon);
        analytic += static_cast<double>(grad[i]) * u;
        gnorm2 += static_cast<double>(grad[i]) * grad[i];
        unorm2 += u * u;
    }
    double scale_floor = 1e-3 * std::sqrt(gnorm2 * unorm2) + 1e-12;
    double denom = std::max({std::fabs(analytic), std::fabs(fd), scale_floor});
    return std::fabs(analytic - fd) / denom;
}

}  // namespace ucos::oracle
