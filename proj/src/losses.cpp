#include "ucos/losses.hpp"

#include <algorithm>
#include <cmath>

#include "ucos/errors.hpp"

namespace ucos {

namespace {

constexpr int kPoolRadius = 15;  // 31x31 window
constexpr double kPoolArea = 31.0 * 31.0;
constexpr float kClamp = 1e-7f;

inline float clamp_prob(float p) {
    return p < kClamp ? kClamp : (p > 1.f - kClamp ? 1.f - kClamp : p);
}

}  // namespace

std::vector<float> boundary_weight_map(const BinaryMask& gt) {
    const int h = gt.height, w = gt.width;
    // Summed-area table; zero padding outside the image.
    std::vector<double> sat(static_cast<size_t>(h + 1) * (w + 1), 0.0);
    for (int r = 0; r < h; ++r) {
        const float* row = gt.data.data() + static_cast<size_t>(r) * w;
        double* sat_row = sat.data() + static_cast<size_t>(r + 1) * (w + 1);
        const double* sat_prev = sat.data() + static_cast<size_t>(r) * (w + 1);
        double acc = 0;
        for (int c = 0; c < w; ++c) {
            acc += row[c];
            sat_row[c + 1] = sat_prev[c + 1] + acc;
        }
    }
    auto box_sum = [&](int r0, int c0, int r1, int c1) {  // inclusive, clipped
        r0 = std::max(r0, 0);
        c0 = std::max(c0, 0);
        r1 = std::min(r1, h - 1);
        c1 = std::min(c1, w - 1);
        const size_t stride = w + 1;
        return sat[static_cast<size_t>(r1 + 1) * stride + (c1 + 1)] -
               sat[static_cast<size_t>(r0) * stride + (c1 + 1)] -
               sat[static_cast<size_t>(r1 + 1) * stride + c0] +
               sat[static_cast<size_t>(r0) * stride + c0];
    };

    std::vector<float> weights(gt.size());
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            double pooled = box_sum(r - kPoolRadius, c - kPoolRadius, r + kPoolRadius,
                                    c + kPoolRadius) /
                            kPoolArea;
            double y = gt.at(r, c);
            weights[static_cast<size_t>(r) * w + c] =
                static_cast<float>(1.0 + 5.0 * std::fabs(pooled - y));
        }
    }
    return weights;
}

double structure_loss(const SoftMask& prediction, const BinaryMask& gt,
                      std::vector<float>* grad_out) {
    if (prediction.height != gt.height || prediction.width != gt.width)
        throw ValidationError("structure_loss: prediction and ground truth sizes differ");
    const size_t n = prediction.size();
    std::vector<float> weights = boundary_weight_map(gt);

    double wsum = 0, wbce = 0, inter = 0, uni = 0;
    for (size_t i = 0; i < n; ++i) {
        double wv = weights[i];
        double p = clamp_prob(prediction.data[i]);
        double y = gt.data[i];
        wsum += wv;
        wbce += wv * -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
        inter += wv * p * y;
        uni += wv * (p + y - p * y);
    }
    double loss_bce = wbce / wsum;
    double loss_iou = 1.0 - (inter + 1.0) / (uni + 1.0);

    if (grad_out) {
        if (grad_out->size() != n) grad_out->assign(n, 0.f);
        double u1 = uni + 1.0, i1 = inter + 1.0;
        for (size_t i = 0; i < n; ++i) {
            double wv = weights[i];
            double p = clamp_prob(prediction.data[i]);
            double y = gt.data[i];
            double g_bce = wv * (p - y) / (p * (1.0 - p)) / wsum;
            double g_iou = -(wv * y * u1 - i1 * wv * (1.0 - y)) / (u1 * u1);
            (*grad_out)[i] += static_cast<float>(g_bce + g_iou);
        }
    }
    return loss_bce + loss_iou;
}

double adversarial_loss(const std::vector<const ClassScoreMap*>& score_maps,
                        const std::vector<int>& labels,
                        std::vector<std::vector<float>>* grads) {
    if (score_maps.empty()) throw ValidationError("adversarial_loss: empty score map list");
    if (score_maps.size() != labels.size())
        throw ValidationError("adversarial_loss: one label required per score map");

    if (grads) grads->assign(score_maps.size(), {});
    double total = 0;
    for (size_t m = 0; m < score_maps.size(); ++m) {
        const ClassScoreMap& map = *score_maps[m];
        const size_t n = map.size();
        if (n == 0) throw ValidationError("adversarial_loss: empty score map");
        double c = labels[m];
        double acc = 0;
        for (size_t i = 0; i < n; ++i) {
            double s = clamp_prob(map.data[i]);
            acc += -(c * std::log(s) + (1.0 - c) * std::log(1.0 - s));
        }
        total += acc / static_cast<double>(n);
        if (grads) {
            auto& g = (*grads)[m];
            g.assign(n, 0.f);
            double scale = 1.0 / (static_cast<double>(n) * score_maps.size());
            for (size_t i = 0; i < n; ++i) {
                double s = clamp_prob(map.data[i]);
                g[i] = static_cast<float>((-c / s + (1.0 - c) / (1.0 - s)) * scale);
            }
        }
    }
    return total / static_cast<double>(score_maps.size());
}

LossValue total_loss(const SoftMask& prediction, const BinaryMask& gt,
                     const std::vector<const ClassScoreMap*>& score_maps,
                     const std::vector<int>& labels) {
    LossValue value;
    value.seg_term = structure_loss(prediction, gt);
    value.adv_term = adversarial_loss(score_maps, labels);
    value.total = value.seg_term + value.adv_term;
    return value;
}

}  // namespace ucos
