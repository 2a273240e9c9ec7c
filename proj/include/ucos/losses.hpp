#pragma once

#include <vector>

#include "ucos/core.hpp"

namespace ucos {

struct LossValue {
    double total = 0.0;
    double seg_term = 0.0;
    double adv_term = 0.0;
};

// Boundary-emphasizing weights w = 1 + 5*|meanpool_31x31(Y) - Y| with
// stride-1 zero-padded pooling (the count always includes padding, so the
// divisor is 31*31 everywhere). w lies in [1, 6].
std::vector<float> boundary_weight_map(const BinaryMask& gt);

// Weighted BCE + weighted IoU over the pixel grid:
//   wBCE = sum(w*bce(P,Y)) / sum(w)
//   wIoU = 1 - (sum(w*P*Y) + 1) / (sum(w*(P+Y-P*Y)) + 1)
// P is clamped to [1e-7, 1-1e-7] before the logs. When grad_out is
// non-null it receives d(loss)/dP accumulated in place.
double structure_loss(const SoftMask& prediction, const BinaryMask& gt,
                      std::vector<float>* grad_out = nullptr);

// Mean over maps of per-pixel binary cross entropy against the scalar
// class label. grads, when present, is filled with one gradient map per
// score map.
double adversarial_loss(const std::vector<const ClassScoreMap*>& score_maps,
                        const std::vector<int>& labels,
                        std::vector<std::vector<float>>* grads = nullptr);

LossValue total_loss(const SoftMask& prediction, const BinaryMask& gt,
                     const std::vector<const ClassScoreMap*>& score_maps,
                     const std::vector<int>& labels);

}  // namespace ucos
