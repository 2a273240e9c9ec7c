#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "ucos/core.hpp"

namespace ucos {

double mae(const SoftMask& prediction, const BinaryMask& gt);

// IoU and pixel accuracy of the thresholded prediction. Empty-vs-empty
// IoU is 1 by convention.
std::pair<double, double> miou_acc(const SoftMask& prediction, const BinaryMask& gt,
                                   float threshold = 0.5f);

// Precision/recall at every integer threshold tau in [0, 255], with the
// prediction binarized at tau/255 (inclusive). Requires a non-empty gt.
struct PrCurve {
    std::array<double, 256> precision{};
    std::array<double, 256> recall{};
};
PrCurve fbeta_curve(const SoftMask& prediction, const BinaryMask& gt);

// Dataset-level F: precision and recall averaged across images per
// threshold, then combined with beta^2 = 0.3. Returns (f_max, f_mean).
std::pair<double, double> f_measures(const std::vector<PrCurve>& curves);

// Dependency-weighted F-measure (beta^2 = 1): errors propagated from the
// nearest foreground pixel through a 7x7 sigma-5 Gaussian, background
// errors attenuated by distance. Requires a non-empty gt.
double weighted_fbeta(const SoftMask& prediction, const BinaryMask& gt);

// 0.5 * object-similarity + 0.5 * region-similarity. Degenerate gts fall
// back to 1 - mean(P) (all background) or mean(P) (all foreground).
double s_measure(const SoftMask& prediction, const BinaryMask& gt);

// Enhanced-alignment curve over the 256 thresholds and its max/mean.
std::array<double, 256> e_curve(const SoftMask& prediction, const BinaryMask& gt);
std::pair<double, double> e_measure(const SoftMask& prediction, const BinaryMask& gt);

struct MetricReport {
    std::string dataset_name;
    size_t n_images = 0;
    size_t skipped_empty_gt = 0;  // excluded from the F aggregations
    double miou = 0, acc = 0;
    double f_max = 0, f_mean = 0, f_weighted = 0;
    double s = 0;
    double e_max = 0, e_mean = 0;
    double mae = 0;
};

// Stem-matched evaluation of <pred_dir>/*.png against <gt_dir>/*.png at
// ground-truth resolution (predictions resized bilinearly on mismatch).
MetricReport evaluate_dataset(const std::filesystem::path& pred_dir,
                              const std::filesystem::path& gt_dir,
                              const std::string& dataset_name);

void write_reports_csv(const std::vector<MetricReport>& reports,
                       const std::filesystem::path& path);
std::string render_reports_table(const std::vector<MetricReport>& reports);

}  // namespace ucos
