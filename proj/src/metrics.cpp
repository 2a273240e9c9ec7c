#include "ucos/metrics.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "ucos/errors.hpp"
#include "ucos/imageio.hpp"
#include "ucos/parallel.hpp"
#include "ucos/resize.hpp"

namespace ucos {

namespace fs = std::filesystem;

namespace {

void check_aligned(const SoftMask& p, const BinaryMask& g, const char* what) {
    if (p.height != g.height || p.width != g.width)
        throw ValidationError(std::string(what) + ": prediction and ground truth sizes differ");
    if (p.size() == 0) throw ValidationError(std::string(what) + ": empty masks");
}

// Quantization level L(p) = max tau in [0,255] with p >= tau/255, robust
// against float rounding at the exact k/255 boundaries.
int threshold_level(float p) {
    int level = static_cast<int>(std::floor(static_cast<double>(p) * 255.0));
    level = std::clamp(level, 0, 255);
    if (level < 255 && static_cast<double>(p) >= (level + 1) / 255.0) ++level;
    if (level > 0 && static_cast<double>(p) < level / 255.0) --level;
    return level;
}

struct ThresholdCounts {
    // Counts of pixels with level >= tau, total and foreground-restricted.
    std::array<double, 256> predicted{};
    std::array<double, 256> true_positive{};
    double gt_count = 0;
    double total = 0;
};

ThresholdCounts threshold_counts(const SoftMask& p, const BinaryMask& g) {
    std::array<double, 256> hist_all{}, hist_fg{};
    const size_t n = p.size();
    for (size_t i = 0; i < n; ++i) {
        int level = threshold_level(p.data[i]);
        hist_all[level] += 1;
        if (g.data[i] != 0.f) hist_fg[level] += 1;
    }
    ThresholdCounts c;
    c.total = static_cast<double>(n);
    double acc_all = 0, acc_fg = 0;
    for (int tau = 255; tau >= 0; --tau) {
        acc_all += hist_all[tau];
        acc_fg += hist_fg[tau];
        c.predicted[tau] = acc_all;
        c.true_positive[tau] = acc_fg;
    }
    for (size_t i = 0; i < n; ++i)
        if (g.data[i] != 0.f) c.gt_count += 1;
    return c;
}

}  // namespace

double mae(const SoftMask& prediction, const BinaryMask& gt) {
    check_aligned(prediction, gt, "mae");
    double acc = 0;
    for (size_t i = 0; i < prediction.size(); ++i)
        acc += std::fabs(static_cast<double>(prediction.data[i]) - gt.data[i]);
    return acc / static_cast<double>(prediction.size());
}

std::pair<double, double> miou_acc(const SoftMask& prediction, const BinaryMask& gt,
                                   float threshold) {
    check_aligned(prediction, gt, "miou_acc");
    double inter = 0, uni = 0, agree = 0;
    const size_t n = prediction.size();
    for (size_t i = 0; i < n; ++i) {
        bool p = prediction.data[i] >= threshold;
        bool g = gt.data[i] != 0.f;
        if (p && g) ++inter;
        if (p || g) ++uni;
        if (p == g) ++agree;
    }
    double iou = uni == 0 ? 1.0 : inter / uni;
    return {iou, agree / static_cast<double>(n)};
}

PrCurve fbeta_curve(const SoftMask& prediction, const BinaryMask& gt) {
    check_aligned(prediction, gt, "fbeta_curve");
    ThresholdCounts c = threshold_counts(prediction, gt);
    if (c.gt_count == 0) throw ValidationError("fbeta_curve: ground truth has no foreground");
    PrCurve curve;
    for (int tau = 0; tau < 256; ++tau) {
        double pred = c.predicted[tau];
        double tp = c.true_positive[tau];
        curve.precision[tau] = pred > 0 ? tp / pred : 0.0;
        curve.recall[tau] = tp / c.gt_count;
    }
    return curve;
}

std::pair<double, double> f_measures(const std::vector<PrCurve>& curves) {
    if (curves.empty()) throw ValidationError("f_measures: no curves to aggregate");
    constexpr double beta2 = 0.3;
    double f_max = 0, f_sum = 0;
    for (int tau = 0; tau < 256; ++tau) {
        double pr = 0, re = 0;
        for (const auto& c : curves) {
            pr += c.precision[tau];
            re += c.recall[tau];
        }
        pr /= static_cast<double>(curves.size());
        re /= static_cast<double>(curves.size());
        double denom = beta2 * pr + re;
        double f = denom > 0 ? (1.0 + beta2) * pr * re / denom : 0.0;
        f_max = std::max(f_max, f);
        f_sum += f;
    }
    return {f_max, f_sum / 256.0};
}

// ---- weighted F-measure -----------------------------------------------------

namespace {

// Exact squared-Euclidean distance transform with the index of the
// nearest foreground pixel; ties break toward the smaller linear index.
// Column pass first, then a pruned outward row scan (distances are
// integers, so tie handling is exact).
void nearest_foreground(const BinaryMask& gt, std::vector<int64_t>& dist2,
                        std::vector<int32_t>& index) {
    const int h = gt.height, w = gt.width;
    const int64_t inf = std::numeric_limits<int64_t>::max() / 4;
    std::vector<int64_t> col_d(static_cast<size_t>(h) * w, inf);
    std::vector<int32_t> col_r(static_cast<size_t>(h) * w, -1);

    for (int c = 0; c < w; ++c) {
        int last = -1;
        for (int r = 0; r < h; ++r) {
            if (gt.at(r, c) != 0.f) last = r;
            if (last >= 0) {
                int64_t d = static_cast<int64_t>(r - last) * (r - last);
                col_d[static_cast<size_t>(r) * w + c] = d;
                col_r[static_cast<size_t>(r) * w + c] = last;
            }
        }
        last = -1;
        for (int r = h - 1; r >= 0; --r) {
            if (gt.at(r, c) != 0.f) last = r;
            if (last >= 0) {
                int64_t d = static_cast<int64_t>(last - r) * (last - r);
                size_t i = static_cast<size_t>(r) * w + c;
                // Strict improvement only: on ties the upper row (smaller
                // index) from the first scan wins.
                if (d < col_d[i]) {
                    col_d[i] = d;
                    col_r[i] = last;
                }
            }
        }
    }

    dist2.assign(static_cast<size_t>(h) * w, inf);
    index.assign(static_cast<size_t>(h) * w, -1);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            size_t at = static_cast<size_t>(r) * w + c;
            int64_t best = inf;
            int64_t best_idx = -1;
            auto consider = [&](int cc) {
                size_t i = static_cast<size_t>(r) * w + cc;
                if (col_r[i] < 0) return;
                int64_t d = col_d[i] + static_cast<int64_t>(cc - c) * (cc - c);
                int64_t idx = static_cast<int64_t>(col_r[i]) * w + cc;
                if (d < best || (d == best && idx < best_idx)) {
                    best = d;
                    best_idx = idx;
                }
            };
            consider(c);
            for (int o = 1; o < w; ++o) {
                int64_t o2 = static_cast<int64_t>(o) * o;
                if (o2 > best) break;
                if (c - o >= 0) consider(c - o);
                if (c + o < w) consider(c + o);
            }
            dist2[at] = best;
            index[at] = static_cast<int32_t>(best_idx);
        }
    }
}

}  // namespace

double weighted_fbeta(const SoftMask& prediction, const BinaryMask& gt) {
    check_aligned(prediction, gt, "weighted_fbeta");
    const int h = gt.height, w = gt.width;
    const size_t n = gt.size();

    double gt_count = 0;
    for (float v : gt.data) gt_count += v;
    if (gt_count == 0) throw ValidationError("weighted_fbeta: ground truth has no foreground");

    std::vector<double> error(n);
    for (size_t i = 0; i < n; ++i)
        error[i] = std::fabs(static_cast<double>(prediction.data[i]) - gt.data[i]);

    std::vector<int64_t> dist2;
    std::vector<int32_t> nearest;
    nearest_foreground(gt, dist2, nearest);

    // Background errors take the error of their nearest foreground pixel
    // before the dependency blur.
    std::vector<double> error_t = error;
    for (size_t i = 0; i < n; ++i)
        if (gt.data[i] == 0.f) error_t[i] = error[static_cast<size_t>(nearest[i])];

    // 7x7 Gaussian (sigma 5), normalized, zero-padded correlation.
    double kernel[7][7];
    double ksum = 0;
    for (int i = 0; i < 7; ++i)
        for (int j = 0; j < 7; ++j) {
            double dy = i - 3, dx = j - 3;
            kernel[i][j] = std::exp(-(dy * dy + dx * dx) / (2.0 * 25.0));
            ksum += kernel[i][j];
        }
    for (auto& row : kernel)
        for (double& v : row) v /= ksum;

    std::vector<double> blurred(n, 0.0);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            double acc = 0;
            for (int i = 0; i < 7; ++i) {
                int rr = r + i - 3;
                if (rr < 0 || rr >= h) continue;
                const double* src = error_t.data() + static_cast<size_t>(rr) * w;
                for (int j = 0; j < 7; ++j) {
                    int cc = c + j - 3;
                    if (cc < 0 || cc >= w) continue;
                    acc += kernel[i][j] * src[cc];
                }
            }
            blurred[static_cast<size_t>(r) * w + c] = acc;
        }
    }

    const double decay = std::log(0.5) / 5.0;
    double fg_error_sum = 0, bg_error_sum = 0;
    for (size_t i = 0; i < n; ++i) {
        bool fg = gt.data[i] != 0.f;
        double min_e = error[i];
        if (fg && blurred[i] < min_e) min_e = blurred[i];
        double b = fg ? 1.0 : 2.0 - std::exp(decay * std::sqrt(static_cast<double>(dist2[i])));
        double ew = min_e * b;
        if (fg)
            fg_error_sum += ew;
        else
            bg_error_sum += ew;
    }

    double tpw = gt_count - fg_error_sum;
    double fpw = bg_error_sum;
    double recall = 1.0 - fg_error_sum / gt_count;
    double precision = tpw / (DBL_EPSILON + tpw + fpw);
    return 2.0 * recall * precision / (DBL_EPSILON + recall + precision);
}

// ---- S-measure --------------------------------------------------------------

namespace {

double object_score(const std::vector<double>& values) {
    if (values.empty()) return 0.0;
    double mean = 0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0;
    for (double v : values) var += (v - mean) * (v - mean);
    double stddev = values.size() > 1 ? std::sqrt(var / (static_cast<double>(values.size()) - 1.0))
                                      : 0.0;
    return 2.0 * mean / (mean * mean + 1.0 + stddev + DBL_EPSILON);
}

double block_ssim(const SoftMask& p, const BinaryMask& g, int r0, int r1, int c0, int c1) {
    int64_t count = static_cast<int64_t>(r1 - r0) * (c1 - c0);
    if (count <= 0) return 0.0;
    double mx = 0, my = 0;
    for (int r = r0; r < r1; ++r)
        for (int c = c0; c < c1; ++c) {
            mx += p.at(r, c);
            my += g.at(r, c);
        }
    mx /= static_cast<double>(count);
    my /= static_cast<double>(count);
    double sx = 0, sy = 0, sxy = 0;
    for (int r = r0; r < r1; ++r)
        for (int c = c0; c < c1; ++c) {
            double dx = p.at(r, c) - mx;
            double dy = g.at(r, c) - my;
            sx += dx * dx;
            sy += dy * dy;
            sxy += dx * dy;
        }
    double denom_n = static_cast<double>(count) - 1.0 + DBL_EPSILON;
    sx /= denom_n;
    sy /= denom_n;
    sxy /= denom_n;
    double alpha = 4.0 * mx * my * sxy;
    double beta = (mx * mx + my * my) * (sx + sy);
    if (alpha != 0.0) return alpha / (beta + DBL_EPSILON);
    if (beta == 0.0) return 1.0;
    return 0.0;
}

// MATLAB-style round: half away from zero.
int round_half_away(double v) { return static_cast<int>(v >= 0 ? std::floor(v + 0.5) : std::ceil(v - 0.5)); }

}  // namespace

double s_measure(const SoftMask& prediction, const BinaryMask& gt) {
    check_aligned(prediction, gt, "s_measure");
    const int h = gt.height, w = gt.width;
    const size_t n = gt.size();

    double gt_mean = 0;
    for (float v : gt.data) gt_mean += v;
    gt_mean /= static_cast<double>(n);

    double pred_mean = 0;
    for (float v : prediction.data) pred_mean += v;
    pred_mean /= static_cast<double>(n);

    if (gt_mean == 0.0) return std::clamp(1.0 - pred_mean, 0.0, 1.0);
    if (gt_mean == 1.0) return std::clamp(pred_mean, 0.0, 1.0);

    // Object term: foreground similarity on P, background similarity on
    // the complement, mixed by the foreground prior.
    std::vector<double> fg_vals, bg_vals;
    fg_vals.reserve(n);
    bg_vals.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        if (gt.data[i] != 0.f)
            fg_vals.push_back(prediction.data[i]);
        else
            bg_vals.push_back(1.0 - prediction.data[i]);
    }
    double s_object = gt_mean * object_score(fg_vals) + (1.0 - gt_mean) * object_score(bg_vals);

    // Region term: 4 blocks split at the foreground centroid (1-based
    // convention), block SSIM weighted by area.
    double total = gt_mean * static_cast<double>(n);
    double col_acc = 0, row_acc = 0;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            if (gt.at(r, c) != 0.f) {
                col_acc += c + 1;
                row_acc += r + 1;
            }
    int cx = round_half_away(col_acc / total);
    int cy = round_half_away(row_acc / total);
    cx = std::clamp(cx, 1, w);
    cy = std::clamp(cy, 1, h);

    double area = static_cast<double>(n);
    double w1 = static_cast<double>(cx) * cy / area;
    double w2 = static_cast<double>(w - cx) * cy / area;
    double w3 = static_cast<double>(cx) * (h - cy) / area;
    double w4 = 1.0 - w1 - w2 - w3;

    double q1 = block_ssim(prediction, gt, 0, cy, 0, cx);
    double q2 = block_ssim(prediction, gt, 0, cy, cx, w);
    double q3 = block_ssim(prediction, gt, cy, h, 0, cx);
    double q4 = block_ssim(prediction, gt, cy, h, cx, w);
    double s_region = w1 * q1 + w2 * q2 + w3 * q3 + w4 * q4;

    double s = 0.5 * s_object + 0.5 * s_region;
    return std::clamp(s, 0.0, 1.0);
}

// ---- E-measure --------------------------------------------------------------

std::array<double, 256> e_curve(const SoftMask& prediction, const BinaryMask& gt) {
    check_aligned(prediction, gt, "e_measure");
    ThresholdCounts c = threshold_counts(prediction, gt);
    const double n = c.total;
    std::array<double, 256> curve{};

    if (c.gt_count == 0) {
        // All-background gt: enhanced map is 1 - binarized prediction.
        for (int tau = 0; tau < 256; ++tau) curve[tau] = (n - c.predicted[tau]) / n;
        return curve;
    }
    if (c.gt_count == n) {
        for (int tau = 0; tau < 256; ++tau) curve[tau] = c.predicted[tau] / n;
        return curve;
    }

    const double mu_g = c.gt_count / n;
    for (int tau = 0; tau < 256; ++tau) {
        double pred = c.predicted[tau];
        double tp = c.true_positive[tau];
        double n11 = tp;
        double n10 = c.gt_count - tp;   // gt fg, pred bg
        double n01 = pred - tp;         // gt bg, pred fg
        double n00 = n - n11 - n10 - n01;
        double mu_p = pred / n;

        auto enhanced = [&](double phi_g, double phi_p) {
            double denom = phi_g * phi_g + phi_p * phi_p;
            double xi = denom == 0.0 ? 1.0 : 2.0 * phi_g * phi_p / denom;
            return (xi + 1.0) * (xi + 1.0) / 4.0;
        };
        double e = n11 * enhanced(1.0 - mu_g, 1.0 - mu_p) + n10 * enhanced(1.0 - mu_g, -mu_p) +
                   n01 * enhanced(-mu_g, 1.0 - mu_p) + n00 * enhanced(-mu_g, -mu_p);
        curve[tau] = e / n;
    }
    return curve;
}

std::pair<double, double> e_measure(const SoftMask& prediction, const BinaryMask& gt) {
    std::array<double, 256> curve = e_curve(prediction, gt);
    double mx = 0, sum = 0;
    for (double v : curve) {
        mx = std::max(mx, v);
        sum += v;
    }
    return {mx, sum / 256.0};
}

// ---- dataset evaluation -------------------------------------------------------

MetricReport evaluate_dataset(const fs::path& pred_dir, const fs::path& gt_dir,
                              const std::string& dataset_name) {
    if (!fs::is_directory(gt_dir))
        throw ValidationError("ground truth directory missing: " + gt_dir.string());
    if (!fs::is_directory(pred_dir))
        throw ValidationError("prediction directory missing: " + pred_dir.string());

    std::vector<fs::path> gt_files;
    for (const auto& entry : fs::directory_iterator(gt_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".png")
            gt_files.push_back(entry.path());
    std::sort(gt_files.begin(), gt_files.end());
    if (gt_files.empty())
        throw ValidationError("no ground truth PNGs in " + gt_dir.string());

    std::vector<std::string> missing;
    for (const auto& gt : gt_files)
        if (!fs::is_regular_file(pred_dir / (gt.stem().string() + ".png")))
            missing.push_back(gt.stem().string());
    if (!missing.empty()) {
        std::string msg = "missing predictions for " + std::to_string(missing.size()) +
                          " images:";
        size_t shown = std::min<size_t>(missing.size(), 20);
        for (size_t i = 0; i < shown; ++i) msg += " " + missing[i];
        if (shown < missing.size()) msg += " ...";
        throw ValidationError(msg);
    }

    struct PerImage {
        double mae = 0, iou = 0, acc = 0, s = 0, wfb = 0;
        bool has_fg = false;
        PrCurve pr;
        std::array<double, 256> e{};
    };
    std::vector<PerImage> rows(gt_files.size());

    parallel_for(gt_files.size(), [&](size_t begin, size_t end) {
        for (size_t idx = begin; idx < end; ++idx) {
            const fs::path& gt_path = gt_files[idx];
            fs::path pred_path = pred_dir / (gt_path.stem().string() + ".png");

            ImageU8 gt_raw = read_image(gt_path);
            BinaryMask gt(gt_raw.height, gt_raw.width);
            for (size_t i = 0; i < gt.data.size(); ++i)
                gt.data[i] = gt_raw.data[i * gt_raw.channels] >= 128 ? 1.f : 0.f;

            ImageU8 pred_raw = read_image(pred_path);
            std::vector<float> pred_native(static_cast<size_t>(pred_raw.height) *
                                           pred_raw.width);
            for (size_t i = 0; i < pred_native.size(); ++i)
                pred_native[i] = pred_raw.data[i * pred_raw.channels] / 255.f;

            SoftMask pred(gt.height, gt.width);
            bilinear_resize(pred_native.data(), pred_raw.height, pred_raw.width,
                            pred.data.data(), gt.height, gt.width);

            PerImage& row = rows[idx];
            row.mae = mae(pred, gt);
            auto [iou, acc] = miou_acc(pred, gt);
            row.iou = iou;
            row.acc = acc;
            row.s = s_measure(pred, gt);
            row.e = e_curve(pred, gt);
            row.has_fg = foreground_count(gt) > 0;
            if (row.has_fg) {
                row.wfb = weighted_fbeta(pred, gt);
                row.pr = fbeta_curve(pred, gt);
            }
        }
    });

    MetricReport report;
    report.dataset_name = dataset_name;
    report.n_images = rows.size();

    std::vector<PrCurve> curves;
    std::array<double, 256> e_acc{};
    double wfb_sum = 0;
    size_t with_fg = 0;
    for (const auto& row : rows) {
        report.mae += row.mae;
        report.miou += row.iou;
        report.acc += row.acc;
        report.s += row.s;
        for (int t = 0; t < 256; ++t) e_acc[t] += row.e[t];
        if (row.has_fg) {
            wfb_sum += row.wfb;
            curves.push_back(row.pr);
            ++with_fg;
        }
    }
    double inv_n = 1.0 / static_cast<double>(rows.size());
    report.mae *= inv_n;
    report.miou *= inv_n;
    report.acc *= inv_n;
    report.s *= inv_n;
    report.skipped_empty_gt = rows.size() - with_fg;
    if (with_fg == 0)
        throw ValidationError("every ground truth in " + gt_dir.string() +
                              " is empty; F-measures undefined");
    report.f_weighted = wfb_sum / static_cast<double>(with_fg);
    auto [fmax, fmean] = f_measures(curves);
    report.f_max = fmax;
    report.f_mean = fmean;
    double e_max = 0, e_sum = 0;
    for (int t = 0; t < 256; ++t) {
        double v = e_acc[t] * inv_n;
        e_max = std::max(e_max, v);
        e_sum += v;
    }
    report.e_max = e_max;
    report.e_mean = e_sum / 256.0;
    if (report.skipped_empty_gt > 0)
        std::fprintf(stderr, "note: %zu images with empty ground truth excluded from F-measures\n",
                     report.skipped_empty_gt);
    return report;
}

void write_reports_csv(const std::vector<MetricReport>& reports, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write report: " + path.string());
    out << "dataset,n_images,miou,acc,f_max,f_mean,f_weighted,s,e_max,e_mean,mae\n";
    char buf[400];
    for (const auto& r : reports) {
        std::snprintf(buf, sizeof(buf), "%s,%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                      r.dataset_name.c_str(), r.n_images, r.miou, r.acc, r.f_max, r.f_mean,
                      r.f_weighted, r.s, r.e_max, r.e_mean, r.mae);
        out << buf;
    }
}

std::string render_reports_table(const std::vector<MetricReport>& reports) {
    std::ostringstream out;
    char buf[400];
    std::snprintf(buf, sizeof(buf), "%-16s %8s %6s %6s %6s %6s %6s %6s %6s %6s %6s\n", "dataset",
                  "images", "mIoU", "Acc", "Fmax", "Fmean", "Fw", "S", "Emax", "Emean", "MAE");
    out << buf;
    for (const auto& r : reports) {
        std::snprintf(buf, sizeof(buf),
                      "%-16s %8zu %6.3f %6.3f %6.3f %6.3f %6.3f %6.3f %6.3f %6.3f %6.3f\n",
                      r.dataset_name.c_str(), r.n_images, r.miou, r.acc, r.f_max, r.f_mean,
                      r.f_weighted, r.s, r.e_max, r.e_mean, r.mae);
        out << buf;
    }
    out << "# F/E aggregation: per-threshold averages across images; empty-gt images excluded\n"
           "# from F columns. Degenerate ground truths use the standard toolkit conventions.\n";
    return out.str();
}

}  // namespace ucos
