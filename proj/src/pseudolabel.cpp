#include "ucos/pseudolabel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "ucos/errors.hpp"
#include "ucos/hash.hpp"
#include "ucos/imageio.hpp"
#include "ucos/kernels.hpp"
#include "ucos/parallel.hpp"
#include "ucos/resize.hpp"
#include "ucos/rng.hpp"

namespace ucos {

namespace fs = std::filesystem;

AffinityGraph build_affinity(const PatchFeatureGrid& features, float tau, float eps) {
    if (!(tau > -1.f && tau < 1.f)) throw ValidationError("build_affinity: tau must be in (-1, 1)");
    if (!(eps > 0.f && eps < 1.f)) throw ValidationError("build_affinity: eps must be in (0, 1)");

    const size_t n = features.patches();
    for (size_t i = 0; i < n; ++i) {
        float norm2 = kernels::dot(features.patch(i), features.patch(i), features.dim);
        if (!(norm2 > 0.f))
            throw ValidationError("zero-norm feature vector at patch index " + std::to_string(i));
    }

    AffinityGraph g;
    g.n = n;
    g.tau = tau;
    g.eps = eps;
    g.w.resize(n * n);
    kernels::gemm_nt(n, n, features.dim, features.data.data(), features.dim,
                     features.data.data(), features.dim, 0.f, g.w.data(), n);
    for (float& v : g.w) v = (v >= tau) ? 1.f : eps;
    // Exact symmetry regardless of float rounding in the products.
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) g.at(j, i) = g.at(i, j);
    return g;
}

namespace {

// Implicit-QL with shifts on a symmetric tridiagonal matrix; eigenvectors
// accumulate in the columns of z (k x k, row-major).
void tridiag_eigen(std::vector<double>& d, std::vector<double>& e, std::vector<double>& z,
                   size_t k) {
    z.assign(k * k, 0.0);
    for (size_t i = 0; i < k; ++i) z[i * k + i] = 1.0;
    if (k == 1) return;

    auto sign = [](double a, double b) { return b >= 0 ? std::fabs(a) : -std::fabs(a); };

    for (size_t l = 0; l < k; ++l) {
        int iter = 0;
        size_t m;
        do {
            for (m = l; m + 1 < k; ++m) {
                double dd = std::fabs(d[m]) + std::fabs(d[m + 1]);
                if (std::fabs(e[m]) <= 1e-15 * dd) break;
            }
            if (m != l) {
                if (iter++ == 60) throw Error("tridiagonal eigensolver failed to converge");
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = std::hypot(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + sign(r, g));
                double s = 1.0, c = 1.0, p = 0.0;
                bool underflow = false;
                for (size_t i = m; i-- > l;) {
                    double f = s * e[i];
                    double b = c * e[i];
                    r = std::hypot(f, g);
                    e[i + 1] = r;
                    if (r == 0.0) {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        underflow = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                    for (size_t row = 0; row < k; ++row) {
                        double zf = z[row * k + i + 1];
                        z[row * k + i + 1] = s * z[row * k + i] + c * zf;
                        z[row * k + i] = c * z[row * k + i] - s * zf;
                    }
                }
                if (underflow) continue;
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }
}

// Largest eigenpair of B = I + D^-1/2 W D^-1/2 on the complement of the
// known top eigenvector v0 = D^1/2 * 1. Lanczos with full
// reorthogonalization; exact once the Krylov space closes.
struct RestrictedEig {
    double theta = 0.0;
    std::vector<double> vec;
    double residual = 0.0;
};

RestrictedEig lanczos_second_eigenpair(const AffinityGraph& g,
                                       const std::vector<double>& inv_sqrt_d) {
    const size_t n = g.n;
    std::vector<double> v0(n);
    double v0_norm2 = 0;
    for (size_t i = 0; i < n; ++i) {
        v0[i] = 1.0 / inv_sqrt_d[i];  // sqrt(d_i)
        v0_norm2 += v0[i] * v0[i];
    }
    double inv_v0 = 1.0 / std::sqrt(v0_norm2);
    for (auto& v : v0) v *= inv_v0;

    auto matvec = [&](const std::vector<double>& x, std::vector<double>& out) {
        std::vector<double> t(n);
        for (size_t i = 0; i < n; ++i) t[i] = x[i] * inv_sqrt_d[i];
        for (size_t i = 0; i < n; ++i) {
            const float* row = g.w.data() + i * n;
            double acc = 0;
            for (size_t j = 0; j < n; ++j) acc += static_cast<double>(row[j]) * t[j];
            out[i] = x[i] + inv_sqrt_d[i] * acc;
        }
    };

    auto project_out = [&](std::vector<double>& x, const std::vector<double>& dir) {
        double c = 0;
        for (size_t i = 0; i < n; ++i) c += x[i] * dir[i];
        for (size_t i = 0; i < n; ++i) x[i] -= c * dir[i];
    };

    const size_t kmax = std::min<size_t>(n - 1, 350);
    std::vector<std::vector<double>> basis;
    basis.reserve(kmax);

    Rng rng(0x51ac5eedULL);
    std::vector<double> q(n);
    for (auto& v : q) v = static_cast<double>(rng.uniform()) - 0.5;
    project_out(q, v0);
    double qn = std::sqrt(std::inner_product(q.begin(), q.end(), q.begin(), 0.0));
    if (qn < 1e-12) {  // pathological start, perturb deterministically
        for (size_t i = 0; i < n; ++i) q[i] = (i % 2 == 0) ? 1.0 : -1.0;
        project_out(q, v0);
        qn = std::sqrt(std::inner_product(q.begin(), q.end(), q.begin(), 0.0));
    }
    for (auto& v : q) v /= qn;

    std::vector<double> alpha, beta;
    std::vector<double> z(n), prev;
    const double tol = 1e-9;
    double best_residual = std::numeric_limits<double>::infinity();

    std::vector<double> ritz_d, ritz_e, ritz_z;
    for (size_t j = 0; j < kmax; ++j) {
        basis.push_back(q);
        matvec(q, z);
        double a = std::inner_product(q.begin(), q.end(), z.begin(), 0.0);
        alpha.push_back(a);
        for (size_t i = 0; i < n; ++i) z[i] -= a * q[i];
        if (!prev.empty())
            for (size_t i = 0; i < n; ++i) z[i] -= beta.back() * prev[i];
        // Two rounds of Gram-Schmidt against v0 and the whole basis.
        for (int round = 0; round < 2; ++round) {
            project_out(z, v0);
            for (const auto& b : basis) project_out(z, b);
        }
        double bnorm = std::sqrt(std::inner_product(z.begin(), z.end(), z.begin(), 0.0));

        bool closing = bnorm < 1e-12;
        bool check = closing || j + 1 == kmax || (j < 64 ? true : ((j & 7) == 0));
        if (check && !alpha.empty()) {
            size_t k = alpha.size();
            ritz_d = alpha;
            ritz_e.assign(k, 0.0);
            for (size_t i = 0; i + 1 < k; ++i) ritz_e[i] = beta[i];
            tridiag_eigen(ritz_d, ritz_e, ritz_z, k);
            size_t top = static_cast<size_t>(
                std::max_element(ritz_d.begin(), ritz_d.end()) - ritz_d.begin());
            double resid = closing ? 0.0 : std::fabs(bnorm * ritz_z[(k - 1) * k + top]);
            best_residual = std::min(best_residual, resid);
            if (closing || resid <= tol * std::max(1.0, std::fabs(ritz_d[top]))) {
                RestrictedEig out;
                out.theta = ritz_d[top];
                out.residual = resid;
                out.vec.assign(n, 0.0);
                for (size_t b = 0; b < k; ++b) {
                    double coef = ritz_z[b * k + top];
                    const auto& qb = basis[b];
                    for (size_t i = 0; i < n; ++i) out.vec[i] += coef * qb[i];
                }
                return out;
            }
        }
        if (closing) break;
        beta.push_back(bnorm);
        prev = q;
        for (size_t i = 0; i < n; ++i) q[i] = z[i] / bnorm;
    }

    // Loose acceptance: partition quality degrades gracefully with a
    // slightly unconverged eigenvector, so only a genuinely bad residual
    // is fatal.
    if (best_residual <= 1e-6) {
        size_t k = alpha.size();
        ritz_d = alpha;
        ritz_e.assign(k, 0.0);
        for (size_t i = 0; i + 1 < k; ++i) ritz_e[i] = beta[i];
        tridiag_eigen(ritz_d, ritz_e, ritz_z, k);
        size_t top = static_cast<size_t>(std::max_element(ritz_d.begin(), ritz_d.end()) -
                                         ritz_d.begin());
        RestrictedEig out;
        out.theta = ritz_d[top];
        out.residual = best_residual;
        out.vec.assign(n, 0.0);
        for (size_t b = 0; b < k; ++b) {
            double coef = ritz_z[b * k + top];
            for (size_t i = 0; i < n; ++i) out.vec[i] += coef * basis[b][i];
        }
        return out;
    }
    char buf[128];
    std::snprintf(buf, sizeof(buf), "eigensolver did not converge: residual norm %.3e",
                  best_residual);
    throw Error(buf);
}

}  // namespace

double ncut_objective(const AffinityGraph& graph, const std::vector<uint8_t>& partition) {
    const size_t n = graph.n;
    double cut = 0, assoc_a = 0, assoc_b = 0;
    for (size_t i = 0; i < n; ++i) {
        const float* row = graph.w.data() + i * n;
        double deg = 0;
        for (size_t j = 0; j < n; ++j) {
            deg += row[j];
            if (j > i && partition[i] != partition[j]) cut += row[j];
        }
        if (partition[i])
            assoc_a += deg;
        else
            assoc_b += deg;
    }
    if (assoc_a == 0 || assoc_b == 0)
        throw ValidationError("ncut_objective: trivial partition");
    return cut / assoc_a + cut / assoc_b;
}

CutResult normalized_cut_bipartition(const AffinityGraph& graph) {
    const size_t n = graph.n;
    if (n < 2) throw ValidationError("normalized cut requires at least 2 nodes");

    std::vector<double> degree(n), inv_sqrt_d(n);
    for (size_t i = 0; i < n; ++i) {
        const float* row = graph.w.data() + i * n;
        double acc = 0;
        for (size_t j = 0; j < n; ++j) acc += row[j];
        if (!(acc > 0)) throw ValidationError("graph row " + std::to_string(i) + " has zero degree");
        degree[i] = acc;
        inv_sqrt_d[i] = 1.0 / std::sqrt(acc);
    }

    RestrictedEig eig = lanczos_second_eigenpair(graph, inv_sqrt_d);

    CutResult result;
    result.eigenvector.resize(n);
    for (size_t i = 0; i < n; ++i) result.eigenvector[i] = eig.vec[i] * inv_sqrt_d[i];

    // Sweep every split of the sorted eigenvector, tracking cut and assoc
    // incrementally (O(n) per split).
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (result.eigenvector[a] != result.eigenvector[b])
            return result.eigenvector[a] < result.eigenvector[b];
        return a < b;
    });

    double assoc_total = 0;
    for (double d : degree) assoc_total += d;

    std::vector<double> links_a(n, 0.0);
    double cut = 0, assoc_a = 0;
    double best = std::numeric_limits<double>::infinity();
    size_t best_k = 0;
    for (size_t t = 0; t + 1 < n; ++t) {
        size_t v = order[t];
        const float* row = graph.w.data() + v * n;
        cut += degree[v] - static_cast<double>(row[v]) - 2.0 * links_a[v];
        assoc_a += degree[v];
        for (size_t u = 0; u < n; ++u) links_a[u] += row[u];
        double assoc_b = assoc_total - assoc_a;
        double value = cut / assoc_a + cut / assoc_b;
        if (value < best) {
            best = value;
            best_k = t;
        }
    }

    result.partition.assign(n, 0);
    for (size_t t = 0; t <= best_k; ++t) result.partition[order[t]] = 1;
    result.ncut_value = ncut_objective(graph, result.partition);
    return result;
}

BinaryMask select_foreground(const CutResult& cut, int rows, int cols) {
    const size_t n = cut.partition.size();
    if (n != static_cast<size_t>(rows) * cols)
        throw ValidationError("select_foreground: grid dims do not match partition size");

    size_t peak = 0;
    double peak_abs = -1;
    for (size_t i = 0; i < n; ++i) {
        double a = std::fabs(cut.eigenvector[i]);
        if (a > peak_abs) {
            peak_abs = a;
            peak = i;
        }
    }
    uint8_t fg_side = cut.partition[peak];

    const size_t corners[4] = {0, static_cast<size_t>(cols) - 1,
                               static_cast<size_t>(rows - 1) * cols,
                               static_cast<size_t>(rows) * cols - 1};
    int corner_hits = 0;
    for (size_t c : corners)
        if (cut.partition[c] == fg_side) ++corner_hits;
    if (corner_hits >= 3) fg_side = fg_side ? 0 : 1;

    BinaryMask mask(rows, cols);
    for (size_t i = 0; i < n; ++i) mask.data[i] = (cut.partition[i] == fg_side) ? 1.f : 0.f;
    return mask;
}

BinaryMask maskcut(const PatchFeatureGrid& features, const MaskCutParams& params) {
    if (params.iterations < 1) throw ValidationError("maskcut: iterations must be >= 1");
    PatchFeatureGrid normalized = l2_normalized(features);
    AffinityGraph graph = build_affinity(normalized, params.tau, params.eps);
    const size_t n = graph.n;
    const int rows = features.rows, cols = features.cols;

    std::vector<uint8_t> selected(n, 0);
    size_t selected_count = 0;
    for (int round = 0; round < params.iterations; ++round) {
        CutResult cut = normalized_cut_bipartition(graph);
        BinaryMask fg = select_foreground(cut, rows, cols);

        std::vector<size_t> newly;
        for (size_t i = 0; i < n; ++i)
            if (fg.data[i] != 0.f && !selected[i]) newly.push_back(i);

        size_t remaining = n - selected_count;
        if (newly.size() < 2 || static_cast<double>(newly.size()) > 0.8 * remaining) break;

        for (size_t i : newly) selected[i] = 1;
        selected_count += newly.size();
        if (round + 1 < params.iterations) {
            for (size_t i : newly) {
                for (size_t j = 0; j < n; ++j) {
                    graph.at(i, j) = params.eps;
                    graph.at(j, i) = params.eps;
                }
            }
        }
    }

    BinaryMask mask(rows, cols);
    for (size_t i = 0; i < n; ++i) mask.data[i] = selected[i] ? 1.f : 0.f;
    return mask;
}

BinaryMask upsample_pseudo_label(const BinaryMask& patch_mask, int patch_size, int out_h,
                                 int out_w) {
    (void)patch_size;
    SoftMask up;
    up.height = out_h;
    up.width = out_w;
    up.data.resize(static_cast<size_t>(out_h) * out_w);
    bilinear_resize(patch_mask.data.data(), patch_mask.height, patch_mask.width,
                    up.data.data(), out_h, out_w);
    return binarize(up, 0.5f);
}

uint64_t pseudo_label_param_hash(const PseudoLabelConfig& config,
                                 const FeatureExtractor& extractor) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "pl1|tau=%.9g|eps=%.9g|iters=%d|size=%dx%d",
                  config.cut.tau, config.cut.eps, config.cut.iterations, config.image_h,
                  config.image_w);
    Fnv64 h;
    h.update(std::string(buf));
    h.update_value(extractor.signature());
    return h.digest();
}

PseudoLabelResult generate_and_cache(const SplitManifest& manifest,
                                     const FeatureExtractor& extractor,
                                     const PseudoLabelConfig& config,
                                     const fs::path& cache_dir,
                                     const fs::path* feature_cache) {
    uint64_t param_hash = pseudo_label_param_hash(config, extractor);
    fs::path dir = cache_dir / to_hex(param_hash);
    fs::create_directories(dir);

    fs::path params_file = dir / "params.json";
    if (!fs::exists(params_file)) {
        nlohmann::json params;
        params["tau"] = config.cut.tau;
        params["eps"] = config.cut.eps;
        params["iterations"] = config.cut.iterations;
        params["arch"] = extractor.name();
        params["extractor_signature"] = to_hex(extractor.signature());
        params["image_size"] = {config.image_h, config.image_w};
        std::ofstream out(params_file);
        out << params.dump(2) << "\n";
    }

    struct Slot {
        std::string id;
        fs::path path;
        int state = 0;  // 0 unusable, 1 usable, 2 reused, 3 degenerate-skip
    };
    std::vector<Slot> slots(manifest.records.size());

    parallel_for(manifest.records.size(), [&](size_t begin, size_t end) {
        for (size_t idx = begin; idx < end; ++idx) {
            const DatasetRecord& rec = manifest.records[idx];
            Slot& slot = slots[idx];
            slot.id = rec.id();
            slot.path = dir / (slot.id + ".png");
            fs::path skip_marker = dir / (slot.id + ".skip");
            if (fs::exists(slot.path)) {
                slot.state = 2;
                continue;
            }
            if (fs::exists(skip_marker)) {
                slot.state = 3;
                continue;
            }
            LoadedSample sample = load_and_resize(rec, config.image_h, config.image_w);
            PatchFeatureGrid features =
                extract_with_cache(extractor, sample.image, feature_cache);
            BinaryMask patch_mask = maskcut(features, config.cut);
            BinaryMask label =
                upsample_pseudo_label(patch_mask, extractor.patch_size(), config.image_h,
                                      config.image_w);
            double frac = static_cast<double>(foreground_count(label)) / label.size();
            if (frac < config.min_foreground || frac > config.max_foreground) {
                std::fprintf(stderr,
                             "warning: degenerate pseudo-label for %s (foreground %.4f), "
                             "image skipped\n",
                             slot.id.c_str(), frac);
                std::ofstream marker(skip_marker);
                marker << frac << "\n";
                slot.state = 3;
                continue;
            }
            std::vector<uint8_t> bytes(label.size());
            for (size_t i = 0; i < bytes.size(); ++i)
                bytes[i] = label.data[i] != 0.f ? 255 : 0;
            atomic_write_png_gray(slot.path, bytes.data(), label.height, label.width);
            slot.state = 1;
        }
    });

    PseudoLabelResult result;
    for (const Slot& slot : slots) {
        switch (slot.state) {
            case 1:
                result.labels[slot.id] = slot.path;
                result.computed++;
                break;
            case 2:
                result.labels[slot.id] = slot.path;
                result.reused++;
                break;
            case 3:
                result.degenerate++;
                break;
            default:
                break;
        }
    }
    return result;
}

}  // namespace ucos
