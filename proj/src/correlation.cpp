#include "hvc/correlation.hpp"

#include <algorithm>
#include <cmath>

#include "hvc/parallel.hpp"

namespace hvc {

CostVolume build_cost_volume(const FeatureMap& f_r, const FeatureMap& f_t, int d_max) {
    if (f_r.data.h != f_t.data.h || f_r.data.w != f_t.data.w || f_r.data.c != f_t.data.c)
        throw ShapeMismatch("build_cost_volume: feature maps differ in shape");
    if (d_max < 1) throw ShapeMismatch("build_cost_volume: d_max must be >= 1");

    CostVolume cv;
    cv.width = f_r.data.w;
    cv.height = f_r.data.h;
    cv.d_max = d_max;
    const int nch = cv.channel_count();
    cv.values.assign(static_cast<size_t>(cv.width) * cv.height * nch, CostVolume::kInvalid);
    const int fc = f_r.data.c;

    parallel_for(0, cv.height, [&](int y) {
        for (int x = 0; x < cv.width; ++x) {
            double* out = cv.px(x, y);
            const double* fr = f_r.data.px(y, x);
            for (int dy = -d_max; dy <= d_max; ++dy) {
                const int yy = y + dy;
                if (yy < 0 || yy >= cv.height) continue;
                for (int dx = -d_max; dx <= d_max; ++dx) {
                    const int xx = x + dx;
                    if (xx < 0 || xx >= cv.width) continue;
                    const double* ft = f_t.data.px(yy, xx);
                    double acc = 0.0;
                    for (int c = 0; c < fc; ++c) acc += fr[c] * ft[c];
                    out[cv.channel_of(dx, dy)] = acc;
                }
            }
        }
    });
    return cv;
}

DisplacementField soft_argmax_decode(const CostVolume& cv, double temperature) {
    if (temperature <= 0.0) throw ShapeMismatch("soft_argmax_decode: temperature must be > 0");
    DisplacementField f;
    f.width = cv.width;
    f.height = cv.height;
    const size_t n = static_cast<size_t>(cv.width) * cv.height;
    f.dx.assign(n, 0.0f);
    f.dy.assign(n, 0.0f);
    f.peak_score.assign(n, 0.0f);
    f.peak_ratio.assign(n, 1.0f);
    f.has_valid.assign(n, 0);

    const int d = cv.d_max;
    const int side = 2 * d + 1;
    const int nch = cv.channel_count();

    parallel_for(0, cv.height, [&](int y) {
        for (int x = 0; x < cv.width; ++x) {
            const double* c = cv.px(x, y);
            int best = -1;
            double best_v = CostVolume::kInvalid;
            for (int i = 0; i < nch; ++i)
                if (std::isfinite(c[i]) && (best < 0 || c[i] > best_v)) {
                    best = i;
                    best_v = c[i];
                }
            const size_t o = f.idx(x, y);
            if (best < 0) continue;
            f.has_valid[o] = 1;
            f.peak_score[o] = static_cast<float>(best_v);

            // softmax expectation over valid channels
            double wsum = 0.0, ex = 0.0, ey = 0.0;
            for (int i = 0; i < nch; ++i) {
                if (!std::isfinite(c[i])) continue;
                const double w = std::exp((c[i] - best_v) / temperature);
                wsum += w;
                ex += w * (i % side - d);
                ey += w * (i / side - d);
            }
            f.dx[o] = static_cast<float>(ex / wsum);
            f.dy[o] = static_cast<float>(ey / wsum);

            // best non-adjacent runner-up (Chebyshev distance > 1 from the peak)
            const int bx = best % side, by = best / side;
            double second = CostVolume::kInvalid;
            bool have_second = false;
            for (int i = 0; i < nch; ++i) {
                if (!std::isfinite(c[i])) continue;
                if (std::abs(i % side - bx) <= 1 && std::abs(i / side - by) <= 1) continue;
                if (!have_second || c[i] > second) {
                    second = c[i];
                    have_second = true;
                }
            }
            if (have_second) {
                const double num = 1.0 + best_v;
                const double den = std::max(1.0 + second, 1e-6);
                f.peak_ratio[o] = static_cast<float>(num / den);
            }
        }
    });
    return f;
}

std::vector<double> cost_volume_statistics(const std::vector<CostVolume>& levels,
                                           const StatisticsConfig& cfg) {
    std::vector<double> stats;
    stats.reserve(levels.size() * kStatsPerLevel);
    for (const auto& cv : levels) {
        const int nch = cv.channel_count();
        const double ent_threshold = cfg.entropy_threshold_scale * std::log(static_cast<double>(nch));
        const DisplacementField f = soft_argmax_decode(cv, cfg.temperature);

        double sum_peak = 0.0, max_peak = 0.0, sum_ent = 0.0, sum_ratio = 0.0;
        size_t n_high_ent = 0, n_valid = 0;
        bool any = false;
        for (int y = 0; y < cv.height; ++y)
            for (int x = 0; x < cv.width; ++x) {
                const size_t o = f.idx(x, y);
                if (!f.has_valid[o]) continue;
                const double* c = cv.px(x, y);
                const double peak = f.peak_score[o];
                // entropy of the softmax distribution over valid channels
                double wsum = 0.0, went = 0.0;
                for (int i = 0; i < nch; ++i) {
                    if (!std::isfinite(c[i])) continue;
                    const double z = (c[i] - peak) / cfg.temperature;
                    const double w = std::exp(z);
                    wsum += w;
                    went += w * z;
                }
                const double entropy = std::log(wsum) - went / wsum;

                sum_peak += peak;
                max_peak = any ? std::max(max_peak, peak) : peak;
                any = true;
                sum_ent += entropy;
                sum_ratio += f.peak_ratio[o];
                n_high_ent += entropy > ent_threshold;
                ++n_valid;
            }
        const double inv = n_valid > 0 ? 1.0 / static_cast<double>(n_valid) : 0.0;
        stats.push_back(sum_peak * inv);
        stats.push_back(any ? max_peak : 0.0);
        stats.push_back(sum_ent * inv);
        stats.push_back(sum_ratio * inv);
        stats.push_back(n_high_ent * inv);
    }
    return stats;
}

void cost_volume_backward(const FeatureMap& f_r, const FeatureMap& f_t, const CostVolume& cv,
                          const std::vector<double>& g_cv, Tensor& g_fr, Tensor& g_ft) {
    if (g_fr.data.empty()) g_fr = Tensor(f_r.data.h, f_r.data.w, f_r.data.c);
    if (g_ft.data.empty()) g_ft = Tensor(f_t.data.h, f_t.data.w, f_t.data.c);
    const int d = cv.d_max;
    const int nch = cv.channel_count();
    const int fc = f_r.data.c;
    for (int y = 0; y < cv.height; ++y)
        for (int x = 0; x < cv.width; ++x) {
            const double* g = g_cv.data() + (static_cast<size_t>(y) * cv.width + x) * nch;
            const double* c = cv.px(x, y);
            double* gr = g_fr.px(y, x);
            const double* fr = f_r.data.px(y, x);
            for (int dy = -d; dy <= d; ++dy) {
                const int yy = y + dy;
                if (yy < 0 || yy >= cv.height) continue;
                for (int dx = -d; dx <= d; ++dx) {
                    const int xx = x + dx;
                    if (xx < 0 || xx >= cv.width) continue;
                    const int ch = cv.channel_of(dx, dy);
                    if (!std::isfinite(c[ch])) continue;
                    const double gv = g[ch];
                    if (gv == 0.0) continue;
                    const double* ft = f_t.data.px(yy, xx);
                    double* gt = g_ft.px(yy, xx);
                    for (int k = 0; k < fc; ++k) {
                        gr[k] += gv * ft[k];
                        gt[k] += gv * fr[k];
                    }
                }
            }
        }
}

Tensor cost_volume_to_tensor(const CostVolume& cv) {
    Tensor t(cv.height, cv.width, cv.channel_count());
    const int nch = cv.channel_count();
    for (int y = 0; y < cv.height; ++y)
        for (int x = 0; x < cv.width; ++x) {
            const double* c = cv.px(x, y);
            double* o = t.px(y, x);
            for (int i = 0; i < nch; ++i) o[i] = std::isfinite(c[i]) ? c[i] : 0.0;
        }
    return t;
}

} // namespace hvc
