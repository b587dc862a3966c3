#include "hvc/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hvc {

namespace {

struct Correspondence {
    double x, y;   // reference template coords
    double u, v;   // tracked template coords
    double w0;     // prior weight
    double w;      // current IRLS weight
    double r = 0;  // residual in px
    int px_index;
};

// Weighted DLT with h33 = 1 on coordinates normalized to [-1, 1].
Homography fit_homography_weighted(const std::vector<Correspondence>& corrs, int size) {
    const double scale = 2.0 / (size - 1);
    auto nx = [&](double v) { return v * scale - 1.0; };

    double a[64] = {0};
    double b[8] = {0};
    double row[8];
    for (const auto& c : corrs) {
        if (c.w <= 0.0) continue;
        const double x = nx(c.x), y = nx(c.y), u = nx(c.u), v = nx(c.v);
        // first equation
        row[0] = x; row[1] = y; row[2] = 1; row[3] = 0; row[4] = 0; row[5] = 0;
        row[6] = -u * x; row[7] = -u * y;
        for (int i = 0; i < 8; ++i) {
            b[i] += c.w * row[i] * u;
            for (int j = i; j < 8; ++j) a[i * 8 + j] += c.w * row[i] * row[j];
        }
        // second equation
        row[0] = 0; row[1] = 0; row[2] = 0; row[3] = x; row[4] = y; row[5] = 1;
        row[6] = -v * x; row[7] = -v * y;
        for (int i = 0; i < 8; ++i) {
            b[i] += c.w * row[i] * v;
            for (int j = i; j < 8; ++j) a[i * 8 + j] += c.w * row[i] * row[j];
        }
    }
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < i; ++j) a[i * 8 + j] = a[j * 8 + i];
    if (!solve_linear_system(a, b, 8, 1e-14))
        throw DegenerateQuad("increment fit is rank-deficient");
    const Homography h_norm({b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7], 1.0});
    const Homography t({scale, 0, -1, 0, scale, -1, 0, 0, 1});
    return compose(invert(t), compose(h_norm, t));
}

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        const double lo = *std::max_element(v.begin(), v.begin() + mid);
        m = 0.5 * (m + lo);
    }
    return m;
}

void clamp_to_trust_region(FourPointDisplacement& d, double trust) {
    double m = d.max_abs();
    if (m <= trust || m == 0.0) return;
    const double s = trust / m;
    for (auto& v : d.d) v = v * s;
}

} // namespace

IncrementEstimate estimate_increment_analytic(const DisplacementField& field,
                                              const ValidityMask& vis_prior,
                                              const AnalyticHeadConfig& cfg) {
    const int w = field.width, h = field.height;
    if (vis_prior.size() != static_cast<size_t>(w) * h)
        throw ShapeMismatch("estimate_increment_analytic: vis_prior size");

    std::vector<Correspondence> corrs;
    corrs.reserve(static_cast<size_t>(w) * h);
    int support = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const size_t i = field.idx(x, y);
            if (!field.has_valid[i] || !vis_prior[i]) continue;
            Correspondence c;
            c.x = x;
            c.y = y;
            c.u = x + field.dx[i];
            c.v = y + field.dy[i];
            c.w0 = std::max(0.0f, field.peak_score[i]);
            c.w = c.w0;
            c.px_index = static_cast<int>(i);
            if (c.w0 > cfg.weight_floor) ++support;
            corrs.push_back(c);
        }
    if (support < cfg.min_support)
        throw InsufficientSupport("only " + std::to_string(support) + " pixels carry weight > " +
                                  std::to_string(cfg.weight_floor));

    // Forward fit maps reference template coords to tracked template coords.
    Homography fwd = fit_homography_weighted(corrs, w);
    for (int it = 0; it < cfg.irls_iterations; ++it) {
        std::vector<double> residuals;
        residuals.reserve(corrs.size());
        for (auto& c : corrs) {
            double ux, vy;
            if (!fwd.try_apply(c.x, c.y, ux, vy)) {
                c.r = 1e9;
            } else {
                c.r = std::hypot(ux - c.u, vy - c.v);
            }
            if (c.w0 > 0.0) residuals.push_back(c.r);
        }
        const double med = median_of(residuals);
        std::vector<double> dev;
        dev.reserve(residuals.size());
        for (double r : residuals) dev.push_back(std::abs(r - med));
        const double mad = median_of(dev);
        const double tc = std::max(cfg.tukey_scale * mad, cfg.tukey_c_min);
        for (auto& c : corrs) {
            if (c.r >= tc) {
                c.w = 0.0;
            } else {
                const double u = c.r / tc;
                const double t = 1.0 - u * u;
                c.w = c.w0 * t * t;
            }
        }
        fwd = fit_homography_weighted(corrs, w);
    }

    IncrementEstimate out;
    out.irls_weights.assign(static_cast<size_t>(w) * h, 0.0f);
    out.vis = VisibilityMask(w, h, 0.0f);
    double rms_num = 0.0;
    size_t rms_den = 0;
    for (auto& c : corrs) {
        double ux, vy;
        c.r = fwd.try_apply(c.x, c.y, ux, vy) ? std::hypot(ux - c.u, vy - c.v) : 1e9;
        out.irls_weights[c.px_index] = static_cast<float>(c.w);
        const bool visible = c.r < cfg.residual_gate &&
                             field.peak_ratio[c.px_index] > cfg.peak_ratio_gate;
        if (visible) {
            out.vis.values[c.px_index] = 1.0f;
            rms_num += c.r * c.r;
            ++rms_den;
        }
    }
    out.inlier_rms = rms_den > 0 ? std::sqrt(rms_num / rms_den) : 0.0;
    // fwd maps reference -> tracked; the surrogate increment is its inverse.
    out.disp = homography_to_four_point(invert(fwd), w, h);
    return out;
}

IncrementEstimate estimate_increment_learned(const CostVolume& cv, const HeadNet& head) {
    if (head.cfg.cv_channels != cv.channel_count())
        throw WeightTopologyMismatch("head expects " + std::to_string(head.cfg.cv_channels) +
                                     " cost-volume channels, got " +
                                     std::to_string(cv.channel_count()));
    const Tensor in = cost_volume_to_tensor(cv);
    std::vector<double> disp;
    Tensor logits;
    head.forward(in, disp, logits);

    IncrementEstimate out;
    for (int k = 0; k < 4; ++k) out.disp.d[k] = Vec2(disp[2 * k], disp[2 * k + 1]);
    out.vis = VisibilityMask(cv.width, cv.height);
    for (int y = 0; y < cv.height; ++y)
        for (int x = 0; x < cv.width; ++x)
            out.vis.at(x, y) = static_cast<float>(1.0 / (1.0 + std::exp(-logits.at(y, x, 0))));
    return out;
}

namespace {

// One Gauss-Newton step of intensity alignment around the identity warp.
// Returns the reference->tracked warp update.
Homography gauss_newton_step(const Template& tr, const Template& tt) {
    const int n = tr.size();
    double jtj[64] = {0};
    double jtr[8] = {0};
    double j[8];
    for (int y = 1; y < n - 1; ++y)
        for (int x = 1; x < n - 1; ++x) {
            const size_t i = static_cast<size_t>(y) * n + x;
            if (!tr.valid[i] || !tt.valid[i]) continue;
            if (!tt.valid[i - 1] || !tt.valid[i + 1] || !tt.valid[i - n] || !tt.valid[i + n])
                continue;
            const double gx = 0.5 * (tt.image.at(x + 1, y) - tt.image.at(x - 1, y));
            const double gy = 0.5 * (tt.image.at(x, y + 1) - tt.image.at(x, y - 1));
            const double r = tt.image.at(x, y) - tr.image.at(x, y);
            // d(warp)/d(h_params) at identity composed with the image gradient
            j[0] = gx * x; j[1] = gx * y; j[2] = gx;
            j[3] = gy * x; j[4] = gy * y; j[5] = gy;
            j[6] = -(gx * x + gy * y) * x;
            j[7] = -(gx * x + gy * y) * y;
            for (int a = 0; a < 8; ++a) {
                jtr[a] += j[a] * r;
                for (int b = a; b < 8; ++b) jtj[a * 8 + b] += j[a] * j[b];
            }
        }
    for (int a = 0; a < 8; ++a)
        for (int b = 0; b < a; ++b) jtj[a * 8 + b] = jtj[b * 8 + a];
    double trace = 0.0;
    for (int a = 0; a < 8; ++a) trace += jtj[a * 8 + a];
    const double damping = 1e-6 * trace / 8.0 + 1e-12;
    for (int a = 0; a < 8; ++a) jtj[a * 8 + a] += damping;
    double delta[8];
    for (int a = 0; a < 8; ++a) delta[a] = -jtr[a];
    if (!solve_linear_system(jtj, delta, 8, 1e-14))
        return Homography::identity();
    return Homography({1.0 + delta[0], delta[1], delta[2],
                       delta[3], 1.0 + delta[4], delta[5],
                       delta[6], delta[7], 1.0});
}

} // namespace

IncrementEstimate refine(const Template& template_r, const Template& template_t,
                         const RefineConfig& cfg) {
    const int n = template_r.size();
    if (template_t.size() != n) throw ShapeMismatch("refine: template sizes differ");
    IncrementEstimate out;
    if (cfg.mode == RefineMode::Learned) {
        if (!cfg.net) throw WeightTopologyMismatch("learned refine without weights");
        Tensor stacked(n, n, 2);
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) {
                stacked.at(y, x, 0) = template_r.image.at(x, y);
                stacked.at(y, x, 1) = template_t.image.at(x, y);
            }
        std::vector<double> disp;
        Tensor logits;
        cfg.net->forward(stacked, disp, logits);
        for (int k = 0; k < 4; ++k) out.disp.d[k] = Vec2(disp[2 * k], disp[2 * k + 1]);
        out.vis = VisibilityMask(n, n);
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x)
                out.vis.at(x, y) = static_cast<float>(1.0 / (1.0 + std::exp(-logits.at(y, x, 0))));
    } else {
        const Homography fwd = gauss_newton_step(template_r, template_t);
        out.disp = homography_to_four_point(invert(fwd), n, n);
        out.vis = VisibilityMask(n, n);
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x)
                out.vis.at(x, y) = template_t.valid[static_cast<size_t>(y) * n + x] ? 1.0f : 0.0f;
    }
    clamp_to_trust_region(out.disp, cfg.trust_region);
    return out;
}

// ---------------------------------------------------------------------------

double loss_homography(const FourPointDisplacement& d_pred, const FourPointDisplacement& d_gt) {
    double s = 0.0;
    for (int k = 0; k < 4; ++k)
        s += std::abs(d_gt.d[k].x - d_pred.d[k].x) + std::abs(d_gt.d[k].y - d_pred.d[k].y);
    return s / 4.0;
}

FourPointDisplacement loss_homography_grad(const FourPointDisplacement& d_pred,
                                           const FourPointDisplacement& d_gt) {
    FourPointDisplacement g;
    auto sgn = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };
    for (int k = 0; k < 4; ++k) {
        g.d[k].x = sgn(d_pred.d[k].x - d_gt.d[k].x) / 4.0;
        g.d[k].y = sgn(d_pred.d[k].y - d_gt.d[k].y) / 4.0;
    }
    return g;
}

double loss_visibility(const VisibilityMask& m_pred, const VisibilityMask& m_gt) {
    if (m_pred.width != m_gt.width || m_pred.height != m_gt.height)
        throw ShapeMismatch("loss_visibility: mask shapes differ");
    const size_t n = m_pred.values.size();
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double p = std::clamp(static_cast<double>(m_pred.values[i]), kBceEps, 1.0 - kBceEps);
        const double t = m_gt.values[i];
        s += -(t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
    }
    return s / static_cast<double>(n);
}

double bce_with_logits(const Tensor& logits, const VisibilityMask& gt, Tensor* glogits) {
    if (logits.h != gt.height || logits.w != gt.width)
        throw ShapeMismatch("bce_with_logits: shapes differ");
    if (glogits && glogits->data.empty()) *glogits = Tensor(logits.h, logits.w, 1);
    const double n = static_cast<double>(logits.h) * logits.w;
    double s = 0.0;
    for (int y = 0; y < logits.h; ++y)
        for (int x = 0; x < logits.w; ++x) {
            const double z = logits.at(y, x, 0);
            const double t = gt.at(x, y);
            // numerically stable log(1+exp(-|z|)) form
            s += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
            if (glogits) {
                const double p = 1.0 / (1.0 + std::exp(-z));
                glogits->at(y, x, 0) += (p - t) / n;
            }
        }
    return s / n;
}

WarpedFeatures warp_features(const Tensor& src, const Homography& h, int out_h, int out_w) {
    WarpedFeatures out;
    out.data = Tensor(out_h, out_w, src.c);
    out.valid.assign(static_cast<size_t>(out_h) * out_w, 0);
    for (int y = 0; y < out_h; ++y)
        for (int x = 0; x < out_w; ++x) {
            double sx, sy;
            if (!h.try_apply(x, y, sx, sy)) continue;
            if (sx < 0.0 || sy < 0.0 || sx > src.w - 1 || sy > src.h - 1) continue;
            const int x0 = std::min(static_cast<int>(sx), src.w - 1);
            const int y0 = std::min(static_cast<int>(sy), src.h - 1);
            const int x1 = std::min(x0 + 1, src.w - 1);
            const int y1 = std::min(y0 + 1, src.h - 1);
            const double wx = sx - x0, wy = sy - y0;
            double* o = out.data.px(y, x);
            const double* v00 = src.px(y0, x0);
            const double* v10 = src.px(y0, x1);
            const double* v01 = src.px(y1, x0);
            const double* v11 = src.px(y1, x1);
            for (int c = 0; c < src.c; ++c)
                o[c] = (1 - wy) * ((1 - wx) * v00[c] + wx * v10[c]) +
                       wy * ((1 - wx) * v01[c] + wx * v11[c]);
            out.valid[static_cast<size_t>(y) * out_w + x] = 1;
        }
    return out;
}

double loss_alignment(const FeatureMap& f_r, const FeatureMap& f_t, const Homography& h_tr,
                      const VisibilityMask& m_gt) {
    Tensor g_fr, g_ft; // discarded
    return loss_alignment_grad(f_r.data, f_t.data, h_tr, m_gt, g_fr, g_ft);
}

double loss_alignment_grad(const Tensor& f_r, const Tensor& f_t, const Homography& h_tr,
                           const VisibilityMask& m_gt, Tensor& g_fr, Tensor& g_ft) {
    if (f_t.h != m_gt.height || f_t.w != m_gt.width)
        throw ShapeMismatch("loss_alignment: mask does not match f_t");
    if (g_fr.data.empty()) g_fr = Tensor(f_r.h, f_r.w, f_r.c);
    if (g_ft.data.empty()) g_ft = Tensor(f_t.h, f_t.w, f_t.c);
    const double n = static_cast<double>(f_t.h) * f_t.w;
    double loss = 0.0;
    for (int y = 0; y < f_t.h; ++y)
        for (int x = 0; x < f_t.w; ++x) {
            const double m = m_gt.at(x, y);
            if (m <= 0.0) continue;
            double sx, sy;
            if (!h_tr.try_apply(x, y, sx, sy)) continue;
            if (sx < 0.0 || sy < 0.0 || sx > f_r.w - 1 || sy > f_r.h - 1) continue;
            const int x0 = std::min(static_cast<int>(sx), f_r.w - 1);
            const int y0 = std::min(static_cast<int>(sy), f_r.h - 1);
            const int x1 = std::min(x0 + 1, f_r.w - 1);
            const int y1 = std::min(y0 + 1, f_r.h - 1);
            const double wx = sx - x0, wy = sy - y0;
            const double w00 = (1 - wy) * (1 - wx), w10 = (1 - wy) * wx;
            const double w01 = wy * (1 - wx), w11 = wy * wx;
            const double* r00 = f_r.px(y0, x0);
            const double* r10 = f_r.px(y0, x1);
            const double* r01 = f_r.px(y1, x0);
            const double* r11 = f_r.px(y1, x1);
            const double* ft = f_t.px(y, x);
            double* gt = g_ft.px(y, x);
            for (int c = 0; c < f_t.c; ++c) {
                const double warped = w00 * r00[c] + w10 * r10[c] + w01 * r01[c] + w11 * r11[c];
                const double diff = warped - ft[c];
                loss += m * std::abs(diff);
                const double s = m * (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0)) / n;
                gt[c] -= s;
                g_fr.px(y0, x0)[c] += s * w00;
                g_fr.px(y0, x1)[c] += s * w10;
                g_fr.px(y1, x0)[c] += s * w01;
                g_fr.px(y1, x1)[c] += s * w11;
            }
        }
    return loss / n;
}

double loss_total(double l_d, double l_m, double l_v, const LossWeights& w) {
    return w.lambda_d * l_d + w.lambda_m * l_m + w.lambda_v * l_v;
}

VisibilityMask gt_visibility(const Quad& quad_gt_in_frame, int frame_w, int frame_h,
                             const std::vector<Polygon>& occluders, const Homography& sampling_h,
                             int level_size, int full_size) {
    const Homography h_level = level_homography(sampling_h, level_size, full_size);
    const Homography back = invert(h_level);
    VisibilityMask mask(level_size, level_size, 0.0f);
    for (int y = 0; y < level_size; ++y)
        for (int x = 0; x < level_size; ++x) {
            double fx, fy;
            if (!back.try_apply(x, y, fx, fy)) continue;
            const Vec2 p(fx, fy);
            if (fx < 0.0 || fy < 0.0 || fx > frame_w - 1 || fy > frame_h - 1) continue;
            if (!quad_gt_in_frame.contains(p)) continue;
            bool occluded = false;
            for (const auto& poly : occluders)
                if (poly.contains(p)) {
                    occluded = true;
                    break;
                }
            if (!occluded) mask.at(x, y) = 1.0f;
        }
    return mask;
}

} // namespace hvc
