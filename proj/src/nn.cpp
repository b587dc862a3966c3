#include "hvc/nn.hpp"

#include <algorithm>
#include <cmath>

namespace hvc {

namespace {
int conv_out_dim(int n, int k, int stride) {
    const int pad = k / 2;
    return (n + 2 * pad - k) / stride + 1;
}
} // namespace

Tensor conv_forward(const Tensor& in, const ConvLayer& p) {
    if (in.c != p.cin) throw ShapeMismatch("conv: input channels != cin");
    const int pad = p.k / 2;
    const int oh = conv_out_dim(in.h, p.k, p.stride);
    const int ow = conv_out_dim(in.w, p.k, p.stride);
    Tensor out(oh, ow, p.cout);
    const int ks = p.k * p.k * p.cin;
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double* o = out.px(y, x);
            for (int co = 0; co < p.cout; ++co) o[co] = p.b[co];
            for (int ky = 0; ky < p.k; ++ky) {
                const int yy = y * p.stride + ky - pad;
                if (yy < 0 || yy >= in.h) continue;
                for (int kx = 0; kx < p.k; ++kx) {
                    const int xx = x * p.stride + kx - pad;
                    if (xx < 0 || xx >= in.w) continue;
                    const double* src = in.px(yy, xx);
                    const double* wbase = p.w.data() + (ky * p.k + kx) * p.cin;
                    for (int co = 0; co < p.cout; ++co) {
                        const double* wrow = wbase + co * ks;
                        double acc = 0.0;
                        for (int ci = 0; ci < p.cin; ++ci) acc += wrow[ci] * src[ci];
                        o[co] += acc;
                    }
                }
            }
        }
    }
    return out;
}

void conv_backward(const Tensor& in, const ConvLayer& p, const Tensor& gout,
                   Tensor& gin, ConvLayer& gp) {
    const int pad = p.k / 2;
    if (gin.data.empty()) gin = Tensor(in.h, in.w, in.c);
    const int ks = p.k * p.k * p.cin;
    for (int y = 0; y < gout.h; ++y) {
        for (int x = 0; x < gout.w; ++x) {
            const double* go = gout.px(y, x);
            for (int co = 0; co < p.cout; ++co) gp.b[co] += go[co];
            for (int ky = 0; ky < p.k; ++ky) {
                const int yy = y * p.stride + ky - pad;
                if (yy < 0 || yy >= in.h) continue;
                for (int kx = 0; kx < p.k; ++kx) {
                    const int xx = x * p.stride + kx - pad;
                    if (xx < 0 || xx >= in.w) continue;
                    const double* src = in.px(yy, xx);
                    double* gi = gin.px(yy, xx);
                    const size_t off = (ky * p.k + kx) * p.cin;
                    for (int co = 0; co < p.cout; ++co) {
                        const double g = go[co];
                        if (g == 0.0) continue;
                        const double* wrow = p.w.data() + co * ks + off;
                        double* gwrow = gp.w.data() + co * ks + off;
                        for (int ci = 0; ci < p.cin; ++ci) {
                            gi[ci] += wrow[ci] * g;
                            gwrow[ci] += src[ci] * g;
                        }
                    }
                }
            }
        }
    }
}

Tensor affine_forward(const Tensor& in, const AffineLayer& p) {
    if (in.c != p.c) throw ShapeMismatch("affine: channel mismatch");
    Tensor out(in.h, in.w, in.c);
    const size_t n = in.size();
    for (size_t i = 0; i < n; ++i) {
        const int ch = static_cast<int>(i % in.c);
        out.data[i] = p.gamma[ch] * in.data[i] + p.beta[ch];
    }
    return out;
}

void affine_backward(const Tensor& in, const AffineLayer& p, const Tensor& gout,
                     Tensor& gin, AffineLayer& gp) {
    if (gin.data.empty()) gin = Tensor(in.h, in.w, in.c);
    const size_t n = in.size();
    for (size_t i = 0; i < n; ++i) {
        const int ch = static_cast<int>(i % in.c);
        const double g = gout.data[i];
        gin.data[i] += p.gamma[ch] * g;
        gp.gamma[ch] += in.data[i] * g;
        gp.beta[ch] += g;
    }
}

Tensor leaky_relu_forward(const Tensor& in) {
    Tensor out(in.h, in.w, in.c);
    for (size_t i = 0; i < in.size(); ++i) {
        const double v = in.data[i];
        out.data[i] = v > 0.0 ? v : kLeakySlope * v;
    }
    return out;
}

void leaky_relu_backward(const Tensor& in, const Tensor& gout, Tensor& gin) {
    if (gin.data.empty()) gin = Tensor(in.h, in.w, in.c);
    for (size_t i = 0; i < in.size(); ++i)
        gin.data[i] += gout.data[i] * (in.data[i] > 0.0 ? 1.0 : kLeakySlope);
}

Tensor avgpool2_forward(const Tensor& in) {
    const int oh = (in.h + 1) / 2, ow = (in.w + 1) / 2;
    Tensor out(oh, ow, in.c);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            const int y1 = std::min(2 * y + 1, in.h - 1);
            const int x1 = std::min(2 * x + 1, in.w - 1);
            const int ny = y1 - 2 * y + 1, nx = x1 - 2 * x + 1;
            const double inv = 1.0 / (ny * nx);
            double* o = out.px(y, x);
            for (int dy = 0; dy < ny; ++dy)
                for (int dx = 0; dx < nx; ++dx) {
                    const double* s = in.px(2 * y + dy, 2 * x + dx);
                    for (int c = 0; c < in.c; ++c) o[c] += s[c] * inv;
                }
        }
    return out;
}

void avgpool2_backward(const Tensor& in, const Tensor& gout, Tensor& gin) {
    if (gin.data.empty()) gin = Tensor(in.h, in.w, in.c);
    for (int y = 0; y < gout.h; ++y)
        for (int x = 0; x < gout.w; ++x) {
            const int y1 = std::min(2 * y + 1, in.h - 1);
            const int x1 = std::min(2 * x + 1, in.w - 1);
            const int ny = y1 - 2 * y + 1, nx = x1 - 2 * x + 1;
            const double inv = 1.0 / (ny * nx);
            const double* go = gout.px(y, x);
            for (int dy = 0; dy < ny; ++dy)
                for (int dx = 0; dx < nx; ++dx) {
                    double* gi = gin.px(2 * y + dy, 2 * x + dx);
                    for (int c = 0; c < in.c; ++c) gi[c] += go[c] * inv;
                }
        }
}

Tensor upsample2_forward(const Tensor& in, int out_h, int out_w) {
    Tensor out(out_h, out_w, in.c);
    for (int y = 0; y < out_h; ++y)
        for (int x = 0; x < out_w; ++x) {
            const double* s = in.px(std::min(y / 2, in.h - 1), std::min(x / 2, in.w - 1));
            double* o = out.px(y, x);
            for (int c = 0; c < in.c; ++c) o[c] = s[c];
        }
    return out;
}

void upsample2_backward(const Tensor& gout, Tensor& gin) {
    // gin must be pre-sized to the input shape
    for (int y = 0; y < gout.h; ++y)
        for (int x = 0; x < gout.w; ++x) {
            const double* go = gout.px(y, x);
            double* gi = gin.px(std::min(y / 2, gin.h - 1), std::min(x / 2, gin.w - 1));
            for (int c = 0; c < gout.c; ++c) gi[c] += go[c];
        }
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.h != b.h || a.w != b.w) throw ShapeMismatch("concat: spatial mismatch");
    Tensor out(a.h, a.w, a.c + b.c);
    for (int y = 0; y < a.h; ++y)
        for (int x = 0; x < a.w; ++x) {
            double* o = out.px(y, x);
            const double* pa = a.px(y, x);
            const double* pb = b.px(y, x);
            std::copy(pa, pa + a.c, o);
            std::copy(pb, pb + b.c, o + a.c);
        }
    return out;
}

void split_channels_backward(const Tensor& gout, Tensor& ga, Tensor& gb) {
    for (int y = 0; y < gout.h; ++y)
        for (int x = 0; x < gout.w; ++x) {
            const double* go = gout.px(y, x);
            double* pa = ga.px(y, x);
            double* pb = gb.px(y, x);
            for (int c = 0; c < ga.c; ++c) pa[c] += go[c];
            for (int c = 0; c < gb.c; ++c) pb[c] += go[ga.c + c];
        }
}

Tensor grid_mean_pool(const Tensor& in, int grid) {
    Tensor out(grid, grid, in.c);
    for (int gy = 0; gy < grid; ++gy) {
        const int ys = gy * in.h / grid, ye = (gy + 1) * in.h / grid;
        for (int gx = 0; gx < grid; ++gx) {
            const int xs = gx * in.w / grid, xe = (gx + 1) * in.w / grid;
            const double inv = 1.0 / std::max(1, (ye - ys) * (xe - xs));
            double* o = out.px(gy, gx);
            for (int y = ys; y < ye; ++y)
                for (int x = xs; x < xe; ++x) {
                    const double* s = in.px(y, x);
                    for (int c = 0; c < in.c; ++c) o[c] += s[c] * inv;
                }
        }
    }
    return out;
}

void grid_mean_pool_backward(const Tensor& in, const Tensor& gout, int grid, Tensor& gin) {
    if (gin.data.empty()) gin = Tensor(in.h, in.w, in.c);
    for (int gy = 0; gy < grid; ++gy) {
        const int ys = gy * in.h / grid, ye = (gy + 1) * in.h / grid;
        for (int gx = 0; gx < grid; ++gx) {
            const int xs = gx * in.w / grid, xe = (gx + 1) * in.w / grid;
            const double inv = 1.0 / std::max(1, (ye - ys) * (xe - xs));
            const double* go = gout.px(gy, gx);
            for (int y = ys; y < ye; ++y)
                for (int x = xs; x < xe; ++x) {
                    double* gi = gin.px(y, x);
                    for (int c = 0; c < in.c; ++c) gi[c] += go[c] * inv;
                }
        }
    }
}

std::vector<double> linear_forward(const std::vector<double>& in, const LinearLayer& p) {
    if (static_cast<int>(in.size()) != p.nin) throw ShapeMismatch("linear: input size");
    std::vector<double> out(p.nout);
    for (int o = 0; o < p.nout; ++o) {
        double acc = p.b[o];
        const double* wr = p.w.data() + static_cast<size_t>(o) * p.nin;
        for (int i = 0; i < p.nin; ++i) acc += wr[i] * in[i];
        out[o] = acc;
    }
    return out;
}

void linear_backward(const std::vector<double>& in, const LinearLayer& p,
                     const std::vector<double>& gout, std::vector<double>& gin, LinearLayer& gp) {
    if (gin.empty()) gin.assign(p.nin, 0.0);
    for (int o = 0; o < p.nout; ++o) {
        const double g = gout[o];
        gp.b[o] += g;
        const double* wr = p.w.data() + static_cast<size_t>(o) * p.nin;
        double* gwr = gp.w.data() + static_cast<size_t>(o) * p.nin;
        for (int i = 0; i < p.nin; ++i) {
            gin[i] += wr[i] * g;
            gwr[i] += in[i] * g;
        }
    }
}

Tensor l2norm_forward(const Tensor& in) {
    Tensor out(in.h, in.w, in.c);
    for (int y = 0; y < in.h; ++y)
        for (int x = 0; x < in.w; ++x) {
            const double* v = in.px(y, x);
            double n2 = 0.0;
            for (int c = 0; c < in.c; ++c) n2 += v[c] * v[c];
            const double inv = 1.0 / std::max(std::sqrt(n2), kNormEps);
            double* o = out.px(y, x);
            for (int c = 0; c < in.c; ++c) o[c] = v[c] * inv;
        }
    return out;
}

void l2norm_backward(const Tensor& in, const Tensor& gout, Tensor& gin) {
    if (gin.data.empty()) gin = Tensor(in.h, in.w, in.c);
    for (int y = 0; y < in.h; ++y)
        for (int x = 0; x < in.w; ++x) {
            const double* v = in.px(y, x);
            const double* go = gout.px(y, x);
            double* gi = gin.px(y, x);
            double n2 = 0.0;
            for (int c = 0; c < in.c; ++c) n2 += v[c] * v[c];
            const double norm = std::sqrt(n2);
            if (norm <= kNormEps) {
                for (int c = 0; c < in.c; ++c) gi[c] += go[c] / kNormEps;
                continue;
            }
            double dot = 0.0;
            for (int c = 0; c < in.c; ++c) dot += go[c] * v[c];
            dot /= n2;
            const double inv = 1.0 / norm;
            for (int c = 0; c < in.c; ++c) gi[c] += (go[c] - dot * v[c]) * inv;
        }
}

size_t total_size(const std::vector<TensorRef>& refs) {
    size_t n = 0;
    for (const auto& r : refs) n += r.value->size();
    return n;
}

// ---------------------------------------------------------------------------
// FeatureNet

FeatureNet::FeatureNet(const FeatureNetConfig& c)
    : cfg(c),
      enc0(c.base_channels, 1, 3),
      enc1(c.base_channels, c.base_channels, 3),
      bottom(c.base_channels, c.base_channels, 3),
      dec1(c.base_channels, 2 * c.base_channels, 3),
      out(c.out_channels, 2 * c.base_channels, 3),
      aff0(c.base_channels), aff1(c.base_channels), affb(c.base_channels), affd(c.base_channels) {}

void FeatureNet::init_random(Rng& rng) {
    enc0.init_random(rng);
    enc1.init_random(rng);
    bottom.init_random(rng);
    dec1.init_random(rng);
    out.init_random(rng);
}

std::vector<TensorRef> FeatureNet::param_refs() {
    const int B = cfg.base_channels, F = cfg.out_channels;
    return {
        {"feat.enc0.w", &enc0.w, {B, 3, 3, 1}},      {"feat.enc0.b", &enc0.b, {B}},
        {"feat.aff0.g", &aff0.gamma, {B}},           {"feat.aff0.b", &aff0.beta, {B}},
        {"feat.enc1.w", &enc1.w, {B, 3, 3, B}},      {"feat.enc1.b", &enc1.b, {B}},
        {"feat.aff1.g", &aff1.gamma, {B}},           {"feat.aff1.b", &aff1.beta, {B}},
        {"feat.bottom.w", &bottom.w, {B, 3, 3, B}},  {"feat.bottom.b", &bottom.b, {B}},
        {"feat.affb.g", &affb.gamma, {B}},           {"feat.affb.b", &affb.beta, {B}},
        {"feat.dec1.w", &dec1.w, {B, 3, 3, 2 * B}},  {"feat.dec1.b", &dec1.b, {B}},
        {"feat.affd.g", &affd.gamma, {B}},           {"feat.affd.b", &affd.beta, {B}},
        {"feat.out.w", &out.w, {F, 3, 3, 2 * B}},    {"feat.out.b", &out.b, {F}},
    };
}

Tensor FeatureNet::forward(const Tensor& in, Cache* cache) const {
    Cache local;
    Cache& c = cache ? *cache : local;
    c.in = in;
    c.e0pre = conv_forward(in, enc0);
    c.e0aff = affine_forward(c.e0pre, aff0);
    c.e0 = leaky_relu_forward(c.e0aff);
    c.p1 = avgpool2_forward(c.e0);
    c.e1pre = conv_forward(c.p1, enc1);
    c.e1aff = affine_forward(c.e1pre, aff1);
    c.e1 = leaky_relu_forward(c.e1aff);
    c.p2 = avgpool2_forward(c.e1);
    c.btpre = conv_forward(c.p2, bottom);
    c.btaff = affine_forward(c.btpre, affb);
    c.bt = leaky_relu_forward(c.btaff);
    c.u1 = upsample2_forward(c.bt, c.e1.h, c.e1.w);
    c.c1 = concat_channels(c.e1, c.u1);
    c.d1pre = conv_forward(c.c1, dec1);
    c.d1aff = affine_forward(c.d1pre, affd);
    c.d1 = leaky_relu_forward(c.d1aff);
    c.u0 = upsample2_forward(c.d1, c.e0.h, c.e0.w);
    c.c0 = concat_channels(c.e0, c.u0);
    c.y = conv_forward(c.c0, out);
    return c.y;
}

Tensor FeatureNet::backward(const Cache& c, const Tensor& gy, FeatureNet& gp) const {
    Tensor gc0;
    conv_backward(c.c0, out, gy, gc0, gp.out);
    Tensor ge0(c.e0.h, c.e0.w, c.e0.c), gu0(c.u0.h, c.u0.w, c.u0.c);
    split_channels_backward(gc0, ge0, gu0);
    Tensor gd1(c.d1.h, c.d1.w, c.d1.c);
    upsample2_backward(gu0, gd1);
    Tensor gd1aff;
    leaky_relu_backward(c.d1aff, gd1, gd1aff);
    Tensor gd1pre;
    affine_backward(c.d1pre, affd, gd1aff, gd1pre, gp.affd);
    Tensor gc1;
    conv_backward(c.c1, dec1, gd1pre, gc1, gp.dec1);
    Tensor ge1(c.e1.h, c.e1.w, c.e1.c), gu1(c.u1.h, c.u1.w, c.u1.c);
    split_channels_backward(gc1, ge1, gu1);
    Tensor gbt(c.bt.h, c.bt.w, c.bt.c);
    upsample2_backward(gu1, gbt);
    Tensor gbtaff;
    leaky_relu_backward(c.btaff, gbt, gbtaff);
    Tensor gbtpre;
    affine_backward(c.btpre, affb, gbtaff, gbtpre, gp.affb);
    Tensor gp2;
    conv_backward(c.p2, bottom, gbtpre, gp2, gp.bottom);
    avgpool2_backward(c.e1, gp2, ge1);
    Tensor ge1aff;
    leaky_relu_backward(c.e1aff, ge1, ge1aff);
    Tensor ge1pre;
    affine_backward(c.e1pre, aff1, ge1aff, ge1pre, gp.aff1);
    Tensor gp1;
    conv_backward(c.p1, enc1, ge1pre, gp1, gp.enc1);
    avgpool2_backward(c.e0, gp1, ge0);
    Tensor ge0aff;
    leaky_relu_backward(c.e0aff, ge0, ge0aff);
    Tensor ge0pre;
    affine_backward(c.e0pre, aff0, ge0aff, ge0pre, gp.aff0);
    Tensor gin;
    conv_backward(c.in, enc0, ge0pre, gin, gp.enc0);
    return gin;
}

FeatureNet FeatureNet::grads_like() const {
    FeatureNet g(cfg);
    g.enc0.zero();
    g.enc1.zero();
    g.bottom.zero();
    g.dec1.zero();
    g.out.zero();
    g.aff0.zero();
    g.aff1.zero();
    g.affb.zero();
    g.affd.zero();
    return g;
}

// ---------------------------------------------------------------------------
// HeadNet

HeadNet::HeadNet(const HeadNetConfig& c)
    : cfg(c),
      trunk(c.trunk_channels, c.cv_channels, 1),
      vis(1, c.trunk_channels, 1),
      down(c.trunk_channels, c.trunk_channels, 3, 2),
      fc(8, c.grid * c.grid * c.trunk_channels) {}

void HeadNet::init_zero() {
    trunk.zero();
    vis.zero();
    down.zero();
    fc.zero();
}

void HeadNet::init_random(Rng& rng) {
    trunk.init_random(rng);
    vis.init_random(rng);
    down.init_random(rng);
    fc.init_random(rng);
}

std::vector<TensorRef> HeadNet::param_refs() {
    const int C = cfg.trunk_channels, V = cfg.cv_channels, G = cfg.grid;
    return {
        {"head.trunk.w", &trunk.w, {C, 1, 1, V}}, {"head.trunk.b", &trunk.b, {C}},
        {"head.vis.w", &vis.w, {1, 1, 1, C}},     {"head.vis.b", &vis.b, {1}},
        {"head.down.w", &down.w, {C, 3, 3, C}},   {"head.down.b", &down.b, {C}},
        {"head.fc.w", &fc.w, {8, G * G * C}},     {"head.fc.b", &fc.b, {8}},
    };
}

void HeadNet::forward(const Tensor& cv, std::vector<double>& disp, Tensor& vis_logits,
                      Cache* cache) const {
    Cache local;
    Cache& c = cache ? *cache : local;
    c.in = cv;
    c.t0pre = conv_forward(cv, trunk);
    c.t0 = leaky_relu_forward(c.t0pre);
    c.vis_logits = conv_forward(c.t0, vis);
    c.d0pre = conv_forward(c.t0, down);
    c.d0 = leaky_relu_forward(c.d0pre);
    const Tensor pooled = grid_mean_pool(c.d0, cfg.grid);
    c.pooled = pooled.data;
    c.disp = linear_forward(c.pooled, fc);
    disp = c.disp;
    vis_logits = c.vis_logits;
}

Tensor HeadNet::backward(const Cache& c, const std::vector<double>& gdisp,
                         const Tensor& gvis_logits, HeadNet& gp) const {
    std::vector<double> gpooled;
    linear_backward(c.pooled, fc, gdisp, gpooled, gp.fc);
    Tensor gpooled_t(cfg.grid, cfg.grid, cfg.trunk_channels);
    gpooled_t.data = gpooled;
    Tensor gd0;
    grid_mean_pool_backward(c.d0, gpooled_t, cfg.grid, gd0);
    Tensor gd0pre;
    leaky_relu_backward(c.d0pre, gd0, gd0pre);
    Tensor gt0;
    conv_backward(c.t0, down, gd0pre, gt0, gp.down);
    conv_backward(c.t0, vis, gvis_logits, gt0, gp.vis);
    Tensor gt0pre;
    leaky_relu_backward(c.t0pre, gt0, gt0pre);
    Tensor gin;
    conv_backward(c.in, trunk, gt0pre, gin, gp.trunk);
    return gin;
}

HeadNet HeadNet::grads_like() const {
    HeadNet g(cfg);
    g.init_zero();
    return g;
}

// ---------------------------------------------------------------------------
// RefineNet

RefineNet::RefineNet(const RefineNetConfig& c)
    : cfg(c),
      conv0(c.c0, 2, 3),
      vis(1, c.c0, 1),
      down(c.c1, c.c0, 3, 2),
      fc(8, c.grid * c.grid * c.c1) {}

void RefineNet::init_zero() {
    conv0.zero();
    vis.zero();
    down.zero();
    fc.zero();
}

void RefineNet::init_random(Rng& rng) {
    conv0.init_random(rng);
    vis.init_random(rng);
    down.init_random(rng);
    fc.init_random(rng);
}

std::vector<TensorRef> RefineNet::param_refs() {
    const int C0 = cfg.c0, C1 = cfg.c1, G = cfg.grid;
    return {
        {"refine.conv0.w", &conv0.w, {C0, 3, 3, 2}}, {"refine.conv0.b", &conv0.b, {C0}},
        {"refine.vis.w", &vis.w, {1, 1, 1, C0}},     {"refine.vis.b", &vis.b, {1}},
        {"refine.down.w", &down.w, {C1, 3, 3, C0}},  {"refine.down.b", &down.b, {C1}},
        {"refine.fc.w", &fc.w, {8, G * G * C1}},     {"refine.fc.b", &fc.b, {8}},
    };
}

void RefineNet::forward(const Tensor& stacked, std::vector<double>& disp, Tensor& vis_logits,
                        Cache* cache) const {
    Cache local;
    Cache& c = cache ? *cache : local;
    c.in = stacked;
    c.r0pre = conv_forward(stacked, conv0);
    c.r0 = leaky_relu_forward(c.r0pre);
    c.vis_logits = conv_forward(c.r0, vis);
    c.d0pre = conv_forward(c.r0, down);
    c.d0 = leaky_relu_forward(c.d0pre);
    const Tensor pooled = grid_mean_pool(c.d0, cfg.grid);
    c.pooled = pooled.data;
    c.disp = linear_forward(c.pooled, fc);
    disp = c.disp;
    vis_logits = c.vis_logits;
}

Tensor RefineNet::backward(const Cache& c, const std::vector<double>& gdisp,
                           const Tensor& gvis_logits, RefineNet& gp) const {
    std::vector<double> gpooled;
    linear_backward(c.pooled, fc, gdisp, gpooled, gp.fc);
    Tensor gpooled_t(cfg.grid, cfg.grid, cfg.c1);
    gpooled_t.data = gpooled;
    Tensor gd0;
    grid_mean_pool_backward(c.d0, gpooled_t, cfg.grid, gd0);
    Tensor gd0pre;
    leaky_relu_backward(c.d0pre, gd0, gd0pre);
    Tensor gr0;
    conv_backward(c.r0, down, gd0pre, gr0, gp.down);
    conv_backward(c.r0, vis, gvis_logits, gr0, gp.vis);
    Tensor gr0pre;
    leaky_relu_backward(c.r0pre, gr0, gr0pre);
    Tensor gin;
    conv_backward(c.in, conv0, gr0pre, gin, gp.conv0);
    return gin;
}

RefineNet RefineNet::grads_like() const {
    RefineNet g(cfg);
    g.init_zero();
    return g;
}

// ---------------------------------------------------------------------------
// Adam

void adam_step(const std::vector<TensorRef>& params, const std::vector<TensorRef>& grads,
               AdamState& state, const AdamConfig& cfg, int epoch) {
    const size_t n = total_size(params);
    if (total_size(grads) != n) throw ShapeMismatch("adam: grads do not mirror params");
    if (state.m.size() != n) {
        if (!state.m.empty()) throw ShapeMismatch("adam: state size mismatch");
        state.m.assign(n, 0.0);
        state.v.assign(n, 0.0);
    }
    state.t += 1;
    const double lr = cfg.lr_at_epoch(epoch);
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    size_t off = 0;
    for (size_t r = 0; r < params.size(); ++r) {
        std::vector<double>& w = *params[r].value;
        const std::vector<double>& g = *grads[r].value;
        if (w.size() != g.size()) throw ShapeMismatch("adam: tensor size mismatch at " + params[r].name);
        for (size_t i = 0; i < w.size(); ++i) {
            double& m = state.m[off + i];
            double& v = state.v[off + i];
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * g[i];
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * g[i] * g[i];
            const double mh = m / bc1;
            const double vh = v / bc2;
            w[i] -= lr * mh / (std::sqrt(vh) + cfg.eps);
        }
        off += w.size();
    }
}

void axpy_refs(double alpha, const std::vector<TensorRef>& src, const std::vector<TensorRef>& dst) {
    if (src.size() != dst.size()) throw ShapeMismatch("axpy_refs: ref count mismatch");
    for (size_t r = 0; r < src.size(); ++r) {
        const auto& s = *src[r].value;
        auto& d = *dst[r].value;
        if (s.size() != d.size()) throw ShapeMismatch("axpy_refs: size mismatch at " + src[r].name);
        for (size_t i = 0; i < s.size(); ++i) d[i] += alpha * s[i];
    }
}

void zero_refs(const std::vector<TensorRef>& refs) {
    for (const auto& r : refs) std::fill(r.value->begin(), r.value->end(), 0.0);
}

} // namespace hvc
