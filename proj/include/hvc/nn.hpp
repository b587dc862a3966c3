#pragma once

#include <string>
#include <vector>

#include "hvc/error.hpp"
#include "hvc/rng.hpp"

namespace hvc {

// Dense HWC tensor. Training runs in double precision end to end so the
// finite-difference gradient checks hold at 1e-6 relative error.
struct Tensor {
    int h = 0, w = 0, c = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(int h_, int w_, int c_, double fill = 0.0)
        : h(h_), w(w_), c(c_), data(static_cast<size_t>(h_) * w_ * c_, fill) {}

    double& at(int y, int x, int ch) { return data[(static_cast<size_t>(y) * w + x) * c + ch]; }
    double at(int y, int x, int ch) const { return data[(static_cast<size_t>(y) * w + x) * c + ch]; }
    double* px(int y, int x) { return data.data() + (static_cast<size_t>(y) * w + x) * c; }
    const double* px(int y, int x) const { return data.data() + (static_cast<size_t>(y) * w + x) * c; }
    size_t size() const { return data.size(); }
    bool same_shape(const Tensor& o) const { return h == o.h && w == o.w && c == o.c; }
    void zero() { std::fill(data.begin(), data.end(), 0.0); }
};

// ---------------------------------------------------------------------------
// Parameterized layers. The same structs double as gradient accumulators.

struct ConvLayer {
    int cout = 0, cin = 0, k = 1, stride = 1;
    std::vector<double> w; // [co][ky][kx][ci]
    std::vector<double> b; // [co]

    ConvLayer() = default;
    ConvLayer(int cout_, int cin_, int k_, int stride_ = 1)
        : cout(cout_), cin(cin_), k(k_), stride(stride_),
          w(static_cast<size_t>(cout_) * k_ * k_ * cin_, 0.0), b(cout_, 0.0) {}

    void init_random(Rng& rng) {
        const double s = std::sqrt(2.0 / (k * k * cin));
        for (double& v : w) v = rng.normal(0.0, s);
        std::fill(b.begin(), b.end(), 0.0);
    }
    void zero() {
        std::fill(w.begin(), w.end(), 0.0);
        std::fill(b.begin(), b.end(), 0.0);
    }
};

struct AffineLayer {
    int c = 0;
    std::vector<double> gamma, beta;

    AffineLayer() = default;
    explicit AffineLayer(int c_) : c(c_), gamma(c_, 1.0), beta(c_, 0.0) {}
    void zero() {
        std::fill(gamma.begin(), gamma.end(), 0.0);
        std::fill(beta.begin(), beta.end(), 0.0);
    }
};

struct LinearLayer {
    int nout = 0, nin = 0;
    std::vector<double> w; // [o][i]
    std::vector<double> b;

    LinearLayer() = default;
    LinearLayer(int nout_, int nin_)
        : nout(nout_), nin(nin_), w(static_cast<size_t>(nout_) * nin_, 0.0), b(nout_, 0.0) {}

    void init_random(Rng& rng) {
        const double s = std::sqrt(2.0 / nin);
        for (double& v : w) v = rng.normal(0.0, s);
        std::fill(b.begin(), b.end(), 0.0);
    }
    void zero() {
        std::fill(w.begin(), w.end(), 0.0);
        std::fill(b.begin(), b.end(), 0.0);
    }
};

// ---------------------------------------------------------------------------
// Layer ops. Backward functions accumulate into the gradient structs.

Tensor conv_forward(const Tensor& in, const ConvLayer& p);
void conv_backward(const Tensor& in, const ConvLayer& p, const Tensor& gout,
                   Tensor& gin, ConvLayer& gp);

Tensor affine_forward(const Tensor& in, const AffineLayer& p);
void affine_backward(const Tensor& in, const AffineLayer& p, const Tensor& gout,
                     Tensor& gin, AffineLayer& gp);

constexpr double kLeakySlope = 0.1;
Tensor leaky_relu_forward(const Tensor& in);
void leaky_relu_backward(const Tensor& in, const Tensor& gout, Tensor& gin);

Tensor avgpool2_forward(const Tensor& in); // 2x2 stride 2, ceil sizes
void avgpool2_backward(const Tensor& in, const Tensor& gout, Tensor& gin);

Tensor upsample2_forward(const Tensor& in, int out_h, int out_w); // nearest
void upsample2_backward(const Tensor& gout, Tensor& gin);

Tensor concat_channels(const Tensor& a, const Tensor& b);
void split_channels_backward(const Tensor& gout, Tensor& ga, Tensor& gb);

Tensor grid_mean_pool(const Tensor& in, int grid); // grid x grid regions
void grid_mean_pool_backward(const Tensor& in, const Tensor& gout, int grid, Tensor& gin);

std::vector<double> linear_forward(const std::vector<double>& in, const LinearLayer& p);
void linear_backward(const std::vector<double>& in, const LinearLayer& p,
                     const std::vector<double>& gout, std::vector<double>& gin, LinearLayer& gp);

// Per-pixel L2 normalization with an epsilon floor.
constexpr double kNormEps = 1e-8;
Tensor l2norm_forward(const Tensor& in);
void l2norm_backward(const Tensor& in, const Tensor& gout, Tensor& gin);

// ---------------------------------------------------------------------------
// Named views over network parameters (serialization + Adam).

struct TensorRef {
    std::string name;
    std::vector<double>* value;
    std::vector<int> dims;
};

size_t total_size(const std::vector<TensorRef>& refs);

// ---------------------------------------------------------------------------
// Feature extraction network: 3-level encoder-decoder with skip connections,
// 3x3 convolutions, leaky rectifier, linear output head.

struct FeatureNetConfig {
    int base_channels = 8;
    int out_channels = 8;
    bool operator==(const FeatureNetConfig&) const = default;
};

struct FeatureNet {
    FeatureNetConfig cfg;
    ConvLayer enc0, enc1, bottom, dec1, out;
    AffineLayer aff0, aff1, affb, affd;

    explicit FeatureNet(const FeatureNetConfig& c = {});
    void init_random(Rng& rng);
    std::vector<TensorRef> param_refs();

    struct Cache {
        Tensor in, e0pre, e0aff, e0, p1, e1pre, e1aff, e1, p2, btpre, btaff, bt;
        Tensor u1, c1, d1pre, d1aff, d1, u0, c0, y;
    };
    Tensor forward(const Tensor& in, Cache* cache = nullptr) const;
    // Accumulates parameter grads into gp and returns d(loss)/d(input).
    Tensor backward(const Cache& cache, const Tensor& gy, FeatureNet& gp) const;
    FeatureNet grads_like() const;
};

// Regression head over a cost volume: 8 corner-displacement outputs and
// per-pixel visibility logits.
struct HeadNetConfig {
    int cv_channels = 81;
    int trunk_channels = 24;
    int grid = 3;
    bool operator==(const HeadNetConfig&) const = default;
};

struct HeadNet {
    HeadNetConfig cfg;
    ConvLayer trunk;   // 1x1
    ConvLayer vis;     // 1x1 -> logits
    ConvLayer down;    // 3x3 stride 2
    LinearLayer fc;    // grid*grid*trunk_channels -> 8

    explicit HeadNet(const HeadNetConfig& c = {});
    void init_zero();
    void init_random(Rng& rng);
    std::vector<TensorRef> param_refs();

    struct Cache {
        Tensor in, t0pre, t0, vis_logits, d0pre, d0;
        std::vector<double> pooled, disp;
    };
    // Returns {disp[8], vis logits}.
    void forward(const Tensor& cv, std::vector<double>& disp, Tensor& vis_logits,
                 Cache* cache = nullptr) const;
    Tensor backward(const Cache& cache, const std::vector<double>& gdisp,
                    const Tensor& gvis_logits, HeadNet& gp) const;
    HeadNet grads_like() const;
};

// Refinement head over the stacked (reference, tracked) templates; no cost
// volume involved.
struct RefineNetConfig {
    int c0 = 8;
    int c1 = 16;
    int grid = 3;
    bool operator==(const RefineNetConfig&) const = default;
};

struct RefineNet {
    RefineNetConfig cfg;
    ConvLayer conv0;  // 3x3, 2 -> c0
    ConvLayer vis;    // 1x1 -> logits
    ConvLayer down;   // 3x3 stride 2, c0 -> c1
    LinearLayer fc;

    explicit RefineNet(const RefineNetConfig& c = {});
    void init_zero();
    void init_random(Rng& rng);
    std::vector<TensorRef> param_refs();

    struct Cache {
        Tensor in, r0pre, r0, vis_logits, d0pre, d0;
        std::vector<double> pooled, disp;
    };
    void forward(const Tensor& stacked, std::vector<double>& disp, Tensor& vis_logits,
                 Cache* cache = nullptr) const;
    Tensor backward(const Cache& cache, const std::vector<double>& gdisp,
                    const Tensor& gvis_logits, RefineNet& gp) const;
    RefineNet grads_like() const;
};

// ---------------------------------------------------------------------------
// Adam with bias correction and a step-decay learning-rate schedule.

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double decay_factor = 0.1;
    int decay_every_epochs = 5;

    double lr_at_epoch(int epoch) const {
        double lr_e = lr;
        for (int e = decay_every_epochs; e <= epoch; e += decay_every_epochs)
            lr_e *= decay_factor;
        return lr_e;
    }
};

struct AdamState {
    std::vector<double> m, v;
    long t = 0;

    explicit AdamState(size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

// One update over the concatenation of the referenced parameter tensors.
// grads must mirror params element for element.
void adam_step(const std::vector<TensorRef>& params, const std::vector<TensorRef>& grads,
               AdamState& state, const AdamConfig& cfg, int epoch);

// Adds src's parameters (scaled) into dst; both must come from grads_like().
void axpy_refs(double alpha, const std::vector<TensorRef>& src, const std::vector<TensorRef>& dst);
void zero_refs(const std::vector<TensorRef>& refs);

} // namespace hvc
