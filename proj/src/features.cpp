#include "hvc/features.hpp"

#include <algorithm>
#include <cmath>

namespace hvc {

namespace {

// Zeroes the feature vectors of invalid template pixels.
void mask_invalid(Tensor& t, const ValidityMask& valid) {
    for (int y = 0; y < t.h; ++y)
        for (int x = 0; x < t.w; ++x) {
            if (valid[static_cast<size_t>(y) * t.w + x]) continue;
            double* p = t.px(y, x);
            std::fill(p, p + t.c, 0.0);
        }
}

int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

Tensor filter_bank(const Tensor& img) {
    // Diagonal derivative stencils; zero response on constant images.
    static const double k45[9] = {0, 1, 2, -1, 0, 1, -2, -1, 0};
    static const double k135[9] = {2, 1, 0, 1, 0, -1, 0, -1, -2};
    Tensor out(img.h, img.w, kFilterBankChannels);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            const int xm = clampi(x - 1, 0, img.w - 1), xp = clampi(x + 1, 0, img.w - 1);
            const int ym = clampi(y - 1, 0, img.h - 1), yp = clampi(y + 1, 0, img.h - 1);
            double* o = out.px(y, x);
            o[0] = img.at(y, x, 0);
            o[1] = 0.5 * (img.at(y, xp, 0) - img.at(y, xm, 0));
            o[2] = 0.5 * (img.at(yp, x, 0) - img.at(ym, x, 0));
            double a = 0.0, b = 0.0;
            int i = 0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx, ++i) {
                    const double v = img.at(clampi(y + dy, 0, img.h - 1),
                                            clampi(x + dx, 0, img.w - 1), 0);
                    a += k45[i] * v;
                    b += k135[i] * v;
                }
            o[3] = a / 8.0;
            o[4] = b / 8.0;
        }
    return out;
}

} // namespace

Tensor template_to_tensor(const Template& tmpl) {
    const int n = tmpl.size();
    Tensor t(n, n, 1);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x)
            t.at(y, x, 0) = tmpl.image.at(x, y);
    return t;
}

FeatureMap extract(const Template& tmpl, const Extractor& extractor) {
    const Tensor img = template_to_tensor(tmpl);
    FeatureMap fm;
    switch (extractor.kind) {
        case ExtractorKind::Intensity: {
            fm.data = img;
            fm.normalized = false;
            break;
        }
        case ExtractorKind::FilterBank: {
            fm.data = filter_bank(img);
            mask_invalid(fm.data, tmpl.valid);
            fm.data = l2norm_forward(fm.data);
            fm.normalized = true;
            break;
        }
        case ExtractorKind::ConvNet: {
            if (!extractor.net) throw WeightTopologyMismatch("ConvNet extractor without weights");
            fm.data = extractor.net->forward(img);
            mask_invalid(fm.data, tmpl.valid);
            fm.data = l2norm_forward(fm.data);
            fm.normalized = true;
            break;
        }
    }
    if (extractor.kind == ExtractorKind::Intensity) mask_invalid(fm.data, tmpl.valid);
    return fm;
}

FeatureMap extract_convnet_cached(const Template& tmpl, const FeatureNet& net, ExtractCache& cache) {
    cache.tmpl = &tmpl;
    const Tensor img = template_to_tensor(tmpl);
    cache.raw = net.forward(img, &cache.net);
    cache.masked = cache.raw;
    mask_invalid(cache.masked, tmpl.valid);
    FeatureMap fm;
    fm.data = l2norm_forward(cache.masked);
    fm.normalized = true;
    return fm;
}

void extract_convnet_backward(const ExtractCache& cache, const FeatureNet& net,
                              const Tensor& gfeatures, FeatureNet& gnet) {
    Tensor gmasked;
    l2norm_backward(cache.masked, gfeatures, gmasked);
    mask_invalid(gmasked, cache.tmpl->valid); // masked pixels pass no gradient
    net.backward(cache.net, gmasked, gnet);
}

} // namespace hvc
