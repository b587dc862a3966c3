#include "hvc/augment.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace hvc {

PhotoParams sample_photo_params(const PhotoRanges& ranges, Rng& rng) {
    PhotoParams p;
    p.brightness = rng.uniform(-ranges.brightness, ranges.brightness);
    p.contrast = 1.0 + rng.uniform(-ranges.contrast, ranges.contrast);
    p.saturation = 1.0 + rng.uniform(-ranges.saturation, ranges.saturation);
    p.blur_sigma = rng.uniform(0.0, ranges.blur_sigma_max);
    return p;
}

ImageBuffer gaussian_blur(const ImageBuffer& img, double sigma) {
    if (sigma <= 0.0) return img;
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += kernel[i + radius];
    }
    for (double& k : kernel) k /= sum;

    const int w = img.width(), h = img.height(), ch = img.channels();
    ImageBuffer tmp(w, h, ch), out(w, h, ch);
    // horizontal
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < ch; ++c) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    const int xx = std::clamp(x + i, 0, w - 1);
                    acc += kernel[i + radius] * img.at(xx, y, c);
                }
                tmp.at(x, y, c) = static_cast<float>(acc);
            }
    // vertical
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < ch; ++c) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    const int yy = std::clamp(y + i, 0, h - 1);
                    acc += kernel[i + radius] * tmp.at(x, yy, c);
                }
                out.at(x, y, c) = static_cast<float>(acc);
            }
    return out;
}

ImageBuffer photometric_augment(const ImageBuffer& img, const PhotoParams& params) {
    if (params.neutral()) return img;
    ImageBuffer out = img;
    const int w = img.width(), h = img.height(), ch = img.channels();

    if (params.contrast != 1.0 || params.brightness != 0.0) {
        for (float& v : out.data())
            v = static_cast<float>((v - 0.5) * params.contrast + 0.5 + params.brightness);
    }
    if (params.saturation != 1.0 && ch == 3) {
        for (int y = 0; y < h; ++y) {
            float* row = out.row(y);
            for (int x = 0; x < w; ++x) {
                float* p = row + x * 3;
                const double luma = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
                for (int c = 0; c < 3; ++c)
                    p[c] = static_cast<float>(luma + params.saturation * (p[c] - luma));
            }
        }
    }
    if (params.blur_sigma > 0.0) out = gaussian_blur(out, params.blur_sigma);
    for (float& v : out.data()) v = std::min(1.0f, std::max(0.0f, v));
    return out;
}

} // namespace hvc
