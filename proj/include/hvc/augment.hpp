#pragma once

#include "hvc/image.hpp"
#include "hvc/rng.hpp"

namespace hvc {

// Neutral values leave the image untouched. Applied in order: contrast
// (about mid-gray), brightness, saturation, blur; final clamp to [0,1].
struct PhotoParams {
    double brightness = 0.0;  // additive
    double contrast = 1.0;    // multiplicative about 0.5
    double saturation = 1.0;  // blend toward per-pixel luma; no-op on gray images
    double blur_sigma = 0.0;  // Gaussian std dev in pixels, 0 disables

    bool neutral() const {
        return brightness == 0.0 && contrast == 1.0 && saturation == 1.0 && blur_sigma == 0.0;
    }
};

// Symmetric sampling ranges for the parameters above.
struct PhotoRanges {
    double brightness = 0.2;
    double contrast = 0.3;    // factor in [1-c, 1+c]
    double saturation = 0.3;  // factor in [1-s, 1+s]
    double blur_sigma_max = 1.5;
};

PhotoParams sample_photo_params(const PhotoRanges& ranges, Rng& rng);

ImageBuffer photometric_augment(const ImageBuffer& img, const PhotoParams& params);

// Convenience: sample + apply.
inline ImageBuffer photometric_augment(const ImageBuffer& img, const PhotoRanges& ranges, Rng& rng) {
    return photometric_augment(img, sample_photo_params(ranges, rng));
}

// Separable Gaussian blur, replicate border, kernel radius ceil(3*sigma).
ImageBuffer gaussian_blur(const ImageBuffer& img, double sigma);

} // namespace hvc
