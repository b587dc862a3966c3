#pragma once

#include <array>

#include "hvc/geometry.hpp"
#include "hvc/image.hpp"

namespace hvc {

// Fixed-size view of the tracked plane plus the homography that produced it.
// sampling_h maps frame coordinates to template coordinates.
struct Template {
    ImageBuffer image;        // single channel
    ValidityMask valid;       // one byte per pixel
    Homography sampling_h;

    int size() const { return image.width(); }
};

struct WarpResult {
    ImageBuffer image;
    ValidityMask valid;
};

// Samples src at h(p) for every output pixel p; h maps OUTPUT coordinates to
// SOURCE coordinates. Pixels whose 4-tap footprint leaves the source are
// marked invalid and set to 0.
WarpResult warp_bilinear(const ImageBuffer& src, const Homography& h, int out_w, int out_h);

// Planar object sampling: fixed-size template regardless of quad shape.
// sampling_h maps frame coords to full-resolution template coords; size is
// the requested level resolution.
Template sample_planar_object(const ImageBuffer& frame, const Homography& sampling_h,
                              int size, int full_size);

// Rescales a frame->template homography from full_size to the given level
// size under the pixel-center corner convention.
Homography level_homography(const Homography& full_h, int level_size, int full_size);

// The three pyramid levels (ascending size: W/4, W/2, W), each sampled
// directly from the source frame.
std::array<Template, 3> build_template_pyramid(const ImageBuffer& frame,
                                               const Homography& sampling_h, int full_size);

// Per-pixel visibility probabilities over template pixels; binary view
// thresholds at 0.5.
struct VisibilityMask {
    int width = 0;
    int height = 0;
    std::vector<float> values;

    VisibilityMask() = default;
    VisibilityMask(int w, int h, float fill = 1.0f)
        : width(w), height(h), values(static_cast<size_t>(w) * h, fill) {}

    float at(int x, int y) const { return values[static_cast<size_t>(y) * width + x]; }
    float& at(int x, int y) { return values[static_cast<size_t>(y) * width + x]; }
    bool visible(int x, int y) const { return at(x, y) >= 0.5f; }

    size_t count_visible() const {
        size_t n = 0;
        for (float v : values) n += v >= 0.5f;
        return n;
    }
};

ImageBuffer visibility_to_image(const VisibilityMask& m);
VisibilityMask visibility_from_image(const ImageBuffer& img);

// Places overlay (sized to the reference template) into frame. h_ij maps
// current-frame pixels to reference pixels (paper direction); h_in is the
// reference normalization homography. vis gates blending per template pixel.
ImageBuffer composite(const ImageBuffer& frame, const ImageBuffer& overlay,
                      const Homography& h_in, const Homography& h_ij,
                      const VisibilityMask& vis);

} // namespace hvc
