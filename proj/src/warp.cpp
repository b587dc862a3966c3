#include "hvc/warp.hpp"

#include <algorithm>
#include <cmath>

#include "hvc/parallel.hpp"

namespace hvc {

WarpResult warp_bilinear(const ImageBuffer& src, const Homography& h, int out_w, int out_h) {
    WarpResult out;
    out.image = ImageBuffer(out_w, out_h, src.channels());
    out.valid.assign(static_cast<size_t>(out_w) * out_h, 0);
    const int ch = src.channels();
    const int sw = src.width(), sh = src.height();

    parallel_for(0, out_h, [&](int y) {
        float* dst = out.image.row(y);
        uint8_t* vrow = out.valid.data() + static_cast<size_t>(y) * out_w;
        for (int x = 0; x < out_w; ++x) {
            double sx, sy;
            if (!h.try_apply(x, y, sx, sy)) continue;
            if (sx < 0.0 || sy < 0.0 || sx > sw - 1 || sy > sh - 1) continue;
            const int x0 = std::min(static_cast<int>(sx), sw - 1);
            const int y0 = std::min(static_cast<int>(sy), sh - 1);
            const int x1 = std::min(x0 + 1, sw - 1);
            const int y1 = std::min(y0 + 1, sh - 1);
            const double wx = sx - x0, wy = sy - y0;
            for (int c = 0; c < ch; ++c) {
                const double v00 = src.at(x0, y0, c), v10 = src.at(x1, y0, c);
                const double v01 = src.at(x0, y1, c), v11 = src.at(x1, y1, c);
                dst[x * ch + c] = static_cast<float>((1 - wy) * ((1 - wx) * v00 + wx * v10) +
                                                     wy * ((1 - wx) * v01 + wx * v11));
            }
            vrow[x] = 1;
        }
    });
    return out;
}

Homography level_homography(const Homography& full_h, int level_size, int full_size) {
    if (level_size == full_size) return full_h;
    const double s = static_cast<double>(level_size - 1) / (full_size - 1);
    return compose(Homography::scaling(s, s), full_h);
}

Template sample_planar_object(const ImageBuffer& frame, const Homography& sampling_h,
                              int size, int full_size) {
    const Homography h_level = level_homography(sampling_h, size, full_size);
    WarpResult w = warp_bilinear(frame, invert(h_level), size, size);
    Template t;
    t.image = std::move(w.image);
    t.valid = std::move(w.valid);
    t.sampling_h = h_level;
    return t;
}

std::array<Template, 3> build_template_pyramid(const ImageBuffer& frame,
                                               const Homography& sampling_h, int full_size) {
    return {sample_planar_object(frame, sampling_h, full_size / 4, full_size),
            sample_planar_object(frame, sampling_h, full_size / 2, full_size),
            sample_planar_object(frame, sampling_h, full_size, full_size)};
}

ImageBuffer visibility_to_image(const VisibilityMask& m) {
    ImageBuffer img(m.width, m.height, 1);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x)
            img.at(x, y) = m.visible(x, y) ? 1.0f : 0.0f;
    return img;
}

VisibilityMask visibility_from_image(const ImageBuffer& img) {
    VisibilityMask m(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            m.at(x, y) = img.at(x, y) >= 0.5f ? 1.0f : 0.0f;
    return m;
}

ImageBuffer composite(const ImageBuffer& frame, const ImageBuffer& overlay,
                      const Homography& h_in, const Homography& h_ij,
                      const VisibilityMask& vis) {
    ImageBuffer out = frame;
    // frame pixel -> template coordinate of the reference object
    const Homography frame_to_template = compose(h_in, h_ij);
    const int tw = overlay.width(), th = overlay.height();
    const int fch = frame.channels(), och = overlay.channels();

    parallel_for(0, frame.height(), [&](int y) {
        float* dst = out.row(y);
        for (int x = 0; x < frame.width(); ++x) {
            double tx, ty;
            if (!frame_to_template.try_apply(x, y, tx, ty)) continue;
            if (tx < 0.0 || ty < 0.0 || tx > tw - 1 || ty > th - 1) continue;
            const int mx = std::min(static_cast<int>(std::lround(tx)), vis.width - 1);
            const int my = std::min(static_cast<int>(std::lround(ty)), vis.height - 1);
            if (!vis.visible(mx, my)) continue;
            const int x0 = std::min(static_cast<int>(tx), tw - 1);
            const int y0 = std::min(static_cast<int>(ty), th - 1);
            const int x1 = std::min(x0 + 1, tw - 1);
            const int y1 = std::min(y0 + 1, th - 1);
            const double wx = tx - x0, wy = ty - y0;
            for (int c = 0; c < fch; ++c) {
                const int oc = och == 1 ? 0 : std::min(c, och - 1);
                const double v00 = overlay.at(x0, y0, oc), v10 = overlay.at(x1, y0, oc);
                const double v01 = overlay.at(x0, y1, oc), v11 = overlay.at(x1, y1, oc);
                dst[x * fch + c] = static_cast<float>((1 - wy) * ((1 - wx) * v00 + wx * v10) +
                                                      wy * ((1 - wx) * v01 + wx * v11));
            }
        }
    });
    return out;
}

} // namespace hvc
