#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hvc/error.hpp"

namespace hvc {

// Row-major, channel-interleaved image with samples in [0,1].
// channels is 1 (gray) or 3 (RGB).
class ImageBuffer {
public:
    ImageBuffer() = default;
    ImageBuffer(int width, int height, int channels, float fill = 0.0f)
        : width_(width), height_(height), channels_(channels),
          data_(static_cast<size_t>(width) * height * channels, fill) {}

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    bool empty() const { return data_.empty(); }

    float& at(int x, int y, int c = 0) {
        return data_[(static_cast<size_t>(y) * width_ + x) * channels_ + c];
    }
    float at(int x, int y, int c = 0) const {
        return data_[(static_cast<size_t>(y) * width_ + x) * channels_ + c];
    }
    float* row(int y) { return data_.data() + static_cast<size_t>(y) * width_ * channels_; }
    const float* row(int y) const { return data_.data() + static_cast<size_t>(y) * width_ * channels_; }

    std::vector<float>& data() { return data_; }
    const std::vector<float>& data() const { return data_; }

private:
    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<float> data_;
};

// Per-pixel validity (1 = sample came from inside the source image).
using ValidityMask = std::vector<uint8_t>;

// Rec. 601 luma.
ImageBuffer to_gray(const ImageBuffer& img);

// Bilinear resize to the requested size.
ImageBuffer resize_bilinear(const ImageBuffer& img, int out_w, int out_h);

// 8-bit PNG (gray or RGB); values are mapped 0..255 <-> 0..1.
ImageBuffer read_png(const std::string& path);
void write_png(const std::string& path, const ImageBuffer& img);

// Binary PGM (P5), single channel.
ImageBuffer read_pgm(const std::string& path);
void write_pgm(const std::string& path, const ImageBuffer& img);

// Dispatches on file extension (.png / .pgm).
ImageBuffer read_image(const std::string& path);
void write_image(const std::string& path, const ImageBuffer& img);

} // namespace hvc
