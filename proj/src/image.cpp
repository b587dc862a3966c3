#include "hvc/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>

#include <png.h>

namespace hvc {

namespace {

uint8_t to_byte(float v) {
    const float c = std::min(1.0f, std::max(0.0f, v));
    return static_cast<uint8_t>(std::lround(c * 255.0f));
}

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

} // namespace

ImageBuffer to_gray(const ImageBuffer& img) {
    if (img.channels() == 1) return img;
    ImageBuffer out(img.width(), img.height(), 1);
    for (int y = 0; y < img.height(); ++y) {
        const float* src = img.row(y);
        float* dst = out.row(y);
        for (int x = 0; x < img.width(); ++x) {
            const float* p = src + x * 3;
            dst[x] = 0.299f * p[0] + 0.587f * p[1] + 0.114f * p[2];
        }
    }
    return out;
}

ImageBuffer resize_bilinear(const ImageBuffer& img, int out_w, int out_h) {
    ImageBuffer out(out_w, out_h, img.channels());
    const double sx = out_w > 1 ? static_cast<double>(img.width() - 1) / (out_w - 1) : 0.0;
    const double sy = out_h > 1 ? static_cast<double>(img.height() - 1) / (out_h - 1) : 0.0;
    const int ch = img.channels();
    for (int y = 0; y < out_h; ++y) {
        const double fy = y * sy;
        const int y0 = std::min(static_cast<int>(fy), img.height() - 1);
        const int y1 = std::min(y0 + 1, img.height() - 1);
        const double wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            const double fx = x * sx;
            const int x0 = std::min(static_cast<int>(fx), img.width() - 1);
            const int x1 = std::min(x0 + 1, img.width() - 1);
            const double wx = fx - x0;
            for (int c = 0; c < ch; ++c) {
                const double v00 = img.at(x0, y0, c), v10 = img.at(x1, y0, c);
                const double v01 = img.at(x0, y1, c), v11 = img.at(x1, y1, c);
                out.at(x, y, c) = static_cast<float>(
                    (1 - wy) * ((1 - wx) * v00 + wx * v10) + wy * ((1 - wx) * v01 + wx * v11));
            }
        }
    }
    return out;
}

ImageBuffer read_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("failed to decode PNG " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    const int width = static_cast<int>(png_get_image_width(png, info));
    const int height = static_cast<int>(png_get_image_height(png, info));
    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);

    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const int channels = static_cast<int>(png_get_channels(png, info));
    ImageBuffer out(width, height, channels == 1 ? 1 : 3);
    std::vector<uint8_t> rowbuf(static_cast<size_t>(width) * channels);
    for (int y = 0; y < height; ++y) {
        png_read_row(png, rowbuf.data(), nullptr);
        float* dst = out.row(y);
        for (int x = 0; x < width; ++x)
            for (int c = 0; c < out.channels(); ++c)
                dst[x * out.channels() + c] = rowbuf[x * channels + c] / 255.0f;
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

void write_png(const std::string& path, const ImageBuffer& img) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot open " + path + " for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("failed to encode PNG " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, img.width(), img.height(), 8,
                 img.channels() == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<uint8_t> rowbuf(static_cast<size_t>(img.width()) * img.channels());
    for (int y = 0; y < img.height(); ++y) {
        const float* src = img.row(y);
        for (size_t i = 0; i < rowbuf.size(); ++i) rowbuf[i] = to_byte(src[i]);
        png_write_row(png, rowbuf.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

ImageBuffer read_pgm(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open " + path);
    char magic[3] = {0};
    int width = 0, height = 0, maxval = 0;
    if (std::fscanf(fp.get(), "%2s %d %d %d", magic, &width, &height, &maxval) != 4 ||
        std::strcmp(magic, "P5") != 0 || maxval <= 0 || maxval > 255)
        throw ParseError("not an 8-bit P5 PGM: " + path);
    std::fgetc(fp.get()); // single whitespace after header
    ImageBuffer out(width, height, 1);
    std::vector<uint8_t> rowbuf(static_cast<size_t>(width));
    for (int y = 0; y < height; ++y) {
        if (std::fread(rowbuf.data(), 1, rowbuf.size(), fp.get()) != rowbuf.size())
            throw ParseError("truncated PGM: " + path);
        float* dst = out.row(y);
        for (int x = 0; x < width; ++x) dst[x] = rowbuf[x] / static_cast<float>(maxval);
    }
    return out;
}

void write_pgm(const std::string& path, const ImageBuffer& img) {
    const ImageBuffer gray = to_gray(img);
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot open " + path + " for writing");
    std::fprintf(fp.get(), "P5\n%d %d\n255\n", gray.width(), gray.height());
    std::vector<uint8_t> rowbuf(static_cast<size_t>(gray.width()));
    for (int y = 0; y < gray.height(); ++y) {
        const float* src = gray.row(y);
        for (int x = 0; x < gray.width(); ++x) rowbuf[x] = to_byte(src[x]);
        if (std::fwrite(rowbuf.data(), 1, rowbuf.size(), fp.get()) != rowbuf.size())
            throw IoError("short write: " + path);
    }
}

ImageBuffer read_image(const std::string& path) {
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".pgm") return read_pgm(path);
    return read_png(path);
}

void write_image(const std::string& path, const ImageBuffer& img) {
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".pgm")
        write_pgm(path, img);
    else
        write_png(path, img);
}

} // namespace hvc
