#pragma once

#include <png.h>

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "vcqe/frame.hpp"
#include "vcqe/tensor.hpp"

namespace vcqe {

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace detail

// Loads an 8-bit PNG as H x W x 3 with values in [0,1]. Palette, grayscale
// and 16-bit inputs are converted; alpha is stripped.
inline Tensor<float> load_png_rgb(const std::string& path) {
    detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
    check(fp != nullptr, "load_png_rgb: cannot open " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    check(png != nullptr, "load_png_rgb: png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("load_png_rgb: png_create_info_struct failed");
    }
    std::vector<png_byte> raw;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("load_png_rgb: " + path + " is not a valid PNG");
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);

    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS))
        png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const std::size_t rowbytes = png_get_rowbytes(png, info);
    raw.assign(rowbytes * h, 0);
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = raw.data() + y * rowbytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Tensor<float> out({static_cast<int>(h), static_cast<int>(w), 3});
    for (png_uint_32 y = 0; y < h; ++y) {
        const png_byte* row = raw.data() + y * rowbytes;
        for (png_uint_32 x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                out.at3(static_cast<int>(y), static_cast<int>(x), c) =
                    static_cast<float>(row[x * 3 + c]) / 255.0f;
    }
    return out;
}

// Stores H x W x 3 values in [0,1] as an 8-bit RGB PNG (rounded, clamped).
inline void save_png_rgb(const std::string& path, const Tensor<float>& pixels) {
    check(pixels.ndim() == 3 && pixels.dim(2) == 3, "save_png_rgb: tensor must be H x W x 3");
    const int h = pixels.dim(0), w = pixels.dim(1);

    std::vector<png_byte> raw(static_cast<std::size_t>(h) * w * 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) {
                float v = pixels.at3(y, x, c);
                v = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
                raw[(static_cast<std::size_t>(y) * w + x) * 3 + c] =
                    static_cast<png_byte>(v * 255.0f + 0.5f);
            }

    detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
    check(fp != nullptr, "save_png_rgb: cannot open " + path + " for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    check(png != nullptr, "save_png_rgb: png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("save_png_rgb: png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("save_png_rgb: write failed for " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, w, h, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y) rows[y] = raw.data() + static_cast<std::size_t>(y) * w * 3;
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

inline Frame load_frame(const std::string& path, int index, FrameKind kind, FrameVariant variant) {
    Frame f;
    f.pixels = load_png_rgb(path);
    f.index = index;
    f.kind = kind;
    f.variant = variant;
    return f;
}

}  // namespace vcqe
