#pragma once

// 8-bit RGB PNG import/export for texture images (libpng).

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <png.h>

#include "bipar/texture.hpp"

namespace bipar {

inline std::uint8_t to_byte(double c) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0));
}

// Row-major RGB8 bytes of the clamped image.
inline std::vector<std::uint8_t> to_rgb8(const TextureImage& img) {
    std::vector<std::uint8_t> out(static_cast<std::size_t>(img.pixels.size()));
    for (Eigen::Index i = 0; i < img.pixels.size(); ++i) out[static_cast<std::size_t>(i)] = to_byte(img.pixels(i));
    return out;
}

inline TextureImage from_rgb8(int width, int height, const std::vector<std::uint8_t>& rgb) {
    require(rgb.size() == static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3,
            ErrorKind::dimension_mismatch, "RGB8 buffer size does not match dimensions");
    TextureImage img{width, height, Eigen::VectorXd(static_cast<Eigen::Index>(rgb.size()))};
    for (std::size_t i = 0; i < rgb.size(); ++i) img.pixels(static_cast<Eigen::Index>(i)) = rgb[i] / 255.0;
    return img;
}

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] inline void png_error_fn(png_structp png, png_const_charp msg) {
    auto* buf = static_cast<std::string*>(png_get_error_ptr(png));
    if (buf) *buf = msg;
    png_longjmp(png, 1);
}

inline void png_warning_fn(png_structp, png_const_charp) {}

}  // namespace detail

inline void save_png(const TextureImage& img, const std::filesystem::path& path) {
    validate(img);
    detail::FilePtr file(std::fopen(path.c_str(), "wb"));
    if (!file) throw Error(ErrorKind::io, "cannot write " + path.string());
    std::string err;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, detail::png_error_fn,
                                              detail::png_warning_fn);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorKind::io, "libpng initialization failed");
    }
    const std::vector<std::uint8_t> rgb = to_rgb8(img);
    std::vector<png_const_bytep> rows(static_cast<std::size_t>(img.height));
    for (int y = 0; y < img.height; ++y)
        rows[static_cast<std::size_t>(y)] = rgb.data() + static_cast<std::size_t>(y) * img.width * 3;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorKind::io, "PNG encode failed for " + path.string() + ": " + err);
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, const_cast<png_bytepp>(rows.data()));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

// Any PNG color type is expanded to 8-bit RGB.
inline TextureImage load_png(const std::filesystem::path& path) {
    detail::FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) throw Error(ErrorKind::io, "cannot open " + path.string());
    std::string err;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, detail::png_error_fn,
                                             detail::png_warning_fn);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorKind::io, "libpng initialization failed");
    }
    std::vector<std::uint8_t> rgb;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorKind::parse, "PNG decode failed for " + path.string() + ": " + err);
    }
    png_init_io(png, file.get());
    png_read_info(png, info);
    const auto width = png_get_image_width(png, info);
    const auto height = png_get_image_height(png, info);
    const auto color = png_get_color_type(png, info);
    if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);
    rgb.resize(static_cast<std::size_t>(width) * height * 3);
    rows.resize(height);
    for (png_uint_32 y = 0; y < height; ++y) rows[y] = rgb.data() + static_cast<std::size_t>(y) * width * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return from_rgb8(static_cast<int>(width), static_cast<int>(height), rgb);
}

}  // namespace bipar
