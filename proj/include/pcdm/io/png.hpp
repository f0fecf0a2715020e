#pragma once

// 8-bit RGB PNG load/save on top of libpng. Grayscale, palette, 16-bit and
// alpha inputs are converted to RGB on read; alpha is dropped.

#include <png.h>

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "pcdm/image.hpp"
#include "pcdm/io/errors.hpp"

namespace pcdm {

namespace detail {

struct FileHandle {
    std::FILE* fp = nullptr;
    explicit FileHandle(const std::string& path, const char* mode)
        : fp(std::fopen(path.c_str(), mode)) {}
    ~FileHandle() {
        if (fp) std::fclose(fp);
    }
    FileHandle(const FileHandle&) = delete;
    FileHandle& operator=(const FileHandle&) = delete;
};

}  // namespace detail

inline Image load_png(const std::string& path) {
    detail::FileHandle file(path, "rb");
    if (!file.fp) throw IoError("cannot open " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("png_create_info_struct failed");
    }

    std::vector<unsigned char> pixels;
    std::vector<png_bytep> rows;
    png_uint_32 w = 0, h = 0;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ParseError(path + ": libpng failed to decode");
    }

    png_init_io(png, file.fp);
    png_read_info(png, info);
    w = png_get_image_width(png, info);
    h = png_get_image_height(png, info);

    png_set_expand(png);
    png_set_strip_16(png);
    png_set_gray_to_rgb(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);
    if (png_get_rowbytes(png, info) != static_cast<std::size_t>(w) * 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ParseError(path + ": unexpected row layout after RGB conversion");
    }

    pixels.resize(static_cast<std::size_t>(w) * h * 3);
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y)
        rows[y] = pixels.data() + static_cast<std::size_t>(y) * w * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Tensor rgb({static_cast<int>(w * h), 3});
    for (std::size_t i = 0; i < rgb.numel(); ++i) rgb[i] = pixels[i] / 255.0;
    return Image(static_cast<int>(h), static_cast<int>(w), std::move(rgb));
}

inline void save_png(const std::string& path, const Image& img) {
    detail::FileHandle file(path, "wb");
    if (!file.fp) throw IoError("cannot open " + path + " for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("png_create_info_struct failed");
    }

    std::vector<unsigned char> pixels(static_cast<std::size_t>(img.pixels()) * 3);
    for (std::size_t i = 0; i < pixels.size(); ++i)
        pixels[i] = static_cast<unsigned char>(std::lround(img.rgb[i] * 255.0));
    std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
    for (int y = 0; y < img.height; ++y)
        rows[static_cast<std::size_t>(y)] =
            pixels.data() + static_cast<std::size_t>(y) * static_cast<std::size_t>(img.width) * 3;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError(path + ": libpng failed to encode");
    }

    png_init_io(png, file.fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace pcdm
