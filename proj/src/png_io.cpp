#include "kcd/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

#include "kcd/error.hpp"

namespace kcd {
namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

} // namespace

void write_png(const std::string& path, const Gray8& img) {
    if (img.height <= 0 || img.width <= 0 ||
        img.pixels.size() != std::size_t(img.height) * std::size_t(img.width))
        throw ValidationError("write_png: bad raster dimensions");
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw IoError("write_png: cannot open " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("write_png: png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("write_png: png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("write_png: libpng error writing " + path);
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.height; ++y)
        png_write_row(png, const_cast<png_bytep>(&img.pixels[std::size_t(y) * img.width]));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Gray8 read_png(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw IoError("read_png: cannot open " + path);

    png_byte header[8];
    if (std::fread(header, 1, 8, f.get()) != 8 || png_sig_cmp(header, 0, 8))
        throw IoError("read_png: not a PNG file: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("read_png: png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("read_png: png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("read_png: libpng error reading " + path);
    }
    png_init_io(png, f.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    // Normalize any input to 8-bit grayscale.
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    const png_byte color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8)
        png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_COLOR) png_set_rgb_to_gray(png, 1, -1.0, -1.0);
    png_read_update_info(png, info);

    Gray8 img(int(png_get_image_height(png, info)), int(png_get_image_width(png, info)));
    for (int y = 0; y < img.height; ++y)
        png_read_row(png, &img.pixels[std::size_t(y) * img.width], nullptr);
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

} // namespace kcd
