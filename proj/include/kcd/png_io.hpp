#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace kcd {

/// 8-bit grayscale raster used for PNG export of masks, magnitude images,
/// error maps and uncertainty maps.
struct Gray8 {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> pixels; // row-major

    Gray8() = default;
    Gray8(int h, int w) : height(h), width(w), pixels(std::size_t(h) * std::size_t(w), 0) {}
};

void write_png(const std::string& path, const Gray8& img);
Gray8 read_png(const std::string& path);

} // namespace kcd
