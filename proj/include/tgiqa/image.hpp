#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace tgiqa {

/// 8-bit image, row-major with interleaved channels (1 = gray, 3 = RGB).
struct ImageBuffer {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 1;
    std::vector<std::uint8_t> samples;

    ImageBuffer() = default;
    ImageBuffer(std::size_t w, std::size_t h, std::size_t c, std::uint8_t fill = 0)
        : width(w), height(h), channels(c), samples(w * h * c, fill) {}
    ImageBuffer(std::size_t w, std::size_t h, std::size_t c, std::vector<std::uint8_t> s);

    std::size_t pixel_count() const { return width * height; }
    std::uint8_t& at(std::size_t x, std::size_t y, std::size_t ch = 0) {
        return samples[(y * width + x) * channels + ch];
    }
    std::uint8_t at(std::size_t x, std::size_t y, std::size_t ch = 0) const {
        return samples[(y * width + x) * channels + ch];
    }

    bool operator==(const ImageBuffer&) const = default;
};

/// Binary PGM (P5) or PPM (P6) with maxval 255.
ImageBuffer decode_pnm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_pnm(const ImageBuffer& img);

/// Rec. 601 luma, rounded half away from zero. Gray input is returned as is.
ImageBuffer to_luminance(const ImageBuffer& img);

/// Anisotropic total variation of the luminance plane: the sum of absolute
/// differences over horizontal and vertical neighbour pairs, divided by 255
/// and by the pixel count. Lies in [0, 2].
double total_variation(const ImageBuffer& img);

}  // namespace tgiqa
