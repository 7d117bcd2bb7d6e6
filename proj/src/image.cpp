#include "tgiqa/image.hpp"

#include <cctype>
#include <cstdlib>
#include <string>

#include "tgiqa/error.hpp"

namespace tgiqa {

namespace {

class HeaderReader {
public:
    explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    void skip_space() {
        while (pos_ < bytes_.size()) {
            if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    std::size_t number(const char* field) {
        skip_space();
        std::size_t value = 0;
        std::size_t digits = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            value = value * 10 + (bytes_[pos_] - '0');
            if (++digits > 9) throw Error(Errc::BadFormat, std::string(field) + " is too large");
            ++pos_;
        }
        if (digits == 0) throw Error(Errc::BadFormat, std::string("missing ") + field);
        return value;
    }

    // Exactly one whitespace byte separates maxval from the raster.
    void single_space() {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
            throw Error(Errc::BadFormat, "maxval not followed by whitespace");
        }
        ++pos_;
    }

    std::size_t pos() const { return pos_; }
    void advance(std::size_t n) { pos_ += n; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

ImageBuffer::ImageBuffer(std::size_t w, std::size_t h, std::size_t c, std::vector<std::uint8_t> s)
    : width(w), height(h), channels(c), samples(std::move(s)) {
    if (w == 0 || h == 0 || (c != 1 && c != 3) || samples.size() != w * h * c) {
        throw Error(Errc::InvalidArgument, "image buffer dimensions do not match sample count");
    }
}

ImageBuffer decode_pnm(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
        throw Error(Errc::BadFormat, "not a binary PGM (P5) or PPM (P6)");
    }
    const std::size_t channels = bytes[1] == '5' ? 1 : 3;
    HeaderReader reader(bytes);
    reader.advance(2);
    const std::size_t width = reader.number("width");
    const std::size_t height = reader.number("height");
    const std::size_t maxval = reader.number("maxval");
    if (width == 0 || height == 0) throw Error(Errc::BadFormat, "zero width or height");
    if (maxval != 255) throw Error(Errc::UnsupportedMaxval, "maxval " + std::to_string(maxval) + " (only 255)");
    reader.single_space();

    const std::size_t needed = width * height * channels;
    const std::size_t available = bytes.size() - reader.pos();
    if (available < needed) {
        throw Error(Errc::TruncatedPixels, "expected " + std::to_string(needed) + " sample bytes, found " +
                                               std::to_string(available));
    }
    std::vector<std::uint8_t> samples(bytes.begin() + static_cast<std::ptrdiff_t>(reader.pos()),
                                      bytes.begin() + static_cast<std::ptrdiff_t>(reader.pos() + needed));
    return ImageBuffer(width, height, channels, std::move(samples));
}

std::vector<std::uint8_t> encode_pnm(const ImageBuffer& img) {
    const std::string header = std::string(img.channels == 1 ? "P5" : "P6") + "\n" + std::to_string(img.width) + " " +
                               std::to_string(img.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.samples.begin(), img.samples.end());
    return out;
}

ImageBuffer to_luminance(const ImageBuffer& img) {
    if (img.channels == 1) return img;
    ImageBuffer out(img.width, img.height, 1);
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        const unsigned r = img.samples[3 * i];
        const unsigned g = img.samples[3 * i + 1];
        const unsigned b = img.samples[3 * i + 2];
        // Integer weights per mille keep rounding exact: halves round up, and
        // all values are non-negative, so this is half away from zero.
        out.samples[i] = static_cast<std::uint8_t>((299 * r + 587 * g + 114 * b + 500) / 1000);
    }
    return out;
}

double total_variation(const ImageBuffer& img) {
    const ImageBuffer lum = to_luminance(img);
    const std::size_t w = lum.width;
    const std::size_t h = lum.height;
    std::uint64_t sum = 0;
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const int v = lum.samples[y * w + x];
            if (x + 1 < w) sum += static_cast<std::uint64_t>(std::abs(v - lum.samples[y * w + x + 1]));
            if (y + 1 < h) sum += static_cast<std::uint64_t>(std::abs(v - lum.samples[(y + 1) * w + x]));
        }
    }
    return static_cast<double>(sum) / 255.0 / static_cast<double>(w * h);
}

}  // namespace tgiqa
