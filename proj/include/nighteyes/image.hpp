#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace nighteyes {

/// Row-major grayscale raster with intensities in [0, 1].
class GrayImage {
   public:
    GrayImage() = default;
    GrayImage(int width, int height, float fill = 0.0f) : width_(width), height_(height) {
        if (width <= 0 || height <= 0) throw std::invalid_argument("GrayImage: dimensions must be positive");
        if (fill < 0.0f || fill > 1.0f) throw std::invalid_argument("GrayImage: fill outside [0,1]");
        data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
    }
    GrayImage(int width, int height, std::vector<float> data)
        : width_(width), height_(height), data_(std::move(data)) {
        if (width <= 0 || height <= 0) throw std::invalid_argument("GrayImage: dimensions must be positive");
        if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
            throw std::invalid_argument("GrayImage: data length != width*height");
        }
        for (float v : data_) {
            if (!(v >= 0.0f && v <= 1.0f)) throw std::invalid_argument("GrayImage: intensity outside [0,1]");
        }
    }

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    float at(int x, int y) const { return data_[index(x, y)]; }
    float& at(int x, int y) { return data_[index(x, y)]; }
    /// Clamp-to-edge access.
    float clamped(int x, int y) const {
        return at(std::clamp(x, 0, width_ - 1), std::clamp(y, 0, height_ - 1));
    }
    bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

    std::span<const float> pixels() const { return data_; }
    std::span<float> pixels() { return data_; }

    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    friend bool operator==(const GrayImage&, const GrayImage&) = default;

    /// Sub-image [x0, x0+w) x [y0, y0+h); the rectangle must lie inside.
    GrayImage crop(int x0, int y0, int w, int h) const {
        if (x0 < 0 || y0 < 0 || w <= 0 || h <= 0 || x0 + w > width_ || y0 + h > height_) {
            throw std::out_of_range("GrayImage::crop: rectangle outside image");
        }
        GrayImage out(w, h);
        for (int y = 0; y < h; ++y) {
            std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(index(x0, y0 + y)), w,
                        out.data_.begin() + static_cast<std::ptrdiff_t>(out.index(0, y)));
        }
        return out;
    }

   private:
    int width_ = 0;
    int height_ = 0;
    std::vector<float> data_;
};

/// Source raster as decoded from disk: 1 or 3 channels, 8 or 16 bits.
struct Raster {
    int width = 0;
    int height = 0;
    int channels = 1;
    int bit_depth = 8;
    std::vector<std::uint16_t> samples;  // interleaved, row-major
};

inline GrayImage gray_from_u8(int width, int height, std::span<const std::uint8_t> px) {
    if (px.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw std::invalid_argument("gray_from_u8: size mismatch");
    }
    std::vector<float> d(px.size());
    std::transform(px.begin(), px.end(), d.begin(), [](std::uint8_t v) { return static_cast<float>(v) / 255.0f; });
    return {width, height, std::move(d)};
}

inline GrayImage gray_from_u16(int width, int height, std::span<const std::uint16_t> px) {
    if (px.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw std::invalid_argument("gray_from_u16: size mismatch");
    }
    std::vector<float> d(px.size());
    std::transform(px.begin(), px.end(), d.begin(),
                   [](std::uint16_t v) { return static_cast<float>(v) / 65535.0f; });
    return {width, height, std::move(d)};
}

/// Luma 0.299 R + 0.587 G + 0.114 B on interleaved 8-bit RGB.
inline GrayImage gray_from_rgb8(int width, int height, std::span<const std::uint8_t> rgb) {
    const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    if (rgb.size() != 3 * n) throw std::invalid_argument("gray_from_rgb8: size mismatch");
    std::vector<float> d(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double l = 0.299 * rgb[3 * i] + 0.587 * rgb[3 * i + 1] + 0.114 * rgb[3 * i + 2];
        d[i] = std::clamp(static_cast<float>(l / 255.0), 0.0f, 1.0f);
    }
    return {width, height, std::move(d)};
}

inline GrayImage to_gray(const Raster& r) {
    const std::size_t n = static_cast<std::size_t>(r.width) * static_cast<std::size_t>(r.height);
    if (r.samples.size() != n * static_cast<std::size_t>(r.channels)) {
        throw std::invalid_argument("to_gray: sample count mismatch");
    }
    if (r.channels == 1 && r.bit_depth == 8) {
        std::vector<std::uint8_t> px(r.samples.begin(), r.samples.end());
        return gray_from_u8(r.width, r.height, px);
    }
    if (r.channels == 1 && r.bit_depth == 16) return gray_from_u16(r.width, r.height, r.samples);
    if (r.channels == 3 && r.bit_depth == 8) {
        std::vector<std::uint8_t> px(r.samples.begin(), r.samples.end());
        return gray_from_rgb8(r.width, r.height, px);
    }
    if (r.channels == 3 && r.bit_depth == 16) {
        std::vector<float> d(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double l =
                0.299 * r.samples[3 * i] + 0.587 * r.samples[3 * i + 1] + 0.114 * r.samples[3 * i + 2];
            d[i] = std::clamp(static_cast<float>(l / 65535.0), 0.0f, 1.0f);
        }
        return {r.width, r.height, std::move(d)};
    }
    throw std::invalid_argument("to_gray: unsupported channel/bit-depth combination");
}

/// Quantizes to 8-bit for export.
inline std::vector<std::uint8_t> to_u8(const GrayImage& img) {
    std::vector<std::uint8_t> out(img.size());
    auto px = img.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) {
        out[i] = static_cast<std::uint8_t>(std::lround(std::clamp(px[i], 0.0f, 1.0f) * 255.0f));
    }
    return out;
}

}  // namespace nighteyes
