#pragma once

// Small-bright-structure enhancement and percentile-threshold blob extraction.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "nighteyes/geometry.hpp"
#include "nighteyes/image.hpp"

namespace nighteyes {

enum class EnhanceMethod { tophat, dog, highpass };

struct EnhanceParams {
    EnhanceMethod method = EnhanceMethod::tophat;
    int kernel_px = 9;  ///< odd, >= 3
    double dog_sigma_ratio = 1.6;
    bool clahe_enabled = false;
    double clahe_clip = 2.0;
    int clahe_tiles = 8;
    bool denoise_enabled = false;

    void validate() const {
        if (kernel_px < 3 || kernel_px % 2 == 0) throw std::invalid_argument("EnhanceParams: kernel_px must be odd and >= 3");
        if (!(dog_sigma_ratio > 1.0)) throw std::invalid_argument("EnhanceParams: dog_sigma_ratio must be > 1");
        if (clahe_enabled && (clahe_tiles < 1 || !(clahe_clip > 0.0))) {
            throw std::invalid_argument("EnhanceParams: invalid CLAHE settings");
        }
    }
};

namespace morph {

/// Half-width of each row of the disk {dx^2 + dy^2 <= r^2}, indexed by dy + r.
inline std::vector<int> disk_row_halfwidths(int radius) {
    std::vector<int> hw(static_cast<std::size_t>(2 * radius + 1));
    for (int dy = -radius; dy <= radius; ++dy) {
        int w = 0;
        while ((w + 1) * (w + 1) + dy * dy <= radius * radius) ++w;
        hw[static_cast<std::size_t>(dy + radius)] = w;
    }
    return hw;
}

/// Sliding min (or max) over [x-w, x+w] along one row, out-of-range samples
/// ignored. van Herk / Gil-Werman, O(n) per row.
template <bool Max>
void sliding_extreme(const float* in, float* out, int n, int w) {
    if (w == 0) {
        std::copy_n(in, n, out);
        return;
    }
    const float pad = Max ? -std::numeric_limits<float>::infinity() : std::numeric_limits<float>::infinity();
    const int k = 2 * w + 1;
    const int len = n + 2 * w;
    const int blocks = (len + k - 1) / k;
    const int plen = blocks * k;
    std::vector<float> buf(static_cast<std::size_t>(plen), pad), g(buf.size()), h(buf.size());
    std::copy_n(in, n, buf.begin() + w);
    auto pick = [](float a, float b) { return Max ? std::max(a, b) : std::min(a, b); };
    for (int b = 0; b < blocks; ++b) {
        const int s = b * k;
        g[s] = buf[s];
        for (int i = 1; i < k; ++i) g[s + i] = pick(g[s + i - 1], buf[s + i]);
        h[s + k - 1] = buf[s + k - 1];
        for (int i = k - 2; i >= 0; --i) h[s + i] = pick(h[s + i + 1], buf[s + i]);
    }
    // window in padded coords: [x, x + 2w]
    for (int x = 0; x < n; ++x) out[x] = pick(h[x], g[x + 2 * w]);
}

template <bool Max>
GrayImage disk_filter(const GrayImage& img, int radius) {
    if (radius <= 0) return img;
    const int W = img.width(), H = img.height();
    const auto hw = disk_row_halfwidths(radius);
    // Horizontal pass for every distinct half-width.
    std::vector<std::vector<float>> rows(static_cast<std::size_t>(radius + 1));
    std::vector<bool> needed(static_cast<std::size_t>(radius + 1), false);
    for (int w : hw) needed[static_cast<std::size_t>(w)] = true;
    auto src = img.pixels();
    for (int w = 0; w <= radius; ++w) {
        if (!needed[static_cast<std::size_t>(w)]) continue;
        auto& r = rows[static_cast<std::size_t>(w)];
        r.resize(img.size());
        for (int y = 0; y < H; ++y) {
            sliding_extreme<Max>(src.data() + img.index(0, y), r.data() + img.index(0, y), W, w);
        }
    }
    const float init = Max ? -std::numeric_limits<float>::infinity() : std::numeric_limits<float>::infinity();
    std::vector<float> out(img.size(), init);
    for (int dy = -radius; dy <= radius; ++dy) {
        const auto& r = rows[static_cast<std::size_t>(hw[static_cast<std::size_t>(dy + radius)])];
        for (int y = 0; y < H; ++y) {
            const int yy = y + dy;
            if (yy < 0 || yy >= H) continue;
            const float* a = r.data() + img.index(0, yy);
            float* o = out.data() + img.index(0, y);
            for (int x = 0; x < W; ++x) o[x] = Max ? std::max(o[x], a[x]) : std::min(o[x], a[x]);
        }
    }
    return {W, H, std::move(out)};
}

inline GrayImage erode(const GrayImage& img, int radius) { return disk_filter<false>(img, radius); }
inline GrayImage dilate(const GrayImage& img, int radius) { return disk_filter<true>(img, radius); }
inline GrayImage open(const GrayImage& img, int radius) { return dilate(erode(img, radius), radius); }

}  // namespace morph

namespace filters {

inline std::vector<double> gaussian_kernel(double sigma) {
    const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
        const double v = std::exp(-0.5 * i * i / (sigma * sigma));
        k[static_cast<std::size_t>(i + r)] = v;
        sum += v;
    }
    for (auto& v : k) v /= sum;
    return k;
}

/// Separable convolution with clamp-to-edge borders. Returns raw doubles.
inline std::vector<double> separable(const GrayImage& img, const std::vector<double>& k) {
    const int W = img.width(), H = img.height();
    const int r = static_cast<int>(k.size() / 2);
    std::vector<double> tmp(img.size()), out(img.size());
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            double s = 0.0;
            for (int i = -r; i <= r; ++i) s += k[static_cast<std::size_t>(i + r)] * img.clamped(x + i, y);
            tmp[img.index(x, y)] = s;
        }
    }
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            double s = 0.0;
            for (int i = -r; i <= r; ++i) {
                const int yy = std::clamp(y + i, 0, H - 1);
                s += k[static_cast<std::size_t>(i + r)] * tmp[img.index(x, yy)];
            }
            out[img.index(x, y)] = s;
        }
    }
    return out;
}

inline std::vector<double> gaussian_blur(const GrayImage& img, double sigma) {
    return separable(img, gaussian_kernel(sigma));
}

/// Mean over a kernel_px x kernel_px window, clamp-to-edge.
inline std::vector<double> box_blur(const GrayImage& img, int kernel_px) {
    std::vector<double> k(static_cast<std::size_t>(kernel_px), 1.0 / kernel_px);
    return separable(img, k);
}

inline GrayImage median3(const GrayImage& img) {
    const int W = img.width(), H = img.height();
    std::vector<float> out(img.size());
    std::array<float, 9> win{};
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            int n = 0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) win[static_cast<std::size_t>(n++)] = img.clamped(x + dx, y + dy);
            std::nth_element(win.begin(), win.begin() + 4, win.end());
            out[img.index(x, y)] = win[4];
        }
    }
    return {W, H, std::move(out)};
}

/// Difference of Gaussians, sigma1 = kernel/6, sigma2 = sigma1 * ratio,
/// negative responses clamped to zero.
inline std::vector<double> dog_response(const GrayImage& img, int kernel_px, double ratio) {
    const double s1 = kernel_px / 6.0;
    auto a = gaussian_blur(img, s1);
    const auto b = gaussian_blur(img, s1 * ratio);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::max(0.0, a[i] - b[i]);
    return a;
}

/// Contrast-limited adaptive histogram equalization on [0,1] data with a
/// tiles x tiles grid, 256 bins, bilinear blending between tile mappings.
inline GrayImage clahe(const GrayImage& img, double clip, int tiles) {
    constexpr int bins = 256;
    const int W = img.width(), H = img.height();
    const int tx = std::min(tiles, W), ty = std::min(tiles, H);
    auto bin_of = [](float v) { return std::clamp(static_cast<int>(v * (bins - 1) + 0.5f), 0, bins - 1); };
    std::vector<std::array<float, bins>> maps(static_cast<std::size_t>(tx * ty));
    auto tile_x0 = [&](int i) { return i * W / tx; };
    auto tile_y0 = [&](int j) { return j * H / ty; };
    for (int j = 0; j < ty; ++j) {
        for (int i = 0; i < tx; ++i) {
            const int x0 = tile_x0(i), x1 = tile_x0(i + 1), y0 = tile_y0(j), y1 = tile_y0(j + 1);
            std::array<double, bins> hist{};
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x) hist[static_cast<std::size_t>(bin_of(img.at(x, y)))] += 1.0;
            const double area = static_cast<double>((x1 - x0) * (y1 - y0));
            const double limit = std::max(1.0, clip * area / bins);
            double excess = 0.0;
            for (auto& h : hist) {
                if (h > limit) {
                    excess += h - limit;
                    h = limit;
                }
            }
            const double add = excess / bins;
            double cdf = 0.0;
            auto& m = maps[static_cast<std::size_t>(j * tx + i)];
            for (int b = 0; b < bins; ++b) {
                cdf += hist[static_cast<std::size_t>(b)] + add;
                m[static_cast<std::size_t>(b)] = static_cast<float>(std::clamp(cdf / area, 0.0, 1.0));
            }
        }
    }
    std::vector<float> out(img.size());
    for (int y = 0; y < H; ++y) {
        // tile-centre coordinates
        const double fy = (y + 0.5) * ty / static_cast<double>(H) - 0.5;
        const int j0 = std::clamp(static_cast<int>(std::floor(fy)), 0, ty - 1);
        const int j1 = std::min(j0 + 1, ty - 1);
        const double wy = std::clamp(fy - j0, 0.0, 1.0);
        for (int x = 0; x < W; ++x) {
            const double fx = (x + 0.5) * tx / static_cast<double>(W) - 0.5;
            const int i0 = std::clamp(static_cast<int>(std::floor(fx)), 0, tx - 1);
            const int i1 = std::min(i0 + 1, tx - 1);
            const double wx = std::clamp(fx - i0, 0.0, 1.0);
            const auto b = static_cast<std::size_t>(bin_of(img.at(x, y)));
            const double v00 = maps[static_cast<std::size_t>(j0 * tx + i0)][b];
            const double v01 = maps[static_cast<std::size_t>(j0 * tx + i1)][b];
            const double v10 = maps[static_cast<std::size_t>(j1 * tx + i0)][b];
            const double v11 = maps[static_cast<std::size_t>(j1 * tx + i1)][b];
            const double v = (1 - wy) * ((1 - wx) * v00 + wx * v01) + wy * ((1 - wx) * v10 + wx * v11);
            out[img.index(x, y)] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    }
    return {W, H, std::move(out)};
}

/// Min-max rescale to [0,1]; constant input maps to zeros.
inline GrayImage normalize_minmax(int width, int height, const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    std::vector<float> out(v.size(), 0.0f);
    const double range = *hi - *lo;
    if (range > 1e-12) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            out[i] = static_cast<float>(std::clamp((v[i] - *lo) / range, 0.0, 1.0));
        }
    }
    return {width, height, std::move(out)};
}

}  // namespace filters

/// Amplifies small bright structures. Output has the input dimensions and
/// lies in [0,1].
inline GrayImage enhance_small_structures(const GrayImage& input, const EnhanceParams& p) {
    p.validate();
    const GrayImage img = p.denoise_enabled ? filters::median3(input) : input;
    std::vector<double> resp(img.size());
    auto px = img.pixels();
    switch (p.method) {
        case EnhanceMethod::tophat: {
            const GrayImage opened = morph::open(img, (p.kernel_px - 1) / 2);
            auto op = opened.pixels();
            for (std::size_t i = 0; i < resp.size(); ++i) resp[i] = std::max(0.0, double(px[i]) - double(op[i]));
            break;
        }
        case EnhanceMethod::dog:
            resp = filters::dog_response(img, p.kernel_px, p.dog_sigma_ratio);
            break;
        case EnhanceMethod::highpass: {
            const auto blur = filters::box_blur(img, p.kernel_px);
            for (std::size_t i = 0; i < resp.size(); ++i) resp[i] = std::max(0.0, double(px[i]) - blur[i]);
            break;
        }
    }
    if (p.clahe_enabled) {
        // CLAHE works on [0,1] data; rescale first, then equalize.
        GrayImage tmp = filters::normalize_minmax(img.width(), img.height(), resp);
        tmp = filters::clahe(tmp, p.clahe_clip, p.clahe_tiles);
        auto t = tmp.pixels();
        for (std::size_t i = 0; i < resp.size(); ++i) resp[i] = t[i];
    }
    return filters::normalize_minmax(img.width(), img.height(), resp);
}

struct BoundingBox {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive
};

struct Blob {
    std::vector<std::size_t> pixels;  ///< linear indices, raster order
    BoundingBox bbox;
    PointPx centroid;  ///< intensity-weighted, subpixel
    double peak = 0.0;
    double area = 0.0;
    double perimeter_edges = 0.0;  ///< count of 4-neighbour foreground/background edges
};

struct Components {
    std::vector<Blob> blobs;
    std::size_t raw_count = 0;  ///< components before the area filter
};

/// Intensity at which the mask starts: sorted[ceil(p/100 * N)], clamped.
/// At least the top (N - ceil(pN/100)) ranked pixels pass.
inline float percentile_threshold(std::span<const float> px, double percentile) {
    if (percentile < 0.0 || percentile > 100.0) throw std::invalid_argument("percentile must be in [0,100]");
    std::vector<float> v(px.begin(), px.end());
    const double rank = std::ceil(percentile * static_cast<double>(v.size()) / 100.0 - 1e-9);
    const auto k = std::min(v.size() - 1, static_cast<std::size_t>(std::max(0.0, rank)));
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
    return v[k];
}

inline std::vector<std::uint8_t> threshold_mask(const GrayImage& img, double percentile) {
    const float t = percentile_threshold(img.pixels(), percentile);
    std::vector<std::uint8_t> mask(img.size());
    auto px = img.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) mask[i] = px[i] >= t && px[i] > 0.0f ? 1 : 0;
    return mask;
}

/// Binary opening with disk(radius); radius 0 leaves the mask unchanged.
inline std::vector<std::uint8_t> open_mask(const std::vector<std::uint8_t>& mask, int width, int height, int radius) {
    if (radius <= 0) return mask;
    std::vector<float> f(mask.begin(), mask.end());
    GrayImage m(width, height, std::move(f));
    const GrayImage o = morph::open(m, radius);
    std::vector<std::uint8_t> out(mask.size());
    auto op = o.pixels();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = op[i] > 0.5f ? 1 : 0;
    return out;
}

/// 8-connected labelling of a binary mask, components in raster order of
/// their first pixel.
inline std::vector<std::vector<std::size_t>> label_components(const std::vector<std::uint8_t>& mask, int width,
                                                              int height) {
    std::vector<std::vector<std::size_t>> comps;
    std::vector<std::uint8_t> seen(mask.size(), 0);
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < mask.size(); ++start) {
        if (!mask[start] || seen[start]) continue;
        std::vector<std::size_t> comp;
        stack.push_back(start);
        seen[start] = 1;
        while (!stack.empty()) {
            const std::size_t cur = stack.back();
            stack.pop_back();
            comp.push_back(cur);
            const int cx = static_cast<int>(cur % static_cast<std::size_t>(width));
            const int cy = static_cast<int>(cur / static_cast<std::size_t>(width));
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int nx = cx + dx, ny = cy + dy;
                    if ((dx == 0 && dy == 0) || nx < 0 || ny < 0 || nx >= width || ny >= height) continue;
                    const auto ni = static_cast<std::size_t>(ny) * static_cast<std::size_t>(width) +
                                    static_cast<std::size_t>(nx);
                    if (mask[ni] && !seen[ni]) {
                        seen[ni] = 1;
                        stack.push_back(ni);
                    }
                }
            }
        }
        std::sort(comp.begin(), comp.end());
        comps.push_back(std::move(comp));
    }
    return comps;
}

inline Blob make_blob(const GrayImage& img, std::vector<std::size_t> pixels, const std::vector<std::uint8_t>& mask) {
    Blob b;
    const int W = img.width(), H = img.height();
    b.bbox = {W, H, -1, -1};
    double sw = 0.0, sx = 0.0, sy = 0.0, gx = 0.0, gy = 0.0;
    double edges = 0.0;
    auto px = img.pixels();
    for (std::size_t i : pixels) {
        const int x = static_cast<int>(i % static_cast<std::size_t>(W));
        const int y = static_cast<int>(i / static_cast<std::size_t>(W));
        b.bbox.x0 = std::min(b.bbox.x0, x);
        b.bbox.y0 = std::min(b.bbox.y0, y);
        b.bbox.x1 = std::max(b.bbox.x1, x);
        b.bbox.y1 = std::max(b.bbox.y1, y);
        const double v = px[i];
        sw += v;
        sx += v * x;
        sy += v * y;
        gx += x;
        gy += y;
        b.peak = std::max(b.peak, v);
        const int nbr[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
        for (const auto& d : nbr) {
            const int nx = x + d[0], ny = y + d[1];
            if (nx < 0 || ny < 0 || nx >= W || ny >= H || !mask[img.index(nx, ny)]) edges += 1.0;
        }
    }
    const double n = static_cast<double>(pixels.size());
    b.area = n;
    b.perimeter_edges = edges;
    b.centroid = sw > 0.0 ? PointPx{sx / sw, sy / sw} : PointPx{gx / n, gy / n};
    (void)H;
    b.pixels = std::move(pixels);
    return b;
}

/// Percentile threshold -> binary opening -> 8-connected components -> area
/// filter. Centroids are intensity-weighted on `img`.
inline Components threshold_and_components(const GrayImage& img, double percentile, int open_radius_px,
                                           double min_area_px, double max_area_px) {
    auto mask = threshold_mask(img, percentile);
    mask = open_mask(mask, img.width(), img.height(), open_radius_px);
    auto comps = label_components(mask, img.width(), img.height());
    Components out;
    out.raw_count = comps.size();
    for (auto& c : comps) {
        const auto area = static_cast<double>(c.size());
        if (area < min_area_px || area > max_area_px) continue;
        out.blobs.push_back(make_blob(img, std::move(c), mask));
    }
    return out;
}

}  // namespace nighteyes
