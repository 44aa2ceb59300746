#pragma once

// Synthetic constellation scenes with known ground truth.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <vector>

#include "nighteyes/candidates.hpp"
#include "nighteyes/eval.hpp"
#include "nighteyes/geometry.hpp"
#include "nighteyes/image.hpp"
#include "nighteyes/rng.hpp"
#include "nighteyes/template.hpp"

namespace nighteyes {

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

struct SceneSpec {
    Template templ = reference_template_5();
    Range scale_range{30.0, 70.0};  ///< px per template unit
    Range rotation_range{-std::numbers::pi, std::numbers::pi};
    Range translation_x{220.0, 420.0};
    Range translation_y{170.0, 310.0};
    double jitter_sigma = 0.0;
    int dropout_max = 0;
    int distractor_max = 0;
    /// Distractors are uniform over the frame; set this to restrict them to the
    /// constellation bounding box grown by this many template units.
    std::optional<double> distractor_margin;
    double mirror_prob = 0.0;
    bool exact_counts = false;  ///< use dropout_max / distractor_max as exact counts
    bool render = false;
    int width = 640;
    int height = 480;
    double spot_sigma = 1.2;
    double spot_peak = 0.9;
    double pixel_noise = 0.01;
    std::uint64_t rng_seed = 0;
};

struct ScenePoint {
    PointPx p;
    std::optional<int> led;  ///< nullopt for distractors
    double score = 0.0;
};

struct Scene {
    std::map<int, PointPx> truth;  ///< visible LEDs only, jitter included
    std::map<int, PointPx> jitter;
    std::vector<ScenePoint> points;  ///< truth + distractors, shuffled
    SimilarityTransform applied_transform;
    PointPx pupil_center;
    double pupil_radius = 0.0;
    std::optional<GrayImage> frame;

    std::vector<Candidate> candidates() const {
        std::vector<Candidate> c;
        for (const auto& sp : points) c.push_back({sp.p, sp.score, {}});
        return c;
    }

    /// led_id -> index into points / candidates()
    std::map<int, int> truth_index() const {
        std::map<int, int> m;
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (points[i].led) m[*points[i].led] = static_cast<int>(i);
        }
        return m;
    }

    FrameLabels labels() const {
        FrameLabels l;
        l.glints = truth;
        l.pupil_center = pupil_center;
        l.pupil_radius = pupil_radius;
        return l;
    }
};

namespace detail {

inline double smoothstep_edge(double d, double r) {
    // 1 inside, 0 outside, linear over one pixel
    return std::clamp(r - d + 0.5, 0.0, 1.0);
}

inline GrayImage render_eye(const SceneSpec& s, const Scene& sc, Rng& rng) {
    const int W = s.width, H = s.height;
    std::vector<float> px(static_cast<std::size_t>(W) * static_cast<std::size_t>(H));
    const double cx = W / 2.0, cy = H / 2.0, rmax = std::hypot(cx, cy);
    const double iris_r = 1.9 * sc.pupil_radius;
    std::vector<PointPx> spots;
    for (const auto& sp : sc.points) spots.push_back(sp.p);
    const double sig2 = 2.0 * s.spot_sigma * s.spot_sigma;
    const int reach = static_cast<int>(std::ceil(4.0 * s.spot_sigma));
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const double rv = std::hypot(x - cx, y - cy) / rmax;
            double v = 0.55 * (1.0 - 0.35 * rv * rv);
            const double d = std::hypot(x - sc.pupil_center.x, y - sc.pupil_center.y);
            v += (0.35 - v) * smoothstep_edge(d, iris_r);
            v += (0.08 - v) * smoothstep_edge(d, sc.pupil_radius);
            px[static_cast<std::size_t>(y) * static_cast<std::size_t>(W) + static_cast<std::size_t>(x)] = static_cast<float>(v);
        }
    }
    for (const auto& c : spots) {
        const int x0 = static_cast<int>(std::floor(c.x)) - reach, x1 = static_cast<int>(std::ceil(c.x)) + reach;
        const int y0 = static_cast<int>(std::floor(c.y)) - reach, y1 = static_cast<int>(std::ceil(c.y)) + reach;
        for (int y = std::max(0, y0); y <= std::min(H - 1, y1); ++y) {
            for (int x = std::max(0, x0); x <= std::min(W - 1, x1); ++x) {
                const double g = std::exp(-((x - c.x) * (x - c.x) + (y - c.y) * (y - c.y)) / sig2);
                auto& v = px[static_cast<std::size_t>(y) * static_cast<std::size_t>(W) + static_cast<std::size_t>(x)];
                v = static_cast<float>(std::max<double>(v, v + (s.spot_peak - v) * g));
            }
        }
    }
    for (auto& v : px) v = static_cast<float>(std::clamp(v + s.pixel_noise * rng.normal(), 0.0, 1.0));
    return {W, H, std::move(px)};
}

}  // namespace detail

/// Samples a similarity from the configured ranges, projects the template, drops
/// up to dropout_max LEDs, adds up to distractor_max uniform distractors (kept at
/// least max(2, 2*jitter) px from every true point), then Gaussian jitter.
/// Fully determined by rng_seed.
inline Scene generate_scene(const SceneSpec& s) {
    Rng rng(s.rng_seed);
    Scene sc;
    const double scale = rng.uniform(s.scale_range.lo, s.scale_range.hi);
    const double rot = rng.uniform(s.rotation_range.lo, s.rotation_range.hi);
    const PointPx t{rng.uniform(s.translation_x.lo, s.translation_x.hi), rng.uniform(s.translation_y.lo, s.translation_y.hi)};
    const bool mirror = s.mirror_prob > 0.0 && rng.bernoulli(s.mirror_prob);
    sc.applied_transform = SimilarityTransform(scale, rot, t, mirror);

    const std::size_t K = s.templ.size();
    std::vector<std::size_t> visible(K);
    for (std::size_t k = 0; k < K; ++k) visible[k] = k;
    const int n_drop = s.exact_counts ? s.dropout_max
                       : s.dropout_max > 0 ? static_cast<int>(rng.index(static_cast<std::size_t>(s.dropout_max) + 1)) : 0;
    for (int d = 0; d < n_drop && visible.size() > 0; ++d) {
        visible.erase(visible.begin() + static_cast<std::ptrdiff_t>(rng.index(visible.size())));
    }

    std::vector<PointPx> projected;
    for (std::size_t k = 0; k < K; ++k) projected.push_back(sc.applied_transform.apply(s.templ.point(k)));
    for (std::size_t k : visible) {
        const PointPx j{s.jitter_sigma * rng.normal(), s.jitter_sigma * rng.normal()};
        const int id = s.templ.led_id(k);
        sc.jitter[id] = j;
        sc.truth[id] = projected[k] + j;
        sc.points.push_back({sc.truth[id], id, rng.uniform(0.6, 1.0)});
    }

    double x0 = projected[0].x, x1 = x0, y0 = projected[0].y, y1 = y0;
    for (const auto& p : projected) {
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
    }
    if (s.distractor_margin) {
        const double m = *s.distractor_margin * scale;
        x0 = std::max(0.0, x0 - m);
        y0 = std::max(0.0, y0 - m);
        x1 = std::min(s.width - 1.0, x1 + m);
        y1 = std::min(s.height - 1.0, y1 + m);
    } else {
        x0 = 0.0;
        y0 = 0.0;
        x1 = s.width - 1.0;
        y1 = s.height - 1.0;
    }
    const int n_dist =
        s.exact_counts ? s.distractor_max
        : s.distractor_max > 0 ? static_cast<int>(rng.index(static_cast<std::size_t>(s.distractor_max) + 1)) : 0;
    const double min_sep = std::max(2.0, 2.0 * s.jitter_sigma);
    for (int d = 0; d < n_dist; ++d) {
        for (int attempt = 0; attempt < 1000; ++attempt) {
            const PointPx q{rng.uniform(x0, x1), rng.uniform(y0, y1)};
            const bool ok = std::all_of(sc.truth.begin(), sc.truth.end(),
                                        [&](const auto& kv) { return distance(kv.second, q) >= min_sep; });
            if (ok) {
                sc.points.push_back({q, std::nullopt, rng.uniform(0.3, 0.9)});
                break;
            }
        }
    }
    // Fisher-Yates so identities cannot be read off the order
    for (std::size_t i = sc.points.size(); i > 1; --i) std::swap(sc.points[i - 1], sc.points[rng.index(i)]);

    sc.pupil_radius = 0.75 * scale;
    sc.pupil_center = t + PointPx{rng.uniform(-0.15, 0.15) * scale, rng.uniform(-0.15, 0.15) * scale};
    if (s.render) sc.frame = detail::render_eye(s, sc, rng);
    return sc;
}

}  // namespace nighteyes
