#pragma once

// Glint over-detection: blob features and scoring, support voting, adaptive
// fallback passes, merge/pool, spatial gating and pupil ROI resolution.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "nighteyes/enhance.hpp"
#include "nighteyes/geometry.hpp"
#include "nighteyes/image.hpp"
#include "nighteyes/template.hpp"

namespace nighteyes {

struct CandidateFeatures {
    double area = 0.0;
    double peak = 0.0;
    double mean_intensity = 0.0;
    double compactness = 0.0;
    double local_contrast = 0.0;
    double dog_response = 0.0;
};

struct Candidate {
    PointPx center;
    double score = 0.0;
    CandidateFeatures features;
};

enum class ScoreMode { basic, contrast_support };

struct ScoreWeights {
    double peak = 0.35;
    double mean = 0.15;
    double compactness = 0.30;
    double area = 0.20;
    double local_contrast = 0.0;
    double dog = 0.0;

    double sum() const { return peak + mean + compactness + area + local_contrast + dog; }

    static ScoreWeights basic_defaults() { return {}; }
    /// Basic weights rescaled to 0.7 plus contrast and DoG terms.
    static ScoreWeights contrast_defaults() { return {0.245, 0.105, 0.21, 0.14, 0.15, 0.15}; }
};

struct FallbackParams {
    bool enabled = true;
    std::vector<double> pcts = {99.0, 98.0, 97.0};
    int pass_max = 4;
    int target = 8;
    int kernel_add = 2;  ///< even, so kernels stay odd
};

struct GateParams {
    bool border_enabled = true;
    double border_margin_px = 3.0;
    bool annulus_enabled = true;
    double annulus_inner_k = 0.2;
    double annulus_outer_k = 2.5;
    int min_k = 3;
    bool force = false;
};

struct DetectParams {
    double percentile = 99.5;
    int open_radius_px = 1;
    double min_area_px = 1.0;
    double max_area_frac = 0.005;  ///< of the processed image area
    ScoreMode score_mode = ScoreMode::contrast_support;
    ScoreWeights weights_basic = ScoreWeights::basic_defaults();
    ScoreWeights weights_contrast = ScoreWeights::contrast_defaults();
    double area_nominal_px2 = 12.0;
    double area_sigma_px2 = 10.0;
    double contrast_ring_px = 2.0;
    double contrast_cap = 4.0;
    int support_M = 20;
    double support_tol = 0.08;
    double support_w = 0.10;
    FallbackParams fallback;
    double cand_merge_eps = 4.0;
    int pool_N_max = 12;
    GateParams gates;

    const ScoreWeights& weights() const {
        return score_mode == ScoreMode::basic ? weights_basic : weights_contrast;
    }

    void validate() const {
        if (percentile < 0.0 || percentile > 100.0) throw std::invalid_argument("DetectParams: percentile outside [0,100]");
        if (!std::is_sorted(fallback.pcts.rbegin(), fallback.pcts.rend())) {
            throw std::invalid_argument("DetectParams: fallback pcts must be non-increasing");
        }
        if (fallback.enabled && fallback.pcts.empty()) throw std::invalid_argument("DetectParams: empty fallback pcts");
        if (fallback.target < 1) throw std::invalid_argument("DetectParams: fallback target must be >= 1");
        if (!(cand_merge_eps > 0.0)) throw std::invalid_argument("DetectParams: cand_merge_eps must be > 0");
        if (pool_N_max < 1) throw std::invalid_argument("DetectParams: pool_N_max must be >= 1");
        if (support_M < 3) throw std::invalid_argument("DetectParams: support_M must be >= 3");
    }
};

/// Score descending, then (y, x) ascending. Total order used by every
/// candidate sort so results are deterministic.
inline bool candidate_before(const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.center.y != b.center.y) return a.center.y < b.center.y;
    return a.center.x < b.center.x;
}

inline void sort_candidates(std::vector<Candidate>& c) { std::stable_sort(c.begin(), c.end(), candidate_before); }

/// 4*pi*A / P^2 with P estimated from the 4-neighbour edge count scaled by
/// pi/4 (the edge count of a digital disk overestimates its perimeter by
/// 4/pi). Clamped to (0, 1].
inline double blob_compactness(const Blob& b) {
    if (b.perimeter_edges <= 0.0) return 1.0;
    const double p = b.perimeter_edges * std::numbers::pi / 4.0;
    return std::clamp(4.0 * std::numbers::pi * b.area / (p * p), 1e-6, 1.0);
}

inline double area_term(double area, double nominal, double sigma) {
    const double d = area - nominal;
    return std::exp(-d * d / (2.0 * sigma * sigma));
}

/// Weighted sum of [0,1]-normalized feature terms; lies in [0, weights.sum()].
inline double score_features(const CandidateFeatures& f, ScoreMode mode, const ScoreWeights& w, double area_nominal,
                             double area_sigma) {
    double s = w.peak * std::clamp(f.peak, 0.0, 1.0) + w.mean * std::clamp(f.mean_intensity, 0.0, 1.0) +
               w.compactness * std::clamp(f.compactness, 0.0, 1.0) +
               w.area * (f.area > 0.0 ? area_term(f.area, area_nominal, area_sigma) : 0.0);
    if (mode == ScoreMode::contrast_support) {
        s += w.local_contrast * std::clamp(f.local_contrast, 0.0, 1.0) + w.dog * std::clamp(f.dog_response, 0.0, 1.0);
    }
    return std::max(0.0, s);
}

/// (mean_inside - mean_ring) / (mean_ring + 0.01) over a ring of `ring_px`
/// around the blob on `gray`, divided by `cap` and clamped to [0,1].
inline double local_contrast(const Blob& b, const GrayImage& gray, double ring_px, double cap) {
    const int ring = std::max(1, static_cast<int>(std::lround(ring_px)));
    const int W = gray.width(), H = gray.height();
    const int x0 = std::max(0, b.bbox.x0 - ring), x1 = std::min(W - 1, b.bbox.x1 + ring);
    const int y0 = std::max(0, b.bbox.y0 - ring), y1 = std::min(H - 1, b.bbox.y1 + ring);
    const int bw = x1 - x0 + 1, bh = y1 - y0 + 1;
    std::vector<std::uint8_t> inside(static_cast<std::size_t>(bw * bh), 0), near(inside.size(), 0);
    double sum_in = 0.0;
    for (std::size_t i : b.pixels) {
        const int x = static_cast<int>(i % static_cast<std::size_t>(W));
        const int y = static_cast<int>(i / static_cast<std::size_t>(W));
        inside[static_cast<std::size_t>((y - y0) * bw + (x - x0))] = 1;
        sum_in += gray.at(x, y);
        for (int dy = -ring; dy <= ring; ++dy) {
            for (int dx = -ring; dx <= ring; ++dx) {
                const int nx = x + dx, ny = y + dy;
                if (nx < x0 || ny < y0 || nx > x1 || ny > y1) continue;
                near[static_cast<std::size_t>((ny - y0) * bw + (nx - x0))] = 1;
            }
        }
    }
    double sum_ring = 0.0;
    int n_ring = 0;
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const auto k = static_cast<std::size_t>((y - y0) * bw + (x - x0));
            if (near[k] && !inside[k]) {
                sum_ring += gray.at(x, y);
                ++n_ring;
            }
        }
    }
    if (b.pixels.empty() || n_ring == 0) return 0.0;
    const double mi = sum_in / static_cast<double>(b.pixels.size());
    const double mr = sum_ring / n_ring;
    return std::clamp((mi - mr) / (mr + 0.01) / cap, 0.0, 1.0);
}

/// Per-pass images needed by feature extraction.
struct ScoringContext {
    const GrayImage* enhanced = nullptr;
    const GrayImage* gray = nullptr;
    const std::vector<double>* dog = nullptr;  ///< DoG response of `gray`, contrast mode only
    double dog_max = 0.0;
};

inline CandidateFeatures blob_features(const Blob& b, const ScoringContext& ctx, const DetectParams& p) {
    CandidateFeatures f;
    f.area = b.area;
    f.peak = b.peak;
    double s = 0.0;
    auto px = ctx.enhanced->pixels();
    for (std::size_t i : b.pixels) s += px[i];
    f.mean_intensity = b.pixels.empty() ? 0.0 : s / static_cast<double>(b.pixels.size());
    f.compactness = blob_compactness(b);
    if (p.score_mode == ScoreMode::contrast_support) {
        if (ctx.gray) f.local_contrast = local_contrast(b, *ctx.gray, p.contrast_ring_px, p.contrast_cap);
        if (ctx.dog && ctx.dog_max > 0.0) {
            double m = 0.0;
            for (std::size_t i : b.pixels) m = std::max(m, (*ctx.dog)[i]);
            f.dog_response = m / ctx.dog_max;
        }
    }
    return f;
}

inline Candidate score_blob(const Blob& b, const ScoringContext& ctx, const DetectParams& p) {
    Candidate c;
    c.center = b.centroid;
    c.features = blob_features(b, ctx, p);
    c.score = score_features(c.features, p.score_mode, p.weights(), p.area_nominal_px2, p.area_sigma_px2);
    return c;
}

/// Geometric support voting among the top-M candidates: a candidate's
/// support is the number of pairs (a, b) of other top-M candidates whose
/// pivot ratio |c-a|/|c-b| (<= 1) matches a template ratio within `tol`.
/// Scores are multiplied by 1 + w * support / max_support. Input order is
/// preserved; candidates outside the top-M are untouched.
inline std::vector<Candidate> support_vote(std::vector<Candidate> cands, const RatioIndex& idx, int M, double tol,
                                           double w) {
    if (cands.size() < 3 || M < 3) return cands;
    std::vector<std::size_t> order(cands.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return candidate_before(cands[a], cands[b]); });
    order.resize(std::min(order.size(), static_cast<std::size_t>(M)));
    std::vector<PointPx> pts;
    for (std::size_t i : order) pts.push_back(cands[i].center);
    try {
        pts = normalize_points(pts).points;
    } catch (const DegenerateSet&) {
        return cands;
    }
    const std::size_t m = pts.size();
    std::vector<int> support(m, 0);
    for (std::size_t c = 0; c < m; ++c) {
        for (std::size_t a = 0; a < m; ++a) {
            if (a == c) continue;
            const double da = distance(pts[c], pts[a]);
            if (!(da > 0.0)) continue;
            for (std::size_t b = a + 1; b < m; ++b) {
                if (b == c) continue;
                const double db = distance(pts[c], pts[b]);
                if (!(db > 0.0)) continue;
                if (idx.contains(pivot_ratio(da, db), tol)) ++support[c];
            }
        }
    }
    const int max_support = std::max(1, *std::max_element(support.begin(), support.end()));
    for (std::size_t k = 0; k < m; ++k) {
        cands[order[k]].score *= 1.0 + w * static_cast<double>(support[k]) / max_support;
    }
    return cands;
}

struct DetectPass {
    std::vector<Candidate> candidates;  ///< sorted by candidate_before
    std::size_t raw_count = 0;
};

/// enhance -> threshold -> components -> score (+ support vote in
/// contrast-support mode when a ratio index is given).
inline DetectPass detect_one_pass(const GrayImage& gray, const EnhanceParams& ep, const DetectParams& dp,
                                  const RatioIndex* support_index = nullptr,
                                  std::optional<double> percentile_override = std::nullopt,
                                  std::optional<int> kernel_override = std::nullopt) {
    EnhanceParams e = ep;
    if (kernel_override) e.kernel_px = *kernel_override;
    const GrayImage enhanced = enhance_small_structures(gray, e);
    const double pct = percentile_override.value_or(dp.percentile);
    const double max_area = std::max(dp.min_area_px, dp.max_area_frac * static_cast<double>(gray.size()));
    auto comps = threshold_and_components(enhanced, pct, dp.open_radius_px, dp.min_area_px, max_area);
    DetectPass out;
    out.raw_count = comps.raw_count;
    if (comps.blobs.empty()) return out;
    ScoringContext ctx;
    ctx.enhanced = &enhanced;
    ctx.gray = &gray;
    std::vector<double> dog;
    if (dp.score_mode == ScoreMode::contrast_support) {
        dog = filters::dog_response(gray, e.kernel_px, e.dog_sigma_ratio);
        ctx.dog = &dog;
        ctx.dog_max = *std::max_element(dog.begin(), dog.end());
    }
    out.candidates.reserve(comps.blobs.size());
    for (const auto& b : comps.blobs) out.candidates.push_back(score_blob(b, ctx, dp));
    if (dp.score_mode == ScoreMode::contrast_support && support_index) {
        out.candidates = support_vote(std::move(out.candidates), *support_index, dp.support_M, dp.support_tol,
                                      dp.support_w);
    }
    sort_candidates(out.candidates);
    return out;
}

/// Greedy non-maximum suppression: best-first, accept a candidate only if it
/// is farther than eps from everything already accepted.
inline std::vector<Candidate> merge_dedup_keep_best(std::vector<Candidate> cands, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("merge_dedup_keep_best: eps must be > 0");
    sort_candidates(cands);
    std::vector<Candidate> kept;
    for (auto& c : cands) {
        const bool far = std::all_of(kept.begin(), kept.end(),
                                     [&](const Candidate& k) { return distance(k.center, c.center) > eps; });
        if (far) kept.push_back(std::move(c));
    }
    return kept;
}

struct FallbackResult {
    std::vector<Candidate> candidates;
    std::size_t raw_count = 0;  ///< first pass
    int passes_run = 0;         ///< fallback passes beyond the first
    std::vector<double> percentiles_visited;
    std::vector<int> kernels_visited;
};

/// Fallback passes after a first pass: when it yielded fewer than `target`
/// raw components, up to pass_max relaxed passes (lower percentile, larger
/// kernel) are merged into the pool. Stops once the pool reaches target.
inline FallbackResult fallback_passes(const GrayImage& gray, const EnhanceParams& ep, const DetectParams& dp,
                                      const RatioIndex* support_index, DetectPass first) {
    FallbackResult out;
    out.raw_count = first.raw_count;
    out.candidates = std::move(first.candidates);
    const auto& fb = dp.fallback;
    if (!fb.enabled || static_cast<int>(out.raw_count) >= fb.target) return out;
    for (int i = 1; i <= fb.pass_max; ++i) {
        const double pct = fb.pcts[static_cast<std::size_t>(std::min<int>(i - 1, static_cast<int>(fb.pcts.size()) - 1))];
        const int kernel = ep.kernel_px + i * fb.kernel_add;
        out.percentiles_visited.push_back(pct);
        out.kernels_visited.push_back(kernel);
        auto pass = detect_one_pass(gray, ep, dp, support_index, pct, kernel);
        ++out.passes_run;
        auto pool = std::move(out.candidates);
        pool.insert(pool.end(), std::make_move_iterator(pass.candidates.begin()),
                    std::make_move_iterator(pass.candidates.end()));
        out.candidates = merge_dedup_keep_best(std::move(pool), dp.cand_merge_eps);
        if (static_cast<int>(out.candidates.size()) >= fb.target) break;
    }
    return out;
}

/// First pass followed by fallback_passes.
inline FallbackResult adaptive_fallback_detect(const GrayImage& gray, const EnhanceParams& ep,
                                               const DetectParams& dp, const RatioIndex* support_index = nullptr) {
    return fallback_passes(gray, ep, dp, support_index, detect_one_pass(gray, ep, dp, support_index));
}

inline std::vector<Candidate> pool_top_n(std::vector<Candidate> cands, int n_max) {
    if (n_max < 1) throw std::invalid_argument("pool_top_n: N_max must be >= 1");
    sort_candidates(cands);
    if (cands.size() > static_cast<std::size_t>(n_max)) cands.resize(static_cast<std::size_t>(n_max));
    return cands;
}

struct GateCircle {
    PointPx center;
    double radius = 0.0;
};

/// Drops candidates within `margin` px of the frame edge.
inline std::vector<Candidate> filter_candidates_border(std::vector<Candidate> cands, double margin, int width,
                                                       int height) {
    std::erase_if(cands, [&](const Candidate& c) {
        return c.center.x < margin || c.center.y < margin || c.center.x > (width - 1) - margin ||
               c.center.y > (height - 1) - margin;
    });
    return cands;
}

inline std::vector<bool> pupil_annulus_mask(std::span<const Candidate> cands, const GateCircle& g, double inner_k,
                                            double outer_k) {
    std::vector<bool> m(cands.size());
    for (std::size_t i = 0; i < cands.size(); ++i) {
        const double d = distance(cands[i].center, g.center);
        m[i] = d >= inner_k * g.radius && d <= outer_k * g.radius;
    }
    return m;
}

/// Pupil annulus gate. Applied only if it keeps at least min_k candidates,
/// or unconditionally when `force`.
inline std::vector<Candidate> annulus_gate(std::vector<Candidate> cands, const GateParams& g, const GateCircle& pupil) {
    const auto mask = pupil_annulus_mask(cands, pupil, g.annulus_inner_k, g.annulus_outer_k);
    const auto kept = static_cast<int>(std::count(mask.begin(), mask.end(), true));
    if (kept < g.min_k && !g.force) return cands;
    std::vector<Candidate> out;
    for (std::size_t i = 0; i < cands.size(); ++i) {
        if (mask[i]) out.push_back(std::move(cands[i]));
    }
    return out;
}

/// Border gate, then the annulus gate when a pupil circle is known.
inline std::vector<Candidate> gate_candidates(std::vector<Candidate> cands, const GateParams& g,
                                              std::optional<GateCircle> pupil, int width, int height) {
    if (g.border_enabled) cands = filter_candidates_border(std::move(cands), g.border_margin_px, width, height);
    if (g.annulus_enabled && pupil && pupil->radius > 0.0) cands = annulus_gate(std::move(cands), g, *pupil);
    return cands;
}

// -- pupil -------------------------------------------------------------------

struct PupilObservation {
    std::optional<PointPx> center;
    std::optional<double> radius;
    bool ok = false;
};

/// Per-recording pupil memory; frames of one recording must be processed in
/// order.
struct PupilState {
    std::optional<PointPx> center;
    std::optional<double> radius;
    bool valid = false;
    std::optional<PointPx> last_good_center;

    void observe(const PupilObservation& o) {
        valid = o.ok && o.center && o.radius;
        center = valid ? o.center : std::nullopt;
        radius = valid ? o.radius : std::nullopt;
        if (valid) last_good_center = center;
    }
};

enum class PupilFailPolicy { last_good, full, skip };

enum class RoiAction { use, full, skip };

struct RoiDecision {
    RoiAction action = RoiAction::full;
    std::optional<PointPx> roi_center;
    int x0 = 0, y0 = 0, width = 0, height = 0;  ///< ROI rectangle when action == use
    /// ROI-to-frame offset
    PointPx offset() const { return {static_cast<double>(x0), static_cast<double>(y0)}; }
};

/// Square ROI of side `side` centred at c, clipped to the frame.
inline RoiDecision make_roi(PointPx c, int side, int width, int height) {
    RoiDecision d;
    d.action = RoiAction::use;
    d.roi_center = c;
    const int half = side / 2;
    const int cx = static_cast<int>(std::lround(c.x)), cy = static_cast<int>(std::lround(c.y));
    const int x0 = std::clamp(cx - half, 0, width - 1), y0 = std::clamp(cy - half, 0, height - 1);
    const int x1 = std::clamp(cx - half + side, 1, width), y1 = std::clamp(cy - half + side, 1, height);
    d.x0 = x0;
    d.y0 = y0;
    d.width = std::max(1, x1 - x0);
    d.height = std::max(1, y1 - y0);
    return d;
}

/// Valid pupil -> use its centre. Invalid: last_good falls back to the stored
/// centre (or full frame when none), full -> full frame, skip -> skip.
inline RoiDecision resolve_pupil_roi(const PupilState& pupil, PupilFailPolicy policy, int roi_side, int width,
                                     int height) {
    if (pupil.valid && pupil.center) return make_roi(*pupil.center, roi_side, width, height);
    switch (policy) {
        case PupilFailPolicy::last_good:
            if (pupil.last_good_center) return make_roi(*pupil.last_good_center, roi_side, width, height);
            return {};
        case PupilFailPolicy::full:
            return {};
        case PupilFailPolicy::skip: {
            RoiDecision d;
            d.action = RoiAction::skip;
            return d;
        }
    }
    return {};
}

/// Adds the ROI offset and drops anything outside the full frame.
inline std::vector<Candidate> map_to_full_and_in_bounds(std::vector<Candidate> cands, PointPx offset, int width,
                                                        int height) {
    std::vector<Candidate> out;
    for (auto& c : cands) {
        c.center = c.center + offset;
        if (c.center.x >= 0.0 && c.center.y >= 0.0 && c.center.x <= width - 1 && c.center.y <= height - 1) {
            out.push_back(std::move(c));
        }
    }
    return out;
}

using PupilDetector = std::function<PupilObservation(const GrayImage&)>;

/// Built-in fallback detector: darkest region after heavy blur. Works on a
/// 4x-downsampled copy; the dark region is grown from the global minimum
/// over pixels below min + 0.3 * (mean - min).
inline PupilObservation detect_pupil_darkest(const GrayImage& img) {
    constexpr int f = 4;
    const int w = std::max(1, img.width() / f), h = std::max(1, img.height() / f);
    std::vector<float> small(static_cast<std::size_t>(w * h));
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            int n = 0;
            for (int dy = 0; dy < f; ++dy) {
                for (int dx = 0; dx < f; ++dx) {
                    const int xx = x * f + dx, yy = y * f + dy;
                    if (img.contains(xx, yy)) {
                        s += img.at(xx, yy);
                        ++n;
                    }
                }
            }
            small[static_cast<std::size_t>(y * w + x)] = static_cast<float>(s / std::max(1, n));
        }
    }
    const GrayImage ds(w, h, std::move(small));
    const auto blur = filters::gaussian_blur(ds, 2.0);
    const auto min_it = std::min_element(blur.begin(), blur.end());
    const double mn = *min_it;
    double mean = 0.0;
    for (double v : blur) mean += v;
    mean /= static_cast<double>(blur.size());
    PupilObservation obs;
    if (mean - mn < 0.05) return obs;
    const double thr = mn + 0.3 * (mean - mn);
    const auto seed = static_cast<std::size_t>(min_it - blur.begin());
    std::vector<std::uint8_t> seen(blur.size(), 0);
    std::vector<std::size_t> stack{seed};
    seen[seed] = 1;
    double sx = 0.0, sy = 0.0, n = 0.0;
    while (!stack.empty()) {
        const std::size_t cur = stack.back();
        stack.pop_back();
        const int cx = static_cast<int>(cur % static_cast<std::size_t>(w)), cy = static_cast<int>(cur / static_cast<std::size_t>(w));
        sx += cx;
        sy += cy;
        n += 1.0;
        const int nb[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
        for (const auto& d : nb) {
            const int nx = cx + d[0], ny = cy + d[1];
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            const auto ni = static_cast<std::size_t>(ny * w + nx);
            if (!seen[ni] && blur[ni] <= thr) {
                seen[ni] = 1;
                stack.push_back(ni);
            }
        }
    }
    const double radius = std::sqrt(n / std::numbers::pi) * f;
    const double diag = std::hypot(img.width(), img.height());
    if (radius < 0.01 * diag || radius > 0.3 * diag) return obs;
    obs.center = PointPx{(sx / n + 0.5) * f - 0.5, (sy / n + 0.5) * f - 0.5};
    obs.radius = radius;
    obs.ok = true;
    return obs;
}

}  // namespace nighteyes
