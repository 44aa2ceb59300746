#pragma once

// 2D point utilities and similarity-transform fitting.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "nighteyes/errors.hpp"

namespace nighteyes {

/// Image-plane point in pixels. Construction rejects non-finite coordinates.
struct PointPx {
    double x = 0.0;
    double y = 0.0;

    constexpr PointPx() = default;
    PointPx(double x_, double y_) : x(x_), y(y_) {
        if (!std::isfinite(x_) || !std::isfinite(y_)) {
            throw std::invalid_argument("PointPx: non-finite coordinate");
        }
    }

    friend PointPx operator+(PointPx a, PointPx b) { return {a.x + b.x, a.y + b.y}; }
    friend PointPx operator-(PointPx a, PointPx b) { return {a.x - b.x, a.y - b.y}; }
    friend PointPx operator*(double s, PointPx a) { return {s * a.x, s * a.y}; }
    friend PointPx operator*(PointPx a, double s) { return {s * a.x, s * a.y}; }
    friend PointPx operator/(PointPx a, double s) { return {a.x / s, a.y / s}; }
    friend bool operator==(PointPx a, PointPx b) = default;
};

inline double dot(PointPx a, PointPx b) { return a.x * b.x + a.y * b.y; }
inline double cross(PointPx a, PointPx b) { return a.x * b.y - a.y * b.x; }
inline double norm(PointPx a) { return std::hypot(a.x, a.y); }
inline double distance(PointPx a, PointPx b) { return std::hypot(a.x - b.x, a.y - b.y); }
inline double squared_distance(PointPx a, PointPx b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return dx * dx + dy * dy;
}

/// Wraps an angle into (-pi, pi].
inline double normalize_angle(double a) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    a = std::fmod(a, two_pi);
    if (a <= -std::numbers::pi) a += two_pi;
    if (a > std::numbers::pi) a -= two_pi;
    return a;
}

/// x' = scale * R(rotation) * M * x + translation, where M negates x when
/// `mirror` is set (reflection about the y-axis in source space).
class SimilarityTransform {
   public:
    SimilarityTransform() = default;
    SimilarityTransform(double scale, double rotation, PointPx translation, bool mirror = false)
        : scale_(scale), rotation_(normalize_angle(rotation)), translation_(translation), mirror_(mirror) {
        if (!(scale > 0.0) || !std::isfinite(scale) || !std::isfinite(rotation)) {
            throw std::invalid_argument("SimilarityTransform: scale must be finite and > 0");
        }
        cos_ = std::cos(rotation_);
        sin_ = std::sin(rotation_);
    }

    static SimilarityTransform identity() { return {}; }

    double scale() const { return scale_; }
    double rotation() const { return rotation_; }
    PointPx translation() const { return translation_; }
    bool mirror() const { return mirror_; }

    PointPx apply(PointPx p) const {
        const double px = mirror_ ? -p.x : p.x;
        return {scale_ * (cos_ * px - sin_ * p.y) + translation_.x,
                scale_ * (sin_ * px + cos_ * p.y) + translation_.y};
    }

    PointPx operator()(PointPx p) const { return apply(p); }

    PointPx apply_inverse(PointPx q) const {
        const double dx = (q.x - translation_.x) / scale_;
        const double dy = (q.y - translation_.y) / scale_;
        const double ux = cos_ * dx + sin_ * dy;
        const double uy = -sin_ * dx + cos_ * dy;
        return {mirror_ ? -ux : ux, uy};
    }

    SimilarityTransform inverse() const {
        const double s = 1.0 / scale_;
        if (mirror_) {
            // (1/s) M R(-t) (q - T) == (1/s) R(t) M (q - T)
            SimilarityTransform lin(s, rotation_, PointPx{}, true);
            return {s, rotation_, PointPx{} - lin.apply(translation_), true};
        }
        SimilarityTransform lin(s, -rotation_, PointPx{}, false);
        return {s, -rotation_, PointPx{} - lin.apply(translation_), false};
    }

    /// (*this) ∘ inner: apply inner first.
    SimilarityTransform compose(const SimilarityTransform& inner) const {
        const double rot = rotation_ + (mirror_ ? -inner.rotation_ : inner.rotation_);
        return {scale_ * inner.scale_, rot, apply(inner.translation_), mirror_ != inner.mirror_};
    }

   private:
    double scale_ = 1.0;
    double rotation_ = 0.0;
    PointPx translation_{};
    bool mirror_ = false;
    double cos_ = 1.0;
    double sin_ = 0.0;
};

struct NormalizedSet {
    std::vector<PointPx> points;
    PointPx centroid;
    double rms = 1.0;

    /// Maps a normalized point back to original units.
    PointPx denormalize(PointPx p) const { return centroid + rms * p; }
};

inline PointPx centroid_of(std::span<const PointPx> pts) {
    double sx = 0.0, sy = 0.0;
    for (const auto& p : pts) {
        sx += p.x;
        sy += p.y;
    }
    const double n = static_cast<double>(pts.size());
    return {sx / n, sy / n};
}

/// Translates to zero mean and scales to unit RMS radius.
inline NormalizedSet normalize_points(std::span<const PointPx> points) {
    if (points.size() < 2) throw DegenerateSet("normalize_points: need at least 2 points");
    const PointPx c = centroid_of(points);
    double ss = 0.0;
    for (const auto& p : points) ss += squared_distance(p, c);
    const double rms = std::sqrt(ss / static_cast<double>(points.size()));
    if (!(rms > 1e-12)) throw DegenerateSet("normalize_points: all points coincide");
    NormalizedSet out;
    out.centroid = c;
    out.rms = rms;
    out.points.reserve(points.size());
    for (const auto& p : points) out.points.push_back((p - c) / rms);
    return out;
}

namespace detail {

struct LsqBranch {
    std::complex<double> z;  // scale * e^{i*rotation}
    PointPx translation;
    double sse = 0.0;
};

inline LsqBranch fit_branch(std::span<const PointPx> src, std::span<const PointPx> dst, bool mirror) {
    const auto n = static_cast<double>(src.size());
    std::complex<double> ca{0.0, 0.0}, cb{0.0, 0.0};
    for (std::size_t i = 0; i < src.size(); ++i) {
        ca += std::complex<double>(mirror ? -src[i].x : src[i].x, src[i].y);
        cb += std::complex<double>(dst[i].x, dst[i].y);
    }
    ca /= n;
    cb /= n;
    std::complex<double> num{0.0, 0.0};
    double den = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) {
        const std::complex<double> a = std::complex<double>(mirror ? -src[i].x : src[i].x, src[i].y) - ca;
        const std::complex<double> b = std::complex<double>(dst[i].x, dst[i].y) - cb;
        num += std::conj(a) * b;
        den += std::norm(a);
    }
    if (!(den > 0.0)) throw DegenerateSet("fit_similarity: source points coincide");
    LsqBranch br;
    br.z = num / den;
    const std::complex<double> t = cb - br.z * ca;
    br.translation = {t.real(), t.imag()};
    double sse = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) {
        const std::complex<double> a(mirror ? -src[i].x : src[i].x, src[i].y);
        sse += std::norm(br.z * a + t - std::complex<double>(dst[i].x, dst[i].y));
    }
    br.sse = sse;
    return br;
}

inline constexpr double kCollapsedScale = 1e-12;

inline SimilarityTransform to_transform(const LsqBranch& br, bool mirror) {
    const double s = std::abs(br.z);
    if (s > 0.0) return {s, std::arg(br.z), br.translation, mirror};
    // Optimum at zero scale: with coincident destinations any collapse is
    // exact, which is degenerate. Otherwise this handedness cannot fit at all
    // (a shape against its mirror image) and the optimum is the collapse onto
    // the destination centroid, returned with a vanishing positive scale.
    if (!(br.sse > 0.0)) throw DegenerateSet("fit_similarity: destination points coincide");
    return {kCollapsedScale, 0.0, br.translation, mirror};
}

}  // namespace detail

/// Closed-form least-squares similarity (complex-number form of the 2D
/// Umeyama solution). With `allow_mirror` the reflected branch is also solved
/// and the branch with the lower sum of squared residuals wins (ties keep the
/// proper rotation).
inline SimilarityTransform fit_similarity_lsq(std::span<const PointPx> src, std::span<const PointPx> dst,
                                              bool allow_mirror = false) {
    if (src.size() != dst.size()) throw LengthMismatch("fit_similarity_lsq: src/dst length mismatch");
    if (src.size() < 2) throw DegenerateSet("fit_similarity_lsq: need at least 2 pairs");
    const auto proper = detail::fit_branch(src, dst, false);
    if (allow_mirror) {
        const auto reflected = detail::fit_branch(src, dst, true);
        if (reflected.sse < proper.sse) return detail::to_transform(reflected, true);
    }
    return detail::to_transform(proper, false);
}

/// Least-squares similarity with the handedness fixed by the caller.
inline SimilarityTransform fit_similarity_handed(std::span<const PointPx> src, std::span<const PointPx> dst,
                                                 bool mirror) {
    if (src.size() != dst.size()) throw LengthMismatch("fit_similarity_handed: src/dst length mismatch");
    if (src.size() < 2) throw DegenerateSet("fit_similarity_handed: need at least 2 pairs");
    return detail::to_transform(detail::fit_branch(src, dst, mirror), mirror);
}

/// Collinearity test used by the exact 3-point fit: twice-area below
/// 1e-6 * (longest side)^2.
inline bool is_degenerate_triplet(PointPx a, PointPx b, PointPx c, double rel_eps = 1e-6) {
    const double area = 0.5 * std::abs(cross(b - a, c - a));
    const double longest = std::max({squared_distance(a, b), squared_distance(b, c), squared_distance(a, c)});
    return !(longest > 0.0) || area < rel_eps * longest;
}

/// Similarity from three correspondences. Exact when the triangles are
/// similar, least-squares otherwise.
inline SimilarityTransform fit_similarity_exact3(std::span<const PointPx> src, std::span<const PointPx> dst,
                                                 bool allow_mirror = false) {
    if (src.size() != 3 || dst.size() != 3) throw LengthMismatch("fit_similarity_exact3: need exactly 3 pairs");
    if (is_degenerate_triplet(src[0], src[1], src[2])) {
        throw DegenerateTriplet("fit_similarity_exact3: source points are collinear");
    }
    return fit_similarity_lsq(src, dst, allow_mirror);
}

struct ResidualStats {
    std::vector<double> per_point;
    double median = 0.0;
    double max = 0.0;
};

/// Median with the midpoint convention for even counts. Empty input gives 0.
inline double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double upper = v[mid];
    if (v.size() % 2 == 1) return upper;
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

inline ResidualStats residual_stats(const SimilarityTransform& t, std::span<const PointPx> src,
                                    std::span<const PointPx> dst) {
    if (src.size() != dst.size()) throw LengthMismatch("residual_stats: src/dst length mismatch");
    if (src.empty()) throw LengthMismatch("residual_stats: need at least one pair");
    ResidualStats r;
    r.per_point.reserve(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) {
        r.per_point.push_back(distance(t.apply(src[i]), dst[i]));
    }
    r.max = *std::max_element(r.per_point.begin(), r.per_point.end());
    r.median = median_of(r.per_point);
    return r;
}

/// Signed polygon area (shoelace), positive for counter-clockwise order in a
/// y-up frame.
inline double signed_area(std::span<const PointPx> poly) {
    double a = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const auto& p = poly[i];
        const auto& q = poly[(i + 1) % poly.size()];
        a += p.x * q.y - q.x * p.y;
    }
    return 0.5 * a;
}

}  // namespace nighteyes
