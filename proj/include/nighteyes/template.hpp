#pragma once

// LED-layout templates, the pivot-ratio index used for seeding, and
// match-result scoring for template banks.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "nighteyes/errors.hpp"
#include "nighteyes/geometry.hpp"
#include "nighteyes/match_result.hpp"

namespace nighteyes {

/// K >= 3 LED positions in normalized units (zero mean, unit RMS) with
/// persistent identities.
class Template {
   public:
    Template() = default;

    /// `points` must already be normalized.
    Template(std::string layout_name, std::vector<int> led_ids, std::vector<PointPx> points,
             std::vector<std::string> provenance = {})
        : name_(std::move(layout_name)),
          ids_(std::move(led_ids)),
          points_(std::move(points)),
          provenance_(std::move(provenance)) {
        if (points_.size() < 3) throw ValidationError("Template: need K >= 3 points");
        if (ids_.size() != points_.size()) throw ValidationError("Template: led id count != point count");
        if (std::set<int>(ids_.begin(), ids_.end()).size() != ids_.size()) {
            throw ValidationError("Template: duplicate led ids");
        }
        const auto c = centroid_of(points_);
        double ss = 0.0;
        for (const auto& p : points_) ss += dot(p, p);
        const double rms = std::sqrt(ss / static_cast<double>(points_.size()));
        if (norm(c) > 1e-9 || std::abs(rms - 1.0) > 1e-9) {
            throw ValidationError("Template: points are not zero-mean unit-RMS");
        }
    }

    /// Normalizes raw (pixel) positions.
    static Template from_points(std::string layout_name, std::vector<int> led_ids, std::span<const PointPx> raw,
                                std::vector<std::string> provenance = {}) {
        auto ns = normalize_points(raw);
        return {std::move(layout_name), std::move(led_ids), std::move(ns.points), std::move(provenance)};
    }

    std::size_t size() const { return points_.size(); }
    const std::string& name() const { return name_; }
    const std::vector<int>& led_ids() const { return ids_; }
    const std::vector<PointPx>& points() const { return points_; }
    const std::vector<std::string>& provenance() const { return provenance_; }
    PointPx point(std::size_t k) const { return points_[k]; }
    int led_id(std::size_t k) const { return ids_[k]; }

    std::optional<std::size_t> index_of(int led_id) const {
        auto it = std::find(ids_.begin(), ids_.end(), led_id);
        if (it == ids_.end()) return std::nullopt;
        return static_cast<std::size_t>(it - ids_.begin());
    }

   private:
    std::string name_;
    std::vector<int> ids_;
    std::vector<PointPx> points_;
    std::vector<std::string> provenance_;
};

/// Five-LED reference layout shipped with the toolkit (irregular ring, no
/// rotational symmetry).
inline Template reference_template_5() {
    const std::vector<PointPx> raw = {{-1.00, -0.30}, {-0.45, 0.85}, {0.62, 0.78}, {1.05, -0.22}, {0.08, -0.98}};
    return Template::from_points("ref5", {0, 1, 2, 3, 4}, raw, {"builtin"});
}

/// One pivot triplet. Indices refer to template point positions; `near` is
/// the LED on the shorter pivot edge.
struct RatioEntry {
    double ratio = 0.0;  ///< |p-near| / |p-far|, in (0,1]
    int pivot = 0;
    int near = 0;
    int far = 0;
};

class RatioIndex {
   public:
    RatioIndex() = default;
    explicit RatioIndex(std::vector<RatioEntry> entries) : entries_(std::move(entries)) {
        std::sort(entries_.begin(), entries_.end(), [](const RatioEntry& a, const RatioEntry& b) {
            if (a.ratio != b.ratio) return a.ratio < b.ratio;
            if (a.pivot != b.pivot) return a.pivot < b.pivot;
            if (a.near != b.near) return a.near < b.near;
            return a.far < b.far;
        });
    }

    const std::vector<RatioEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

    /// Entries with |ratio - r| <= tau, ascending by ratio.
    std::span<const RatioEntry> query(double r, double tau) const {
        auto lo = std::lower_bound(entries_.begin(), entries_.end(), r - tau,
                                   [](const RatioEntry& e, double v) { return e.ratio < v; });
        auto hi = std::upper_bound(lo, entries_.end(), r + tau,
                                   [](double v, const RatioEntry& e) { return v < e.ratio; });
        return {lo, hi};
    }

    /// True when some entry lies within tau of r.
    bool contains(double r, double tau) const { return !query(r, tau).empty(); }

   private:
    std::vector<RatioEntry> entries_;
};

/// Pivot-edge ratio with the min/max <= 1 convention.
inline double pivot_ratio(double d1, double d2) { return std::min(d1, d2) / std::max(d1, d2); }

/// Every pivot with every unordered pair of the remaining LEDs:
/// K * C(K-1, 2) entries.
inline RatioIndex build_ratio_index(const Template& t) {
    const int K = static_cast<int>(t.size());
    if (K < 3) throw ValidationError("build_ratio_index: K < 3");
    std::vector<RatioEntry> entries;
    entries.reserve(static_cast<std::size_t>(K * (K - 1) * (K - 2) / 2));
    for (int p = 0; p < K; ++p) {
        for (int a = 0; a < K; ++a) {
            if (a == p) continue;
            for (int b = a + 1; b < K; ++b) {
                if (b == p) continue;
                const double da = distance(t.point(static_cast<std::size_t>(p)), t.point(static_cast<std::size_t>(a)));
                const double db = distance(t.point(static_cast<std::size_t>(p)), t.point(static_cast<std::size_t>(b)));
                if (!(da > 1e-12) || !(db > 1e-12)) throw DegenerateSet("build_ratio_index: coincident template points");
                if (da <= db) {
                    entries.push_back({da / db, p, a, b});
                } else {
                    entries.push_back({db / da, p, b, a});
                }
            }
        }
    }
    return RatioIndex(std::move(entries));
}

struct RatioTolerance {
    double base = 0.10;
    bool adaptive = false;
    double kappa = 1.0;  ///< adaptive widening per candidate count
    double min = 0.02;
    double max = 0.20;
};

/// base * (1 + kappa / n) clamped to [min, max] when adaptive, else base.
inline double effective_ratio_tolerance(const RatioTolerance& t, std::size_t n_cands) {
    if (!t.adaptive) return t.base;
    const double n = std::max<std::size_t>(1, n_cands);
    return std::clamp(t.base * (1.0 + t.kappa / static_cast<double>(n)), t.min, t.max);
}

inline std::span<const RatioEntry> query_ratio_index(const RatioIndex& idx, double r, double tau_eff) {
    return idx.query(r, tau_eff);
}

struct LabeledConstellation {
    std::map<int, PointPx> points;  ///< led_id -> pixel position
    std::string image_id;
};

enum class TemplateMethod { median, procrustes };

namespace detail {

inline std::vector<int> common_ids(std::span<const LabeledConstellation> cs) {
    if (cs.empty()) throw ValidationError("build_template: no constellations");
    std::vector<int> ids;
    for (const auto& [id, _] : cs.front().points) ids.push_back(id);
    for (const auto& c : cs) {
        std::vector<int> other;
        for (const auto& [id, _] : c.points) other.push_back(id);
        if (other != ids) {
            throw InconsistentLedIds("build_template: constellation '" + c.image_id + "' has a different LED id set");
        }
    }
    if (ids.size() < 3) throw ValidationError("build_template: need at least 3 LEDs");
    return ids;
}

inline std::vector<PointPx> ordered_points(const LabeledConstellation& c) {
    std::vector<PointPx> v;
    for (const auto& [_, p] : c.points) v.push_back(p);
    return v;
}

/// Rotates a normalized shape so that its first point with non-zero radius
/// lies on the +x axis.
inline std::vector<PointPx> canonical_rotation(std::vector<PointPx> pts) {
    for (const auto& p : pts) {
        if (norm(p) > 1e-9) {
            const SimilarityTransform r(1.0, -std::atan2(p.y, p.x), PointPx{});
            for (auto& q : pts) q = r.apply(q);
            break;
        }
    }
    return pts;
}

}  // namespace detail

/// Builds a normalized template from labeled constellations.
///
/// median: normalize each input, coordinate-wise median per LED, renormalize.
/// procrustes: generalized Procrustes to the running mean shape (no mirror)
/// until the mean moves < 1e-8 or 50 iterations; the mean is then rotated to
/// a canonical frame so the result does not depend on input orientation.
inline Template build_template(std::span<const LabeledConstellation> constellations, TemplateMethod method,
                               std::string layout_name = "template") {
    const auto ids = detail::common_ids(constellations);
    const std::size_t K = ids.size();
    std::vector<std::vector<PointPx>> shapes;
    std::vector<std::string> provenance;
    for (const auto& c : constellations) {
        shapes.push_back(normalize_points(detail::ordered_points(c)).points);
        provenance.push_back(c.image_id);
    }
    std::vector<PointPx> mean(K);
    if (method == TemplateMethod::median) {
        for (std::size_t k = 0; k < K; ++k) {
            std::vector<double> xs, ys;
            for (const auto& s : shapes) {
                xs.push_back(s[k].x);
                ys.push_back(s[k].y);
            }
            mean[k] = {median_of(xs), median_of(ys)};
        }
        mean = normalize_points(mean).points;
    } else {
        mean = shapes.front();
        for (int iter = 0; iter < 50; ++iter) {
            std::vector<PointPx> acc(K, PointPx{});
            for (const auto& s : shapes) {
                const auto t = fit_similarity_lsq(s, mean, false);
                for (std::size_t k = 0; k < K; ++k) acc[k] = acc[k] + t.apply(s[k]);
            }
            for (auto& p : acc) p = p / static_cast<double>(shapes.size());
            auto next = normalize_points(acc).points;
            double moved = 0.0;
            for (std::size_t k = 0; k < K; ++k) moved = std::max(moved, distance(next[k], mean[k]));
            mean = std::move(next);
            if (moved < 1e-8) break;
        }
        mean = detail::canonical_rotation(normalize_points(mean).points);
    }
    // renormalize once more so the Template invariant holds to rounding
    mean = normalize_points(mean).points;
    return {std::move(layout_name), ids, std::move(mean), std::move(provenance)};
}

/// Non-empty set of alternative layouts; the best-scoring match wins.
class TemplateBank {
   public:
    explicit TemplateBank(std::vector<Template> templates) : templates_(std::move(templates)) {
        if (templates_.empty()) throw ValidationError("TemplateBank: empty");
    }
    const std::vector<Template>& templates() const { return templates_; }
    std::size_t size() const { return templates_.size(); }

   private:
    std::vector<Template> templates_;
};

/// inliers - lambda * median_residual / eps; failure scores -inf.
inline double score_match_result(const MatchOutcome& r, double eps, double lambda = 0.5) {
    if (!r.match) return -std::numeric_limits<double>::infinity();
    return static_cast<double>(r.match->inliers) - lambda * r.match->median_residual / eps;
}

}  // namespace nighteyes
