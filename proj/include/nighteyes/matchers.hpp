#pragma once

// Identity-preserving constellation matchers: Similarity-Layout Alignment
// (SLA), RANSAC and star-voting baselines, the hybrid wrapper, and post-hoc
// identity permutation resolution.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nighteyes/assignment.hpp"
#include "nighteyes/candidates.hpp"
#include "nighteyes/geometry.hpp"
#include "nighteyes/match_result.hpp"
#include "nighteyes/rng.hpp"
#include "nighteyes/template.hpp"

namespace nighteyes {

enum class AssignmentMode { greedy, hungarian };

enum class MatcherKind { sla, ransac, star, hybrid };

inline const char* to_string(MatcherKind k) {
    switch (k) {
        case MatcherKind::sla: return "sla";
        case MatcherKind::ransac: return "ransac";
        case MatcherKind::star: return "star";
        case MatcherKind::hybrid: return "hybrid";
    }
    return "?";
}

struct SlaParams {
    double eps = 6.0;  ///< grow/accept tolerance, px
    RatioTolerance ratio_tol;
    int pivot_P = 6;
    int max_seeds_per_pivot = 16;
    int max_seeds = 64;
    double grow_resid_max = 6.0;
    int min_inliers = 3;
    double scale_min = 5.0;  ///< px per template unit
    double scale_max = 200.0;
    bool semantic_prior = false;
    double semantic_weight = 1.0;
    bool mirror_reject = true;
    AssignmentMode assignment_mode = AssignmentMode::hungarian;
    double w_app = 0.5;
    double w_res = 0.5;

    void validate() const {
        if (!(eps > 0.0)) throw std::invalid_argument("SlaParams: eps must be > 0");
        if (min_inliers < 3) throw std::invalid_argument("SlaParams: min_inliers must be >= 3");
        if (!(scale_min < scale_max)) throw std::invalid_argument("SlaParams: scale_min must be < scale_max");
        if (pivot_P < 1) throw std::invalid_argument("SlaParams: pivot_P must be >= 1");
    }
};

struct RansacParams {
    int iterations = 5000;
    std::uint64_t seed = 0;
};

struct StarParams {
    double ratio_tol = 0.03;
};

// -- semantic / mirror priors ------------------------------------------------

struct VetoResult {
    bool hard_veto = false;
    double penalty = 0.0;
};

/// One (template index, observed image point) correspondence.
using Correspondence = std::pair<std::size_t, PointPx>;

namespace detail {

/// Fraction of positions that disagree between the cyclic angular orders of
/// the template subset and the observed points, minimized over cyclic shifts.
inline double angular_order_disagreement(const Template& t, std::span<const Correspondence> pairs) {
    const std::size_t m = pairs.size();
    if (m < 3) return 0.0;
    std::vector<PointPx> tp, op;
    for (const auto& [k, p] : pairs) {
        tp.push_back(t.point(k));
        op.push_back(p);
    }
    const PointPx tc = centroid_of(tp), oc = centroid_of(op);
    auto order_by_angle = [&](const std::vector<PointPx>& pts, PointPx c) {
        std::vector<std::size_t> idx(m);
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return std::atan2(pts[a].y - c.y, pts[a].x - c.x) < std::atan2(pts[b].y - c.y, pts[b].x - c.x);
        });
        return idx;
    };
    const auto st = order_by_angle(tp, tc), so = order_by_angle(op, oc);
    std::size_t best = m;
    for (std::size_t shift = 0; shift < m; ++shift) {
        std::size_t mism = 0;
        for (std::size_t i = 0; i < m; ++i) mism += st[i] != so[(i + shift) % m];
        best = std::min(best, mism);
    }
    return static_cast<double>(best) / static_cast<double>(m);
}

}  // namespace detail

/// Mirror rejection vetoes reflected transforms. The semantic prior (K = 5
/// only) vetoes hypotheses whose LED-id-ordered polygon over the observed
/// points has the opposite orientation to the template's, and adds a penalty
/// for angular-order disagreement.
inline VetoResult semantic_mirror_veto(const Template& t, const SimilarityTransform& transform,
                                       std::span<const Correspondence> pairs, const SlaParams& p) {
    VetoResult v;
    if (p.mirror_reject && transform.mirror()) {
        v.hard_veto = true;
        return v;
    }
    if (!p.semantic_prior || t.size() != 5 || pairs.size() < 3) return v;
    std::vector<Correspondence> by_id(pairs.begin(), pairs.end());
    std::sort(by_id.begin(), by_id.end(),
              [&](const Correspondence& a, const Correspondence& b) { return t.led_id(a.first) < t.led_id(b.first); });
    std::vector<PointPx> tp, op;
    for (const auto& [k, q] : by_id) {
        tp.push_back(t.point(k));
        op.push_back(q);
    }
    const double ta = signed_area(tp);
    const double oa = signed_area(op);
    // Orientation is only meaningful when the template subset has real area.
    if (std::abs(ta) > 0.02 && ta * oa < 0.0) {
        v.hard_veto = true;
        return v;
    }
    v.penalty = p.semantic_weight * detail::angular_order_disagreement(t, pairs);
    return v;
}

// -- shared hypothesis machinery ---------------------------------------------

namespace detail {

/// Candidates in canonical order (score desc, then y, x) so that results do
/// not depend on input order.
struct CanonicalCandidates {
    std::vector<PointPx> pts;
    std::vector<double> scores;
    std::vector<std::size_t> original;  ///< canonical -> input index

    explicit CanonicalCandidates(std::span<const Candidate> cands) {
        original.resize(cands.size());
        std::iota(original.begin(), original.end(), 0);
        std::stable_sort(original.begin(), original.end(),
                         [&](std::size_t a, std::size_t b) { return candidate_before(cands[a], cands[b]); });
        for (std::size_t i : original) {
            pts.push_back(cands[i].center);
            scores.push_back(cands[i].score);
        }
    }
    std::size_t size() const { return pts.size(); }
};

struct Hypothesis {
    std::vector<int> cand_of;  ///< per template index, canonical candidate or -1
    SimilarityTransform transform;
    int inliers = 0;
    double median = 0.0;
    double max = 0.0;
    double appearance = 0.0;
    double cost = 0.0;
    std::size_t pivot = 0;
};

/// max inliers -> min cost -> max appearance -> min median residual
/// -> lowest pivot index.
inline bool hypothesis_better(const Hypothesis& a, const Hypothesis& b) {
    if (a.inliers != b.inliers) return a.inliers > b.inliers;
    if (a.cost != b.cost) return a.cost < b.cost;
    if (a.appearance != b.appearance) return a.appearance > b.appearance;
    if (a.median != b.median) return a.median < b.median;
    return a.pivot < b.pivot;
}

inline std::vector<Correspondence> correspondences(const std::vector<int>& cand_of, const CanonicalCandidates& cc) {
    std::vector<Correspondence> out;
    for (std::size_t k = 0; k < cand_of.size(); ++k) {
        if (cand_of[k] >= 0) out.emplace_back(k, cc.pts[static_cast<std::size_t>(cand_of[k])]);
    }
    return out;
}

inline std::optional<SimilarityTransform> refit(const Template& t, const std::vector<Correspondence>& pairs,
                                                bool mirror) {
    if (pairs.size() < 2) return std::nullopt;
    std::vector<PointPx> src, dst;
    for (const auto& [k, q] : pairs) {
        src.push_back(t.point(k));
        dst.push_back(q);
    }
    try {
        return fit_similarity_handed(src, dst, mirror);
    } catch (const Error&) {
        return std::nullopt;
    }
}

inline ResidualStats pair_residuals(const Template& t, const SimilarityTransform& tr,
                                    const std::vector<Correspondence>& pairs) {
    std::vector<PointPx> src, dst;
    for (const auto& [k, q] : pairs) {
        src.push_back(t.point(k));
        dst.push_back(q);
    }
    return residual_stats(tr, src, dst);
}

/// Final assignment over {projected template points x candidates within
/// eps}, refit, gates and priors. Returns nullopt when rejected.
inline std::optional<Hypothesis> finalize_hypothesis(const Template& t, const CanonicalCandidates& cc,
                                                     const SimilarityTransform& seed, const SlaParams& p,
                                                     std::size_t pivot) {
    const std::size_t K = t.size(), N = cc.size();
    std::vector<std::vector<double>> cost(K, std::vector<double>(N, kForbidden));
    for (std::size_t k = 0; k < K; ++k) {
        const PointPx q = seed.apply(t.point(k));
        for (std::size_t i = 0; i < N; ++i) {
            const double d = distance(q, cc.pts[i]);
            if (d <= p.eps) cost[k][i] = d;
        }
    }
    const Assignment a =
        p.assignment_mode == AssignmentMode::hungarian ? solve_assignment(cost) : solve_assignment_greedy(cost);
    Hypothesis h;
    h.cand_of = a.row_to_col;
    h.pivot = pivot;
    const auto pairs = correspondences(h.cand_of, cc);
    const auto tr = refit(t, pairs, seed.mirror());
    if (!tr) return std::nullopt;
    const auto rs = pair_residuals(t, *tr, pairs);
    if (rs.median > p.eps || rs.max > 2.0 * p.eps) return std::nullopt;
    if (tr->scale() < p.scale_min || tr->scale() > p.scale_max) return std::nullopt;
    const auto veto = semantic_mirror_veto(t, *tr, pairs, p);
    if (veto.hard_veto) return std::nullopt;
    h.transform = *tr;
    h.inliers = static_cast<int>(pairs.size());
    h.median = rs.median;
    h.max = rs.max;
    h.appearance = 0.0;
    for (int c : h.cand_of) {
        if (c >= 0) h.appearance += cc.scores[static_cast<std::size_t>(c)];
    }
    h.cost = rs.median / p.eps + veto.penalty;
    return h;
}

inline MatchResult to_match_result(const Template& t, const CanonicalCandidates& cc, const Hypothesis& h,
                                   std::string tag) {
    MatchResult r;
    for (std::size_t k = 0; k < h.cand_of.size(); ++k) {
        if (h.cand_of[k] >= 0) r.assignment[t.led_id(k)] = static_cast<int>(cc.original[static_cast<std::size_t>(h.cand_of[k])]);
    }
    r.transform = h.transform;
    r.inliers = h.inliers;
    r.median_residual = h.median;
    r.max_residual = h.max;
    r.appearance_sum = h.appearance;
    r.cost = h.cost;
    r.matcher = std::move(tag);
    return r;
}

inline MatchOutcome select_winner(const Template& t, const CanonicalCandidates& cc,
                                  const std::vector<Hypothesis>& hyps, const SlaParams& p, const std::string& tag) {
    if (hyps.empty()) return MatchOutcome::fail("no valid hypothesis");
    const auto best = std::min_element(hyps.begin(), hyps.end(), hypothesis_better);
    if (best->inliers < p.min_inliers) return MatchOutcome::fail("inliers below min_inliers");
    return MatchOutcome::ok(to_match_result(t, cc, *best, tag));
}

}  // namespace detail

// -- SLA -----------------------------------------------------------------------

struct SlaSeed {
    std::size_t pivot = 0;  ///< canonical candidate index
    std::array<std::size_t, 3> cands{};
    std::array<std::size_t, 3> leds{};  ///< template indices
    SimilarityTransform transform;
    double residual = 0.0;
    double quality = 0.0;
};

/// Seeding stage: ratio-consistent pivot triplets from the top pivot_P
/// candidates, each fitted with a 3-point similarity. Indices are canonical.
inline std::vector<SlaSeed> sla_seeds(const Template& t, const RatioIndex& idx,
                                      const detail::CanonicalCandidates& cc, const SlaParams& p) {
    const std::size_t N = cc.size();
    const double tau = effective_ratio_tolerance(p.ratio_tol, N);
    const std::size_t n_piv = std::min(N, static_cast<std::size_t>(std::max(0, p.pivot_P)));
    std::vector<SlaSeed> all;
    for (std::size_t piv = 0; piv < n_piv; ++piv) {
        std::vector<SlaSeed> per;
        for (std::size_t a = 0; a < N; ++a) {
            if (a == piv) continue;
            const double da = distance(cc.pts[piv], cc.pts[a]);
            if (!(da > 0.0)) continue;
            for (std::size_t b = 0; b < N; ++b) {
                if (b == piv || b == a) continue;
                const double db = distance(cc.pts[piv], cc.pts[b]);
                if (!(db > 0.0)) continue;
                const double r = pivot_ratio(da, db);
                for (const auto& e : query_ratio_index(idx, r, tau)) {
                    const std::array<PointPx, 3> src = {t.point(static_cast<std::size_t>(e.pivot)),
                                                        t.point(static_cast<std::size_t>(e.near)),
                                                        t.point(static_cast<std::size_t>(e.far))};
                    const std::array<PointPx, 3> dst = {cc.pts[piv], cc.pts[a], cc.pts[b]};
                    SimilarityTransform tr;
                    try {
                        tr = fit_similarity_exact3(src, dst, true);
                    } catch (const Error&) {
                        continue;
                    }
                    const std::array<Correspondence, 3> pairs = {Correspondence{static_cast<std::size_t>(e.pivot), dst[0]},
                                                                 Correspondence{static_cast<std::size_t>(e.near), dst[1]},
                                                                 Correspondence{static_cast<std::size_t>(e.far), dst[2]}};
                    if (semantic_mirror_veto(t, tr, pairs, p).hard_veto) continue;
                    const auto rs = residual_stats(tr, src, dst);
                    SlaSeed s;
                    s.pivot = piv;
                    s.cands = {piv, a, b};
                    s.leds = {static_cast<std::size_t>(e.pivot), static_cast<std::size_t>(e.near),
                              static_cast<std::size_t>(e.far)};
                    s.transform = tr;
                    s.residual = rs.max;
                    const double app = (cc.scores[piv] + cc.scores[a] + cc.scores[b]) / 3.0;
                    s.quality = p.w_app * app - p.w_res * (rs.max / p.eps);
                    per.push_back(s);
                }
            }
        }
        std::stable_sort(per.begin(), per.end(), [](const SlaSeed& x, const SlaSeed& y) { return x.quality > y.quality; });
        if (per.size() > static_cast<std::size_t>(std::max(0, p.max_seeds_per_pivot))) {
            per.resize(static_cast<std::size_t>(std::max(0, p.max_seeds_per_pivot)));
        }
        all.insert(all.end(), per.begin(), per.end());
    }
    std::stable_sort(all.begin(), all.end(), [](const SlaSeed& x, const SlaSeed& y) { return x.quality > y.quality; });
    if (all.size() > static_cast<std::size_t>(std::max(0, p.max_seeds))) all.resize(static_cast<std::size_t>(std::max(0, p.max_seeds)));
    return all;
}

namespace detail {

/// Growth: project unmatched template points, claim the nearest unclaimed
/// candidate within eps (score breaks distance ties), refit, keep the step
/// iff the median residual stays within grow_resid_max. Repeats until a full
/// sweep accepts nothing.
inline std::pair<std::vector<int>, SimilarityTransform> grow_seed(const Template& t, const CanonicalCandidates& cc,
                                                                  const SlaSeed& seed, const SlaParams& p) {
    const std::size_t K = t.size(), N = cc.size();
    std::vector<int> cand_of(K, -1);
    std::vector<char> claimed(N, 0);
    for (std::size_t j = 0; j < 3; ++j) {
        cand_of[seed.leds[j]] = static_cast<int>(seed.cands[j]);
        claimed[seed.cands[j]] = 1;
    }
    SimilarityTransform tr = seed.transform;
    bool accepted = true;
    while (accepted) {
        accepted = false;
        for (std::size_t k = 0; k < K; ++k) {
            if (cand_of[k] >= 0) continue;
            const PointPx q = tr.apply(t.point(k));
            int best = -1;
            double best_d = 0.0;
            for (std::size_t i = 0; i < N; ++i) {
                if (claimed[i]) continue;
                const double d = distance(q, cc.pts[i]);
                if (d > p.eps) continue;
                if (best < 0 || d < best_d || (d == best_d && cc.scores[i] > cc.scores[static_cast<std::size_t>(best)])) {
                    best = static_cast<int>(i);
                    best_d = d;
                }
            }
            if (best < 0) continue;
            cand_of[k] = best;
            const auto pairs = correspondences(cand_of, cc);
            const auto next = refit(t, pairs, tr.mirror());
            if (next && pair_residuals(t, *next, pairs).median <= p.grow_resid_max) {
                tr = *next;
                claimed[static_cast<std::size_t>(best)] = 1;
                accepted = true;
            } else {
                cand_of[k] = -1;
            }
        }
    }
    return {cand_of, tr};
}

}  // namespace detail

/// Similarity-Layout Alignment. Seeds similarity hypotheses from
/// ratio-consistent pivot triplets, grows each by tolerance-gated
/// assignment with refits, finalizes with a global assignment and gates, and
/// selects by inliers, cost, appearance, residual.
inline MatchOutcome sla_match(const Template& t, const RatioIndex& idx, std::span<const Candidate> cands,
                              const SlaParams& p) {
    p.validate();
    if (cands.size() < 3) return MatchOutcome::fail("fewer than 3 candidates");
    const detail::CanonicalCandidates cc(cands);
    const auto seeds = sla_seeds(t, idx, cc, p);
    if (seeds.empty()) return MatchOutcome::fail("no seeds");
    std::vector<detail::Hypothesis> hyps;
    for (const auto& s : seeds) {
        const auto [cand_of, tr] = detail::grow_seed(t, cc, s, p);
        (void)cand_of;
        if (auto h = detail::finalize_hypothesis(t, cc, tr, p, s.pivot)) hyps.push_back(std::move(*h));
    }
    return detail::select_winner(t, cc, hyps, p, "sla");
}

// -- RANSAC baseline ----------------------------------------------------------

/// Random candidate triple vs random template triple, exact 3-point fit,
/// inliers counted as template points with a candidate within eps. The best
/// (inliers, then median residual) transform is finalized like SLA.
inline MatchOutcome ransac_match(const Template& t, std::span<const Candidate> cands, const SlaParams& p,
                                 const RansacParams& rp = {}) {
    p.validate();
    if (cands.size() < 3) return MatchOutcome::fail("fewer than 3 candidates");
    const detail::CanonicalCandidates cc(cands);
    const std::size_t K = t.size(), N = cc.size();
    Rng rng(rp.seed);
    auto draw3 = [&](std::size_t n) {
        std::array<std::size_t, 3> s{};
        s[0] = rng.index(n);
        do {
            s[1] = rng.index(n);
        } while (s[1] == s[0]);
        do {
            s[2] = rng.index(n);
        } while (s[2] == s[0] || s[2] == s[1]);
        return s;
    };
    std::optional<SimilarityTransform> best;
    int best_in = -1;
    double best_med = 0.0;
    std::vector<double> resid;
    for (int it = 0; it < rp.iterations; ++it) {
        const auto ci = draw3(N);
        const auto tk = draw3(K);
        const std::array<PointPx, 3> src = {t.point(tk[0]), t.point(tk[1]), t.point(tk[2])};
        const std::array<PointPx, 3> dst = {cc.pts[ci[0]], cc.pts[ci[1]], cc.pts[ci[2]]};
        SimilarityTransform tr;
        try {
            tr = fit_similarity_exact3(src, dst, !p.mirror_reject);
        } catch (const Error&) {
            continue;
        }
        resid.clear();
        for (std::size_t k = 0; k < K; ++k) {
            const PointPx q = tr.apply(t.point(k));
            double dmin = kForbidden;
            for (std::size_t i = 0; i < N; ++i) dmin = std::min(dmin, distance(q, cc.pts[i]));
            if (dmin <= p.eps) resid.push_back(dmin);
        }
        const int in = static_cast<int>(resid.size());
        const double med = median_of(resid);
        if (in > best_in || (in == best_in && med < best_med)) {
            best = tr;
            best_in = in;
            best_med = med;
        }
    }
    if (!best) return MatchOutcome::fail("no valid hypothesis");
    std::vector<detail::Hypothesis> hyps;
    if (auto h = detail::finalize_hypothesis(t, cc, *best, p, 0)) hyps.push_back(std::move(*h));
    return detail::select_winner(t, cc, hyps, p, "ransac");
}

// -- star-voting baseline -----------------------------------------------------

/// votes[candidate][template index] over ratio-consistent triplets whose
/// 3-point fit lands within eps. Indices are canonical candidate order.
inline std::vector<std::vector<int>> star_vote_tally(const Template& t, const RatioIndex& idx,
                                                     const detail::CanonicalCandidates& cc, const SlaParams& p,
                                                     const StarParams& sp) {
    const std::size_t K = t.size(), N = cc.size();
    std::vector<std::vector<int>> votes(N, std::vector<int>(K, 0));
    for (std::size_t piv = 0; piv < N; ++piv) {
        for (std::size_t a = 0; a < N; ++a) {
            if (a == piv) continue;
            const double da = distance(cc.pts[piv], cc.pts[a]);
            for (std::size_t b = 0; b < N; ++b) {
                if (b == piv || b == a) continue;
                const double db = distance(cc.pts[piv], cc.pts[b]);
                if (!(da > 0.0) || !(db > 0.0)) continue;
                for (const auto& e : idx.query(pivot_ratio(da, db), sp.ratio_tol)) {
                    const std::array<PointPx, 3> src = {t.point(static_cast<std::size_t>(e.pivot)),
                                                        t.point(static_cast<std::size_t>(e.near)),
                                                        t.point(static_cast<std::size_t>(e.far))};
                    const std::array<PointPx, 3> dst = {cc.pts[piv], cc.pts[a], cc.pts[b]};
                    SimilarityTransform tr;
                    try {
                        tr = fit_similarity_exact3(src, dst, !p.mirror_reject);
                    } catch (const Error&) {
                        continue;
                    }
                    if (residual_stats(tr, src, dst).max > p.eps) continue;
                    ++votes[piv][static_cast<std::size_t>(e.pivot)];
                    ++votes[a][static_cast<std::size_t>(e.near)];
                    ++votes[b][static_cast<std::size_t>(e.far)];
                }
            }
        }
    }
    return votes;
}

/// Geometric-voting matcher: tally (candidate, LED) votes, accept the
/// top-voted injective pairs, seed a fit from the three best-voted
/// non-degenerate pairs and finalize like SLA.
inline MatchOutcome star_vote_match(const Template& t, const RatioIndex& idx, std::span<const Candidate> cands,
                                    const SlaParams& p, const StarParams& sp = {}) {
    p.validate();
    if (cands.size() < 3) return MatchOutcome::fail("fewer than 3 candidates");
    const detail::CanonicalCandidates cc(cands);
    const auto votes = star_vote_tally(t, idx, cc, p, sp);
    struct Pair {
        int v;
        std::size_t c, k;
    };
    std::vector<Pair> pairs;
    for (std::size_t c = 0; c < votes.size(); ++c) {
        for (std::size_t k = 0; k < votes[c].size(); ++k) {
            if (votes[c][k] > 0) pairs.push_back({votes[c][k], c, k});
        }
    }
    std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.v > b.v; });
    std::vector<char> c_used(cc.size(), 0), k_used(t.size(), 0);
    std::vector<Pair> accepted;
    for (const auto& pr : pairs) {
        if (c_used[pr.c] || k_used[pr.k]) continue;
        c_used[pr.c] = 1;
        k_used[pr.k] = 1;
        accepted.push_back(pr);
    }
    // first three accepted pairs with a non-degenerate template triangle
    for (std::size_t i = 0; i < accepted.size(); ++i) {
        for (std::size_t j = i + 1; j < accepted.size(); ++j) {
            for (std::size_t l = j + 1; l < accepted.size(); ++l) {
                const std::array<PointPx, 3> src = {t.point(accepted[i].k), t.point(accepted[j].k), t.point(accepted[l].k)};
                const std::array<PointPx, 3> dst = {cc.pts[accepted[i].c], cc.pts[accepted[j].c], cc.pts[accepted[l].c]};
                if (is_degenerate_triplet(src[0], src[1], src[2])) continue;
                const auto tr = fit_similarity_exact3(src, dst, !p.mirror_reject);
                std::vector<detail::Hypothesis> hyps;
                if (auto h = detail::finalize_hypothesis(t, cc, tr, p, accepted[i].c)) hyps.push_back(std::move(*h));
                return detail::select_winner(t, cc, hyps, p, "star");
            }
        }
    }
    return MatchOutcome::fail("no consistent votes");
}

// -- hybrid -------------------------------------------------------------------

/// SLA first, RANSAC when SLA fails; the result carries the producing
/// matcher's tag.
inline MatchOutcome hybrid_match(const Template& t, const RatioIndex& idx, std::span<const Candidate> cands,
                                 const SlaParams& p, const RansacParams& rp = {}) {
    auto r = sla_match(t, idx, cands, p);
    if (r) return r;
    auto fallback = ransac_match(t, cands, p, rp);
    if (!fallback) fallback.failure = "sla: " + r.failure + "; ransac: " + fallback.failure;
    return fallback;
}

struct MatcherParams {
    MatcherKind kind = MatcherKind::sla;
    SlaParams sla;
    RansacParams ransac;
    StarParams star;
};

inline MatchOutcome run_matcher(const Template& t, const RatioIndex& idx, std::span<const Candidate> cands,
                                const MatcherParams& mp) {
    switch (mp.kind) {
        case MatcherKind::sla: return sla_match(t, idx, cands, mp.sla);
        case MatcherKind::ransac: return ransac_match(t, cands, mp.sla, mp.ransac);
        case MatcherKind::star: return star_vote_match(t, idx, cands, mp.sla, mp.star);
        case MatcherKind::hybrid: return hybrid_match(t, idx, cands, mp.sla, mp.ransac);
    }
    return MatchOutcome::fail("unknown matcher");
}

// -- identity permutation resolution -----------------------------------------

/// Template indices in angular order around the template centroid.
inline std::vector<std::size_t> angular_order(const Template& t) {
    std::vector<std::size_t> idx(t.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return std::atan2(t.point(a).y, t.point(a).x) < std::atan2(t.point(b).y, t.point(b).x);
    });
    return idx;
}

/// For a full 5-LED match, tries cyclic relabelings along the angular LED
/// order (plus reflections when mirroring is allowed), refits each, and keeps
/// the labeling with the lowest total residual. Identity wins ties. No-op when
/// the match is not a full 5-point match.
inline MatchResult resolve_identity_permutation(const MatchResult& m, const Template& t,
                                                std::span<const Candidate> cands, const SlaParams& p) {
    const std::size_t K = t.size();
    if (K != 5 || m.assignment.size() != K) return m;
    const auto ord = angular_order(t);
    std::vector<std::size_t> cand_at(K);  // per angular slot
    for (std::size_t i = 0; i < K; ++i) {
        auto it = m.assignment.find(t.led_id(ord[i]));
        if (it == m.assignment.end() || it->second < 0 || static_cast<std::size_t>(it->second) >= cands.size()) return m;
        cand_at[i] = static_cast<std::size_t>(it->second);
    }
    struct Option {
        std::vector<std::size_t> cand_of;  // per template index
        SimilarityTransform tr;
        ResidualStats rs;
        double total = 0.0;
    };
    auto evaluate = [&](const std::vector<std::size_t>& slot_src) -> std::optional<Option> {
        Option o;
        o.cand_of.assign(K, 0);
        std::vector<PointPx> src, dst;
        for (std::size_t i = 0; i < K; ++i) {
            o.cand_of[ord[i]] = cand_at[slot_src[i]];
            src.push_back(t.point(ord[i]));
            dst.push_back(cands[cand_at[slot_src[i]]].center);
        }
        try {
            o.tr = fit_similarity_lsq(src, dst, !p.mirror_reject);
        } catch (const Error&) {
            return std::nullopt;
        }
        o.rs = residual_stats(o.tr, src, dst);
        o.total = std::accumulate(o.rs.per_point.begin(), o.rs.per_point.end(), 0.0);
        return o;
    };
    std::vector<std::vector<std::size_t>> perms;
    for (std::size_t r = 0; r < K; ++r) {
        std::vector<std::size_t> s(K);
        for (std::size_t i = 0; i < K; ++i) s[i] = (i + r) % K;
        perms.push_back(s);
    }
    if (!p.mirror_reject) {
        for (std::size_t r = 0; r < K; ++r) {
            std::vector<std::size_t> s(K);
            for (std::size_t i = 0; i < K; ++i) s[i] = (r + K - i) % K;
            perms.push_back(s);
        }
    }
    std::optional<Option> best;
    for (const auto& s : perms) {
        auto o = evaluate(s);
        if (!o) continue;
        if (!best || o->total < best->total - 1e-12) best = std::move(o);
    }
    if (!best) return m;
    MatchResult out = m;
    out.assignment.clear();
    for (std::size_t k = 0; k < K; ++k) out.assignment[t.led_id(k)] = static_cast<int>(best->cand_of[k]);
    out.transform = best->tr;
    out.median_residual = best->rs.median;
    out.max_residual = best->rs.max;
    return out;
}

}  // namespace nighteyes
