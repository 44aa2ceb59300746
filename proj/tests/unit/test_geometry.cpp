#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "nighteyes/geometry.hpp"
#include "nighteyes/rng.hpp"
#include "oracles.hpp"

using namespace nighteyes;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<PointPx> random_points(Rng& rng, int n, double lo = -5.0, double hi = 5.0) {
    std::vector<PointPx> v;
    for (int i = 0; i < n; ++i) v.push_back({rng.uniform(lo, hi), rng.uniform(lo, hi)});
    return v;
}

std::vector<PointPx> apply_all(const SimilarityTransform& t, const std::vector<PointPx>& v) {
    std::vector<PointPx> out;
    for (const auto& p : v) out.push_back(t.apply(p));
    return out;
}

double sse(const SimilarityTransform& t, const std::vector<PointPx>& src, const std::vector<PointPx>& dst) {
    double s = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) s += squared_distance(t.apply(src[i]), dst[i]);
    return s;
}

}  // namespace

TEST(PointPx, RejectsNonFinite) {
    EXPECT_THROW(PointPx(std::nan(""), 0.0), std::invalid_argument);
    EXPECT_THROW(PointPx(0.0, INFINITY), std::invalid_argument);
    EXPECT_NO_THROW(PointPx(1e300, -1e300));
}

TEST(SimilarityTransform, RotationNormalizedToHalfOpenInterval) {
    EXPECT_DOUBLE_EQ(SimilarityTransform(1.0, -kPi, {}).rotation(), kPi);
    EXPECT_DOUBLE_EQ(SimilarityTransform(1.0, kPi, {}).rotation(), kPi);
    EXPECT_NEAR(SimilarityTransform(1.0, 3 * kPi / 2, {}).rotation(), -kPi / 2, 1e-15);
    EXPECT_THROW(SimilarityTransform(0.0, 0.0, {}), std::invalid_argument);
    EXPECT_THROW(SimilarityTransform(-1.0, 0.0, {}), std::invalid_argument);
}

TEST(SimilarityTransform, MirrorIsReflectionAboutYAxisBeforeRotation) {
    const SimilarityTransform m(1.0, 0.0, {}, true);
    EXPECT_EQ(m.apply({2.0, 3.0}), PointPx(-2.0, 3.0));
    const SimilarityTransform r(2.0, kPi / 2, {1.0, 1.0}, true);
    const auto q = r.apply({1.0, 0.0});  // (-1,0) -> rot90 -> (0,-1) *2 + (1,1)
    EXPECT_NEAR(q.x, 1.0, 1e-12);
    EXPECT_NEAR(q.y, -1.0, 1e-12);
}

TEST(SimilarityTransform, RoundTripOverWideScaleRange) {
    Rng rng(7);
    for (int trial = 0; trial < 500; ++trial) {
        const double s = std::exp(rng.uniform(std::log(0.1), std::log(100.0)));
        const SimilarityTransform t(s, rng.uniform(-kPi, kPi), {rng.uniform(-50, 50), rng.uniform(-50, 50)},
                                    rng.bernoulli(0.5));
        const PointPx p{rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const auto back = t.apply_inverse(t.apply(p));
        EXPECT_LE(distance(back, p), 1e-9 * std::max(1.0, norm(p)));
        const auto back2 = t.inverse().apply(t.apply(p));
        EXPECT_LE(distance(back2, p), 1e-9 * std::max(1.0, norm(p)));
    }
}

TEST(SimilarityTransform, ComposeAppliesInnerFirst) {
    Rng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        const SimilarityTransform a(rng.uniform(0.5, 3), rng.uniform(-kPi, kPi), {rng.uniform(-5, 5), 1.0},
                                    rng.bernoulli(0.5));
        const SimilarityTransform b(rng.uniform(0.5, 3), rng.uniform(-kPi, kPi), {2.0, rng.uniform(-5, 5)},
                                    rng.bernoulli(0.5));
        const PointPx p{rng.uniform(-3, 3), rng.uniform(-3, 3)};
        EXPECT_LE(distance(a.compose(b).apply(p), a.apply(b.apply(p))), 1e-9);
    }
}

TEST(NormalizePoints, SquareExample) {
    const std::vector<PointPx> sq = {{1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
    const auto n = normalize_points(sq);
    EXPECT_NEAR(n.centroid.x, 0.0, 1e-15);
    EXPECT_NEAR(n.centroid.y, 0.0, 1e-15);
    EXPECT_NEAR(n.rms, std::sqrt(2.0), 1e-12);
    const double h = 1.0 / std::sqrt(2.0);
    for (std::size_t i = 0; i < sq.size(); ++i) {
        EXPECT_NEAR(n.points[i].x, sq[i].x * h, 1e-12);
        EXPECT_NEAR(n.points[i].y, sq[i].y * h, 1e-12);
    }
}

TEST(NormalizePoints, AlreadyNormalizedSetIsUnchanged) {
    const double h = 1.0 / std::sqrt(2.0);
    const std::vector<PointPx> pts = {{h, h}, {h, -h}, {-h, h}, {-h, -h}};
    const auto n = normalize_points(pts);
    EXPECT_NEAR(n.rms, 1.0, 1e-12);
    for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_LE(distance(n.points[i], pts[i]), 1e-12);
}

TEST(NormalizePoints, DegenerateInputs) {
    EXPECT_THROW(normalize_points(std::vector<PointPx>{{0, 0}, {0, 0}}), DegenerateSet);
    EXPECT_THROW(normalize_points(std::vector<PointPx>{{3, 4}}), DegenerateSet);
    EXPECT_THROW(normalize_points(std::vector<PointPx>{}), DegenerateSet);
}

TEST(NormalizePoints, InvariantsAndIdempotence) {
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const auto pts = random_points(rng, 2 + static_cast<int>(rng.index(8)), -100, 100);
        const auto n = normalize_points(pts);
        EXPECT_LE(norm(centroid_of(n.points)), 1e-9);
        double ss = 0.0;
        for (const auto& p : n.points) ss += dot(p, p);
        EXPECT_NEAR(std::sqrt(ss / static_cast<double>(n.points.size())), 1.0, 1e-9);
        const auto again = normalize_points(n.points);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            EXPECT_LE(distance(again.points[i], n.points[i]), 1e-9);
            EXPECT_LE(distance(n.denormalize(n.points[i]), pts[i]), 1e-9 * 100);
        }
    }
}

TEST(FitExact3, ConstructedRotation) {
    const std::vector<PointPx> src = {{0, 0}, {1, 0}, {0, 1}};
    const std::vector<PointPx> dst = {{10, 10}, {10, 12}, {8, 10}};
    const auto t = fit_similarity_exact3(src, dst);
    EXPECT_NEAR(t.scale(), 2.0, 1e-12);
    EXPECT_NEAR(t.rotation(), kPi / 2, 1e-12);
    EXPECT_NEAR(t.translation().x, 10.0, 1e-12);
    EXPECT_NEAR(t.translation().y, 10.0, 1e-12);
    EXPECT_FALSE(t.mirror());
}

TEST(FitExact3, IdentityWhenSrcEqualsDst) {
    const std::vector<PointPx> p = {{0.3, -1}, {2, 0.5}, {-1, 1.5}};
    const auto t = fit_similarity_exact3(p, p);
    EXPECT_NEAR(t.scale(), 1.0, 1e-12);
    EXPECT_NEAR(t.rotation(), 0.0, 1e-12);
    EXPECT_NEAR(norm(t.translation()), 0.0, 1e-12);
}

TEST(FitExact3, CollinearSourceIsDegenerate) {
    const std::vector<PointPx> src = {{0, 0}, {1, 0}, {2, 0}};
    const std::vector<PointPx> dst = {{0, 0}, {1, 1}, {2, 5}};
    EXPECT_THROW(fit_similarity_exact3(src, dst), DegenerateTriplet);
    // scale-invariant: a tiny but clearly non-collinear triangle is fine
    const std::vector<PointPx> tiny = {{0, 0}, {1e-4, 0}, {0, 1e-4}};
    EXPECT_NO_THROW(fit_similarity_exact3(tiny, dst));
    EXPECT_THROW(fit_similarity_exact3(std::vector<PointPx>{{0, 0}, {1, 0}}, std::vector<PointPx>{{0, 0}, {1, 0}}),
                 LengthMismatch);
}

TEST(FitExact3, ExactOnSimilarTrianglesIncludingMirror) {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        auto src = random_points(rng, 3);
        if (is_degenerate_triplet(src[0], src[1], src[2], 1e-2)) continue;
        const bool mirror = rng.bernoulli(0.5);
        const SimilarityTransform g(rng.uniform(0.5, 80), rng.uniform(-kPi, kPi), {rng.uniform(-9, 9), 4}, mirror);
        const auto dst = apply_all(g, src);
        const auto t = fit_similarity_exact3(src, dst, true);
        EXPECT_EQ(t.mirror(), mirror);
        for (std::size_t i = 0; i < 3; ++i) EXPECT_LE(distance(t.apply(src[i]), dst[i]), 1e-9 * g.scale());
        if (mirror) {
            // without permission the proper branch is returned with residual
            const auto p = fit_similarity_exact3(src, dst, false);
            EXPECT_FALSE(p.mirror());
        }
    }
}

TEST(FitLsq, RecoversNoiseFreeTransform) {
    Rng rng(9);
    for (int trial = 0; trial < 200; ++trial) {
        const auto src = random_points(rng, 5);
        const SimilarityTransform g(rng.uniform(0.2, 50), rng.uniform(-kPi, kPi),
                                    {rng.uniform(-100, 100), rng.uniform(-100, 100)});
        const auto t = fit_similarity_lsq(src, apply_all(g, src));
        EXPECT_NEAR(t.scale(), g.scale(), 1e-9 * g.scale());
        EXPECT_NEAR(std::remainder(t.rotation() - g.rotation(), 2 * kPi), 0.0, 1e-9);
        EXPECT_NEAR(t.translation().x, g.translation().x, 1e-9 * 100);
        EXPECT_NEAR(t.translation().y, g.translation().y, 1e-9 * 100);
    }
}

TEST(FitLsq, TwoPointExample) {
    const auto t = fit_similarity_lsq(std::vector<PointPx>{{0, 0}, {1, 0}}, std::vector<PointPx>{{0, 0}, {0, 2}});
    EXPECT_NEAR(t.scale(), 2.0, 1e-12);
    EXPECT_NEAR(t.rotation(), kPi / 2, 1e-12);
    EXPECT_NEAR(norm(t.translation()), 0.0, 1e-12);
}

TEST(FitLsq, MirroredSquareBranches) {
    // an irregular quadrilateral and its mirror image
    const std::vector<PointPx> src = {{0, 0}, {2, 0}, {2.5, 1.5}, {0, 1}};
    std::vector<PointPx> dst;
    for (auto p : src) dst.push_back({-p.x + 3.0, p.y - 1.0});
    const auto m = fit_similarity_lsq(src, dst, true);
    const auto p = fit_similarity_lsq(src, dst, false);
    EXPECT_TRUE(m.mirror());
    EXPECT_FALSE(p.mirror());
    // oracle: both closed-form branches' residuals, recomputed independently
    EXPECT_NEAR(sse(m, src, dst), 0.0, 1e-18);
    EXPECT_GT(sse(p, src, dst), 0.1);
    EXPECT_LE(residual_stats(m, src, dst).max, 1e-9);
}

TEST(FitLsq, LabeledUnitSquareAndItsMirror) {
    const std::vector<PointPx> sq = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    std::vector<PointPx> mir;
    for (auto p : sq) mir.push_back({-p.x, p.y});
    EXPECT_TRUE(fit_similarity_lsq(sq, mir, true).mirror());
    EXPECT_NEAR(residual_stats(fit_similarity_lsq(sq, mir, true), sq, mir).max, 0.0, 1e-12);
    const auto p = fit_similarity_lsq(sq, mir, false);
    EXPECT_FALSE(p.mirror());
    EXPECT_GT(residual_stats(p, sq, mir).max, 0.1);
}

TEST(FitLsq, GlobalOptimalityAgainstGridRefinement) {
    Rng rng(21);
    for (int trial = 0; trial < 60; ++trial) {
        const int n = 4 + static_cast<int>(rng.index(4));
        const auto src = random_points(rng, n);
        const SimilarityTransform g(rng.uniform(1, 10), rng.uniform(-kPi, kPi), {rng.uniform(-5, 5), 2.0});
        auto dst = apply_all(g, src);
        for (auto& q : dst) q = q + PointPx{rng.normal(0, 0.5), rng.normal(0, 0.5)};
        const auto t = fit_similarity_lsq(src, dst);
        const double lib = sse(t, src, dst);
        // the problem is a convex quadratic in (a,b,tx,ty): no neighbour can be better
        const double a = t.scale() * std::cos(t.rotation()), b = t.scale() * std::sin(t.rotation());
        const double refined =
            oracle::refine_sse(src, dst, a, b, t.translation().x, t.translation().y, false, 0.5, 200);
        EXPECT_GE(refined, lib - 1e-9 * std::max(1.0, lib));
        // from a cold start the refinement converges to the same optimum
        const double cold = oracle::refine_sse(src, dst, 1.0, 0.0, 0.0, 0.0, false, 4.0, 4000);
        EXPECT_GE(cold, lib - 1e-9 * std::max(1.0, lib));
        // and LSQ is never worse than an exact fit through any 3 of the pairs
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                for (int k = j + 1; k < n; ++k) {
                    const std::vector<PointPx> s3 = {src[i], src[j], src[k]}, d3 = {dst[i], dst[j], dst[k]};
                    if (is_degenerate_triplet(s3[0], s3[1], s3[2])) continue;
                    EXPECT_LE(lib, sse(fit_similarity_exact3(s3, d3), src, dst) + 1e-9);
                }
            }
        }
    }
}

TEST(FitLsq, Errors) {
    EXPECT_THROW(fit_similarity_lsq(std::vector<PointPx>{{0, 0}}, std::vector<PointPx>{{0, 0}}), DegenerateSet);
    EXPECT_THROW(fit_similarity_lsq(std::vector<PointPx>{{1, 1}, {1, 1}}, std::vector<PointPx>{{0, 0}, {1, 0}}),
                 DegenerateSet);
    EXPECT_THROW(fit_similarity_lsq(std::vector<PointPx>{{0, 0}, {1, 0}}, std::vector<PointPx>{{0, 0}}),
                 LengthMismatch);
}

TEST(ResidualStats, Examples) {
    const auto id = SimilarityTransform::identity();
    const std::vector<PointPx> p = {{1, 2}, {3, 4}};
    const auto z = residual_stats(id, p, p);
    EXPECT_EQ(z.max, 0.0);
    EXPECT_EQ(z.median, 0.0);

    const auto r = residual_stats(id, std::vector<PointPx>{{0, 0}}, std::vector<PointPx>{{3, 4}});
    EXPECT_DOUBLE_EQ(r.per_point[0], 5.0);

    const std::vector<PointPx> src = {{0, 0}, {0, 0}, {0, 0}, {0, 0}};
    const std::vector<PointPx> dst = {{0, 0}, {1, 0}, {0, 2}, {10, 0}};
    const auto e = residual_stats(id, src, dst);
    EXPECT_DOUBLE_EQ(e.median, 1.5);
    EXPECT_DOUBLE_EQ(e.max, 10.0);

    EXPECT_THROW(residual_stats(id, src, std::vector<PointPx>{{0, 0}}), LengthMismatch);
    EXPECT_THROW(residual_stats(id, std::vector<PointPx>{}, std::vector<PointPx>{}), LengthMismatch);
}

TEST(ResidualStats, CompositionInvariance) {
    Rng rng(13);
    for (int trial = 0; trial < 200; ++trial) {
        const auto src = random_points(rng, 6);
        auto dst = random_points(rng, 6, -30, 30);
        const SimilarityTransform t(rng.uniform(0.5, 5), rng.uniform(-kPi, kPi), {1, 2});
        const SimilarityTransform g(1.0, rng.uniform(-kPi, kPi), {rng.uniform(-9, 9), rng.uniform(-9, 9)});
        const auto moved = apply_all(g.inverse(), src);
        const auto a = residual_stats(t, src, dst);
        const auto b = residual_stats(t.compose(g), moved, dst);
        EXPECT_NEAR(a.median, b.median, 1e-6);
        EXPECT_NEAR(a.max, b.max, 1e-6);
    }
}

TEST(SignedArea, CounterClockwiseIsPositive) {
    const std::vector<PointPx> ccw = {{0, 0}, {1, 0}, {0, 1}};
    EXPECT_DOUBLE_EQ(signed_area(ccw), 0.5);
    const std::vector<PointPx> cw = {{0, 0}, {0, 1}, {1, 0}};
    EXPECT_DOUBLE_EQ(signed_area(cw), -0.5);
}
