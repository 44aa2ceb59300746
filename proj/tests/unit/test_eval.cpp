#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "nighteyes/assignment.hpp"
#include "nighteyes/eval.hpp"
#include "nighteyes/rng.hpp"
#include "oracles.hpp"

using namespace nighteyes;

namespace {

FrameLabels labels_of(std::map<int, PointPx> g) {
    FrameLabels l;
    l.glints = std::move(g);
    return l;
}

std::vector<std::vector<double>> random_cost(Rng& rng, std::size_t r, std::size_t c, double p_forbid) {
    std::vector<std::vector<double>> m(r, std::vector<double>(c));
    for (auto& row : m) {
        for (auto& v : row) v = rng.bernoulli(p_forbid) ? kForbidden : std::round(rng.uniform(0, 20)) / 2.0;
    }
    return m;
}

}  // namespace

TEST(Assignment, MatchesBruteForce) {
    Rng rng(1);
    for (int trial = 0; trial < 2000; ++trial) {
        const auto r = 1 + rng.index(6), c = 1 + rng.index(6);
        const auto cost = random_cost(rng, r, c, rng.uniform(0, 0.7));
        const auto a = solve_assignment(cost);
        const auto b = oracle::brute_force_assignment(cost);
        ASSERT_EQ(static_cast<int>(a.matched), b.matched) << "trial " << trial;
        ASSERT_NEAR(a.cost, b.cost, 1e-9) << "trial " << trial;
        // the reported mapping is injective and uses finite edges only
        std::vector<int> used(c, 0);
        for (std::size_t i = 0; i < r; ++i) {
            if (a.row_to_col[i] < 0) continue;
            ASSERT_TRUE(std::isfinite(cost[i][static_cast<std::size_t>(a.row_to_col[i])]));
            ASSERT_EQ(used[static_cast<std::size_t>(a.row_to_col[i])]++, 0);
        }
    }
}

TEST(Assignment, EmptyAndAllForbidden) {
    EXPECT_EQ(solve_assignment({}).matched, 0u);
    const std::vector<std::vector<double>> none = {{kForbidden, kForbidden}, {kForbidden, kForbidden}};
    const auto a = solve_assignment(none);
    EXPECT_EQ(a.matched, 0u);
    EXPECT_EQ(a.row_to_col, (std::vector<int>{-1, -1}));
}

TEST(Assignment, CardinalityBeatsCost) {
    // the cheap diagonal edge would block the second match
    const std::vector<std::vector<double>> c = {{0.0, 5.0}, {1.0, kForbidden}};
    const auto a = solve_assignment(c);
    EXPECT_EQ(a.matched, 2u);
    EXPECT_DOUBLE_EQ(a.cost, 6.0);
    // greedy takes the cheapest edge first and loses one
    EXPECT_EQ(solve_assignment_greedy(c).matched, 1u);
}

TEST(IdentityFree, MatchesBruteForceOnSmallInstances) {
    Rng rng(2);
    for (int trial = 0; trial < 2000; ++trial) {
        std::vector<PointPx> pred, truth;
        const auto np = rng.index(7), nt = rng.index(7);
        for (std::size_t i = 0; i < np; ++i) pred.push_back({rng.uniform(0, 40), rng.uniform(0, 40)});
        for (std::size_t i = 0; i < nt; ++i) truth.push_back({rng.uniform(0, 40), rng.uniform(0, 40)});
        const auto m = identity_free_match(pred, truth, 10.0);
        const auto b = oracle::brute_identity_free(pred, truth, 10.0);
        ASSERT_EQ(m.matched, b.matched);
        ASSERT_NEAR(m.cost, b.cost, 1e-9);
    }
}

TEST(EvaluateFrame, PerfectPrediction) {
    const std::map<int, PointPx> g = {{0, {10, 10}}, {1, {30, 12}}, {2, {20, 40}}};
    const auto fc = evaluate_frame(g, labels_of(g));
    EXPECT_EQ(fc.idf_matched, 3);
    for (const auto& [id, c] : fc.per_led) {
        EXPECT_TRUE(c.correct);
        EXPECT_EQ(*c.error_px, 0.0);
    }
}

TEST(EvaluateFrame, SwappedIdsAreIdentityWrongButIdentityFreeRight) {
    const auto truth = labels_of({{0, {10, 10}}, {1, {50, 10}}});
    const auto fc = evaluate_frame({{0, {50, 10}}, {1, {10, 10}}}, truth);
    int correct = 0;
    for (const auto& [id, c] : fc.per_led) correct += c.correct;
    EXPECT_EQ(correct, 0);
    EXPECT_EQ(fc.idf_matched, 2);
}

TEST(EvaluateFrame, FourPredictionsFiveLabels) {
    Rng rng(9);
    for (int trial = 0; trial < 200; ++trial) {
        std::map<int, PointPx> truth, pred;
        for (int k = 0; k < 5; ++k) truth[k] = {rng.uniform(0, 30), rng.uniform(0, 30)};
        for (int k = 0; k < 4; ++k) pred[k] = truth[(k + static_cast<int>(rng.index(2))) % 5] + PointPx{rng.normal(0, 4), rng.normal(0, 4)};
        const auto fc = evaluate_frame(pred, labels_of(truth));
        std::vector<PointPx> pp, tp;
        for (const auto& [_, p] : pred) pp.push_back(p);
        for (const auto& [_, p] : truth) tp.push_back(p);
        EXPECT_EQ(fc.idf_matched, oracle::brute_identity_free(pp, tp, 10.0).matched);
        EXPECT_EQ(fc.idf_present, 5);
        EXPECT_EQ(fc.idf_predicted, 4);
    }
}

TEST(EvaluateFrame, AbsentAndMissingLeds) {
    const auto truth = labels_of({{0, {10, 10}}, {2, {40, 40}}});
    const auto fc = evaluate_frame({{0, {12, 10}}, {1, {20, 20}}}, truth, 10.0);
    EXPECT_TRUE(fc.per_led.at(0).correct);
    EXPECT_NEAR(*fc.per_led.at(0).error_px, 2.0, 1e-12);
    EXPECT_TRUE(fc.per_led.at(1).predicted);
    EXPECT_FALSE(fc.per_led.at(1).present);
    EXPECT_FALSE(fc.per_led.at(1).error_px);
    EXPECT_TRUE(fc.per_led.at(2).present);
    EXPECT_FALSE(fc.per_led.at(2).predicted);
    EXPECT_THROW(evaluate_frame({}, truth, 0.0), std::invalid_argument);
}

TEST(EvaluateFrame, ThresholdIsInclusive) {
    const auto fc = evaluate_frame({{0, {13, 14}}}, labels_of({{0, {10, 10}}}), 5.0);
    EXPECT_TRUE(fc.per_led.at(0).correct);
    EXPECT_EQ(fc.idf_matched, 1);
}

TEST(Aggregate, PublishedG1Row) {
    const auto r = metrics_from_counts(1845, 1623, 1382);
    EXPECT_NEAR(*r.accuracy, 0.749, 0.001);
    EXPECT_NEAR(*r.precision, 0.852, 0.001);
    EXPECT_EQ(format_metric(r.accuracy), "0.749");
    EXPECT_EQ(format_metric(r.precision), "0.852");
    EXPECT_FALSE(r.idf_accuracy);
}

TEST(Aggregate, SinglePerfectFrame) {
    const std::map<int, PointPx> g = {{0, {10, 10}}, {1, {30, 12}}};
    const std::vector<FrameCounts> fs = {evaluate_frame(g, labels_of(g))};
    const auto r = aggregate_all(fs);
    EXPECT_EQ(*r.accuracy, 1.0);
    EXPECT_EQ(*r.precision, 1.0);
    EXPECT_EQ(*r.idf_accuracy, 1.0);
    EXPECT_EQ(*r.mean_err, 0.0);
    EXPECT_EQ(*r.median_err, 0.0);
    EXPECT_EQ(r.n_images, 1u);
}

TEST(Aggregate, MeanFarAboveMedian) {
    std::vector<FrameCounts> fs;
    for (double e : {1.0, 1.0, 1.0, 100.0}) {
        fs.push_back(evaluate_frame({{0, {10 + e, 10}}}, labels_of({{0, {10, 10}}})));
    }
    const auto r = aggregate_all(fs);
    EXPECT_NEAR(*r.mean_err, 25.75, 1e-12);
    EXPECT_NEAR(*r.median_err, 1.0, 1e-12);
    EXPECT_NEAR(*r.accuracy, 0.75, 1e-12);
}

TEST(Aggregate, GroupsAndUndefinedMetrics) {
    auto f1 = evaluate_frame({{0, {10, 10}}}, labels_of({{0, {10, 10}}, {1, {20, 20}}}));
    f1.subject = "s1";
    auto f2 = evaluate_frame({}, labels_of({{0, {10, 10}}}));
    f2.subject = "s2";
    const std::vector<FrameCounts> fs = {f1, f2};
    const auto by_subject = aggregate(fs, GroupBy::subject);
    EXPECT_EQ(*by_subject.at("s1").accuracy, 0.5);
    EXPECT_FALSE(by_subject.at("s2").precision);
    EXPECT_EQ(format_metric(by_subject.at("s2").precision), "undefined");
    const auto by_led = aggregate(fs, GroupBy::led);
    EXPECT_EQ(*by_led.at("0").accuracy, 0.5);
    EXPECT_EQ(*by_led.at("1").accuracy, 0.0);
    EXPECT_FALSE(by_led.at("0").idf_accuracy);
    EXPECT_THROW(aggregate(std::vector<FrameCounts>{}, GroupBy::none), std::invalid_argument);
    const auto table = per_glint_table(fs);
    EXPECT_NE(table.find("G0\t2\t1\t1\t0.500\t1.000"), std::string::npos);
}

TEST(Aggregate, IdentityFreeNeverBelowAccuracy) {
    Rng rng(14);
    std::vector<FrameCounts> fs;
    for (int f = 0; f < 300; ++f) {
        std::map<int, PointPx> truth, pred;
        for (int k = 0; k < 5; ++k) {
            if (rng.bernoulli(0.8)) truth[k] = {rng.uniform(0, 100), rng.uniform(0, 100)};
            if (rng.bernoulli(0.7)) pred[k] = {rng.uniform(0, 100), rng.uniform(0, 100)};
        }
        for (auto& [k, p] : pred) {
            if (truth.count(k) && rng.bernoulli(0.6)) p = truth[k] + PointPx{rng.normal(0, 3), rng.normal(0, 3)};
        }
        fs.push_back(evaluate_frame(pred, labels_of(truth)));
        const auto r = aggregate_all(fs);
        if (r.accuracy) {
            ASSERT_GE(*r.idf_accuracy, *r.accuracy);
        }
    }
}
