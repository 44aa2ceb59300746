#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "nighteyes/enhance.hpp"
#include "nighteyes/rng.hpp"
#include "oracles.hpp"

using namespace nighteyes;

namespace {

GrayImage random_image(Rng& rng, int w, int h) {
    GrayImage img(w, h);
    for (auto& v : img.pixels()) v = static_cast<float>(rng.uniform01());
    return img;
}

float max_value(const GrayImage& img) {
    auto p = img.pixels();
    return *std::max_element(p.begin(), p.end());
}

const EnhanceMethod kMethods[] = {EnhanceMethod::tophat, EnhanceMethod::dog, EnhanceMethod::highpass};

}  // namespace

TEST(Morphology, MatchesNaiveDiskImplementation) {
    Rng rng(1);
    for (int r : {1, 2, 3, 4, 6}) {
        const auto img = random_image(rng, 23, 17);
        const auto ero = morph::erode(img, r), dil = morph::dilate(img, r), op = morph::open(img, r);
        const auto ero_o = oracle::morph(img, r, false), dil_o = oracle::morph(img, r, true);
        const auto op_o = oracle::opening(img, r);
        for (int y = 0; y < img.height(); ++y) {
            for (int x = 0; x < img.width(); ++x) {
                ASSERT_EQ(ero.at(x, y), ero_o.at(x, y)) << "r=" << r << " at " << x << "," << y;
                ASSERT_EQ(dil.at(x, y), dil_o.at(x, y)) << "r=" << r << " at " << x << "," << y;
                ASSERT_EQ(op.at(x, y), op_o.at(x, y)) << "r=" << r << " at " << x << "," << y;
            }
        }
    }
}

TEST(Enhance, ConstantImageGivesZeros) {
    for (auto m : kMethods) {
        EnhanceParams p;
        p.method = m;
        const auto out = enhance_small_structures(GrayImage(31, 29, 0.4f), p);
        EXPECT_EQ(out.width(), 31);
        EXPECT_EQ(out.height(), 29);
        EXPECT_EQ(max_value(out), 0.0f);
    }
}

TEST(Enhance, ImpulseRemainsTheMaximum) {
    for (auto m : kMethods) {
        GrayImage img(21, 21);
        img.at(10, 10) = 1.0f;
        EnhanceParams p;
        p.method = m;
        p.kernel_px = 5;
        const auto out = enhance_small_structures(img, p);
        EXPECT_EQ(out.at(10, 10), max_value(out));
        EXPECT_GT(out.at(10, 10), 0.0f);
    }
}

TEST(Enhance, LargeDiskAttenuatedRelativeToSmallSpot) {
    // disk of diameter 2*kernel and a diameter-2 spot, equal peak, in one frame
    const int kernel = 9;
    GrayImage img(80, 40);
    for (int y = 0; y < 40; ++y) {
        for (int x = 0; x < 80; ++x) {
            if (std::hypot(x - 20.0, y - 20.0) <= kernel) img.at(x, y) = 1.0f;
            if (std::hypot(x - 60.0, y - 20.0) <= 1.0) img.at(x, y) = 1.0f;
        }
    }
    EnhanceParams p;
    p.kernel_px = kernel;
    const auto out = enhance_small_structures(img, p);

    const auto opened = oracle::opening(img, (kernel - 1) / 2);
    const double disk_ref = oracle::tophat_at(img, opened, 20, 20);
    const double spot_ref = oracle::tophat_at(img, opened, 60, 20);
    EXPECT_LT(disk_ref, spot_ref);
    EXPECT_LT(out.at(20, 20), out.at(60, 20));
    // minmax normalization of the same responses
    EXPECT_NEAR(out.at(20, 20), disk_ref / spot_ref, 1e-6);
    EXPECT_NEAR(out.at(60, 20), 1.0, 1e-6);
}

TEST(Enhance, OutputInUnitRangeWithSameShape) {
    Rng rng(4);
    for (auto m : kMethods) {
        for (bool clahe : {false, true}) {
            EnhanceParams p;
            p.method = m;
            p.clahe_enabled = clahe;
            p.denoise_enabled = clahe;
            const auto out = enhance_small_structures(random_image(rng, 40, 30), p);
            ASSERT_EQ(out.size(), 40u * 30u);
            for (float v : out.pixels()) {
                ASSERT_GE(v, 0.0f);
                ASSERT_LE(v, 1.0f);
            }
        }
    }
}

TEST(Enhance, RejectsBadKernel) {
    EnhanceParams p;
    p.kernel_px = 4;
    EXPECT_THROW(enhance_small_structures(GrayImage(8, 8), p), std::invalid_argument);
    p.kernel_px = 1;
    EXPECT_THROW(enhance_small_structures(GrayImage(8, 8), p), std::invalid_argument);
}

TEST(Percentile, MatchesCountingOracle) {
    Rng rng(8);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 1 + rng.index(60);
        std::vector<float> v(n);
        // quantized values so that ties are common
        for (auto& x : v) x = static_cast<float>(rng.index(7)) / 6.0f;
        const double p = trial % 3 == 0 ? static_cast<double>(rng.index(101)) : rng.uniform(0.0, 100.0);
        ASSERT_EQ(percentile_threshold(v, p), oracle::percentile_by_counting(v, p)) << "n=" << n << " p=" << p;
    }
    EXPECT_THROW(percentile_threshold(std::vector<float>{1.0f}, 101.0), std::invalid_argument);
}

TEST(Threshold, RampTopThreePixels) {
    GrayImage img(10, 10);
    for (int i = 0; i < 100; ++i) img.pixels()[static_cast<std::size_t>(i)] = static_cast<float>(i) / 99.0f;
    const auto mask = threshold_mask(img, 97.0);
    std::vector<int> on;
    for (int i = 0; i < 100; ++i) {
        if (mask[static_cast<std::size_t>(i)]) on.push_back(i);
    }
    EXPECT_EQ(on, (std::vector<int>{97, 98, 99}));
    const auto c = threshold_and_components(img, 97.0, 0, 1, 1000);
    ASSERT_EQ(c.blobs.size(), 1u);
    EXPECT_EQ(c.blobs[0].area, 3.0);
}

TEST(Threshold, AllZeroImageHasNoBlobs) {
    const auto c = threshold_and_components(GrayImage(16, 16), 99.0, 0, 1, 1000);
    EXPECT_TRUE(c.blobs.empty());
}

TEST(Threshold, TwoSquaresTwoBlobsAtTheirCenters) {
    // 18 bright pixels out of 180: exactly the top 10%
    GrayImage img(18, 10);
    for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
            img.at(3 + dx, 5 + dy) = 1.0f;
            img.at(13 + dx, 5 + dy) = 1.0f;
        }
    }
    const auto c = threshold_and_components(img, 90.0, 0, 1, 1000);
    ASSERT_EQ(c.blobs.size(), 2u);
    EXPECT_NEAR(c.blobs[0].centroid.x, 3.0, 0.5);
    EXPECT_NEAR(c.blobs[0].centroid.y, 5.0, 0.5);
    EXPECT_NEAR(c.blobs[1].centroid.x, 13.0, 0.5);
    EXPECT_NEAR(c.blobs[1].centroid.y, 5.0, 0.5);
    for (const auto& b : c.blobs) {
        EXPECT_EQ(b.area, 9.0);
        EXPECT_EQ(b.perimeter_edges, 12.0);
        EXPECT_EQ(b.bbox.x1 - b.bbox.x0, 2);
    }
}

TEST(Threshold, ForegroundShrinksAsPercentileRises) {
    Rng rng(12);
    const auto img = random_image(rng, 30, 30);
    std::size_t prev = img.size() + 1;
    for (double p = 0.0; p <= 100.0; p += 2.5) {
        const auto m = threshold_mask(img, p);
        const auto n = static_cast<std::size_t>(std::count(m.begin(), m.end(), 1));
        EXPECT_LE(n, prev) << "p=" << p;
        EXPECT_GE(n, 1u);
        prev = n;
    }
}

TEST(Threshold, BlobsPartitionTheForeground) {
    Rng rng(15);
    for (int trial = 0; trial < 20; ++trial) {
        const auto img = random_image(rng, 25, 20);
        const double p = rng.uniform(60, 95);
        const auto mask = threshold_mask(img, p);
        const auto c = threshold_and_components(img, p, 0, 0, 1e9);
        std::set<std::size_t> seen;
        std::vector<int> owner(img.size(), -1);
        for (std::size_t b = 0; b < c.blobs.size(); ++b) {
            for (auto i : c.blobs[b].pixels) {
                ASSERT_TRUE(mask[i]);
                ASSERT_TRUE(seen.insert(i).second) << "pixel in two blobs";
                owner[i] = static_cast<int>(b);
            }
        }
        EXPECT_EQ(seen.size(), static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1)));
        EXPECT_EQ(c.raw_count, c.blobs.size());
        // 8-neighbours in the foreground always share a blob
        for (int y = 0; y < img.height(); ++y) {
            for (int x = 0; x < img.width(); ++x) {
                const auto i = img.index(x, y);
                if (owner[i] < 0) continue;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (!img.contains(x + dx, y + dy)) continue;
                        const int o = owner[img.index(x + dx, y + dy)];
                        if (o >= 0) {
                            ASSERT_EQ(o, owner[i]);
                        }
                    }
                }
            }
        }
    }
}

TEST(Threshold, AreaFilterCountsRawComponents) {
    GrayImage img(18, 10);
    img.at(2, 2) = 1.0f;
    for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) img.at(12 + dx, 5 + dy) = 1.0f;
    }
    const auto c = threshold_and_components(img, 94.0, 0, 2, 100);
    EXPECT_EQ(c.raw_count, 2u);
    ASSERT_EQ(c.blobs.size(), 1u);
    EXPECT_EQ(c.blobs[0].area, 9.0);
}

TEST(Threshold, OpeningRemovesIsolatedPixels) {
    GrayImage img(20, 20);
    img.at(3, 3) = 1.0f;
    for (int y = 8; y < 15; ++y) {
        for (int x = 8; x < 15; ++x) img.at(x, y) = 1.0f;
    }
    const auto c = threshold_and_components(img, 80.0, 1, 1, 1000);
    ASSERT_EQ(c.blobs.size(), 1u);
    EXPECT_NEAR(c.blobs[0].centroid.x, 11.0, 1e-9);
}

TEST(Threshold, SymmetricBlobHasCenteredCentroid) {
    GrayImage img(15, 15);
    for (int y = 0; y < 15; ++y) {
        for (int x = 0; x < 15; ++x) {
            img.at(x, y) = static_cast<float>(std::exp(-((x - 7) * (x - 7) + (y - 7) * (y - 7)) / 4.0));
        }
    }
    const auto c = threshold_and_components(img, 90.0, 0, 1, 1000);
    ASSERT_EQ(c.blobs.size(), 1u);
    EXPECT_NEAR(c.blobs[0].centroid.x, 7.0, 1e-9);
    EXPECT_NEAR(c.blobs[0].centroid.y, 7.0, 1e-9);
    EXPECT_FLOAT_EQ(static_cast<float>(c.blobs[0].peak), 1.0f);
}
