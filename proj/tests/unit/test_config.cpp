#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "nighteyes/config.hpp"

using namespace nighteyes;
namespace fs = std::filesystem;

TEST(Config, DefaultsRoundTripThroughJson) {
    const PipelineConfig c;
    const auto j = config_to_json(c);
    EXPECT_EQ(config_to_json(config_from_json(j)), j);
    EXPECT_EQ(config_to_json(config_from_json(json::object())), j);
    EXPECT_EQ(config_hash(c), config_hash(config_from_json(j)));
    EXPECT_EQ(config_hash(c).size(), 16u);
}

TEST(Config, UnknownKeyNamesThePath) {
    try {
        config_from_json(json::parse(R"({"matcher": {"sla": {"epsilon": 3}}})"));
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("matcher.sla.epsilon"), std::string::npos);
    }
    EXPECT_THROW(config_from_json(json::parse(R"({"bogus": 1})")), ConfigError);
}

TEST(Config, CommentKeysIgnored) {
    const auto c = config_from_json(json::parse(R"({"_note": "x", "detect": {"_why": "y", "percentile": 98.5}})"));
    EXPECT_EQ(c.detect.percentile, 98.5);
}

TEST(Config, InvalidValuesRejected) {
    EXPECT_THROW(config_from_json(json::parse(R"({"enhance": {"kernel_px": 4}})")), ConfigError);
    EXPECT_THROW(config_from_json(json::parse(R"({"matcher": {"kind": "nope"}})")), ConfigError);
    EXPECT_THROW(config_from_json(json::parse(R"({"detect": {"percentile": "high"}})")), ConfigError);
    EXPECT_THROW(config_from_json(json::parse(R"({"eval": {"thresh_px": 0}})")), ConfigError);
}

TEST(Config, HashChangesWithContent) {
    PipelineConfig c;
    const auto h0 = config_hash(c);
    c.matcher.sla.eps = 5.0;
    EXPECT_NE(config_hash(c), h0);
    EXPECT_EQ(fnv1a64(""), 14695981039346656037ull);
    EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cull);
}

TEST(Overrides, DottedKeysAndValueParsing) {
    PipelineConfig c;
    c = apply_assignment(c, "matcher.sla.eps=4.5");
    EXPECT_EQ(c.matcher.sla.eps, 4.5);
    c = apply_assignment(c, "detect.fallback.pcts=99,98,97");
    EXPECT_EQ(c.detect.fallback.pcts, (std::vector<double>{99, 98, 97}));
    c = apply_assignment(c, "matcher.kind=ransac");
    EXPECT_EQ(c.matcher.kind, MatcherKind::ransac);
    c = apply_assignment(c, "post_id_resolve=true");
    EXPECT_TRUE(c.post_id_resolve);
    EXPECT_THROW(apply_assignment(c, "matcher.sla.nope=1"), ConfigError);
    EXPECT_THROW(apply_assignment(c, "noequals"), ConfigError);
    EXPECT_THROW(apply_assignment(c, "matcher..eps=1"), ConfigError);
}

TEST(Overrides, PrecedenceFileThenEnvThenFlags) {
    const auto dir = fs::temp_directory_path() / "nighteyes_cfg_test";
    fs::create_directories(dir);
    const auto path = dir / "cfg.json";
    {
        std::ofstream out(path);
        out << "// comment allowed\n{\"matcher\": {\"sla\": {\"eps\": 3.0, \"pivot_P\": 4}}, \"seed\": 5}\n";
    }
    auto c = load_config_file(path.string());
    EXPECT_EQ(c.matcher.sla.eps, 3.0);
    std::string e1 = "NIGHTEYES_MATCHER__SLA__EPS=7", e2 = "NIGHTEYES_SEED=9", e3 = "NIGHTEYES_REFERENCE_DATASET=/x",
                e4 = "PATH=/bin";
    char* envp[] = {e1.data(), e2.data(), e3.data(), e4.data(), nullptr};
    c = apply_env_overrides(c, envp);
    EXPECT_EQ(c.matcher.sla.eps, 7.0);
    EXPECT_EQ(c.seed, 9u);
    EXPECT_EQ(c.matcher.sla.pivot_P, 4);
    c = apply_assignment(c, "matcher.sla.eps=2");
    EXPECT_EQ(c.matcher.sla.eps, 2.0);
    std::string bad = "NIGHTEYES_MATCHER__BOGUS=1";
    char* envp_bad[] = {bad.data(), nullptr};
    EXPECT_THROW(apply_env_overrides(c, envp_bad), ConfigError);
    EXPECT_THROW(load_config_file((dir / "missing.json").string()), ConfigError);
    fs::remove_all(dir);
}

TEST(ScaleParams, ReferenceSizeIsIdentity) {
    const PipelineConfig c;
    EXPECT_EQ(config_to_json(scale_params(c, 640, 480)), config_to_json(c));
}

TEST(ScaleParams, DoubleSizeDoublesLengthsQuadruplesAreas) {
    const PipelineConfig c;
    const auto s = scale_params(c, 1280, 960);
    EXPECT_DOUBLE_EQ(s.matcher.sla.eps, 2 * c.matcher.sla.eps);
    EXPECT_DOUBLE_EQ(s.matcher.sla.grow_resid_max, 2 * c.matcher.sla.grow_resid_max);
    EXPECT_DOUBLE_EQ(s.detect.area_nominal_px2, 4 * c.detect.area_nominal_px2);
    EXPECT_DOUBLE_EQ(s.detect.min_area_px, 4 * c.detect.min_area_px);
    EXPECT_DOUBLE_EQ(s.detect.cand_merge_eps, 2 * c.detect.cand_merge_eps);
    EXPECT_EQ(s.pupil.roi_side_px, 2 * c.pupil.roi_side_px);
    EXPECT_EQ(s.enhance.kernel_px % 2, 1);
    EXPECT_NEAR(s.enhance.kernel_px, 2 * c.enhance.kernel_px, 1);
    // the evaluation threshold is a metric definition
    EXPECT_EQ(s.eval.thresh_px, c.eval.thresh_px);
    // percentile-type parameters are dimensionless
    EXPECT_EQ(s.detect.percentile, c.detect.percentile);
    EXPECT_EQ(s.detect.support_tol, c.detect.support_tol);
}

TEST(ScaleParams, OddSizesKeepKernelsOdd) {
    PipelineConfig c;
    for (int k : {3, 5, 7, 9, 11, 15}) {
        c.enhance.kernel_px = k;
        const auto s = scale_params(c, 321, 240);
        EXPECT_EQ(s.enhance.kernel_px % 2, 1);
        EXPECT_GE(s.enhance.kernel_px, 3);
        EXPECT_EQ(s.detect.fallback.kernel_add % 2, 0);
        EXPECT_NO_THROW(s.validate());
    }
    EXPECT_THROW(scale_params(c, 0, 10), std::invalid_argument);
}

TEST(Rounding, OddAndEven) {
    EXPECT_EQ(round_odd(4.4), 5);
    EXPECT_EQ(round_odd(4.6), 5);
    EXPECT_EQ(round_odd(6.2), 7);
    EXPECT_EQ(round_odd(0.5), 3);
    EXPECT_EQ(round_even(2.9), 2);
    EXPECT_EQ(round_even(3.1), 4);
    EXPECT_EQ(round_even(-1), 0);
}
