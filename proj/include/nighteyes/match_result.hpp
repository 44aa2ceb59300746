#pragma once

#include <map>
#include <optional>
#include <string>

#include "nighteyes/geometry.hpp"

namespace nighteyes {

/// Accepted correspondence between template LEDs and candidates.
struct MatchResult {
    std::map<int, int> assignment;  ///< led_id -> candidate index (partial, injective)
    SimilarityTransform transform;  ///< template units -> image pixels
    int inliers = 0;
    double median_residual = 0.0;
    double max_residual = 0.0;
    double appearance_sum = 0.0;
    double cost = 0.0;
    std::string matcher;
};

/// A matcher either produces a result or a failure reason; failure is a
/// normal per-frame outcome.
struct MatchOutcome {
    std::optional<MatchResult> match;
    std::string failure;

    static MatchOutcome fail(std::string why) { return {std::nullopt, std::move(why)}; }
    static MatchOutcome ok(MatchResult r) { return {std::move(r), {}}; }
    explicit operator bool() const { return match.has_value(); }
};

}  // namespace nighteyes
