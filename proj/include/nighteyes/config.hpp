#pragma once

// Pipeline configuration: JSON round-trip, strict key checking, overrides and
// resolution scaling.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string_view>
#include <string>
#include <vector>

#include <json.hpp>

#include "nighteyes/json_enum.hpp"

#include "nighteyes/candidates.hpp"
#include "nighteyes/enhance.hpp"
#include "nighteyes/errors.hpp"
#include "nighteyes/matchers.hpp"

namespace nighteyes {

using json = nlohmann::json;

/// Where the pupil circle comes from: the built-in darkest-region detector or
/// the frame's label record.
enum class PupilSource { builtin, labels };

struct PupilConfig {
    bool enabled = true;
    PupilSource source = PupilSource::builtin;
    PupilFailPolicy fail_policy = PupilFailPolicy::last_good;
    int roi_side_px = 240;
};

/// Empty path and empty bank mean the built-in 5-LED reference layout.
struct TemplateSourceConfig {
    std::string path;
    std::vector<std::string> bank;
};

struct EvalConfig {
    double thresh_px = 10.0;
};

struct PipelineConfig {
    int reference_width = 640;
    int reference_height = 480;
    EnhanceParams enhance;
    DetectParams detect;
    PupilConfig pupil;
    MatcherParams matcher;
    TemplateSourceConfig templ;
    bool post_id_resolve = false;
    EvalConfig eval;
    std::uint64_t seed = 0;

    void validate() const {
        if (reference_width < 1 || reference_height < 1) throw ConfigError("reference_size must be positive");
        if (pupil.roi_side_px < 1) throw ConfigError("pupil.roi_side_px must be >= 1");
        if (!(eval.thresh_px > 0.0)) throw ConfigError("eval.thresh_px must be > 0");
        try {
            enhance.validate();
            detect.validate();
            matcher.sla.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
};

NIGHTEYES_JSON_ENUM(EnhanceMethod, {{EnhanceMethod::tophat, "tophat"},
                                    {EnhanceMethod::dog, "dog"},
                                    {EnhanceMethod::highpass, "highpass"}})
NIGHTEYES_JSON_ENUM(ScoreMode, {{ScoreMode::basic, "basic"}, {ScoreMode::contrast_support, "contrast_support"}})
NIGHTEYES_JSON_ENUM(PupilSource, {{PupilSource::builtin, "builtin"}, {PupilSource::labels, "labels"}})
NIGHTEYES_JSON_ENUM(PupilFailPolicy, {{PupilFailPolicy::last_good, "last_good"},
                                      {PupilFailPolicy::full, "full"},
                                      {PupilFailPolicy::skip, "skip"}})
NIGHTEYES_JSON_ENUM(MatcherKind, {{MatcherKind::sla, "sla"},
                                  {MatcherKind::ransac, "ransac"},
                                  {MatcherKind::star, "star"},
                                  {MatcherKind::hybrid, "hybrid"}})
NIGHTEYES_JSON_ENUM(AssignmentMode, {{AssignmentMode::greedy, "greedy"}, {AssignmentMode::hungarian, "hungarian"}})

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(EnhanceParams, method, kernel_px, dog_sigma_ratio, clahe_enabled, clahe_clip,
                                   clahe_tiles, denoise_enabled)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ScoreWeights, peak, mean, compactness, area, local_contrast, dog)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(FallbackParams, enabled, pcts, pass_max, target, kernel_add)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(GateParams, border_enabled, border_margin_px, annulus_enabled, annulus_inner_k,
                                   annulus_outer_k, min_k, force)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(DetectParams, percentile, open_radius_px, min_area_px, max_area_frac, score_mode,
                                   weights_basic, weights_contrast, area_nominal_px2, area_sigma_px2,
                                   contrast_ring_px, contrast_cap, support_M, support_tol, support_w, fallback,
                                   cand_merge_eps, pool_N_max, gates)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(RatioTolerance, base, adaptive, kappa, min, max)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(SlaParams, eps, ratio_tol, pivot_P, max_seeds_per_pivot, max_seeds,
                                   grow_resid_max, min_inliers, scale_min, scale_max, semantic_prior,
                                   semantic_weight, mirror_reject, assignment_mode, w_app, w_res)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(RansacParams, iterations, seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(StarParams, ratio_tol)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(MatcherParams, kind, sla, ransac, star)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(PupilConfig, enabled, source, fail_policy, roi_side_px)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(TemplateSourceConfig, path, bank)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(EvalConfig, thresh_px)

inline void to_json(json& j, const PipelineConfig& c) {
    j = json{{"reference_size", {c.reference_width, c.reference_height}},
             {"enhance", c.enhance},
             {"detect", c.detect},
             {"pupil", c.pupil},
             {"matcher", c.matcher},
             {"template", c.templ},
             {"post_id_resolve", c.post_id_resolve},
             {"eval", c.eval},
             {"seed", c.seed}};
}

inline void from_json(const json& j, PipelineConfig& c) {
    const auto& rs = j.at("reference_size");
    if (!rs.is_array() || rs.size() != 2) throw ConfigError("reference_size must be [width, height]");
    c.reference_width = rs[0].get<int>();
    c.reference_height = rs[1].get<int>();
    j.at("enhance").get_to(c.enhance);
    j.at("detect").get_to(c.detect);
    j.at("pupil").get_to(c.pupil);
    j.at("matcher").get_to(c.matcher);
    j.at("template").get_to(c.templ);
    j.at("post_id_resolve").get_to(c.post_id_resolve);
    j.at("eval").get_to(c.eval);
    j.at("seed").get_to(c.seed);
}

namespace detail {

/// Every object key in `user` must exist in `defaults`; objects are merged
/// recursively, everything else replaces. Keys starting with '_' are
/// comments and ignored.
inline void merge_strict(json& defaults, const json& user, const std::string& path) {
    if (!user.is_object()) throw ConfigError("config: expected an object at '" + (path.empty() ? "." : path) + "'");
    for (const auto& [k, v] : user.items()) {
        if (!k.empty() && k[0] == '_') continue;
        const std::string here = path.empty() ? k : path + "." + k;
        if (!defaults.contains(k)) throw ConfigError("config: unknown key '" + here + "'");
        auto& d = defaults[k];
        if (d.is_object()) {
            merge_strict(d, v, here);
        } else {
            d = v;
        }
    }
}

inline PipelineConfig config_from_tree(const json& tree) {
    PipelineConfig c;
    try {
        c = tree.get<PipelineConfig>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

}  // namespace detail

/// Applies a partial JSON document on top of the defaults.
inline PipelineConfig config_from_json(const json& user) {
    json tree = PipelineConfig{};
    detail::merge_strict(tree, user, "");
    return detail::config_from_tree(tree);
}

inline json config_to_json(const PipelineConfig& c) { return c; }

inline PipelineConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    json j;
    try {
        j = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError("config: " + path + ": " + e.what());
    }
    return config_from_json(j);
}

/// Parses an override value: JSON literal when it parses, bare string
/// otherwise ("99,98,97" is read as a number list).
inline json parse_override_value(const std::string& v) {
    try {
        return json::parse(v);
    } catch (const json::parse_error&) {
    }
    if (v.find(',') != std::string::npos) {
        try {
            return json::parse("[" + v + "]");
        } catch (const json::parse_error&) {
        }
    }
    return v;
}

/// Sets a dotted key ("matcher.sla.eps") on a config. Unknown keys throw.
inline PipelineConfig apply_override(const PipelineConfig& c, const std::string& dotted, const std::string& value) {
    json patch = json::object();
    json* cur = &patch;
    std::stringstream ss(dotted);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    if (parts.empty() || std::any_of(parts.begin(), parts.end(), [](const auto& s) { return s.empty(); })) {
        throw ConfigError("config: malformed key '" + dotted + "'");
    }
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) cur = &((*cur)[parts[i]] = json::object());
    (*cur)[parts.back()] = parse_override_value(value);
    json tree = c;
    detail::merge_strict(tree, patch, "");
    return detail::config_from_tree(tree);
}

/// "key=value" form used by --set flags.
inline PipelineConfig apply_assignment(const PipelineConfig& c, const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("config: expected key=value, got '" + kv + "'");
    return apply_override(c, kv.substr(0, eq), kv.substr(eq + 1));
}

/// NIGHTEYES_MATCHER__SLA__EPS=4 -> matcher.sla.eps = 4. Variables that do not
/// name a config key are rejected.
inline PipelineConfig apply_env_overrides(PipelineConfig c, char** envp) {
    constexpr std::string_view prefix = "NIGHTEYES_";
    if (!envp) return c;
    std::vector<std::pair<std::string, std::string>> found;
    for (char** e = envp; *e; ++e) {
        std::string_view s(*e);
        if (!s.starts_with(prefix)) continue;
        const auto eq = s.find('=');
        if (eq == std::string_view::npos) continue;
        std::string key(s.substr(prefix.size(), eq - prefix.size()));
        if (key.find("__") == std::string::npos && key != "SEED" && key != "POST_ID_RESOLVE") continue;
        std::string dotted;
        for (std::size_t i = 0; i < key.size(); ++i) {
            if (key[i] == '_' && i + 1 < key.size() && key[i + 1] == '_') {
                dotted += '.';
                ++i;
            } else {
                dotted += static_cast<char>(std::tolower(static_cast<unsigned char>(key[i])));
            }
        }
        found.emplace_back(dotted, std::string(s.substr(eq + 1)));
    }
    std::sort(found.begin(), found.end());
    for (const auto& [k, v] : found) c = apply_override(c, k, v);
    return c;
}

/// FNV-1a 64 over the canonical JSON dump (keys sorted).
inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string config_hash(const PipelineConfig& c) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(config_to_json(c).dump())));
    return buf;
}

/// Nearest odd integer, at least 3.
inline int round_odd(double v) {
    const long n = std::lround((v - 1.0) / 2.0) * 2 + 1;
    return static_cast<int>(std::max(3L, n));
}

/// Nearest even integer, at least 0.
inline int round_even(double v) {
    return static_cast<int>(std::max(0L, std::lround(v / 2.0) * 2));
}

/// Rescales every pixel-denominated parameter by diag(image)/diag(reference).
/// Areas scale by the square; kernels stay odd; the evaluation threshold is
/// a metric definition and is left alone.
inline PipelineConfig scale_params(const PipelineConfig& c, int width, int height) {
    if (width < 1 || height < 1) throw std::invalid_argument("scale_params: image size must be positive");
    if (width == c.reference_width && height == c.reference_height) return c;
    const double f = std::hypot(static_cast<double>(width), static_cast<double>(height)) /
                     std::hypot(static_cast<double>(c.reference_width), static_cast<double>(c.reference_height));
    const double f2 = f * f;
    PipelineConfig s = c;
    s.enhance.kernel_px = round_odd(c.enhance.kernel_px * f);
    s.detect.open_radius_px = static_cast<int>(std::lround(c.detect.open_radius_px * f));
    s.detect.min_area_px = c.detect.min_area_px * f2;
    s.detect.area_nominal_px2 = c.detect.area_nominal_px2 * f2;
    s.detect.area_sigma_px2 = c.detect.area_sigma_px2 * f2;
    s.detect.contrast_ring_px = c.detect.contrast_ring_px * f;
    s.detect.cand_merge_eps = c.detect.cand_merge_eps * f;
    s.detect.fallback.kernel_add = round_even(c.detect.fallback.kernel_add * f);
    s.detect.gates.border_margin_px = c.detect.gates.border_margin_px * f;
    s.pupil.roi_side_px = std::max(1, static_cast<int>(std::lround(c.pupil.roi_side_px * f)));
    s.matcher.sla.eps = c.matcher.sla.eps * f;
    s.matcher.sla.grow_resid_max = c.matcher.sla.grow_resid_max * f;
    s.matcher.sla.scale_min = c.matcher.sla.scale_min * f;
    s.matcher.sla.scale_max = c.matcher.sla.scale_max * f;
    return s;
}

}  // namespace nighteyes
