#pragma once

// Per-frame pipeline, dataset discovery, batch runs and sweeps.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "nighteyes/candidates.hpp"
#include "nighteyes/config.hpp"
#include "nighteyes/enhance.hpp"
#include "nighteyes/errors.hpp"
#include "nighteyes/eval.hpp"
#include "nighteyes/io.hpp"
#include "nighteyes/matchers.hpp"
#include "nighteyes/synth.hpp"
#include "nighteyes/template.hpp"

#ifndef NIGHTEYES_VERSION
#define NIGHTEYES_VERSION "0.0.0"
#endif

namespace nighteyes {

// -- templates ---------------------------------------------------------------

/// Templates plus their ratio indices. `bank` selects argmax scoring even for
/// a bank of one.
struct TemplateSet {
    std::vector<Template> templates;
    std::vector<RatioIndex> indices;
    bool bank = false;

    static TemplateSet single(Template t) {
        TemplateSet s;
        s.indices.push_back(build_ratio_index(t));
        s.templates.push_back(std::move(t));
        return s;
    }
    static TemplateSet from_bank(const TemplateBank& b) {
        TemplateSet s;
        for (const auto& t : b.templates()) {
            s.indices.push_back(build_ratio_index(t));
            s.templates.push_back(t);
        }
        s.bank = true;
        return s;
    }
    const Template& primary() const { return templates.front(); }
};

/// Relative template paths resolve against `base`.
inline TemplateSet load_templates(const TemplateSourceConfig& src, const fs::path& base = {}) {
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() || base.empty() ? fs::path(p) : base / p; };
    if (!src.bank.empty()) {
        std::vector<Template> ts;
        for (const auto& p : src.bank) ts.push_back(load_template(resolve(p)));
        return TemplateSet::from_bank(TemplateBank(std::move(ts)));
    }
    if (!src.path.empty()) return TemplateSet::single(load_template(resolve(src.path)));
    return TemplateSet::single(reference_template_5());
}

// -- per-frame ---------------------------------------------------------------

enum class Stage {
    gray,
    scale_params,
    pupil_roi,
    detect,
    fallback,
    map_to_full,
    pool,
    border_gate,
    annulus_gate,
    match,
    resolve_identity,
    metrics
};

inline const char* to_string(Stage s) {
    switch (s) {
        case Stage::gray: return "gray";
        case Stage::scale_params: return "scale_params";
        case Stage::pupil_roi: return "pupil_roi";
        case Stage::detect: return "detect";
        case Stage::fallback: return "fallback";
        case Stage::map_to_full: return "map_to_full";
        case Stage::pool: return "pool";
        case Stage::border_gate: return "border_gate";
        case Stage::annulus_gate: return "annulus_gate";
        case Stage::match: return "match";
        case Stage::resolve_identity: return "resolve_identity";
        case Stage::metrics: return "metrics";
    }
    return "?";
}

/// One entry per stage reached, in execution order. `applied` is false when
/// the stage was reached but disabled or not applicable; `candidates` is the
/// candidate count after the stage.
struct StageEvent {
    Stage stage;
    bool applied = true;
    std::size_t candidates = 0;
};

struct FramePrediction {
    std::string frame_id;
    std::string subject;
    bool skipped = false;
    std::string skip_reason;
    std::string failure;  ///< empty when a match was produced
    std::map<int, PointPx> glints;     ///< led -> matched candidate center
    std::map<int, PointPx> projected;  ///< led -> template projection, all LEDs
    std::vector<Candidate> candidates;  ///< after gating, full-frame coordinates
    std::string matcher;
    std::string template_name;
    std::optional<SimilarityTransform> transform;
    int inliers = 0;
    std::optional<double> median_residual;
    std::optional<double> max_residual;
    std::optional<PointPx> pupil_center;
    std::optional<double> pupil_radius;
    std::optional<FrameCounts> counts;
    std::vector<StageEvent> trace;

    bool matched() const { return transform.has_value(); }
};

struct FrameInput {
    const GrayImage* image = nullptr;
    const FrameLabels* labels = nullptr;  ///< optional
    std::string frame_id;
    std::string subject;
};

namespace detail {

inline std::optional<GateCircle> resolve_gate_circle(const PupilState& st, const RoiDecision& roi, bool roi_active,
                                                     int roi_side) {
    if (st.valid && st.center && st.radius) return GateCircle{*st.center, *st.radius};
    // last-good ROI without a fresh radius: ROI side is three pupil diameters
    if (roi_active && roi.roi_center) return GateCircle{*roi.roi_center, roi_side / 6.0};
    return std::nullopt;
}

}  // namespace detail

/// Runs one frame through the staged pipeline. `pupil` is the recording's
/// pupil memory and is updated in place.
inline FramePrediction run_frame(const FrameInput& in, const PipelineConfig& cfg, PupilState& pupil,
                                 const TemplateSet& templates, const PupilDetector& detector = detect_pupil_darkest) {
    if (!in.image) throw std::invalid_argument("run_frame: no image");
    const GrayImage& gray = *in.image;
    FramePrediction out;
    out.frame_id = in.frame_id;
    out.subject = in.subject;
    auto log = [&](Stage s, bool applied, std::size_t n) { out.trace.push_back({s, applied, n}); };
    log(Stage::gray, true, 0);
    const PipelineConfig th = scale_params(cfg, gray.width(), gray.height());
    log(Stage::scale_params, th.reference_width != gray.width() || th.reference_height != gray.height(), 0);

    const int W = gray.width(), H = gray.height();
    bool roi_active = false;
    RoiDecision roi;
    if (th.pupil.enabled) {
        PupilObservation obs;
        if (th.pupil.source == PupilSource::labels) {
            if (in.labels && in.labels->pupil_center && in.labels->pupil_radius) {
                obs.center = in.labels->pupil_center;
                obs.radius = in.labels->pupil_radius;
                obs.ok = true;
            }
        } else {
            obs = detector(gray);
        }
        pupil.observe(obs);
        if (pupil.valid) {
            out.pupil_center = pupil.center;
            out.pupil_radius = pupil.radius;
        }
        roi = resolve_pupil_roi(pupil, th.pupil.fail_policy, th.pupil.roi_side_px, W, H);
        log(Stage::pupil_roi, true, 0);
        if (roi.action == RoiAction::skip) {
            out.skipped = true;
            out.skip_reason = "pupil invalid (fail_policy=skip)";
            if (in.labels) {
                out.counts = evaluate_frame({}, *in.labels, th.eval.thresh_px);
                out.counts->frame_id = out.frame_id;
                out.counts->subject = out.subject;
                log(Stage::metrics, true, 0);
            }
            return out;
        }
        roi_active = roi.action == RoiAction::use;
    } else {
        log(Stage::pupil_roi, false, 0);
    }

    const GrayImage work = roi_active ? gray.crop(roi.x0, roi.y0, roi.width, roi.height) : GrayImage{};
    const GrayImage& det = roi_active ? work : gray;
    const RatioIndex* support = &templates.indices.front();
    auto first = detect_one_pass(det, th.enhance, th.detect, support);
    log(Stage::detect, true, first.candidates.size());
    auto fb = fallback_passes(det, th.enhance, th.detect, support, std::move(first));
    log(Stage::fallback, fb.passes_run > 0, fb.candidates.size());
    std::vector<Candidate> cands = std::move(fb.candidates);
    if (roi_active) cands = map_to_full_and_in_bounds(std::move(cands), roi.offset(), W, H);
    log(Stage::map_to_full, roi_active, cands.size());
    cands = pool_top_n(std::move(cands), th.detect.pool_N_max);
    log(Stage::pool, true, cands.size());
    const auto& g = th.detect.gates;
    if (g.border_enabled) cands = filter_candidates_border(std::move(cands), g.border_margin_px, W, H);
    log(Stage::border_gate, g.border_enabled, cands.size());
    const auto circle = detail::resolve_gate_circle(pupil, roi, roi_active, th.pupil.roi_side_px);
    const bool annulus = g.annulus_enabled && th.pupil.enabled && circle && circle->radius > 0.0;
    if (annulus) cands = annulus_gate(std::move(cands), g, *circle);
    log(Stage::annulus_gate, annulus, cands.size());
    out.candidates = cands;

    // single template or bank argmax (first best wins ties)
    MatchOutcome best = MatchOutcome::fail("no template");
    std::size_t best_t = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < templates.templates.size(); ++t) {
        auto r = run_matcher(templates.templates[t], templates.indices[t], cands, th.matcher);
        if (!templates.bank) {
            best = std::move(r);
            break;
        }
        const double s = score_match_result(r, th.matcher.sla.eps);
        if (t == 0 || s > best_score) {
            best_score = s;
            best = std::move(r);
            best_t = t;
        }
    }
    log(Stage::match, true, cands.size());
    const Template& T = templates.templates[best_t];
    out.template_name = T.name();
    bool resolved = false;
    if (best.match) {
        MatchResult m = *best.match;
        if (th.post_id_resolve && T.size() == 5 && m.assignment.size() == 5) {
            m = resolve_identity_permutation(m, T, cands, th.matcher.sla);
            resolved = true;
        }
        out.matcher = m.matcher;
        out.transform = m.transform;
        out.inliers = m.inliers;
        out.median_residual = m.median_residual;
        out.max_residual = m.max_residual;
        for (const auto& [id, ci] : m.assignment) out.glints[id] = cands[static_cast<std::size_t>(ci)].center;
        for (std::size_t k = 0; k < T.size(); ++k) out.projected[T.led_id(k)] = m.transform.apply(T.point(k));
    } else {
        out.matcher = to_string(th.matcher.kind);
        out.failure = best.failure.empty() ? "match failed" : best.failure;
    }
    log(Stage::resolve_identity, resolved, cands.size());
    if (in.labels) {
        out.counts = evaluate_frame(out.glints, *in.labels, th.eval.thresh_px);
        out.counts->frame_id = out.frame_id;
        out.counts->subject = out.subject;
        log(Stage::metrics, true, cands.size());
    }
    return out;
}

inline json prediction_to_json(const FramePrediction& p) {
    json j{{"schema_version", kSchemaVersion}, {"frame_id", p.frame_id}};
    if (!p.subject.empty()) j["subject"] = p.subject;
    j["skipped"] = p.skipped;
    if (p.skipped) j["skip_reason"] = p.skip_reason;
    if (!p.failure.empty()) j["failure"] = p.failure;
    json g = json::object(), pr = json::object();
    for (const auto& [id, q] : p.glints) g[std::to_string(id)] = point_json(q);
    for (const auto& [id, q] : p.projected) pr[std::to_string(id)] = point_json(q);
    j["glints"] = g;
    j["projected"] = pr;
    json c = json::array();
    for (const auto& cd : p.candidates) c.push_back({{"x", cd.center.x}, {"y", cd.center.y}, {"score", cd.score}});
    j["candidates"] = c;
    j["matcher"] = p.matcher;
    j["template"] = p.template_name;
    if (p.transform) {
        j["transform"] = {{"scale", p.transform->scale()},
                          {"rotation", p.transform->rotation()},
                          {"translation", point_json(p.transform->translation())},
                          {"mirror", p.transform->mirror()}};
        j["inliers"] = p.inliers;
        j["median_residual"] = *p.median_residual;
        j["max_residual"] = *p.max_residual;
    }
    if (p.pupil_center) j["pupil"] = {{"center", point_json(*p.pupil_center)}, {"radius", *p.pupil_radius}};
    return j;
}

// -- datasets ----------------------------------------------------------------

struct FrameRef {
    std::string frame_id;  ///< path relative to the dataset root, '/' separated
    std::string subject;
    fs::path path;
    std::optional<FrameLabels> labels;
};

/// Frames of one recording, processed in order.
struct Recording {
    std::string name;
    std::vector<FrameRef> frames;
};

enum class DatasetLayout { generic, reference };

struct Dataset {
    fs::path root;
    DatasetLayout layout = DatasetLayout::generic;
    std::vector<Recording> recordings;

    std::size_t frame_count() const {
        std::size_t n = 0;
        for (const auto& r : recordings) n += r.frames.size();
        return n;
    }
};

namespace detail {

inline std::vector<fs::path> sorted_images(const fs::path& dir) {
    std::vector<fs::path> v;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && is_image_path(e.path())) v.push_back(e.path());
    }
    std::sort(v.begin(), v.end());
    return v;
}

inline std::map<std::string, LabelRecord> read_label_sidecar(const fs::path& dir) {
    std::map<std::string, LabelRecord> m;
    const auto p = dir / "labels.jsonl";
    if (!fs::exists(p)) return m;
    for (const auto& j : read_records(p)) {
        auto r = label_from_json(j);
        m[r.frame] = std::move(r);
    }
    return m;
}

inline Recording recording_from_dir(const fs::path& root, const fs::path& dir, const std::string& subject) {
    Recording rec;
    rec.name = subject.empty() ? "." : subject;
    const auto labels = read_label_sidecar(dir);
    for (const auto& img : sorted_images(dir)) {
        FrameRef f;
        f.path = img;
        f.frame_id = fs::relative(img, root).generic_string();
        f.subject = subject;
        auto it = labels.find(img.filename().string());
        if (it == labels.end()) it = labels.find(f.frame_id);
        if (it != labels.end()) {
            f.labels = it->second.labels;
            if (f.subject.empty()) f.subject = it->second.subject;
        }
        rec.frames.push_back(std::move(f));
    }
    return rec;
}

}  // namespace detail

/// Generic layout: images with an optional labels.jsonl in the root, one
/// recording. Reference layout: no images in the root, one subdirectory per
/// subject, each with images and labels.jsonl; each subject is a recording.
inline Dataset discover_dataset(const fs::path& root) {
    if (!fs::is_directory(root)) throw NoFramesError("no frames found: '" + root.string() + "' is not a directory");
    Dataset ds;
    ds.root = root;
    auto top = detail::recording_from_dir(root, root, "");
    if (!top.frames.empty()) {
        ds.layout = DatasetLayout::generic;
        // a recording per subject when the sidecar names subjects
        std::map<std::string, Recording> by_subject;
        for (auto& f : top.frames) {
            auto& r = by_subject[f.subject];
            r.name = f.subject.empty() ? "." : f.subject;
            r.frames.push_back(std::move(f));
        }
        for (auto& [_, r] : by_subject) ds.recordings.push_back(std::move(r));
    } else {
        ds.layout = DatasetLayout::reference;
        std::vector<fs::path> dirs;
        for (const auto& e : fs::directory_iterator(root)) {
            if (e.is_directory()) dirs.push_back(e.path());
        }
        std::sort(dirs.begin(), dirs.end());
        for (const auto& d : dirs) {
            auto rec = detail::recording_from_dir(root, d, d.filename().string());
            if (!rec.frames.empty()) ds.recordings.push_back(std::move(rec));
        }
    }
    if (ds.frame_count() == 0) throw NoFramesError("no frames found under '" + root.string() + "'");
    return ds;
}

// -- batch -------------------------------------------------------------------

struct BatchResult {
    std::vector<FramePrediction> predictions;  ///< dataset order
    std::vector<FrameCounts> counts;           ///< labeled frames only
    std::optional<MetricsReport> metrics;
};

inline json report_to_json(const MetricsReport& r) {
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    return {{"accuracy", opt(r.accuracy)},       {"precision", opt(r.precision)},
            {"idf_accuracy", opt(r.idf_accuracy)}, {"mean_err", opt(r.mean_err)},
            {"median_err", opt(r.median_err)},   {"n_images", r.n_images},
            {"present", r.present},              {"predicted", r.predicted},
            {"correct", r.correct},              {"idf_matched", r.idf_matched},
            {"idf_present", r.idf_present}};
}

/// Runs recordings concurrently (`threads` workers, 0 = hardware), frames
/// within a recording in order. Output order is the dataset order.
inline BatchResult run_dataset(const Dataset& ds, const PipelineConfig& cfg, const TemplateSet& templates,
                               unsigned threads = 0) {
    std::vector<std::size_t> offset(ds.recordings.size() + 1, 0);
    for (std::size_t r = 0; r < ds.recordings.size(); ++r) offset[r + 1] = offset[r] + ds.recordings[r].frames.size();
    BatchResult res;
    res.predictions.resize(offset.back());
    std::vector<std::string> errors(ds.recordings.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t r = next++; r < ds.recordings.size(); r = next++) {
            try {
                PupilState pupil;
                const auto& rec = ds.recordings[r];
                for (std::size_t i = 0; i < rec.frames.size(); ++i) {
                    const auto& f = rec.frames[i];
                    const GrayImage img = read_gray(f.path);
                    FrameInput in{&img, f.labels ? &*f.labels : nullptr, f.frame_id, f.subject};
                    res.predictions[offset[r] + i] = run_frame(in, cfg, pupil, templates);
                }
            } catch (const std::exception& e) {
                errors[r] = e.what();
            }
        }
    };
    unsigned n = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
    n = static_cast<unsigned>(std::min<std::size_t>(n, ds.recordings.size()));
    if (n <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors) {
        if (!e.empty()) throw Error(e);
    }
    for (const auto& p : res.predictions) {
        if (p.counts) res.counts.push_back(*p.counts);
    }
    if (!res.counts.empty()) res.metrics = aggregate_all(res.counts);
    return res;
}

inline json run_manifest(const PipelineConfig& cfg, const Dataset& ds) {
    return {{"schema_version", kSchemaVersion},
            {"code_version", NIGHTEYES_VERSION},
            {"config_hash", config_hash(cfg)},
            {"seed", cfg.seed},
            {"dataset_root", ds.root.generic_string()},
            {"dataset_layout", ds.layout == DatasetLayout::generic ? "generic" : "reference"},
            {"n_frames", ds.frame_count()},
            {"config", config_to_json(cfg)}};
}

/// Writes predictions.jsonl, metrics.json, per_glint.tsv and manifest.json
/// into `out_dir`. Nothing written depends on timing or thread count.
inline BatchResult run_batch(const fs::path& root, const PipelineConfig& cfg, const fs::path& out_dir,
                             unsigned threads = 0, const fs::path& template_base = {}) {
    const Dataset ds = discover_dataset(root);
    const TemplateSet templates = load_templates(cfg.templ, template_base);
    BatchResult res = run_dataset(ds, cfg, templates, threads);
    fs::create_directories(out_dir);
    {
        std::ofstream out(out_dir / "predictions.jsonl", std::ios::trunc);
        if (!out) throw Error("cannot write predictions to '" + out_dir.string() + "'");
        for (const auto& p : res.predictions) out << record_line(prediction_to_json(p));
    }
    json metrics = json::object();
    if (res.metrics) {
        metrics["all"] = report_to_json(*res.metrics);
        json subj = json::object(), led = json::object();
        for (const auto& [k, r] : aggregate(res.counts, GroupBy::subject)) subj[k] = report_to_json(r);
        for (const auto& [k, r] : aggregate(res.counts, GroupBy::led)) led[k] = report_to_json(r);
        metrics["by_subject"] = subj;
        metrics["by_led"] = led;
    }
    {
        std::ofstream out(out_dir / "metrics.json", std::ios::trunc);
        out << metrics.dump(2) << "\n";
    }
    {
        std::ofstream out(out_dir / "per_glint.tsv", std::ios::trunc);
        out << per_glint_table(res.counts);
    }
    {
        std::ofstream out(out_dir / "manifest.json", std::ios::trunc);
        out << run_manifest(cfg, ds).dump(2) << "\n";
    }
    return res;
}

// -- synthetic datasets ------------------------------------------------------

/// Renders `n` scenes (seeds seed0, seed0+1, ...) as PNG frames with a
/// labels.jsonl sidecar holding the generator truth.
inline void write_synth_dataset(const fs::path& dir, SceneSpec spec, int n, std::uint64_t seed0) {
    fs::create_directories(dir);
    spec.render = true;
    std::vector<json> labels;
    for (int i = 0; i < n; ++i) {
        spec.rng_seed = seed0 + static_cast<std::uint64_t>(i);
        const auto sc = generate_scene(spec);
        char name[32];
        std::snprintf(name, sizeof name, "frame_%05d.png", i);
        write_png(dir / name, *sc.frame);
        LabelRecord lr;
        lr.frame = name;
        lr.labels = sc.labels();
        labels.push_back(label_to_json(lr));
    }
    write_records(dir / "labels.jsonl", labels);
}

// -- sweeps ------------------------------------------------------------------

struct SweepWeights {
    double accuracy = 0.5;
    double precision = 0.3;
    double median_err = 0.2;  ///< applied to -median_err / 10 px
};

struct SweepRun {
    std::string run_id;
    PipelineConfig config;
    json overrides = json::object();
};

struct SweepRow {
    std::string run_id;
    std::string matcher;
    std::optional<double> accuracy, precision, idf_accuracy, median_err;
    double score = 0.0;
    int ties = 1;
    std::vector<std::string> tied_runs;
};

struct SweepTable {
    std::vector<SweepRow> runs;       ///< every run, in execution order
    std::vector<SweepRow> collapsed;  ///< unique metric tuples, ranked
};

/// Sweep spec: {"base": {config patch}, "grid": {"dotted.key": [values]}}
/// for a Cartesian grid (keys in sorted order) or {"base": ..., "configs":
/// [{config patch}, ...]} for an explicit list.
inline std::vector<SweepRun> expand_sweep(const json& spec, const PipelineConfig& defaults = {}) {
    PipelineConfig base = defaults;
    if (spec.contains("base")) {
        json tree = defaults;
        detail::merge_strict(tree, spec.at("base"), "");
        base = detail::config_from_tree(tree);
    }
    std::vector<SweepRun> runs;
    auto id = [](std::size_t i) {
        char b[16];
        std::snprintf(b, sizeof b, "run_%03zu", i);
        return std::string(b);
    };
    if (spec.contains("configs")) {
        for (const auto& patch : spec.at("configs")) {
            json tree = base;
            detail::merge_strict(tree, patch, "");
            runs.push_back({id(runs.size()), detail::config_from_tree(tree), patch});
        }
    } else if (spec.contains("grid")) {
        std::vector<std::pair<std::string, json>> axes;
        for (const auto& [k, v] : spec.at("grid").items()) {
            if (!v.is_array() || v.empty()) throw ConfigError("sweep: grid axis '" + k + "' must be a non-empty list");
            axes.emplace_back(k, v);
        }
        std::vector<std::size_t> at(axes.size(), 0);
        while (true) {
            PipelineConfig c = base;
            json ov = json::object();
            for (std::size_t a = 0; a < axes.size(); ++a) {
                const auto& v = axes[a].second[at[a]];
                c = apply_override(c, axes[a].first, v.dump());
                ov[axes[a].first] = v;
            }
            runs.push_back({id(runs.size()), c, ov});
            std::size_t a = axes.size();
            while (a > 0) {
                --a;
                if (++at[a] < axes[a].second.size()) break;
                at[a] = 0;
                if (a == 0) return runs;
            }
            if (axes.empty()) return runs;
        }
    } else {
        runs.push_back({id(0), base, json::object()});
    }
    return runs;
}

inline double sweep_score(const SweepRow& r, const SweepWeights& w) {
    return w.accuracy * r.accuracy.value_or(0.0) + w.precision * r.precision.value_or(0.0) -
           w.median_err * (r.median_err.value_or(10.0) / 10.0);
}

/// Ranks by score (desc, then run id), collapsing runs whose metric tuples
/// are identical into one row with a tie count.
inline SweepTable rank_sweep(std::vector<SweepRow> rows, const SweepWeights& w) {
    SweepTable t;
    for (auto& r : rows) r.score = sweep_score(r, w);
    t.runs = rows;
    std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.run_id < b.run_id;
    });
    for (const auto& r : rows) {
        auto same = [&](const SweepRow& c) {
            return c.accuracy == r.accuracy && c.precision == r.precision && c.idf_accuracy == r.idf_accuracy &&
                   c.median_err == r.median_err;
        };
        auto it = std::find_if(t.collapsed.begin(), t.collapsed.end(), same);
        if (it == t.collapsed.end()) {
            t.collapsed.push_back(r);
            t.collapsed.back().tied_runs = {r.run_id};
        } else {
            ++it->ties;
            it->tied_runs.push_back(r.run_id);
        }
    }
    return t;
}

inline SweepRow row_from_batch(const std::string& run_id, const PipelineConfig& cfg, const BatchResult& b) {
    SweepRow r;
    r.run_id = run_id;
    r.matcher = to_string(cfg.matcher.kind);
    if (b.metrics) {
        r.accuracy = b.metrics->accuracy;
        r.precision = b.metrics->precision;
        r.idf_accuracy = b.metrics->idf_accuracy;
        r.median_err = b.metrics->median_err;
    }
    return r;
}

/// Runs every sweep configuration on one dataset.
inline SweepTable run_sweep(const std::vector<SweepRun>& runs, const Dataset& ds, const SweepWeights& w = {},
                            unsigned threads = 0, const fs::path& template_base = {}) {
    std::vector<SweepRow> rows;
    for (const auto& run : runs) {
        const auto templates = load_templates(run.config.templ, template_base);
        rows.push_back(row_from_batch(run.run_id, run.config, run_dataset(ds, run.config, templates, threads)));
    }
    return rank_sweep(std::move(rows), w);
}

/// Columns: Run ID | Matcher | Acc. | Prec. | ID-free Acc. | Med. Err. (px) | Score | Ties
inline std::string format_sweep_table(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    os << "Run ID\tMatcher\tAcc.\tPrec.\tID-free Acc.\tMed. Err. (px)\tScore\tTies\n";
    for (const auto& r : rows) {
        char score[32];
        std::snprintf(score, sizeof score, "%.4f", r.score);
        os << r.run_id << '\t' << r.matcher << '\t' << format_metric(r.accuracy) << '\t' << format_metric(r.precision)
           << '\t' << format_metric(r.idf_accuracy) << '\t' << format_metric(r.median_err, 2) << '\t' << score << '\t'
           << r.ties << '\n';
    }
    return os.str();
}

}  // namespace nighteyes
