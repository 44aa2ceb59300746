#pragma once

// Per-frame and aggregate correspondence metrics.

#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "nighteyes/assignment.hpp"
#include "nighteyes/geometry.hpp"

namespace nighteyes {

struct FrameLabels {
    std::map<int, PointPx> glints;  ///< absent id = glint not visible
    std::optional<PointPx> pupil_center;
    std::optional<double> pupil_radius;
};

struct LedCounts {
    bool present = false;
    bool predicted = false;
    bool correct = false;
    std::optional<double> error_px;  ///< set iff present and predicted
};

struct FrameCounts {
    std::string frame_id;
    std::string subject;
    std::map<int, LedCounts> per_led;
    int idf_matched = 0;
    int idf_present = 0;
    int idf_predicted = 0;
};

struct IdentityFreeMatch {
    int matched = 0;
    double cost = 0.0;
};

/// Maximum-cardinality, then minimum-distance matching between two point
/// sets, ignoring identities; pairs farther than `thresh` are forbidden.
inline IdentityFreeMatch identity_free_match(std::span<const PointPx> pred, std::span<const PointPx> truth,
                                             double thresh) {
    IdentityFreeMatch m;
    if (pred.empty() || truth.empty()) return m;
    std::vector<std::vector<double>> cost(pred.size(), std::vector<double>(truth.size(), kForbidden));
    for (std::size_t i = 0; i < pred.size(); ++i) {
        for (std::size_t j = 0; j < truth.size(); ++j) {
            const double d = distance(pred[i], truth[j]);
            if (d <= thresh) cost[i][j] = d;
        }
    }
    const auto a = solve_assignment(cost);
    m.matched = static_cast<int>(a.matched);
    m.cost = a.cost;
    return m;
}

inline FrameCounts evaluate_frame(const std::map<int, PointPx>& pred, const FrameLabels& labels,
                                  double thresh_px = 10.0) {
    if (!(thresh_px > 0.0)) throw std::invalid_argument("evaluate_frame: thresh_px must be > 0");
    FrameCounts fc;
    for (const auto& [id, p] : labels.glints) fc.per_led[id].present = true;
    for (const auto& [id, p] : pred) fc.per_led[id].predicted = true;
    for (auto& [id, c] : fc.per_led) {
        if (c.present && c.predicted) {
            const double d = distance(pred.at(id), labels.glints.at(id));
            c.error_px = d;
            c.correct = d <= thresh_px;
        }
    }
    std::vector<PointPx> pp, tp;
    for (const auto& [_, p] : pred) pp.push_back(p);
    for (const auto& [_, p] : labels.glints) tp.push_back(p);
    fc.idf_matched = identity_free_match(pp, tp, thresh_px).matched;
    fc.idf_present = static_cast<int>(tp.size());
    fc.idf_predicted = static_cast<int>(pp.size());
    return fc;
}

/// Ratios are nullopt ("undefined") when their denominator is zero.
struct MetricsReport {
    std::optional<double> accuracy;
    std::optional<double> precision;
    std::optional<double> idf_accuracy;
    std::optional<double> mean_err;
    std::optional<double> median_err;
    std::size_t n_images = 0;
    long present = 0;
    long predicted = 0;
    long correct = 0;
    long idf_matched = 0;
    long idf_present = 0;
};

/// Fold of raw counts; finish() turns sums into ratios.
struct MetricsAccumulator {
    long present = 0, predicted = 0, correct = 0, idf_matched = 0, idf_present = 0;
    bool idf_defined = true;
    std::vector<double> errors;
    std::size_t n_images = 0;

    void add_led(const LedCounts& c) {
        present += c.present;
        predicted += c.predicted;
        correct += c.correct;
        if (c.error_px) errors.push_back(*c.error_px);
    }
    void add_frame(const FrameCounts& f) {
        for (const auto& [_, c] : f.per_led) add_led(c);
        idf_matched += f.idf_matched;
        idf_present += f.idf_present;
        ++n_images;
    }

    MetricsReport finish() const {
        MetricsReport r;
        r.n_images = n_images;
        r.present = present;
        r.predicted = predicted;
        r.correct = correct;
        r.idf_matched = idf_matched;
        r.idf_present = idf_present;
        if (present > 0) r.accuracy = static_cast<double>(correct) / static_cast<double>(present);
        if (predicted > 0) r.precision = static_cast<double>(correct) / static_cast<double>(predicted);
        if (idf_defined && idf_present > 0) r.idf_accuracy = static_cast<double>(idf_matched) / static_cast<double>(idf_present);
        if (!errors.empty()) {
            double s = 0.0;
            for (double e : errors) s += e;
            r.mean_err = s / static_cast<double>(errors.size());
            r.median_err = median_of(errors);
        }
        return r;
    }
};

/// Report directly from per-LED totals (e.g. a published breakdown row).
inline MetricsReport metrics_from_counts(long present, long predicted, long correct) {
    MetricsAccumulator acc;
    acc.present = present;
    acc.predicted = predicted;
    acc.correct = correct;
    acc.idf_defined = false;
    return acc.finish();
}

enum class GroupBy { none, led, subject };

/// Groups are keyed "all", the LED id, or the subject name. Identity-free
/// accuracy is a per-frame quantity and stays undefined in per-LED groups.
inline std::map<std::string, MetricsReport> aggregate(std::span<const FrameCounts> frames, GroupBy group_by) {
    if (frames.empty()) throw std::invalid_argument("aggregate: empty frame list");
    std::map<std::string, MetricsAccumulator> acc;
    for (const auto& f : frames) {
        switch (group_by) {
            case GroupBy::none: acc["all"].add_frame(f); break;
            case GroupBy::subject: acc[f.subject].add_frame(f); break;
            case GroupBy::led:
                for (const auto& [id, c] : f.per_led) {
                    auto& a = acc[std::to_string(id)];
                    a.idf_defined = false;
                    a.add_led(c);
                    ++a.n_images;
                }
                break;
        }
    }
    std::map<std::string, MetricsReport> out;
    for (const auto& [k, a] : acc) out[k] = a.finish();
    return out;
}

inline MetricsReport aggregate_all(std::span<const FrameCounts> frames) {
    return aggregate(frames, GroupBy::none).at("all");
}

inline std::string format_metric(const std::optional<double>& v, int precision = 3) {
    if (!v) return "undefined";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, *v);
    return buf;
}

/// Per-glint table with columns Glint | Present | Pred. | Correct | Acc. |
/// Prec. | Mean Err. (px) | Med. Err. (px).
inline std::string per_glint_table(std::span<const FrameCounts> frames) {
    std::ostringstream os;
    os << "Glint\tPresent\tPred.\tCorrect\tAcc.\tPrec.\tMean Err. (px)\tMed. Err. (px)\n";
    if (frames.empty()) return os.str();
    for (const auto& [id, r] : aggregate(frames, GroupBy::led)) {
        os << 'G' << id << '\t' << r.present << '\t' << r.predicted << '\t' << r.correct << '\t'
           << format_metric(r.accuracy) << '\t' << format_metric(r.precision) << '\t' << format_metric(r.mean_err)
           << '\t' << format_metric(r.median_err) << '\n';
    }
    return os.str();
}

}  // namespace nighteyes
