#pragma once

// HTTP service under /api/v1 backing the annotation/review UI.

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "nighteyes/config.hpp"
#include "nighteyes/io.hpp"
#include "nighteyes/pipeline.hpp"
#include "nighteyes/template.hpp"

namespace nighteyes {

struct ServiceOptions {
    Dataset dataset;
    PipelineConfig config;
    fs::path annotations_path;  ///< JSONL annotation log
    fs::path template_dir;      ///< where built templates are written
    std::optional<fs::path> predictions_path;  ///< batch output to serve verbatim
    std::optional<fs::path> static_dir;        ///< UI assets mounted at /
    fs::path template_base;                     ///< base for relative template paths
};

/// Endpoints:
///   GET  /api/v1/frames?offset=&limit=
///   GET  /api/v1/frames/{id}/image            PNG
///   GET  /api/v1/frames/{id}/prediction
///   GET  /api/v1/frames/{id}/annotation
///   POST /api/v1/frames/{id}/annotation
///   POST /api/v1/frames/{id}/rerun            {"overrides": {"dotted.key": value}}
///   GET  /api/v1/config
///   GET  /api/v1/templates
///   POST /api/v1/templates                    {"layout_name", "frame_ids", "method"}
/// Errors: 404 unknown frame, 422 invalid input, 409 inconsistent LED ids.
class Service {
   public:
    explicit Service(ServiceOptions opt)
        : opt_(std::move(opt)), store_(opt_.annotations_path), templates_(load_templates(opt_.config.templ, opt_.template_base)) {
        for (std::size_t r = 0; r < opt_.dataset.recordings.size(); ++r) {
            const auto& rec = opt_.dataset.recordings[r];
            for (std::size_t i = 0; i < rec.frames.size(); ++i) {
                index_[rec.frames[i].frame_id] = {r, i};
                order_.push_back(rec.frames[i].frame_id);
            }
        }
        if (opt_.predictions_path) {
            for (auto& j : read_records(*opt_.predictions_path)) {
                const auto id = j.value("frame_id", std::string{});
                if (index_.count(id)) cache_[id] = std::move(j);
            }
        }
        routes();
    }

    httplib::Server& server() { return svr_; }

    /// Binds and serves until stop(); blocks.
    bool listen(const std::string& host, int port) { return svr_.listen(host, port); }
    int bind_any(const std::string& host = "127.0.0.1") { return svr_.bind_to_any_port(host); }
    bool listen_after_bind() { return svr_.listen_after_bind(); }
    void stop() { svr_.stop(); }

    /// Prediction for a frame under the service config (cached).
    json prediction(const std::string& frame_id) {
        std::lock_guard lock(pred_mu_);
        auto it = cache_.find(frame_id);
        if (it != cache_.end()) return it->second;
        const auto [r, i] = index_.at(frame_id);
        const auto preds = run_recording_prefix(r, opt_.dataset.recordings[r].frames.size() - 1, opt_.config, templates_);
        for (const auto& p : preds) cache_[p.frame_id] = prediction_to_json(p);
        return cache_.at(frame_id);
    }

    /// Fresh prediction with dotted-key overrides applied to the service config.
    json rerun(const std::string& frame_id, const json& overrides) {
        PipelineConfig c = opt_.config;
        if (!overrides.is_object()) throw ConfigError("overrides must be an object of dotted keys");
        for (const auto& [k, v] : overrides.items()) c = apply_override(c, k, v.dump());
        const auto ts = load_templates(c.templ, opt_.template_base);
        const auto [r, i] = index_.at(frame_id);
        const auto preds = run_recording_prefix(r, i, c, ts);
        json j = prediction_to_json(preds.back());
        j["config_hash"] = config_hash(c);
        j["eps_px"] = scale_params(c, image_size(frame_id).first, image_size(frame_id).second).matcher.sla.eps;
        return j;
    }

   private:
    struct FrameLoc {
        std::size_t recording = 0;
        std::size_t frame = 0;
    };

    std::vector<FramePrediction> run_recording_prefix(std::size_t r, std::size_t last, const PipelineConfig& cfg,
                                                      const TemplateSet& ts) const {
        const auto& rec = opt_.dataset.recordings[r];
        PupilState pupil;
        std::vector<FramePrediction> out;
        for (std::size_t i = 0; i <= last; ++i) {
            const auto& f = rec.frames[i];
            const GrayImage img = read_gray(f.path);
            FrameInput in{&img, f.labels ? &*f.labels : nullptr, f.frame_id, f.subject};
            out.push_back(run_frame(in, cfg, pupil, ts));
        }
        return out;
    }

    const FrameRef& frame(const std::string& id) const {
        const auto loc = index_.at(id);
        return opt_.dataset.recordings[loc.recording].frames[loc.frame];
    }

    std::pair<int, int> image_size(const std::string& id) {
        std::lock_guard lock(size_mu_);
        auto it = sizes_.find(id);
        if (it != sizes_.end()) return it->second;
        const auto img = read_gray(frame(id).path);
        return sizes_[id] = {img.width(), img.height()};
    }

    static void send_json(httplib::Response& res, int status, const json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }
    static void send_error(httplib::Response& res, int status, const std::string& msg) {
        send_json(res, status, json{{"error", msg}});
    }

    bool known(const std::string& id, httplib::Response& res) const {
        if (index_.count(id)) return true;
        send_error(res, 404, "unknown frame '" + id + "'");
        return false;
    }

    static std::optional<json> parse_body(const httplib::Request& req, httplib::Response& res) {
        try {
            return json::parse(req.body);
        } catch (const json::parse_error& e) {
            send_error(res, 422, std::string("malformed JSON: ") + e.what());
            return std::nullopt;
        }
    }

    void routes() {
        using httplib::Request;
        using httplib::Response;
        svr_.set_exception_handler([](const Request&, Response& res, std::exception_ptr ep) {
            try {
                std::rethrow_exception(ep);
            } catch (const std::exception& e) {
                send_error(res, 500, e.what());
            }
        });

        svr_.Get("/api/v1/frames", [this](const Request& req, Response& res) {
            std::size_t offset = 0, limit = 50;
            try {
                if (req.has_param("offset")) offset = std::stoul(req.get_param_value("offset"));
                if (req.has_param("limit")) limit = std::stoul(req.get_param_value("limit"));
            } catch (const std::exception&) {
                return send_error(res, 422, "offset and limit must be non-negative integers");
            }
            limit = std::clamp<std::size_t>(limit, 1, 1000);
            json frames = json::array();
            for (std::size_t i = offset; i < order_.size() && i < offset + limit; ++i) {
                const auto& f = frame(order_[i]);
                frames.push_back({{"frame_id", f.frame_id},
                                  {"subject", f.subject},
                                  {"has_labels", f.labels.has_value()},
                                  {"has_annotation", store_.latest(f.frame_id).has_value()}});
            }
            send_json(res, 200, {{"total", order_.size()}, {"offset", offset}, {"limit", limit}, {"frames", frames}});
        });

        svr_.Get(R"(/api/v1/frames/(.+)/image)", [this](const Request& req, Response& res) {
            const std::string id = req.matches[1];
            if (!known(id, res)) return;
            const auto png = encode_png(read_gray(frame(id).path));
            res.set_content(std::string(png.begin(), png.end()), "image/png");
        });

        svr_.Get(R"(/api/v1/frames/(.+)/prediction)", [this](const Request& req, Response& res) {
            const std::string id = req.matches[1];
            if (!known(id, res)) return;
            send_json(res, 200, prediction(id));
        });

        svr_.Get(R"(/api/v1/frames/(.+)/annotation)", [this](const Request& req, Response& res) {
            const std::string id = req.matches[1];
            if (!known(id, res)) return;
            auto a = store_.latest(id);
            if (!a) return send_error(res, 404, "no annotation for frame '" + id + "'");
            send_json(res, 200, annotation_to_json(*a));
        });

        svr_.Post(R"(/api/v1/frames/(.+)/annotation)", [this](const Request& req, Response& res) {
            const std::string id = req.matches[1];
            if (!known(id, res)) return;
            auto body = parse_body(req, res);
            if (!body) return;
            try {
                if (!body->is_object()) throw ValidationError("annotation: body must be an object");
                if (!body->contains("frame_id")) (*body)["frame_id"] = id;
                auto rec = annotation_from_json(*body);
                if (rec.frame_id != id) throw ValidationError("annotation: frame_id does not match the URL");
                const auto [w, h] = image_size(id);
                validate_annotation(rec, w, h);
                send_json(res, 201, annotation_to_json(store_.append(std::move(rec))));
            } catch (const ValidationError& e) {
                send_error(res, 422, e.what());
            }
        });

        svr_.Post(R"(/api/v1/frames/(.+)/rerun)", [this](const Request& req, Response& res) {
            const std::string id = req.matches[1];
            if (!known(id, res)) return;
            json body = json::object();
            if (!req.body.empty()) {
                auto b = parse_body(req, res);
                if (!b) return;
                body = *b;
            }
            try {
                send_json(res, 200, rerun(id, body.value("overrides", json::object())));
            } catch (const ConfigError& e) {
                send_error(res, 422, e.what());
            }
        });

        svr_.Get("/api/v1/config", [this](const Request&, Response& res) {
            send_json(res, 200, {{"config", config_to_json(opt_.config)}, {"config_hash", config_hash(opt_.config)}});
        });

        svr_.Get("/api/v1/templates", [this](const Request&, Response& res) {
            json list = json::array();
            for (const auto& t : templates_.templates) list.push_back(template_to_json(t));
            std::lock_guard lock(tmpl_mu_);
            for (const auto& t : built_) list.push_back(template_to_json(t));
            send_json(res, 200, {{"templates", list}});
        });

        svr_.Post("/api/v1/templates", [this](const Request& req, Response& res) {
            auto body = parse_body(req, res);
            if (!body) return;
            std::vector<LabeledConstellation> cs;
            std::string name;
            TemplateMethod method = TemplateMethod::procrustes;
            try {
                name = body->value("layout_name", std::string("template"));
                const auto m = body->value("method", std::string("procrustes"));
                if (m == "median") {
                    method = TemplateMethod::median;
                } else if (m != "procrustes") {
                    return send_error(res, 422, "method must be 'median' or 'procrustes'");
                }
                const auto ids = body->at("frame_ids").get<std::vector<std::string>>();
                if (ids.empty()) return send_error(res, 422, "frame_ids is empty");
                for (const auto& id : ids) {
                    if (!known(id, res)) return;
                    auto a = store_.latest(id);
                    if (!a) return send_error(res, 404, "no annotation for frame '" + id + "'");
                    LabeledConstellation c;
                    c.image_id = id;
                    for (const auto& [led, g] : a->glints) c.points[led] = {g.x, g.y};
                    cs.push_back(std::move(c));
                }
            } catch (const json::exception& e) {
                return send_error(res, 422, std::string("template request: ") + e.what());
            }
            if (name.empty() || name.find_first_of("/\\") != std::string::npos || name[0] == '.') {
                return send_error(res, 422, "layout_name must be a plain file name");
            }
            try {
                auto t = build_template(cs, method, name);
                fs::create_directories(opt_.template_dir);
                const auto path = opt_.template_dir / (name + ".json");
                save_template(path, t);
                {
                    std::lock_guard lock(tmpl_mu_);
                    built_.push_back(t);
                }
                json out = template_to_json(t);
                out["path"] = path.string();
                send_json(res, 201, out);
            } catch (const InconsistentLedIds& e) {
                send_error(res, 409, e.what());
            } catch (const Error& e) {
                send_error(res, 422, e.what());
            }
        });

        if (opt_.static_dir && fs::is_directory(*opt_.static_dir)) svr_.set_mount_point("/", opt_.static_dir->string());
    }

    ServiceOptions opt_;
    AnnotationStore store_;
    TemplateSet templates_;
    httplib::Server svr_;
    std::map<std::string, FrameLoc> index_;
    std::vector<std::string> order_;
    std::mutex pred_mu_;
    std::map<std::string, json> cache_;
    std::mutex size_mu_;
    std::map<std::string, std::pair<int, int>> sizes_;
    std::mutex tmpl_mu_;
    std::vector<Template> built_;
};

}  // namespace nighteyes
