// nighteyes command-line tool.
//
// Exit codes: 0 success, 1 other errors, 2 no frames found, 3 configuration
// errors (bad config file, unknown keys, invalid --set values, bad usage).

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nighteyes/config.hpp"
#include "nighteyes/eval.hpp"
#include "nighteyes/io.hpp"
#include "nighteyes/pipeline.hpp"
#include "nighteyes/service.hpp"
#include "nighteyes/synth.hpp"

extern char** environ;

namespace {

using namespace nighteyes;

struct Common {
    std::string config_path;
    std::vector<std::string> sets;
    unsigned threads = 0;

    PipelineConfig resolve() const {
        PipelineConfig c = config_path.empty() ? PipelineConfig{} : load_config_file(config_path);
        c = apply_env_overrides(c, environ);
        for (const auto& kv : sets) c = apply_assignment(c, kv);
        return c;
    }
    fs::path template_base() const {
        return config_path.empty() ? fs::current_path() : fs::absolute(config_path).parent_path();
    }
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("-c,--config", c.config_path, "JSON config file (defaults when omitted)");
    app->add_option("-s,--set", c.sets, "Override a config key, e.g. --set matcher.sla.eps=4 (repeatable)");
}

int cmd_run(const Common& common, const std::string& input, const std::string& out_path) {
    const auto cfg = common.resolve();
    const auto templates = load_templates(cfg.templ, common.template_base());
    std::vector<FrameRef> frames;
    if (fs::is_directory(input)) {
        for (auto& rec : discover_dataset(input).recordings) {
            for (auto& f : rec.frames) frames.push_back(std::move(f));
        }
    } else {
        if (!fs::exists(input)) throw NoFramesError("no frames found: '" + input + "' does not exist");
        frames.push_back({fs::path(input).filename().string(), "", input, std::nullopt});
    }
    std::ofstream file;
    if (!out_path.empty()) {
        file.open(out_path, std::ios::trunc);
        if (!file) throw Error("cannot write '" + out_path + "'");
    }
    std::ostream& out = out_path.empty() ? std::cout : file;
    PupilState pupil;
    for (const auto& f : frames) {
        const auto img = read_gray(f.path);
        FrameInput in{&img, f.labels ? &*f.labels : nullptr, f.frame_id, f.subject};
        out << record_line(prediction_to_json(run_frame(in, cfg, pupil, templates)));
    }
    return 0;
}

void print_report(const MetricsReport& r) {
    std::cout << "accuracy " << format_metric(r.accuracy) << "\nprecision " << format_metric(r.precision)
              << "\nidf_accuracy " << format_metric(r.idf_accuracy) << "\nmean_err_px " << format_metric(r.mean_err, 2)
              << "\nmedian_err_px " << format_metric(r.median_err, 2) << "\nframes " << r.n_images << "\n";
}

int cmd_batch(const Common& common, const std::string& dataset, const std::string& out_dir) {
    const auto cfg = common.resolve();
    const auto res = run_batch(dataset, cfg, out_dir, common.threads, common.template_base());
    std::cout << "frames " << res.predictions.size() << " -> " << out_dir << "\n";
    if (res.metrics) {
        print_report(*res.metrics);
        std::cout << per_glint_table(res.counts);
    }
    return 0;
}

int cmd_sweep(const Common& common, const std::string& dataset, const std::string& spec_path,
              const std::string& out_dir, const SweepWeights& w) {
    std::ifstream in(spec_path);
    if (!in) throw ConfigError("cannot open sweep spec '" + spec_path + "'");
    json spec;
    try {
        spec = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("sweep spec: ") + e.what());
    }
    const auto runs = expand_sweep(spec, common.resolve());
    const auto ds = discover_dataset(dataset);
    const auto table = run_sweep(runs, ds, w, common.threads, common.template_base());
    const auto text = format_sweep_table(table.collapsed);
    std::cout << text;
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        std::ofstream(fs::path(out_dir) / "sweep_ranked.tsv") << text;
        std::ofstream(fs::path(out_dir) / "sweep_runs.tsv") << format_sweep_table(table.runs);
        json configs = json::array();
        for (const auto& r : runs) {
            configs.push_back({{"run_id", r.run_id}, {"overrides", r.overrides}, {"config_hash", config_hash(r.config)}});
        }
        std::ofstream(fs::path(out_dir) / "sweep_runs.json") << configs.dump(2) << "\n";
    }
    return 0;
}

int cmd_template_build(const std::string& records_path, const std::string& out_path, const std::string& name,
                       const std::string& method, const std::vector<std::string>& only) {
    std::vector<LabeledConstellation> cs;
    for (const auto& j : read_records(records_path)) {
        LabeledConstellation c;
        if (j.contains("frame_id")) {
            const auto a = annotation_from_json(j);
            c.image_id = a.frame_id;
            for (const auto& [id, g] : a.glints) c.points[id] = {g.x, g.y};
        } else {
            const auto l = label_from_json(j);
            c.image_id = l.frame;
            c.points = l.labels.glints;
        }
        if (!only.empty() && std::find(only.begin(), only.end(), c.image_id) == only.end()) continue;
        if (!c.points.empty()) cs.push_back(std::move(c));
    }
    if (cs.empty()) throw ValidationError("template build: no labeled constellations selected");
    if (method != "median" && method != "procrustes") throw ConfigError("--method must be median or procrustes");
    const auto t = build_template(cs, method == "median" ? TemplateMethod::median : TemplateMethod::procrustes, name);
    save_template(out_path, t);
    std::cout << "template '" << t.name() << "' K=" << t.size() << " from " << cs.size() << " constellations -> "
              << out_path << "\n";
    return 0;
}

int cmd_synth(const std::string& out_dir, int n, std::uint64_t seed, const SceneSpec& spec) {
    if (n < 1) throw ConfigError("--count must be >= 1");
    write_synth_dataset(out_dir, spec, n, seed);
    std::cout << n << " frames -> " << out_dir << "\n";
    return 0;
}

int cmd_eval(const std::string& pred_path, const std::string& labels_path, double thresh) {
    std::map<std::string, LabelRecord> labels;
    for (const auto& j : read_records(labels_path)) {
        auto l = label_from_json(j);
        labels[l.frame] = std::move(l);
    }
    std::vector<FrameCounts> counts;
    for (const auto& j : read_records(pred_path)) {
        const auto id = j.at("frame_id").get<std::string>();
        auto it = labels.find(id);
        if (it == labels.end()) it = labels.find(fs::path(id).filename().string());
        if (it == labels.end()) continue;
        std::map<int, PointPx> pred;
        if (j.contains("glints")) {
            for (const auto& [k, v] : j.at("glints").items()) pred[std::stoi(k)] = point_from_json(v);
        }
        auto fc = evaluate_frame(pred, it->second.labels, thresh);
        fc.frame_id = id;
        fc.subject = j.value("subject", it->second.subject);
        counts.push_back(std::move(fc));
    }
    if (counts.empty()) throw NoFramesError("no frames found: no prediction matches a label record");
    print_report(aggregate_all(counts));
    std::cout << per_glint_table(counts);
    return 0;
}

Service* g_service = nullptr;

int cmd_serve(const Common& common, const std::string& dataset, const std::string& host, int port,
              const std::string& annotations, const std::string& template_dir, const std::string& predictions,
              const std::string& ui_dir) {
    ServiceOptions opt;
    opt.dataset = discover_dataset(dataset);
    opt.config = common.resolve();
    opt.annotations_path = annotations.empty() ? fs::path(dataset) / "annotations.jsonl" : fs::path(annotations);
    opt.template_dir = template_dir.empty() ? fs::path(dataset) / "templates" : fs::path(template_dir);
    if (!predictions.empty()) opt.predictions_path = predictions;
    if (!ui_dir.empty()) opt.static_dir = ui_dir;
    opt.template_base = common.template_base();
    Service svc(std::move(opt));
    g_service = &svc;
    std::signal(SIGINT, [](int) {
        if (g_service) g_service->stop();
    });
    std::cout << "serving " << dataset << " on http://" << host << ":" << port << "/api/v1" << std::endl;
    if (!svc.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-glint detection and constellation matching"};
    app.set_version_flag("--version", NIGHTEYES_VERSION);
    app.require_subcommand(1);
    Common common;

    std::string input, out, dataset, spec_path, records, name = "template", method = "procrustes", preds, labels;
    std::vector<std::string> only;
    SweepWeights weights;
    double thresh = 10.0;
    int count = 100, port = 8080;
    std::uint64_t seed = 0;
    std::string host = "127.0.0.1", annotations, template_dir, ui_dir;
    SceneSpec spec;

    auto* run = app.add_subcommand("run", "Process one image or a directory of frames; prints prediction records");
    add_common(run, common);
    run->add_option("input", input, "Image file or dataset directory")->required();
    run->add_option("-o,--out", out, "Write records here instead of stdout");

    auto* batch = app.add_subcommand("batch", "Run a dataset and write predictions, metrics and a manifest");
    add_common(batch, common);
    batch->add_option("dataset", dataset, "Dataset root")->required();
    batch->add_option("-o,--out", out, "Output directory")->required();
    batch->add_option("-j,--threads", common.threads, "Worker threads (0 = hardware)");

    auto* sweep = app.add_subcommand("sweep", "Run a grid or list of configurations and rank them");
    add_common(sweep, common);
    sweep->add_option("dataset", dataset, "Dataset root")->required();
    sweep->add_option("--spec", spec_path, "Sweep spec JSON")->required();
    sweep->add_option("-o,--out", out, "Output directory for tables");
    sweep->add_option("-j,--threads", common.threads, "Worker threads (0 = hardware)");
    sweep->add_option("--w-acc", weights.accuracy, "Ranking weight on accuracy");
    sweep->add_option("--w-prec", weights.precision, "Ranking weight on precision");
    sweep->add_option("--w-err", weights.median_err, "Ranking weight on -median error / 10 px");

    auto* tmpl = app.add_subcommand("template", "Template utilities");
    tmpl->require_subcommand(1);
    auto* build = tmpl->add_subcommand("build", "Build a normalized template from labels or annotations");
    build->add_option("records", records, "labels.jsonl or annotation log")->required();
    build->add_option("-o,--out", out, "Template file to write")->required();
    build->add_option("--name", name, "Layout name");
    build->add_option("--method", method, "median or procrustes");
    build->add_option("--frames", only, "Restrict to these frame ids");

    auto* synth = app.add_subcommand("synth", "Render synthetic frames with a truth labels sidecar");
    synth->add_option("-o,--out", out, "Output directory")->required();
    synth->add_option("-n,--count", count, "Number of frames");
    synth->add_option("--seed", seed, "Seed of the first frame");
    synth->add_option("--jitter", spec.jitter_sigma, "Jitter sigma, px");
    synth->add_option("--dropouts", spec.dropout_max, "Maximum dropped LEDs");
    synth->add_option("--distractors", spec.distractor_max, "Maximum distractor spots");
    synth->add_option("--mirror-prob", spec.mirror_prob, "Probability of a mirrored layout");

    auto* ev = app.add_subcommand("eval", "Score prediction records against labels");
    ev->add_option("predictions", preds, "predictions.jsonl")->required();
    ev->add_option("labels", labels, "labels.jsonl")->required();
    ev->add_option("--thresh", thresh, "Correctness threshold, px");

    auto* serve = app.add_subcommand("serve", "Serve frames, predictions and annotations over HTTP");
    add_common(serve, common);
    serve->add_option("dataset", dataset, "Dataset root")->required();
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--port", port, "Port");
    serve->add_option("--annotations", annotations, "Annotation log (default <dataset>/annotations.jsonl)");
    serve->add_option("--templates", template_dir, "Directory for built templates (default <dataset>/templates)");
    serve->add_option("--predictions", preds, "Serve these batch predictions instead of computing them");
    serve->add_option("--ui", ui_dir, "Static UI directory mounted at /");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 3;
    }

    try {
        if (run->parsed()) return cmd_run(common, input, out);
        if (batch->parsed()) return cmd_batch(common, dataset, out);
        if (sweep->parsed()) return cmd_sweep(common, dataset, spec_path, out, weights);
        if (build->parsed()) return cmd_template_build(records, out, name, method, only);
        if (synth->parsed()) return cmd_synth(out, count, seed, spec);
        if (ev->parsed()) return cmd_eval(preds, labels, thresh);
        if (serve->parsed()) return cmd_serve(common, dataset, host, port, annotations, template_dir, preds, ui_dir);
    } catch (const NoFramesError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
