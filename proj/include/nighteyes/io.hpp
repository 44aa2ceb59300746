#pragma once

// File formats: images (PGM/PNG), line-delimited JSON records, label
// sidecars, template files and the append-only annotation store.

#include <png.h>

#include <csetjmp>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "nighteyes/errors.hpp"
#include "nighteyes/eval.hpp"
#include "nighteyes/geometry.hpp"
#include "nighteyes/image.hpp"
#include "nighteyes/json_enum.hpp"
#include "nighteyes/template.hpp"

namespace nighteyes {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr int kSchemaVersion = 1;

// -- images ------------------------------------------------------------------

namespace detail {

inline std::vector<std::uint8_t> read_file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot open '" + p.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const fs::path& p, std::span<const std::uint8_t> bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + p.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed for '" + p.string() + "'");
}

struct PngReadCursor {
    std::span<const std::uint8_t> bytes;
    std::size_t pos = 0;
};

inline void png_read_cb(png_structp png, png_bytep out, png_size_t n) {
    auto* c = static_cast<PngReadCursor*>(png_get_io_ptr(png));
    if (c->pos + n > c->bytes.size()) png_error(png, "truncated PNG");
    std::memcpy(out, c->bytes.data() + c->pos, n);
    c->pos += n;
}

inline void png_write_cb(png_structp png, png_bytep data, png_size_t n) {
    auto* v = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    v->insert(v->end(), data, data + n);
}

inline void png_flush_cb(png_structp) {}

/// libpng reports errors by longjmp; the message is kept here so the C++
/// exception is thrown only after control is back outside libpng.
struct PngErrorSink {
    char message[256] = {0};
};

inline void png_error_cb(png_structp png, png_const_charp msg) {
    if (auto* sink = static_cast<PngErrorSink*>(png_get_error_ptr(png))) {
        std::snprintf(sink->message, sizeof sink->message, "%s", msg ? msg : "unknown error");
    }
    png_longjmp(png, 1);
}

inline void png_warning_cb(png_structp, png_const_charp) {}

struct PngDecodeState {
    PngErrorSink sink;
    PngReadCursor cursor;
    Raster raster;
    std::vector<std::uint8_t> buf;
    std::vector<png_bytep> rows;
};

/// Returns false on error; all C++ state lives in `st`, allocated by the
/// caller, so nothing with a destructor is skipped by the longjmp.
inline bool decode_png_into(PngDecodeState* st) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &st->sink, png_error_cb, png_warning_cb);
    if (!png) {
        std::snprintf(st->sink.message, sizeof st->sink.message, "out of memory");
        return false;
    }
    png_infop info = png_create_info_struct(png);
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        return false;
    }
    png_set_read_fn(png, &st->cursor, png_read_cb);
    png_read_info(png, info);
    const auto color = png_get_color_type(png, info);
    const auto depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if ((color & PNG_COLOR_MASK_ALPHA) || png_get_valid(png, info, PNG_INFO_tRNS)) {
        if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
        png_set_strip_alpha(png);
    }
    if (depth == 16) png_set_swap(png);
    png_read_update_info(png, info);
    Raster& r = st->raster;
    r.width = static_cast<int>(png_get_image_width(png, info));
    r.height = static_cast<int>(png_get_image_height(png, info));
    r.channels = png_get_channels(png, info);
    r.bit_depth = png_get_bit_depth(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    st->buf.resize(rowbytes * static_cast<std::size_t>(r.height));
    st->rows.resize(static_cast<std::size_t>(r.height));
    for (std::size_t y = 0; y < st->rows.size(); ++y) st->rows[y] = st->buf.data() + rowbytes * y;
    png_read_image(png, st->rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return true;
}

struct PngEncodeState {
    PngErrorSink sink;
    std::vector<std::uint8_t> pixels;
    std::vector<std::uint8_t> out;
    int width = 0;
    int height = 0;
};

inline bool encode_png_into(PngEncodeState* st) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &st->sink, png_error_cb, png_warning_cb);
    if (!png) {
        std::snprintf(st->sink.message, sizeof st->sink.message, "out of memory");
        return false;
    }
    png_infop info = png_create_info_struct(png);
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, info ? &info : nullptr);
        return false;
    }
    png_set_write_fn(png, &st->out, png_write_cb, png_flush_cb);
    png_set_IHDR(png, info, static_cast<png_uint_32>(st->width), static_cast<png_uint_32>(st->height), 8,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < st->height; ++y) {
        png_write_row(png, st->pixels.data() + static_cast<std::size_t>(y) * static_cast<std::size_t>(st->width));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return true;
}

}  // namespace detail

/// Decodes PNG bytes. Palette, low-bit gray and alpha are normalized away;
/// the result is 1 or 3 channels at 8 or 16 bits.
inline Raster decode_png(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw Error("png: bad signature");
    auto st = std::make_unique<detail::PngDecodeState>();
    st->cursor = {bytes, 0};
    if (!detail::decode_png_into(st.get())) throw Error(std::string("png: ") + st->sink.message);
    Raster r = std::move(st->raster);
    const std::size_t row = static_cast<std::size_t>(r.width) * static_cast<std::size_t>(r.channels);
    r.samples.resize(row * static_cast<std::size_t>(r.height));
    for (std::size_t y = 0; y < static_cast<std::size_t>(r.height); ++y) {
        const png_bytep src = st->rows[y];
        for (std::size_t x = 0; x < row; ++x) {
            if (r.bit_depth == 16) {
                std::uint16_t v;
                std::memcpy(&v, src + 2 * x, 2);
                r.samples[y * row + x] = v;
            } else {
                r.samples[y * row + x] = src[x];
            }
        }
    }
    return r;
}

/// 8-bit grayscale PNG.
inline std::vector<std::uint8_t> encode_png(const GrayImage& img) {
    auto st = std::make_unique<detail::PngEncodeState>();
    st->pixels = to_u8(img);
    st->width = img.width();
    st->height = img.height();
    if (!detail::encode_png_into(st.get())) throw Error(std::string("png: ") + st->sink.message);
    return std::move(st->out);
}

/// Binary (P5) or ASCII (P2) PGM, 8 or 16 bit.
inline Raster decode_pgm(std::span<const std::uint8_t> bytes) {
    std::size_t pos = 0;
    auto skip_ws = [&] {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto read_int = [&]() -> long {
        skip_ws();
        long v = 0;
        bool any = false;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) {
            v = v * 10 + (bytes[pos++] - '0');
            any = true;
            if (v > 1'000'000'000L) throw Error("pgm: header value too large");
        }
        if (!any) throw Error("pgm: malformed header");
        return v;
    };
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '2')) throw Error("pgm: bad magic");
    const bool ascii = bytes[1] == '2';
    pos = 2;
    Raster r;
    r.width = static_cast<int>(read_int());
    r.height = static_cast<int>(read_int());
    const long maxval = read_int();
    if (r.width < 1 || r.height < 1 || maxval < 1 || maxval > 65535) throw Error("pgm: bad header");
    r.bit_depth = maxval > 255 ? 16 : 8;
    const std::size_t n = static_cast<std::size_t>(r.width) * static_cast<std::size_t>(r.height);
    r.samples.resize(n);
    const double full = r.bit_depth == 16 ? 65535.0 : 255.0;
    auto rescale = [&](long v) {
        if (v > maxval) throw Error("pgm: sample exceeds maxval");
        return static_cast<std::uint16_t>(std::lround(static_cast<double>(v) * full / static_cast<double>(maxval)));
    };
    if (ascii) {
        for (std::size_t i = 0; i < n; ++i) r.samples[i] = rescale(read_int());
        return r;
    }
    ++pos;  // single whitespace after maxval
    const std::size_t bpp = r.bit_depth == 16 ? 2 : 1;
    if (bytes.size() < pos + n * bpp) throw Error("pgm: truncated data");
    for (std::size_t i = 0; i < n; ++i) {
        const long v = bpp == 2 ? (bytes[pos + 2 * i] << 8) | bytes[pos + 2 * i + 1] : bytes[pos + i];
        r.samples[i] = rescale(v);
    }
    return r;
}

inline std::vector<std::uint8_t> encode_pgm(const GrayImage& img) {
    const std::string header = "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    auto px = to_u8(img);
    out.insert(out.end(), px.begin(), px.end());
    return out;
}

/// Format detected from the leading bytes.
inline Raster decode_image(std::span<const std::uint8_t> bytes) {
    if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) return decode_png(bytes);
    if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '2')) return decode_pgm(bytes);
    throw Error("unsupported image format");
}

inline Raster read_raster(const fs::path& p) {
    try {
        return decode_image(detail::read_file_bytes(p));
    } catch (const Error& e) {
        throw Error(p.string() + ": " + e.what());
    }
}

inline GrayImage read_gray(const fs::path& p) { return to_gray(read_raster(p)); }

inline void write_png(const fs::path& p, const GrayImage& img) { detail::write_file_bytes(p, encode_png(img)); }
inline void write_pgm(const fs::path& p, const GrayImage& img) { detail::write_file_bytes(p, encode_pgm(img)); }

inline bool is_image_path(const fs::path& p) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".pgm";
}

// -- line-delimited records --------------------------------------------------

/// Reads one JSON object per non-empty line. Records without a schema
/// version are taken as version 1; newer versions are rejected.
inline std::vector<json> read_records(const fs::path& p) {
    std::vector<json> out;
    std::ifstream in(p);
    if (!in) throw Error("cannot open '" + p.string() + "'");
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ValidationError(p.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (!j.is_object()) throw ValidationError(p.string() + ":" + std::to_string(lineno) + ": not an object");
        const int v = j.value("schema_version", kSchemaVersion);
        if (v > kSchemaVersion) {
            throw ValidationError(p.string() + ":" + std::to_string(lineno) + ": unsupported schema_version " +
                                  std::to_string(v));
        }
        out.push_back(std::move(j));
    }
    return out;
}

inline std::string record_line(json j) {
    if (!j.contains("schema_version")) j["schema_version"] = kSchemaVersion;
    return j.dump() + "\n";
}

inline void write_records(const fs::path& p, std::span<const json> records) {
    std::ofstream out(p, std::ios::trunc);
    if (!out) throw Error("cannot write '" + p.string() + "'");
    for (const auto& r : records) out << record_line(r);
    if (!out) throw Error("write failed for '" + p.string() + "'");
}

// -- points ------------------------------------------------------------------

inline json point_json(PointPx p) { return json::array({p.x, p.y}); }

/// LED ids are JSON object keys, so they arrive as strings.
inline int led_id_from_key(const std::string& k) {
    std::size_t used = 0;
    int v = 0;
    try {
        v = std::stoi(k, &used);
    } catch (const std::logic_error&) {
        used = 0;
    }
    if (used == 0 || used != k.size()) throw ValidationError("LED id '" + k + "' is not an integer");
    return v;
}

inline PointPx point_from_json(const json& j) {
    if (j.is_array() && j.size() == 2) return {j[0].get<double>(), j[1].get<double>()};
    if (j.is_object()) return {j.at("x").get<double>(), j.at("y").get<double>()};
    throw ValidationError("point must be [x, y] or {x, y}");
}

// -- labels ------------------------------------------------------------------

/// One labeled frame: {"frame": "img.png", "subject": "...",
/// "glints": {"0": [x, y], ...}, "pupil": {"center": [x, y], "radius": r}}.
struct LabelRecord {
    std::string frame;
    std::string subject;
    FrameLabels labels;
};

inline LabelRecord label_from_json(const json& j) {
    LabelRecord r;
    try {
        r.frame = j.at("frame").get<std::string>();
        r.subject = j.value("subject", std::string{});
        if (j.contains("glints")) {
            for (const auto& [k, v] : j.at("glints").items()) {
                if (v.is_null()) continue;
                r.labels.glints[led_id_from_key(k)] = point_from_json(v);
            }
        }
        if (j.contains("pupil") && !j.at("pupil").is_null()) {
            const auto& pj = j.at("pupil");
            r.labels.pupil_center = point_from_json(pj.at("center"));
            if (pj.contains("radius")) r.labels.pupil_radius = pj.at("radius").get<double>();
        }
    } catch (const json::exception& e) {
        throw ValidationError("label record: " + std::string(e.what()));
    } catch (const std::invalid_argument& e) {
        throw ValidationError("label record: " + std::string(e.what()));
    }
    return r;
}

inline json label_to_json(const LabelRecord& r) {
    json j{{"schema_version", kSchemaVersion}, {"frame", r.frame}};
    if (!r.subject.empty()) j["subject"] = r.subject;
    json g = json::object();
    for (const auto& [id, p] : r.labels.glints) g[std::to_string(id)] = point_json(p);
    j["glints"] = g;
    if (r.labels.pupil_center) {
        json pj{{"center", point_json(*r.labels.pupil_center)}};
        if (r.labels.pupil_radius) pj["radius"] = *r.labels.pupil_radius;
        j["pupil"] = pj;
    }
    return j;
}

// -- templates ---------------------------------------------------------------

inline json template_to_json(const Template& t) {
    json pts = json::array();
    for (std::size_t k = 0; k < t.size(); ++k) pts.push_back(point_json(t.point(k)));
    return {{"schema_version", kSchemaVersion}, {"layout_name", t.name()}, {"K", t.size()},
            {"led_ids", t.led_ids()},           {"points", pts},           {"provenance", t.provenance()}};
}

inline Template template_from_json(const json& j) {
    try {
        const auto ids = j.at("led_ids").get<std::vector<int>>();
        std::vector<PointPx> pts;
        for (const auto& p : j.at("points")) pts.push_back(point_from_json(p));
        if (j.contains("K") && j.at("K").get<std::size_t>() != ids.size()) {
            throw ValidationError("template: K does not match led_ids");
        }
        return {j.at("layout_name").get<std::string>(), ids, pts,
                j.value("provenance", std::vector<std::string>{})};
    } catch (const json::exception& e) {
        throw ValidationError("template: " + std::string(e.what()));
    }
}

inline void save_template(const fs::path& p, const Template& t) {
    std::ofstream out(p, std::ios::trunc);
    if (!out) throw Error("cannot write '" + p.string() + "'");
    out << template_to_json(t).dump(2) << "\n";
}

inline Template load_template(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw Error("cannot open '" + p.string() + "'");
    try {
        return template_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ValidationError(p.string() + ": " + e.what());
    }
}

// -- annotations -------------------------------------------------------------

enum class PointSource { human, detected, template_projected };
enum class Verdict { accepted, corrected, rejected };

NIGHTEYES_JSON_ENUM(PointSource, {{PointSource::human, "human"},
                                  {PointSource::detected, "detected"},
                                  {PointSource::template_projected, "template_projected"}})
NIGHTEYES_JSON_ENUM(Verdict, {{Verdict::accepted, "accepted"},
                              {Verdict::corrected, "corrected"},
                              {Verdict::rejected, "rejected"}})

struct AnnotatedGlint {
    double x = 0.0;
    double y = 0.0;
    PointSource source = PointSource::human;
    friend bool operator==(const AnnotatedGlint&, const AnnotatedGlint&) = default;
};

struct AnnotationRecord {
    std::int64_t record_id = 0;  ///< assigned by the store
    std::string frame_id;
    std::map<int, AnnotatedGlint> glints;
    std::optional<Verdict> verdict;
    std::string timestamp;  ///< ISO 8601 UTC
    json extra = json::object();  ///< unknown fields, preserved verbatim

    friend bool operator==(const AnnotationRecord& a, const AnnotationRecord& b) {
        return a.record_id == b.record_id && a.frame_id == b.frame_id && a.glints == b.glints &&
               a.verdict == b.verdict && a.timestamp == b.timestamp && a.extra == b.extra;
    }
};

inline json annotation_to_json(const AnnotationRecord& r) {
    json j = r.extra.is_object() ? r.extra : json::object();
    j["schema_version"] = kSchemaVersion;
    j["record_id"] = r.record_id;
    j["frame_id"] = r.frame_id;
    json g = json::object();
    for (const auto& [id, p] : r.glints) g[std::to_string(id)] = {{"x", p.x}, {"y", p.y}, {"source", p.source}};
    j["glints"] = g;
    j["verdict"] = r.verdict ? json(*r.verdict) : json(nullptr);
    j["timestamp"] = r.timestamp;
    return j;
}

inline AnnotationRecord annotation_from_json(const json& j) {
    static const std::vector<std::string> known = {"schema_version", "record_id", "frame_id",
                                                   "glints",         "verdict",   "timestamp"};
    AnnotationRecord r;
    try {
        if (!j.is_object()) throw ValidationError("annotation: not an object");
        r.record_id = j.value("record_id", std::int64_t{0});
        r.frame_id = j.at("frame_id").get<std::string>();
        for (const auto& [k, v] : j.at("glints").items()) {
            AnnotatedGlint g;
            g.x = v.at("x").get<double>();
            g.y = v.at("y").get<double>();
            if (v.contains("source")) g.source = v.at("source").get<PointSource>();
            r.glints[led_id_from_key(k)] = g;
        }
        if (j.contains("verdict") && !j.at("verdict").is_null()) r.verdict = j.at("verdict").get<Verdict>();
        r.timestamp = j.value("timestamp", std::string{});
    } catch (const json::exception& e) {
        throw ValidationError("annotation: " + std::string(e.what()));
    } catch (const std::invalid_argument& e) {
        throw ValidationError("annotation: " + std::string(e.what()));
    }
    for (const auto& [k, v] : j.items()) {
        if (std::find(known.begin(), known.end(), k) == known.end()) r.extra[k] = v;
    }
    return r;
}

/// Human-source points require a verdict; every point must lie inside the
/// frame. Messages name the frame.
inline void validate_annotation(const AnnotationRecord& r, int width, int height) {
    if (r.frame_id.empty()) throw ValidationError("annotation: empty frame id");
    for (const auto& [id, g] : r.glints) {
        if (!std::isfinite(g.x) || !std::isfinite(g.y) || g.x < 0.0 || g.y < 0.0 || g.x > width - 1.0 ||
            g.y > height - 1.0) {
            throw ValidationError("annotation for frame '" + r.frame_id + "': LED " + std::to_string(id) +
                                  " at (" + std::to_string(g.x) + ", " + std::to_string(g.y) +
                                  ") is outside the " + std::to_string(width) + "x" + std::to_string(height) +
                                  " frame");
        }
        if (g.source == PointSource::human && !r.verdict) {
            throw ValidationError("annotation for frame '" + r.frame_id + "': human-source point for LED " +
                                  std::to_string(id) + " requires a verdict");
        }
    }
}

inline std::string utc_timestamp_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Append-only JSONL log. One writer at a time; readers share. State is the
/// latest record per frame, reconstructed by replaying the log.
class AnnotationStore {
   public:
    explicit AnnotationStore(fs::path path) : path_(std::move(path)) {
        if (fs::exists(path_)) {
            for (const auto& j : read_records(path_)) apply(annotation_from_json(j));
        }
    }

    /// Assigns the next record id (and a timestamp if missing), appends and
    /// returns the stored record.
    AnnotationRecord append(AnnotationRecord r) {
        std::unique_lock lock(mu_);
        r.record_id = next_id_;
        if (r.timestamp.empty()) r.timestamp = utc_timestamp_now();
        {
            std::ofstream out(path_, std::ios::app);
            if (!out) throw Error("annotation store: cannot append to '" + path_.string() + "'");
            out << record_line(annotation_to_json(r));
            out.flush();
            if (!out) throw Error("annotation store: write failed");
        }
        apply(r);
        return r;
    }

    std::optional<AnnotationRecord> latest(const std::string& frame_id) const {
        std::shared_lock lock(mu_);
        auto it = latest_.find(frame_id);
        if (it == latest_.end()) return std::nullopt;
        return it->second;
    }

    std::vector<AnnotationRecord> all() const {
        std::shared_lock lock(mu_);
        return log_;
    }

    std::map<std::string, AnnotationRecord> state() const {
        std::shared_lock lock(mu_);
        return latest_;
    }

    /// Rebuilds state from the file alone.
    static std::map<std::string, AnnotationRecord> replay(const fs::path& path) {
        std::map<std::string, AnnotationRecord> s;
        if (!fs::exists(path)) return s;
        std::int64_t last = 0;
        for (const auto& j : read_records(path)) {
            auto r = annotation_from_json(j);
            if (r.record_id <= last) throw ValidationError("annotation log: record ids not increasing");
            last = r.record_id;
            s[r.frame_id] = std::move(r);
        }
        return s;
    }

    const fs::path& path() const { return path_; }

   private:
    void apply(const AnnotationRecord& r) {
        if (r.record_id < next_id_ && !log_.empty()) {
            throw ValidationError("annotation log: record ids not increasing");
        }
        next_id_ = r.record_id + 1;
        log_.push_back(r);
        latest_[r.frame_id] = r;
    }

    fs::path path_;
    mutable std::shared_mutex mu_;
    std::int64_t next_id_ = 1;
    std::vector<AnnotationRecord> log_;
    std::map<std::string, AnnotationRecord> latest_;
};

}  // namespace nighteyes
