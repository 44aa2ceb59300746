#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "nighteyes/io.hpp"
#include "nighteyes/rng.hpp"

using namespace nighteyes;

namespace {

class TempDir {
   public:
    TempDir() {
        static int n = 0;
        path_ = fs::temp_directory_path() / ("nighteyes_io_" + std::to_string(::getpid()) + "_" + std::to_string(n++));
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    fs::path operator/(const std::string& s) const { return path_ / s; }

   private:
    fs::path path_;
};

GrayImage quantized_image(int w, int h, std::uint64_t seed) {
    Rng rng(seed);
    GrayImage img(w, h);
    for (auto& v : img.pixels()) v = static_cast<float>(rng.index(256)) / 255.0f;
    return img;
}

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream out(p);
    out << s;
}

AnnotationRecord annotation(const std::string& frame, double x) {
    AnnotationRecord r;
    r.frame_id = frame;
    r.glints[0] = {x, 20.0, PointSource::human};
    r.glints[3] = {40.0, 41.5, PointSource::detected};
    r.verdict = Verdict::corrected;
    return r;
}

}  // namespace

TEST(Records, WriteThenReadIsIdentity) {
    TempDir d;
    const std::vector<json> recs = {{{"frame", "a"}, {"glints", {{"0", {1.5, 2.0}}}}}, {{"frame", "b"}, {"x", nullptr}}};
    write_records(d / "r.jsonl", recs);
    const auto back = read_records(d / "r.jsonl");
    ASSERT_EQ(back.size(), 2u);
    for (std::size_t i = 0; i < 2; ++i) {
        auto expect = recs[i];
        expect["schema_version"] = 1;
        EXPECT_EQ(back[i], expect);
    }
}

TEST(Records, EmptyFileAndBlankLines) {
    TempDir d;
    write_text(d / "e.jsonl", "");
    EXPECT_TRUE(read_records(d / "e.jsonl").empty());
    write_text(d / "b.jsonl", "\n  \n{\"frame\": \"x\"}\n\n");
    EXPECT_EQ(read_records(d / "b.jsonl").size(), 1u);
    EXPECT_THROW(read_records(d / "missing.jsonl"), Error);
}

TEST(Records, NewerSchemaAndGarbageRejected) {
    TempDir d;
    write_text(d / "v.jsonl", "{\"frame\": \"x\", \"schema_version\": 2}\n");
    try {
        read_records(d / "v.jsonl");
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("schema_version 2"), std::string::npos);
    }
    write_text(d / "g.jsonl", "{\"frame\": \"x\"}\nnot json\n");
    try {
        read_records(d / "g.jsonl");
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos);
    }
    write_text(d / "a.jsonl", "[1, 2]\n");
    EXPECT_THROW(read_records(d / "a.jsonl"), ValidationError);
}

TEST(Labels, RoundTripAndNullsSkipped) {
    LabelRecord r;
    r.frame = "s1/f001.png";
    r.subject = "s1";
    r.labels.glints = {{0, {10.25, 11}}, {4, {100, 3}}};
    r.labels.pupil_center = PointPx{50, 60};
    r.labels.pupil_radius = 12.0;
    const auto back = label_from_json(label_to_json(r));
    EXPECT_EQ(back.frame, r.frame);
    EXPECT_EQ(back.subject, r.subject);
    EXPECT_EQ(back.labels.glints, r.labels.glints);
    EXPECT_EQ(*back.labels.pupil_center, *r.labels.pupil_center);
    EXPECT_EQ(*back.labels.pupil_radius, 12.0);
    const auto sparse = label_from_json(json::parse(R"({"frame": "f", "glints": {"1": [3, 4], "2": null}})"));
    EXPECT_EQ(sparse.labels.glints.size(), 1u);
    EXPECT_THROW(label_from_json(json::parse(R"({"glints": {}})")), ValidationError);
    EXPECT_THROW(label_from_json(json::parse(R"({"frame": "f", "glints": {"x1": [3, 4]}})")), ValidationError);
    EXPECT_THROW(label_from_json(json::parse(R"({"frame": "f", "glints": {"1": [3]}})")), ValidationError);
}

TEST(Images, PngRoundTripIsExact) {
    TempDir d;
    const auto img = quantized_image(37, 23, 5);
    write_png(d / "x.png", img);
    const auto back = read_gray(d / "x.png");
    ASSERT_EQ(back.width(), 37);
    ASSERT_EQ(back.height(), 23);
    EXPECT_EQ(to_u8(back), to_u8(img));
    const auto raster = read_raster(d / "x.png");
    EXPECT_EQ(raster.channels, 1);
    EXPECT_EQ(raster.bit_depth, 8);
}

TEST(Images, PgmBinaryAsciiAndSixteenBit) {
    TempDir d;
    const auto img = quantized_image(9, 7, 6);
    write_pgm(d / "x.pgm", img);
    EXPECT_EQ(to_u8(read_gray(d / "x.pgm")), to_u8(img));
    write_text(d / "a.pgm", "P2\n# comment\n3 2\n4\n0 1 2\n3 4 4\n");
    const auto a = read_gray(d / "a.pgm");
    EXPECT_FLOAT_EQ(a.at(0, 0), 0.0f);
    // samples are rescaled into 8 bits, so exact only to half a step
    EXPECT_NEAR(a.at(2, 0), 0.5f, 0.5 / 255.0 + 1e-6);
    EXPECT_FLOAT_EQ(a.at(2, 1), 1.0f);
    const std::string hdr = "P5\n2 1\n65535\n";
    std::string wide = hdr + std::string("\x80\x00\xff\xff", 4);
    write_text(d / "w.pgm", wide);
    const auto w = read_raster(d / "w.pgm");
    EXPECT_EQ(w.bit_depth, 16);
    EXPECT_EQ(w.samples, (std::vector<std::uint16_t>{0x8000, 0xffff}));
    EXPECT_NEAR(to_gray(w).at(0, 0), 0x8000 / 65535.0, 1e-6);
}

TEST(Images, RgbOfEqualChannelsIsThatGray) {
    Raster r;
    r.width = 2;
    r.height = 1;
    r.channels = 3;
    r.samples = {51, 51, 51, 255, 255, 255};
    const auto g = to_gray(r);
    EXPECT_NEAR(g.at(0, 0), 0.2f, 1e-3);
    EXPECT_NEAR(g.at(1, 0), 1.0f, 1e-3);
}

TEST(Images, CorruptInputsRaise) {
    TempDir d;
    write_text(d / "bad.png", "\x89PNG\r\n\x1a\n garbage");
    EXPECT_THROW(read_raster(d / "bad.png"), Error);
    write_text(d / "short.pgm", "P5\n10 10\n255\nxx");
    EXPECT_THROW(read_raster(d / "short.pgm"), Error);
    write_text(d / "what.png", "hello");
    EXPECT_THROW(read_raster(d / "what.png"), Error);
    EXPECT_TRUE(is_image_path("a/B.PNG"));
    EXPECT_FALSE(is_image_path("a/b.jpg"));
}

TEST(Templates, SaveLoadRoundTrip) {
    TempDir d;
    const auto t = reference_template_5();
    save_template(d / "t.json", t);
    const auto back = load_template(d / "t.json");
    EXPECT_EQ(back.name(), t.name());
    EXPECT_EQ(back.led_ids(), t.led_ids());
    for (std::size_t k = 0; k < t.size(); ++k) EXPECT_EQ(back.point(k), t.point(k));
    auto j = template_to_json(t);
    j["K"] = 4;
    EXPECT_THROW(template_from_json(j), ValidationError);
}

TEST(Annotations, JsonRoundTripPreservesUnknownFields) {
    auto r = annotation("f1", 10.0);
    r.record_id = 7;
    r.timestamp = "2026-01-01T00:00:00Z";
    r.extra = {{"annotator", "kim"}};
    const auto j = annotation_to_json(r);
    EXPECT_EQ(j.at("glints").at("3").at("source"), "detected");
    EXPECT_EQ(annotation_from_json(j), r);
    auto bad = j;
    bad["verdict"] = "maybe";
    EXPECT_THROW(annotation_from_json(bad), ValidationError);
    bad = j;
    bad["glints"]["0"]["source"] = "robot";
    EXPECT_THROW(annotation_from_json(bad), ValidationError);
}

TEST(Annotations, ValidationNamesTheFrame) {
    auto r = annotation("s2/f009.png", 640.0);
    try {
        validate_annotation(r, 640, 480);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("s2/f009.png"), std::string::npos);
    }
    r.glints[0].x = 639.0;
    EXPECT_NO_THROW(validate_annotation(r, 640, 480));
    r.verdict.reset();
    EXPECT_THROW(validate_annotation(r, 640, 480), ValidationError);
    r.glints.erase(0);
    EXPECT_NO_THROW(validate_annotation(r, 640, 480));
}

TEST(AnnotationStore, AppendAndReplay) {
    TempDir d;
    const auto path = d / "ann.jsonl";
    {
        AnnotationStore s(path);
        const auto a = s.append(annotation("f1", 10));
        const auto b = s.append(annotation("f2", 11));
        const auto c = s.append(annotation("f1", 12));
        EXPECT_EQ(a.record_id, 1);
        EXPECT_EQ(b.record_id, 2);
        EXPECT_EQ(c.record_id, 3);
        EXPECT_FALSE(a.timestamp.empty());
        EXPECT_EQ(s.latest("f1")->glints.at(0).x, 12.0);
        EXPECT_FALSE(s.latest("nope"));
        EXPECT_EQ(s.all().size(), 3u);
    }
    const auto replayed = AnnotationStore::replay(path);
    ASSERT_EQ(replayed.size(), 2u);
    EXPECT_EQ(replayed.at("f1").glints.at(0).x, 12.0);
    AnnotationStore reopened(path);
    EXPECT_EQ(reopened.state(), replayed);
    EXPECT_EQ(reopened.append(annotation("f3", 1)).record_id, 4);
    EXPECT_TRUE(AnnotationStore::replay(d / "absent.jsonl").empty());
}

TEST(AnnotationStore, NonIncreasingIdsRejected) {
    TempDir d;
    auto r1 = annotation("f1", 1), r2 = annotation("f2", 2);
    r1.record_id = 5;
    r2.record_id = 5;
    const std::vector<json> recs = {annotation_to_json(r1), annotation_to_json(r2)};
    write_records(d / "dup.jsonl", recs);
    EXPECT_THROW(AnnotationStore::replay(d / "dup.jsonl"), ValidationError);
    EXPECT_THROW(AnnotationStore{d / "dup.jsonl"}, ValidationError);
}
