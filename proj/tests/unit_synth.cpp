#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "tchand/io.hpp"
#include "tchand/synth.hpp"

using namespace tchand;
using namespace tchand::synth;

TEST_SUITE_BEGIN("synth");

namespace {

bool same_record(const SequenceRecord& a, const SequenceRecord& b) {
    if (a.n_frames() != b.n_frames()) return false;
    for (int t = 0; t < a.n_frames(); ++t) {
        if (a.frames[t].pixels != b.frames[t].pixels) return false;
        for (int s = 0; s < geom::kNumArticulated; ++s)
            if (a.poses[t].joint(s).r != b.poses[t].joint(s).r) return false;
        for (int j = 0; j < geom::kNumJoints; ++j) {
            if ((a.j3d[t].joints[j] - b.j3d[t].joints[j]).norm() != 0.0) return false;
            if ((a.j2d[t].joints[j] - b.j2d[t].joints[j]).norm() != 0.0) return false;
        }
    }
    return a.shape.beta == b.shape.beta && a.cam.s == b.cam.s &&
           (a.cam.t - b.cam.t).norm() == 0.0;
}

std::string slurp(const std::filesystem::path& p) { return read_text_file(p.string()); }

} // namespace

TEST_CASE("generation is deterministic in (cfg, seed)") {
    SynthConfig cfg;
    cfg.n_frames = 24;
    SequenceRecord a = generate_sequence(cfg, 123);
    SequenceRecord b = generate_sequence(cfg, 123);
    CHECK(same_record(a, b));
    SequenceRecord c = generate_sequence(cfg, 124);
    CHECK_FALSE(same_record(a, c));
}

TEST_CASE("full hold with zero noise freezes the pose") {
    SynthConfig cfg;
    cfg.n_frames = 12;
    cfg.grasp_hold_fraction = 1.0;
    cfg.pose_noise_amplitude = 0.0;
    cfg.occluder_probability = 0.0;
    SequenceRecord rec = generate_sequence(cfg, 5);
    for (int t = 1; t < rec.n_frames(); ++t) {
        for (int j = 0; j < geom::kNumJoints; ++j)
            CHECK((rec.j3d[t].joints[j] - rec.j3d[0].joints[j]).norm() == doctest::Approx(0.0));
    }
}

TEST_CASE("stored labels are mutually consistent") {
    SynthConfig cfg;
    cfg.n_frames = 16;
    SequenceRecord rec = generate_sequence(cfg, 99);
    const auto& tmpl = geom::default_template();
    for (int t = 0; t < rec.n_frames(); ++t) {
        // j2d equals the projection of stored j3d, bit-exactly after f32 rounding
        geom::Keypoints2D proj = geom::project_weak_perspective(rec.j3d[t], rec.cam);
        for (int j = 0; j < geom::kNumJoints; ++j) {
            CHECK(static_cast<float>(proj.joints[j].x()) ==
                  static_cast<float>(rec.j2d[t].joints[j].x()));
            CHECK(static_cast<float>(proj.joints[j].y()) ==
                  static_cast<float>(rec.j2d[t].joints[j].y()));
        }
        // j3d equals forward kinematics of the stored pose
        geom::Keypoints3D fk = geom::forward_kinematics(rec.poses[t], rec.shape, tmpl);
        for (int j = 0; j < geom::kNumJoints; ++j)
            CHECK((fk.joints[j] - rec.j3d[t].joints[j]).norm() < 1e-6);
    }
}

TEST_CASE("displacement grows with temporal distance") {
    SynthConfig cfg;
    double d1 = 0, d10 = 0;
    long c1 = 0, c10 = 0;
    for (uint64_t seed = 0; seed < 100; ++seed) {
        SequenceRecord rec = generate_sequence(cfg, seed);
        auto mean_disp = [&](int d, double& acc, long& count) {
            for (int t = 0; t + d < rec.n_frames(); ++t)
                for (int j = 0; j < geom::kNumJoints; ++j) {
                    acc += (rec.j3d[t + d].joints[j] - rec.j3d[t].joints[j]).norm();
                    ++count;
                }
        };
        mean_disp(1, d1, c1);
        mean_disp(10, d10, c10);
    }
    CHECK(d1 / c1 < d10 / c10);
}

TEST_CASE("expected displacement is monotone over the half window") {
    SynthConfig cfg;
    cfg.n_frames = 40;
    std::vector<double> acc(static_cast<std::size_t>(cfg.n_frames / 2 + 1), 0.0);
    std::vector<long> count(acc.size(), 0);
    for (uint64_t seed = 0; seed < 120; ++seed) {
        SequenceRecord rec = generate_sequence(cfg, 5000 + seed);
        for (int d = 1; d <= cfg.n_frames / 2; ++d)
            for (int t = 0; t + d < rec.n_frames(); ++t)
                for (int j = 0; j < geom::kNumJoints; ++j) {
                    acc[static_cast<std::size_t>(d)] +=
                        (rec.j3d[t + d].joints[j] - rec.j3d[t].joints[j]).norm();
                    ++count[static_cast<std::size_t>(d)];
                }
    }
    for (int d = 2; d <= cfg.n_frames / 2; ++d) {
        const double prev = acc[static_cast<std::size_t>(d - 1)] / count[static_cast<std::size_t>(d - 1)];
        const double cur = acc[static_cast<std::size_t>(d)] / count[static_cast<std::size_t>(d)];
        CHECK(cur >= prev - 1e-4);
    }
}

TEST_CASE("renderer basics") {
    RenderStyle style;
    style.background = {0.1, 0.2, 0.3};

    SUBCASE("all joints far outside leave pure background") {
        geom::Keypoints2D j;
        for (auto& p : j.joints) p = geom::Vec2(-500.0, -500.0);
        Image img = render_frame(j, style, 64);
        for (std::size_t i = 0; i < img.pixels.size(); i += 3) {
            CHECK(img.pixels[i] == doctest::Approx(0.1f));
            CHECK(img.pixels[i + 1] == doctest::Approx(0.2f));
            CHECK(img.pixels[i + 2] == doctest::Approx(0.3f));
        }
    }

    SUBCASE("identical input renders identical pixels") {
        SynthConfig cfg;
        SequenceRecord rec = generate_sequence(cfg, 3);
        Image a = render_frame(rec.j2d[0], style, 64);
        Image b = render_frame(rec.j2d[0], style, 64);
        CHECK(a.pixels == b.pixels);
    }

    SUBCASE("joint blobs are brighter than the background") {
        SynthConfig cfg;
        SequenceRecord rec = generate_sequence(cfg, 3);
        Image img = render_frame(rec.j2d[0], style, 64);
        const float bg_lum = (0.1f + 0.2f + 0.3f) / 3;
        for (int j = 0; j < geom::kNumJoints; ++j) {
            const auto& p = rec.j2d[0].joints[j];
            const int x = static_cast<int>(std::lround(p.x()));
            const int y = static_cast<int>(std::lround(p.y()));
            if (x < 0 || x >= 64 || y < 0 || y >= 64) continue;
            const float* px = img.at(y, x);
            CHECK((px[0] + px[1] + px[2]) / 3 > bg_lum);
        }
    }

    SUBCASE("occluder covers its rectangle") {
        RenderStyle occluded = style;
        OccluderRect oc;
        oc.x0 = 10;
        oc.y0 = 10;
        oc.x1 = 20;
        oc.y1 = 20;
        oc.color = {0.5, 0.5, 0.5};
        occluded.occluder = oc;
        geom::Keypoints2D j;
        for (auto& p : j.joints) p = geom::Vec2(15.0, 15.0);
        Image img = render_frame(j, occluded, 64);
        CHECK(img.at(15, 15)[0] == doctest::Approx(0.5f));
    }
}

TEST_CASE("invalid configs are rejected") {
    SynthConfig cfg;
    cfg.n_frames = 1;
    CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
    cfg = {};
    cfg.grasp_hold_fraction = 1.5;
    CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
    cfg = {};
    cfg.image_size = 8;
    CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
    cfg = {};
    cfg.background_palette.clear();
    CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
}

TEST_CASE("dataset round trip and byte-identical regeneration") {
    namespace fs = std::filesystem;
    const fs::path dir_a = fs::temp_directory_path() / "tchand_test_ds_a";
    const fs::path dir_b = fs::temp_directory_path() / "tchand_test_ds_b";
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);

    SynthConfig cfg;
    cfg.n_frames = 10;
    cfg.image_size = 32;

    SUBCASE("empty dataset has a valid manifest") {
        make_dataset(dir_a.string(), 0, cfg, 1);
        SequenceDataset ds = load_dataset(dir_a.string());
        CHECK(ds.sequences.empty());
        CHECK(ds.image_size == 32);
    }

    SUBCASE("regeneration is byte identical and read-back matches memory") {
        make_dataset(dir_a.string(), 3, cfg, 42);
        make_dataset(dir_b.string(), 3, cfg, 42);
        for (int i = 0; i < 3; ++i) {
            char name[32];
            std::snprintf(name, sizeof(name), "seq_%06d.tcsq", i);
            CHECK(slurp(dir_a / name) == slurp(dir_b / name));
        }
        CHECK(slurp(dir_a / "manifest.json") == slurp(dir_b / "manifest.json"));

        SequenceDataset ds = load_dataset(dir_a.string());
        REQUIRE(ds.sequences.size() == 3);
        SequenceDataset mem = generate_dataset_in_memory(3, cfg, 42);
        for (int i = 0; i < 3; ++i) CHECK(same_record(ds.sequences[i], mem.sequences[i]));
        CHECK(ds.sequences[1].seq_id == "seq_000001");
    }

    SUBCASE("manifest count mismatch is detected") {
        make_dataset(dir_a.string(), 2, cfg, 7);
        // truncate the sequence list
        std::string manifest = slurp(dir_a / "manifest.json");
        auto pos = manifest.find("\"n_sequences\": 2");
        REQUIRE(pos != std::string::npos);
        manifest.replace(pos, 16, "\"n_sequences\": 3");
        write_text_file((dir_a / "manifest.json").string(), manifest);
        CHECK_THROWS_AS(load_dataset(dir_a.string()), IoError);
    }

    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
}

TEST_CASE("sequence container rejects corrupted headers") {
    namespace fs = std::filesystem;
    const fs::path path = fs::temp_directory_path() / "tchand_bad.tcsq";
    {
        std::ofstream os(path, std::ios::binary);
        os.write("NOPE", 4);
    }
    CHECK_THROWS_AS(read_sequence(path.string()), IoError);
    fs::remove(path);
}

TEST_SUITE_END();
