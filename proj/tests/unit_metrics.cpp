#include <doctest.h>

#include "tchand/metrics.hpp"
#include "test_util.hpp"

using namespace tchand;
using namespace tchand::metrics;
using geom::Vec3;

TEST_SUITE_BEGIN("metrics");

namespace {

PointCloud random_cloud(Rng& rng, std::size_t n = 21, double scale = 0.1) {
    PointCloud pts(n);
    for (auto& p : pts) p = Vec3(rng.gaussian(), rng.gaussian(), rng.gaussian()) * scale;
    return pts;
}

PointCloud similarity_transformed(const PointCloud& pts, double s, const geom::Mat3& r,
                                  const Vec3& t) {
    PointCloud out(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) out[i] = s * r * pts[i] + t;
    return out;
}

} // namespace

TEST_CASE("epe basics") {
    Rng rng(1);
    PointCloud gt = random_cloud(rng);
    CHECK(epe_mm(gt, gt) == doctest::Approx(0.0));

    PointCloud off = gt;
    for (auto& p : off) p += Vec3(0.003, 0.004, 0.0);
    CHECK(epe_mm(off, gt) == doctest::Approx(5.0));

    PointCloud shorter(gt.begin(), gt.begin() + 5);
    CHECK_THROWS_AS(epe_mm(shorter, gt), ShapeMismatch);
}

TEST_CASE("epe against an independent recomputation") {
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        PointCloud a = random_cloud(rng);
        PointCloud b = random_cloud(rng);
        long double acc = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const long double dx = a[i].x() - b[i].x();
            const long double dy = a[i].y() - b[i].y();
            const long double dz = a[i].z() - b[i].z();
            acc += std::sqrt(static_cast<double>(dx * dx + dy * dy + dz * dz));
        }
        const double expected = static_cast<double>(acc / a.size()) * 1000.0;
        CHECK(testutil::rel_err(epe_mm(a, b), expected) < 1e-9);
    }
}

TEST_CASE("root alignment") {
    Rng rng(3);
    PointCloud gt = random_cloud(rng);

    SUBCASE("already aligned input is unchanged") {
        PointCloud pred = gt;
        pred[5] += Vec3(0.01, 0, 0);
        PointCloud out = align_root(pred, gt);
        for (std::size_t i = 0; i < out.size(); ++i) CHECK((out[i] - pred[i]).norm() == 0.0);
    }

    SUBCASE("pure translation error vanishes") {
        PointCloud pred = gt;
        for (auto& p : pred) p += Vec3(0.5, -0.2, 0.1);
        CHECK(epe_mm(align_root(pred, gt), gt) == doctest::Approx(0.0));
    }

    SUBCASE("translation plus root-free noise leaves exactly the noise") {
        PointCloud noise_only = gt;
        PointCloud pred = gt;
        const Vec3 t(0.3, 0.4, -0.2);
        for (std::size_t i = 1; i < gt.size(); ++i) {
            const Vec3 n(rng.gaussian() * 0.001, rng.gaussian() * 0.001, rng.gaussian() * 0.001);
            noise_only[i] += n;
            pred[i] += n;
        }
        for (auto& p : pred) p += t;
        CHECK(epe_mm(align_root(pred, gt), gt) ==
              doctest::Approx(epe_mm(noise_only, gt)).epsilon(1e-9));
    }
}

TEST_CASE("scale-translation alignment") {
    Rng rng(4);
    PointCloud gt = random_cloud(rng);

    SUBCASE("errors inside the transform class vanish") {
        for (double a : {0.5, 1.0, 2.7}) {
            PointCloud pred;
            for (const auto& p : gt) pred.push_back(a * p + Vec3(0.1, -0.3, 0.8));
            CHECK(epe_mm(align_scale_translation(pred, gt), gt) < 1e-9 * 1000);
        }
    }

    SUBCASE("identical clouds recover the identity") {
        PointCloud out = align_scale_translation(gt, gt);
        for (std::size_t i = 0; i < out.size(); ++i) CHECK((out[i] - gt[i]).norm() < 1e-12);
    }

    SUBCASE("degenerate prediction is rejected") {
        PointCloud collapsed(gt.size(), Vec3(1, 2, 3));
        CHECK_THROWS_AS(align_scale_translation(collapsed, gt), DegenerateCloud);
    }
}

TEST_CASE("procrustes alignment recovers similarity transforms") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        PointCloud gt = random_cloud(rng);
        const double s = rng.uniform(0.5, 2.0);
        const geom::Mat3 r = testutil::random_rotation(rng);
        const Vec3 t(rng.gaussian(), rng.gaussian(), rng.gaussian());
        PointCloud pred = similarity_transformed(gt, s, r, t);
        CHECK(epe_mm(align_procrustes(pred, gt), gt) < 1e-9 * 1000);
    }

    SUBCASE("identity on equal clouds") {
        PointCloud gt = random_cloud(rng);
        PointCloud out = align_procrustes(gt, gt);
        for (std::size_t i = 0; i < out.size(); ++i) CHECK((out[i] - gt[i]).norm() < 1e-12);
    }

    SUBCASE("mirrored clouds are not matched by a reflection") {
        PointCloud gt = random_cloud(rng);
        PointCloud mirrored = gt;
        for (auto& p : mirrored) p.z() = -p.z();
        // a reflection would give zero residual; a proper rotation cannot
        CHECK(epe_mm(align_procrustes(mirrored, gt), gt) > 1e-6);
    }
}

TEST_CASE("alignment ordering on nested-class errors") {
    // Translation dominates scale, scale dominates rotation, rotation
    // dominates the noise floor; each solver then strictly improves on the
    // previous one for every pair.
    Rng rng(6);
    for (int trial = 0; trial < 500; ++trial) {
        PointCloud gt = random_cloud(rng);
        const double s = rng.bernoulli(0.5) ? rng.uniform(0.6, 0.85) : rng.uniform(1.2, 1.5);
        const geom::Mat3 r =
            Eigen::AngleAxisd((rng.bernoulli(0.5) ? 1 : -1) * rng.uniform(0.2, 0.45),
                              Vec3(rng.gaussian(), rng.gaussian(), rng.gaussian()).normalized())
                .toRotationMatrix();
        Vec3 t(rng.gaussian(), rng.gaussian(), rng.gaussian());
        t = t.normalized() * rng.uniform(0.5, 1.0);
        PointCloud pred = similarity_transformed(gt, s, r, t);
        for (auto& p : pred)
            p += Vec3(rng.gaussian(), rng.gaussian(), rng.gaussian()) * 0.0005;

        const double raw = epe_mm(pred, gt);
        const double ra = epe_mm(align_root(pred, gt), gt);
        const double sta = epe_mm(align_scale_translation(pred, gt), gt);
        const double pa = epe_mm(align_procrustes(pred, gt), gt);
        CHECK(pa <= sta + 1e-9);
        CHECK(sta <= ra + 1e-9);
        CHECK(ra <= raw + 1e-9);
    }
}

TEST_CASE("fscore") {
    Rng rng(7);
    PointCloud gt = random_cloud(rng, 41);

    SUBCASE("identical clouds score one at any positive threshold") {
        CHECK(fscore(gt, gt, 0.001) == doctest::Approx(1.0));
        CHECK(fscore(gt, gt, 5.0) == doctest::Approx(1.0));
    }

    SUBCASE("huge threshold scores one") {
        PointCloud pred = random_cloud(rng, 41);
        CHECK(fscore(pred, gt, 1e9) == doctest::Approx(1.0));
    }

    SUBCASE("monotone non-decreasing in the threshold and symmetric") {
        PointCloud pred = gt;
        for (auto& p : pred) p += Vec3(rng.gaussian(), rng.gaussian(), rng.gaussian()) * 0.004;
        double prev = 0.0;
        for (double thr : {1.0, 2.0, 5.0, 8.0, 15.0, 30.0}) {
            const double f = fscore(pred, gt, thr);
            CHECK(f >= prev - 1e-12);
            CHECK(f == doctest::Approx(fscore(gt, pred, thr)));
            prev = f;
        }
    }
}

TEST_CASE("acceleration error") {
    const double fps = 30.0;
    Rng rng(8);

    SUBCASE("affine trajectories have zero acceleration difference") {
        std::vector<PointCloud> pred, gt;
        PointCloud base = random_cloud(rng);
        PointCloud vel = random_cloud(rng, base.size(), 0.01);
        PointCloud base2 = random_cloud(rng);
        for (int t = 0; t < 6; ++t) {
            PointCloud pt(base.size()), qt(base.size());
            for (std::size_t j = 0; j < base.size(); ++j) {
                pt[j] = base[j] + t * vel[j];
                qt[j] = base2[j] - 0.5 * t * vel[j];
            }
            pred.push_back(pt);
            gt.push_back(qt);
        }
        CHECK(accel_error_mm_s2(pred, gt, fps) < 1e-6);
    }

    SUBCASE("prediction equal to ground truth scores zero") {
        std::vector<PointCloud> traj;
        for (int t = 0; t < 5; ++t) traj.push_back(random_cloud(rng));
        CHECK(accel_error_mm_s2(traj, traj, fps) == doctest::Approx(0.0));
    }

    SUBCASE("error grows with the noise level") {
        std::vector<PointCloud> gt2;
        for (int t = 0; t < 12; ++t) gt2.push_back(random_cloud(rng));
        double prev = 0.0;
        for (double sigma : {0.001, 0.004, 0.016, 0.064}) {
            Rng noise_rng(99);
            std::vector<PointCloud> pred = gt2;
            for (auto& frame : pred)
                for (auto& p : frame)
                    p += Vec3(noise_rng.gaussian(), noise_rng.gaussian(), noise_rng.gaussian()) *
                         sigma;
            const double err = accel_error_mm_s2(pred, gt2, fps);
            CHECK(err > prev);
            prev = err;
        }
    }

    SUBCASE("too short trajectories are rejected") {
        std::vector<PointCloud> two(2, random_cloud(rng));
        CHECK_THROWS_AS(accel_error_mm_s2(two, two, fps), TooShort);
    }
}

TEST_CASE("ground-truth injection drives every metric to its ideal") {
    synth::SynthConfig cfg;
    cfg.n_frames = 8;
    cfg.image_size = 32;
    synth::SequenceDataset ds = synth::generate_dataset_in_memory(2, cfg, 31);

    nn::ModelConfig mc;
    mc.image_size = 32;
    nn::ModelParams params = nn::init_params(mc, 1);

    EvalOptions opts;
    opts.inject_ground_truth = true;
    MetricsReport report = evaluate(params, ds, opts);
    CHECK(report.n_sequences == 2);
    CHECK(report.aggregate.epe.at("none") == doctest::Approx(0.0));
    CHECK(report.aggregate.epe.at("pa") == doctest::Approx(0.0));
    CHECK(report.aggregate.v2v.at("none") == doctest::Approx(0.0));
    CHECK(report.aggregate.accel_mm_s2 == doctest::Approx(0.0));
    for (const auto& [key, value] : report.aggregate.fscore) CHECK(value == doctest::Approx(1.0));

    const std::string json = report.to_json();
    CHECK(json.find("\"aggregate\"") != std::string::npos);
    CHECK(json.find("per_sequence") != std::string::npos);
}

TEST_CASE("v2v equals epe on the densified set with a uniform offset") {
    const auto& tmpl = geom::default_template();
    geom::HandPose pose;
    geom::HandShape shape;
    geom::Keypoints3D j = geom::forward_kinematics(pose, shape, tmpl);
    auto gt = geom::virtual_vertices(j, tmpl);
    auto pred = gt;
    for (auto& p : pred) p += Vec3(0, 0, 0.001);
    CHECK(epe_mm(pred, gt) == doctest::Approx(1.0));
}

TEST_CASE("decoded head outputs produce a valid camera and kinematics") {
    Rng rng(12);
    Tensor<float> raw({nn::kHeadOutputs});
    for (auto& v : raw.data) v = static_cast<float>(rng.gaussian());
    for (int j = 0; j < 16; ++j) {
        raw.data[static_cast<std::size_t>(j * 6)] += 2.f;
        raw.data[static_cast<std::size_t>(j * 6 + 4)] += 2.f;
    }
    DecodedFrame f = decode_outputs(raw);
    CHECK(f.cam.s > 0.0);
    for (const auto& p : f.j3d.joints) {
        CHECK(std::isfinite(p.x()));
        CHECK(std::isfinite(p.y()));
        CHECK(std::isfinite(p.z()));
    }
}

TEST_SUITE_END();
