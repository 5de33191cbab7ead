#include <doctest.h>

#include "tchand/hand_diff.hpp"
#include "tchand/model.hpp"
#include "tchand/tape.hpp"
#include "test_util.hpp"

using namespace tchand;
using namespace tchand::nn;

TEST_SUITE_BEGIN("tape");

namespace {

// finite-difference check of an arbitrary scalar-valued graph builder
void check_gradients(
    const std::function<Var(Tape<double>&, const std::vector<Var>&)>& build,
    const std::vector<Tensor<double>>& inputs, double h = 1e-6, double tol = 1e-5) {
    Tape<double> tape;
    std::vector<Var> vars;
    for (const auto& t : inputs) vars.push_back(tape.leaf(t));
    Var out = build(tape, vars);
    tape.backward(out);

    for (std::size_t vi = 0; vi < inputs.size(); ++vi) {
        const Tensor<double>& analytic = tape.grad(vars[vi]);
        for (std::size_t i = 0; i < inputs[vi].size(); ++i) {
            auto eval = [&](double delta) {
                Tape<double> t2;
                std::vector<Var> vs;
                for (std::size_t vj = 0; vj < inputs.size(); ++vj) {
                    Tensor<double> copy = inputs[vj];
                    if (vj == vi) copy.data[i] += delta;
                    vs.push_back(t2.leaf(copy));
                }
                return t2.val(build(t2, vs)).data[0];
            };
            const double fd = (eval(h) - eval(-h)) / (2 * h);
            const double a = analytic.data[i];
            INFO("input ", vi, " elem ", i, " analytic ", a, " fd ", fd);
            CHECK(std::abs(a - fd) <= tol * std::max({std::abs(a), std::abs(fd), 1.0}));
        }
    }
}

Tensor<double> random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
    Tensor<double> t(std::move(shape));
    for (auto& v : t.data) v = rng.gaussian() * scale;
    return t;
}

} // namespace

TEST_CASE("elementwise and reduction gradients match finite differences") {
    Rng rng(1);
    auto a = random_tensor({5}, rng);
    auto b = random_tensor({5}, rng);
    for (auto& v : b.data) v += 3.0; // keep log/sqrt domains safe

    check_gradients([](Tape<double>& t, const std::vector<Var>& v) {
        return t.sum(t.mul(t.add(v[0], v[1]), t.sub(v[0], v[1])));
    }, {a, b});

    check_gradients([](Tape<double>& t, const std::vector<Var>& v) {
        return t.mean(t.exp_(t.scale(v[0], 0.3)));
    }, {a});

    check_gradients([](Tape<double>& t, const std::vector<Var>& v) {
        return t.sum(t.log_(v[0]));
    }, {b});

    check_gradients([](Tape<double>& t, const std::vector<Var>& v) {
        return t.sum(t.sqrt_(v[0]));
    }, {b});

    check_gradients([](Tape<double>& t, const std::vector<Var>& v) {
        return t.sum(t.softplus(v[0]));
    }, {a});

    check_gradients([](Tape<double>& t, const std::vector<Var>& v) {
        return t.dot(v[0], v[1]);
    }, {a, b});

    check_gradients([](Tape<double>& t, const std::vector<Var>& v) {
        return t.sum(t.abs_(v[0]));
    }, {a}); // all entries away from zero almost surely

    check_gradients([](Tape<double>& t, const std::vector<Var>& v) {
        return t.sum(t.relu(v[0]));
    }, {a});
}

TEST_CASE("scalar broadcast, slicing and packing gradients") {
    Rng rng(2);
    auto vec = random_tensor({6}, rng);
    auto s = random_tensor({}, rng);
    s.data[0] = 1.7;

    check_gradients([](Tape<double>& t, const std::vector<Var>& v) {
        return t.sum(t.mul_scalar(v[0], t.reciprocal(v[1])));
    }, {vec, s});

    check_gradients([](Tape<double>& t, const std::vector<Var>& v) {
        Var sl = t.slice(v[0], 1, 3);
        Var c0 = t.component(v[0], 0);
        return t.add(t.sum(sl), t.mul(c0, c0));
    }, {vec});

    check_gradients([](Tape<double>& t, const std::vector<Var>& v) {
        std::vector<Var> scalars;
        for (int i = 0; i < 4; ++i) scalars.push_back(t.component(v[0], i));
        return t.sum(t.exp_(t.pack(scalars)));
    }, {vec});

    check_gradients([](Tape<double>& t, const std::vector<Var>& v) {
        return t.sum(t.concat({v[0], t.mul(v[0], v[0])}));
    }, {vec});
}

TEST_CASE("cross product gradient") {
    Rng rng(3);
    auto a = random_tensor({3}, rng);
    auto b = random_tensor({3}, rng);
    check_gradients([](Tape<double>& t, const std::vector<Var>& v) {
        Var c = t.cross3(v[0], v[1]);
        return t.dot(c, c);
    }, {a, b});
}

TEST_CASE("conv, pooling and linear gradients match finite differences") {
    Rng rng(4);
    auto x = random_tensor({6, 6, 2}, rng, 0.5);
    auto w = random_tensor({3, 3, 3, 2}, rng, 0.5);
    auto b = random_tensor({3}, rng, 0.1);
    check_gradients([](Tape<double>& t, const std::vector<Var>& v) {
        return t.sum(t.relu(t.conv2d(v[0], v[1], v[2])));
    }, {x, w, b}, 1e-6, 1e-4);

    check_gradients([](Tape<double>& t, const std::vector<Var>& v) {
        return t.sum(t.global_avg_pool(t.conv2d(v[0], v[1], v[2])));
    }, {x, w, b}, 1e-6, 1e-4);

    auto lw = random_tensor({4, 5}, rng);
    auto lb = random_tensor({4}, rng);
    auto lx = random_tensor({5}, rng);
    check_gradients([](Tape<double>& t, const std::vector<Var>& v) {
        return t.sum(t.relu(t.linear(v[0], v[1], v[2])));
    }, {lw, lb, lx});
}

TEST_CASE("conv output shape halves the spatial dims") {
    Tape<float> tape;
    Var x = tape.constant(Tensor<float>({8, 8, 3}));
    Var w = tape.constant(Tensor<float>({5, 3, 3, 3}));
    Var b = tape.constant(Tensor<float>({5}));
    Var y = tape.conv2d(x, w, b);
    CHECK(tape.val(y).shape == std::vector<int>{4, 4, 5});
}

TEST_CASE("cosine similarity values and edge cases") {
    Tape<double> tape;
    Tensor<double> e1({3}, {1, 0, 0});
    Tensor<double> e2({3}, {0, 1, 0});
    Tensor<double> ne1({3}, {-2, 0, 0});
    Var u = tape.leaf(e1);
    Var v = tape.leaf(e2);
    Var w = tape.leaf(ne1);
    CHECK(tape.val(cosine_sim(tape, u, u)).data[0] == doctest::Approx(1.0));
    CHECK(tape.val(cosine_sim(tape, u, v)).data[0] == doctest::Approx(0.0));
    CHECK(tape.val(cosine_sim(tape, u, w)).data[0] == doctest::Approx(-1.0));

    Var zero = tape.leaf(Tensor<double>({3}));
    CHECK_THROWS_AS(cosine_sim(tape, u, zero), ZeroVector);
}

TEST_CASE("cosine similarity gradient") {
    Rng rng(5);
    auto a = random_tensor({8}, rng);
    auto b = random_tensor({8}, rng);
    check_gradients([](Tape<double>& t, const std::vector<Var>& v) {
        return cosine_sim(t, v[0], v[1]);
    }, {a, b});
}

TEST_CASE("logsumexp matches the naive evaluation and stays stable") {
    Tape<double> tape;
    Tensor<double> x({4}, {100.0, 101.0, 99.5, 100.5});
    Var v = tape.leaf(x);
    const double got = tape.val(logsumexp(tape, v)).data[0];
    double naive = 0;
    for (double xi : x.data) naive += std::exp(xi - 100.0);
    CHECK(got == doctest::Approx(100.0 + std::log(naive)));

    Rng rng(6);
    auto y = random_tensor({6}, rng, 3.0);
    check_gradients([](Tape<double>& t, const std::vector<Var>& v2) {
        return logsumexp(t, v2[0]);
    }, {y});
}

TEST_CASE("gradient access requires a backward pass") {
    Tape<double> tape;
    Var v = tape.leaf(Tensor<double>({2}, {1, 2}));
    CHECK_THROWS_AS(tape.grad(v), GraphNotBuilt);
    Var s = tape.sum(v);
    tape.backward(s);
    CHECK(tape.grad(v).data[0] == doctest::Approx(1.0));
}

TEST_CASE("backward root must be scalar") {
    Tape<double> tape;
    Var v = tape.leaf(Tensor<double>({2}, {1, 2}));
    CHECK_THROWS_AS(tape.backward(v), ShapeMismatch);
}

TEST_CASE("differentiable kinematic chain matches the geometry module") {
    const auto& tmpl = geom::default_template();
    Rng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        geom::HandPose pose = testutil::random_pose(rng);
        geom::HandShape shape = testutil::random_shape(rng);

        Tensor<double> pose_t({kPoseOutputs});
        for (int s = 0; s < geom::kNumArticulated; ++s)
            for (int c = 0; c < 6; ++c) pose_t.data[static_cast<std::size_t>(s * 6 + c)] = pose.joint(s).r[static_cast<std::size_t>(c)];
        Tensor<double> beta_t({geom::kNumShapeCoeffs});
        for (int k = 0; k < geom::kNumShapeCoeffs; ++k) beta_t.data[static_cast<std::size_t>(k)] = shape.beta[static_cast<std::size_t>(k)];

        Tape<double> tape;
        Var pose_v = tape.leaf(pose_t);
        Var beta_v = tape.leaf(beta_t);
        auto hand = hand_forward(tape, tmpl, pose_v, beta_v);

        geom::Keypoints3D reference = geom::forward_kinematics(pose, shape, tmpl);
        const auto& flat = tape.val(hand.j3d_flat).data;
        for (int j = 0; j < geom::kNumJoints; ++j) {
            CHECK(std::abs(flat[static_cast<std::size_t>(3 * j)] - reference.joints[j].x()) < 1e-9);
            CHECK(std::abs(flat[static_cast<std::size_t>(3 * j + 1)] - reference.joints[j].y()) < 1e-9);
            CHECK(std::abs(flat[static_cast<std::size_t>(3 * j + 2)] - reference.joints[j].z()) < 1e-9);
        }
    }
}

TEST_CASE("kinematic chain gradients match central differences") {
    // the 96 pose scalars and 10 shape scalars, h = 1e-5, relative 1e-4
    const auto& tmpl = geom::default_template();
    Rng rng(8);
    geom::HandPose pose = testutil::random_pose(rng);
    geom::HandShape shape = testutil::random_shape(rng);

    Tensor<double> pose_t({kPoseOutputs});
    for (int s = 0; s < geom::kNumArticulated; ++s)
        for (int c = 0; c < 6; ++c) pose_t.data[static_cast<std::size_t>(s * 6 + c)] = pose.joint(s).r[static_cast<std::size_t>(c)];
    Tensor<double> beta_t({geom::kNumShapeCoeffs});
    for (int k = 0; k < geom::kNumShapeCoeffs; ++k) beta_t.data[static_cast<std::size_t>(k)] = shape.beta[static_cast<std::size_t>(k)];

    // weighted sum of coordinates as the probe scalar
    Tensor<double> probe({3 * geom::kNumJoints});
    Rng prng(9);
    for (auto& v : probe.data) v = prng.gaussian();

    auto build = [&](Tape<double>& t, const std::vector<Var>& v) {
        auto hand = hand_forward(t, tmpl, v[0], v[1]);
        return t.dot(hand.j3d_flat, t.constant(probe));
    };

    Tape<double> tape;
    std::vector<Var> vars{tape.leaf(pose_t), tape.leaf(beta_t)};
    Var out = build(tape, vars);
    tape.backward(out);

    const double h = 1e-5;
    for (int which = 0; which < 2; ++which) {
        const Tensor<double>& input = which == 0 ? pose_t : beta_t;
        const Tensor<double>& analytic = tape.grad(vars[static_cast<std::size_t>(which)]);
        for (std::size_t i = 0; i < input.size(); ++i) {
            auto eval = [&](double delta) {
                Tape<double> t2;
                Tensor<double> p2 = pose_t;
                Tensor<double> b2 = beta_t;
                (which == 0 ? p2 : b2).data[i] += delta;
                std::vector<Var> vs{t2.leaf(p2), t2.leaf(b2)};
                return t2.val(build(t2, vs)).data[0];
            };
            const double fd = (eval(h) - eval(-h)) / (2 * h);
            const double a = analytic.data[i];
            CHECK(testutil::rel_err(a, fd, 1e-6) < 1e-4);
        }
    }
}

TEST_CASE("projection layer is the affine camera map") {
    const auto& tmpl = geom::default_template();
    Rng rng(10);
    geom::HandPose pose = testutil::random_pose(rng);
    geom::HandShape shape = testutil::random_shape(rng);

    Tensor<double> pose_t({kPoseOutputs});
    for (int s = 0; s < geom::kNumArticulated; ++s)
        for (int c = 0; c < 6; ++c) pose_t.data[static_cast<std::size_t>(s * 6 + c)] = pose.joint(s).r[static_cast<std::size_t>(c)];
    Tensor<double> beta_t({geom::kNumShapeCoeffs});
    for (int k = 0; k < geom::kNumShapeCoeffs; ++k) beta_t.data[static_cast<std::size_t>(k)] = shape.beta[static_cast<std::size_t>(k)];

    Tape<double> tape;
    auto hand = hand_forward(tape, tmpl, tape.leaf(pose_t), tape.leaf(beta_t));
    Var s = tape.leaf(Tensor<double>({}, {170.0}));
    Var t2 = tape.leaf(Tensor<double>({2}, {32.0, 16.0}));
    Var j2d = project_flat(tape, hand, s, t2);

    geom::Keypoints3D ref3 = geom::forward_kinematics(pose, shape, tmpl);
    geom::CameraWeakPerspective cam;
    cam.s = 170.0;
    cam.t = {32.0, 16.0};
    geom::Keypoints2D ref2 = geom::project_weak_perspective(ref3, cam);
    const auto& flat = tape.val(j2d).data;
    for (int j = 0; j < geom::kNumJoints; ++j) {
        CHECK(std::abs(flat[static_cast<std::size_t>(2 * j)] - ref2.joints[j].x()) < 1e-9);
        CHECK(std::abs(flat[static_cast<std::size_t>(2 * j + 1)] - ref2.joints[j].y()) < 1e-9);
    }
}

TEST_SUITE_END();
