#pragma once

#include <array>
#include <vector>

#include "tchand/geometry.hpp"
#include "tchand/tape.hpp"

namespace tchand::nn {

// Differentiable mirror of the kinematic chain in tchand::geom, built from
// tape primitives so gradients flow through pose, shape, and camera.

template <class T>
struct Rot3Var {
    Var c0, c1, c2; // columns
};

// constant 3x3 matrix applied to a variable 3-vector
template <class T>
Var const_matvec(Tape<T>& tape, const geom::Mat3& m, Var v) {
    Tensor<T> w({3, 3});
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) w.data[static_cast<std::size_t>(r) * 3 + c] = static_cast<T>(m(r, c));
    return tape.linear(tape.constant(std::move(w)), tape.constant(Tensor<T>({3})), v);
}

template <class T>
Var matvec(Tape<T>& tape, const Rot3Var<T>& r, Var v) {
    Var x = tape.mul_scalar(r.c0, tape.component(v, 0));
    Var y = tape.mul_scalar(r.c1, tape.component(v, 1));
    Var z = tape.mul_scalar(r.c2, tape.component(v, 2));
    return tape.add(tape.add(x, y), z);
}

// r * m with m constant: columns are r applied to m's columns
template <class T>
Rot3Var<T> mat_times_const(Tape<T>& tape, const Rot3Var<T>& r, const geom::Mat3& m) {
    auto col = [&](int j) {
        Var x = tape.scale(r.c0, static_cast<T>(m(0, j)));
        Var y = tape.scale(r.c1, static_cast<T>(m(1, j)));
        Var z = tape.scale(r.c2, static_cast<T>(m(2, j)));
        return tape.add(tape.add(x, y), z);
    };
    return {col(0), col(1), col(2)};
}

template <class T>
Rot3Var<T> matmul(Tape<T>& tape, const Rot3Var<T>& a, const Rot3Var<T>& b) {
    return {matvec(tape, a, b.c0), matvec(tape, a, b.c1), matvec(tape, a, b.c2)};
}

// Gram-Schmidt on the two halves of a 6D rotation block. eps only guards
// the exact-zero case so a cold head cannot divide by zero; it is far below
// working precision otherwise.
template <class T>
Rot3Var<T> rot6d(Tape<T>& tape, Var six, T eps = T(1e-20)) {
    Var a1 = tape.slice(six, 0, 3);
    Var a2 = tape.slice(six, 3, 3);
    Var b1 = normalized(tape, a1, eps);
    Var proj = tape.mul_scalar(b1, tape.dot(b1, a2));
    Var b2 = normalized(tape, tape.sub(a2, proj), eps);
    Var b3 = tape.cross3(b1, b2);
    return {b1, b2, b3};
}

template <class T>
struct HandForward {
    std::array<Var, geom::kNumJoints> joints; // 3-vectors, meters
    Var j3d_flat;                             // {63}
};

// pose6d: {96} (16 joints x 6), beta: {10}
template <class T>
HandForward<T> hand_forward(Tape<T>& tape, const geom::KinematicTemplate& tmpl, Var pose6d,
                            Var beta) {
    using geom::kNumJoints;

    HandForward<T> out;
    std::array<Rot3Var<T>, kNumJoints> world_rot;

    // shaped rest positions: rest + shape_dirs * beta, one linear op each
    std::array<Var, kNumJoints> shaped;
    for (int i = 0; i < kNumJoints; ++i) {
        Tensor<T> dirs({3, geom::kNumShapeCoeffs});
        for (int r = 0; r < 3; ++r)
            for (int k = 0; k < geom::kNumShapeCoeffs; ++k)
                dirs.data[static_cast<std::size_t>(r) * geom::kNumShapeCoeffs + k] =
                    static_cast<T>(tmpl.shape_dirs[i][k](r));
        Tensor<T> rest({3});
        for (int r = 0; r < 3; ++r) rest.data[static_cast<std::size_t>(r)] = static_cast<T>(tmpl.rest_joints[i](r));
        shaped[i] = tape.linear(tape.constant(std::move(dirs)), tape.constant(std::move(rest)), beta);
    }

    world_rot[0] = rot6d(tape, tape.slice(pose6d, 0, 6));
    out.joints[0] = shaped[0];
    for (int i = 1; i < kNumJoints; ++i) {
        const int p = tmpl.parent[i];
        const int slot = geom::articulation_slot(tmpl, i);
        Var bone = tape.sub(shaped[i], shaped[p]);
        out.joints[i] = tape.add(out.joints[p], matvec(tape, world_rot[p], bone));
        if (slot >= 0) {
            Rot3Var<T> local = rot6d(tape, tape.slice(pose6d, 6 * slot, 6));
            const geom::Mat3& frame = tmpl.local_frames[i];
            // world = parent * (frame * local * frame^T)
            Rot3Var<T> in_frame = mat_times_const(tape, local, frame.transpose());
            Rot3Var<T> conj{const_matvec(tape, frame, in_frame.c0),
                            const_matvec(tape, frame, in_frame.c1),
                            const_matvec(tape, frame, in_frame.c2)};
            world_rot[i] = matmul(tape, world_rot[p], conj);
        } else {
            world_rot[i] = world_rot[p];
        }
    }

    std::vector<Var> parts(out.joints.begin(), out.joints.end());
    out.j3d_flat = tape.concat(parts);
    return out;
}

// weak-perspective projection of all joints; cam_s scalar, cam_t {2}
template <class T>
Var project_flat(Tape<T>& tape, const HandForward<T>& hand, Var cam_s, Var cam_t) {
    std::vector<Var> parts;
    parts.reserve(geom::kNumJoints);
    for (int i = 0; i < geom::kNumJoints; ++i) {
        Var xy = tape.slice(hand.joints[i], 0, 2);
        parts.push_back(tape.add(tape.mul_scalar(xy, cam_s), cam_t));
    }
    return tape.concat(parts); // {42}
}

} // namespace tchand::nn
