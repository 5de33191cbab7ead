#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <array>
#include <vector>

#include "tchand/errors.hpp"

namespace tchand::geom {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

constexpr int kNumJoints = 21;        // wrist + 4 per finger
constexpr int kNumArticulated = 16;   // wrist + 3 per finger (tips carry none)
constexpr int kNumShapeCoeffs = 10;
constexpr int kNumVirtualVertices = kNumJoints + (kNumJoints - 1); // joints + bone midpoints

// Two unnormalized 3-vectors, column-major [a1; a2].
struct Rotation6D {
    std::array<double, 6> r{1, 0, 0, 0, 1, 0};

    static Rotation6D identity() { return Rotation6D{}; }
};

struct HandPose {
    Rotation6D wrist;                       // global orientation
    std::array<Rotation6D, 15> fingers;     // local joint rotations

    const Rotation6D& joint(int i) const { return i == 0 ? wrist : fingers[i - 1]; }
    Rotation6D& joint(int i) { return i == 0 ? wrist : fingers[i - 1]; }
};

struct HandShape {
    std::array<double, kNumShapeCoeffs> beta{};
};

struct KinematicTemplate {
    std::array<Vec3, kNumJoints> rest_joints;                 // meters
    std::array<int, kNumJoints> parent;                       // parent[0] == -1
    // per-joint linear shape basis, meters per unit coefficient
    std::array<std::array<Vec3, kNumShapeCoeffs>, kNumJoints> shape_dirs;
    std::array<int, kNumArticulated> articulated;             // joint indices carrying rotations
    // constant local rotation frames, x axis along the rest-pose parent bone
    std::array<Mat3, kNumJoints> local_frames;
};

struct Keypoints3D {
    std::array<Vec3, kNumJoints> joints; // meters, camera frame
};

struct Keypoints2D {
    std::array<Vec2, kNumJoints> joints; // pixels
};

struct CameraWeakPerspective {
    double s = 1.0;  // pixels per meter
    Vec2 t{0.0, 0.0};
};

// Gram-Schmidt orthonormalization of the two column vectors.
// Throws DegenerateInput when a half has norm <= 1e-8 or the halves are
// parallel within 1e-6 rad.
Mat3 rot6d_to_matrix(const Rotation6D& r);

// Inverse map: first two columns of M. Throws NotARotation when M is not
// orthonormal within 1e-5.
Rotation6D matrix_to_rot6d(const Mat3& m);

// The canonical 21-joint template used throughout the project.
const KinematicTemplate& default_template();

// Shaped rest joints: rest + shape_dirs * beta.
std::array<Vec3, kNumJoints> shaped_rest_joints(const KinematicTemplate& tmpl,
                                                const HandShape& shape);

// Rigid chain composition over the joint tree. The wrist rotation acts
// globally about the shaped root.
Keypoints3D forward_kinematics(const HandPose& pose, const HandShape& shape,
                               const KinematicTemplate& tmpl);

Keypoints2D project_weak_perspective(const Keypoints3D& j3d, const CameraWeakPerspective& cam);

// Joints plus bone midpoints (41 points); the stand-in vertex set for
// mesh-level metrics.
std::vector<Vec3> virtual_vertices(const Keypoints3D& j3d, const KinematicTemplate& tmpl);

bool is_articulated(const KinematicTemplate& tmpl, int joint);
int articulation_slot(const KinematicTemplate& tmpl, int joint); // -1 if none

} // namespace tchand::geom
