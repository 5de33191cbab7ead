#include "tchand/geometry.hpp"

#include <cmath>

namespace tchand::geom {

Mat3 rot6d_to_matrix(const Rotation6D& r) {
    Vec3 a1(r.r[0], r.r[1], r.r[2]);
    Vec3 a2(r.r[3], r.r[4], r.r[5]);
    const double n1 = a1.norm();
    const double n2 = a2.norm();
    if (n1 <= 1e-8 || n2 <= 1e-8)
        throw DegenerateInput("6d rotation half-vector norm below 1e-8");
    Vec3 b1 = a1 / n1;
    Vec3 u2 = a2 - b1.dot(a2) * b1;
    // parallel halves leave nothing orthogonal to span
    if (u2.norm() <= 1e-6 * n2)
        throw DegenerateInput("6d rotation half-vectors are parallel");
    Vec3 b2 = u2.normalized();
    Vec3 b3 = b1.cross(b2);
    Mat3 m;
    m.col(0) = b1;
    m.col(1) = b2;
    m.col(2) = b3;
    return m;
}

Rotation6D matrix_to_rot6d(const Mat3& m) {
    Mat3 delta = m.transpose() * m - Mat3::Identity();
    if (delta.cwiseAbs().maxCoeff() > 1e-5 || std::abs(m.determinant() - 1.0) > 1e-5)
        throw NotARotation("matrix is not a proper rotation within 1e-5");
    Rotation6D r;
    for (int i = 0; i < 3; ++i) {
        r.r[i] = m(i, 0);
        r.r[3 + i] = m(i, 1);
    }
    return r;
}

bool is_articulated(const KinematicTemplate& tmpl, int joint) {
    return articulation_slot(tmpl, joint) >= 0;
}

int articulation_slot(const KinematicTemplate& tmpl, int joint) {
    for (int s = 0; s < kNumArticulated; ++s)
        if (tmpl.articulated[s] == joint) return s;
    return -1;
}

namespace {

Mat3 frame_from_bone(const Vec3& bone) {
    Vec3 x = bone.normalized();
    Vec3 helper = std::abs(x.z()) < 0.9 ? Vec3(0, 0, 1) : Vec3(0, 1, 0);
    Vec3 y = helper.cross(x).normalized();
    Vec3 z = x.cross(y);
    Mat3 f;
    f.col(0) = x;
    f.col(1) = y;
    f.col(2) = z;
    return f;
}

KinematicTemplate build_default_template() {
    KinematicTemplate t;
    // wrist, then thumb/index/middle/ring/pinky, each mcp->pip->dip->tip
    const double j[kNumJoints][3] = {
        {0.000, 0.000, 0.000},                                                     // 0 wrist
        {0.034, 0.024, 0.008}, {0.058, 0.050, 0.014}, {0.072, 0.068, 0.017},
        {0.083, 0.082, 0.019},                                                     // 1-4 thumb
        {0.030, 0.088, 0.000}, {0.032, 0.122, 0.000}, {0.033, 0.144, 0.000},
        {0.034, 0.162, 0.000},                                                     // 5-8 index
        {0.008, 0.093, 0.000}, {0.008, 0.130, 0.000}, {0.008, 0.155, 0.000},
        {0.008, 0.175, 0.000},                                                     // 9-12 middle
        {-0.014, 0.089, 0.000}, {-0.015, 0.123, 0.000}, {-0.016, 0.146, 0.000},
        {-0.017, 0.164, 0.000},                                                    // 13-16 ring
        {-0.035, 0.080, 0.000}, {-0.038, 0.106, 0.000}, {-0.040, 0.124, 0.000},
        {-0.041, 0.139, 0.000},                                                    // 17-20 pinky
    };
    const int parent[kNumJoints] = {-1, 0, 1, 2, 3, 0, 5, 6, 7, 0, 9, 10, 11, 0, 13, 14, 15, 0, 17, 18, 19};
    for (int i = 0; i < kNumJoints; ++i) {
        t.rest_joints[i] = Vec3(j[i][0], j[i][1], j[i][2]);
        t.parent[i] = parent[i];
    }
    t.articulated = {0, 1, 2, 3, 5, 6, 7, 9, 10, 11, 13, 14, 15, 17, 18, 19};

    for (auto& per_joint : t.shape_dirs)
        for (auto& dir : per_joint) dir = Vec3::Zero();

    auto finger_root = [&](int joint) {
        int p = joint;
        while (t.parent[p] != 0) p = t.parent[p];
        return p;
    };
    for (int i = 0; i < kNumJoints; ++i) {
        const Vec3& rest = t.rest_joints[i];
        t.shape_dirs[i][0] = 0.040 * rest;                       // overall size
        t.shape_dirs[i][1] = Vec3(0, 0.030 * rest.y(), 0);       // finger length
        t.shape_dirs[i][2] = Vec3(0.030 * rest.x(), 0, 0);       // palm spread
        if (i >= 1 && i <= 4) t.shape_dirs[i][3] = 0.040 * rest; // thumb size
    }
    // per-finger length modes 4..8
    const int finger_mode[5] = {4, 5, 6, 7, 8};
    for (int i = 1; i < kNumJoints; ++i) {
        int root = finger_root(i);
        int finger = (root - 1) / 4;
        Vec3 from_root = t.rest_joints[i] - t.rest_joints[root];
        t.shape_dirs[i][finger_mode[finger]] = 0.025 * from_root;
    }
    // mode 9: knuckle arch, lifts middle phalanges out of the palm plane
    for (int i = 1; i < kNumJoints; ++i) {
        if (t.parent[i] != 0 && t.parent[t.parent[i]] != 0)
            t.shape_dirs[i][9] = Vec3(0, 0, 0.002);
    }

    t.local_frames[0] = Mat3::Identity();
    for (int i = 1; i < kNumJoints; ++i) {
        Vec3 bone = t.rest_joints[i] - t.rest_joints[t.parent[i]];
        t.local_frames[i] = frame_from_bone(bone);
    }
    return t;
}

} // namespace

const KinematicTemplate& default_template() {
    static const KinematicTemplate t = build_default_template();
    return t;
}

std::array<Vec3, kNumJoints> shaped_rest_joints(const KinematicTemplate& tmpl,
                                                const HandShape& shape) {
    std::array<Vec3, kNumJoints> out;
    for (int i = 0; i < kNumJoints; ++i) {
        Vec3 p = tmpl.rest_joints[i];
        for (int k = 0; k < kNumShapeCoeffs; ++k) p += tmpl.shape_dirs[i][k] * shape.beta[k];
        out[i] = p;
    }
    return out;
}

Keypoints3D forward_kinematics(const HandPose& pose, const HandShape& shape,
                               const KinematicTemplate& tmpl) {
    const auto shaped = shaped_rest_joints(tmpl, shape);
    std::array<Mat3, kNumJoints> world_rot;
    std::array<Vec3, kNumJoints> offset; // displacement from the shaped rest position
    Keypoints3D out;

    // offset form keeps the zero pose exact: every (R - I) factor is an
    // exact zero matrix, so joints reproduce the shaped rest bit for bit
    world_rot[0] = rot6d_to_matrix(pose.wrist);
    offset[0] = Vec3::Zero();
    out.joints[0] = shaped[0];
    for (int i = 1; i < kNumJoints; ++i) {
        const int p = tmpl.parent[i];
        const int slot = articulation_slot(tmpl, i);
        Mat3 local = Mat3::Identity();
        if (slot >= 0) {
            // I + F (R - I) F^T equals F R F^T and stays exact at R = I
            const Mat3& frame = tmpl.local_frames[i];
            local += frame * (rot6d_to_matrix(pose.joint(slot)) - Mat3::Identity()) *
                     frame.transpose();
        }
        world_rot[i] = world_rot[p] * local;
        offset[i] = offset[p] + (world_rot[p] - Mat3::Identity()) * (shaped[i] - shaped[p]);
        out.joints[i] = shaped[i] + offset[i];
    }
    return out;
}

Keypoints2D project_weak_perspective(const Keypoints3D& j3d, const CameraWeakPerspective& cam) {
    if (!(cam.s > 0.0)) throw InvalidCamera("weak-perspective scale must be positive");
    Keypoints2D out;
    for (int i = 0; i < kNumJoints; ++i) {
        out.joints[i] = Vec2(cam.s * j3d.joints[i].x() + cam.t.x(),
                             cam.s * j3d.joints[i].y() + cam.t.y());
    }
    return out;
}

std::vector<Vec3> virtual_vertices(const Keypoints3D& j3d, const KinematicTemplate& tmpl) {
    std::vector<Vec3> pts;
    pts.reserve(kNumVirtualVertices);
    for (int i = 0; i < kNumJoints; ++i) pts.push_back(j3d.joints[i]);
    for (int i = 1; i < kNumJoints; ++i)
        pts.push_back(0.5 * (j3d.joints[i] + j3d.joints[tmpl.parent[i]]));
    return pts;
}

} // namespace tchand::geom
