#include "tchand/metrics.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>

#include <json.hpp>

#include "tchand/threading.hpp"

namespace tchand::metrics {

using geom::Mat3;
using geom::Vec3;

std::string alignment_name(AlignmentMode mode) {
    switch (mode) {
        case AlignmentMode::None: return "none";
        case AlignmentMode::RootAligned: return "ra";
        case AlignmentMode::ScaleTranslationAligned: return "sta";
        case AlignmentMode::ProcrustesAligned: return "pa";
    }
    return "?";
}

double epe_mm(const PointCloud& pred, const PointCloud& gt) {
    if (pred.size() != gt.size() || pred.empty())
        throw ShapeMismatch("point clouds differ in size");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) acc += (pred[i] - gt[i]).norm();
    return acc / static_cast<double>(pred.size()) * 1000.0;
}

PointCloud align_root(const PointCloud& pred, const PointCloud& gt) {
    if (pred.size() != gt.size() || pred.empty())
        throw ShapeMismatch("point clouds differ in size");
    const Vec3 shift = gt[0] - pred[0];
    PointCloud out = pred;
    for (auto& p : out) p += shift;
    return out;
}

namespace {

Vec3 centroid(const PointCloud& pts) {
    Vec3 c = Vec3::Zero();
    for (const auto& p : pts) c += p;
    return c / static_cast<double>(pts.size());
}

} // namespace

PointCloud align_scale_translation(const PointCloud& pred, const PointCloud& gt) {
    if (pred.size() != gt.size() || pred.empty())
        throw ShapeMismatch("point clouds differ in size");
    const Vec3 pc = centroid(pred);
    const Vec3 gc = centroid(gt);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        num += (pred[i] - pc).dot(gt[i] - gc);
        den += (pred[i] - pc).squaredNorm();
    }
    if (den <= 0.0) throw DegenerateCloud("all prediction points coincide");
    const double s = num / den;
    PointCloud out(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) out[i] = s * (pred[i] - pc) + gc;
    return out;
}

PointCloud align_procrustes(const PointCloud& pred, const PointCloud& gt) {
    if (pred.size() != gt.size() || pred.empty())
        throw ShapeMismatch("point clouds differ in size");
    const Vec3 pc = centroid(pred);
    const Vec3 gc = centroid(gt);
    Mat3 cov = Mat3::Zero();
    double var_p = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        cov += (gt[i] - gc) * (pred[i] - pc).transpose();
        var_p += (pred[i] - pc).squaredNorm();
    }
    if (var_p <= 0.0) throw DegenerateCloud("all prediction points coincide");
    Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    if (svd.rank() < 2) throw DegenerateCloud("cross-covariance rank below 2");
    Mat3 d = Mat3::Identity();
    if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) d(2, 2) = -1.0;
    const Mat3 rot = svd.matrixU() * d * svd.matrixV().transpose();
    const double s = (svd.singularValues().asDiagonal() * d).trace() / var_p;
    PointCloud out(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) out[i] = s * rot * (pred[i] - pc) + gc;
    return out;
}

PointCloud apply_alignment(AlignmentMode mode, const PointCloud& pred, const PointCloud& gt) {
    switch (mode) {
        case AlignmentMode::None: return pred;
        case AlignmentMode::RootAligned: return align_root(pred, gt);
        case AlignmentMode::ScaleTranslationAligned: return align_scale_translation(pred, gt);
        case AlignmentMode::ProcrustesAligned: return align_procrustes(pred, gt);
    }
    return pred;
}

double fscore(const PointCloud& pred, const PointCloud& gt, double threshold_mm) {
    if (pred.empty() || gt.empty()) throw ShapeMismatch("empty point cloud");
    const double thr = threshold_mm / 1000.0;
    auto fraction_within = [&](const PointCloud& from, const PointCloud& to) {
        std::size_t hits = 0;
        for (const auto& p : from) {
            double best = std::numeric_limits<double>::max();
            for (const auto& q : to) best = std::min(best, (p - q).norm());
            if (best <= thr) ++hits;
        }
        return static_cast<double>(hits) / static_cast<double>(from.size());
    };
    const double precision = fraction_within(pred, gt);
    const double recall = fraction_within(gt, pred);
    if (precision + recall <= 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

double accel_error_mm_s2(const std::vector<PointCloud>& pred, const std::vector<PointCloud>& gt,
                         double fps) {
    if (pred.size() != gt.size()) throw ShapeMismatch("trajectory lengths differ");
    if (pred.size() < 3) throw TooShort("acceleration needs at least 3 frames");
    const double fps2 = fps * fps;
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t t = 1; t + 1 < pred.size(); ++t) {
        const auto& p0 = pred[t - 1];
        const auto& p1 = pred[t];
        const auto& p2 = pred[t + 1];
        const auto& g0 = gt[t - 1];
        const auto& g1 = gt[t];
        const auto& g2 = gt[t + 1];
        if (p0.size() != p1.size() || p1.size() != p2.size() || p0.size() != g0.size())
            throw ShapeMismatch("trajectory point counts differ");
        for (std::size_t j = 0; j < p0.size(); ++j) {
            const Vec3 ap = (p2[j] - 2.0 * p1[j] + p0[j]) * fps2;
            const Vec3 ag = (g2[j] - 2.0 * g1[j] + g0[j]) * fps2;
            acc += (ap - ag).norm();
            ++count;
        }
    }
    return acc / static_cast<double>(count) * 1000.0;
}

DecodedFrame decode_outputs(const Tensor<float>& head_out) {
    if (head_out.size() != static_cast<std::size_t>(nn::kHeadOutputs))
        throw ShapeMismatch("head output must have 109 values");
    DecodedFrame f;
    for (int j = 0; j < geom::kNumArticulated; ++j) {
        geom::Rotation6D r;
        for (int c = 0; c < 6; ++c) r.r[static_cast<std::size_t>(c)] = head_out[static_cast<std::size_t>(j * 6 + c)];
        // a degenerate block falls back to the identity so evaluation of a
        // half-trained model cannot abort
        try {
            geom::rot6d_to_matrix(r);
        } catch (const DegenerateInput&) {
            r = geom::Rotation6D::identity();
        }
        f.pose.joint(j) = r;
    }
    for (int k = 0; k < geom::kNumShapeCoeffs; ++k)
        f.shape.beta[static_cast<std::size_t>(k)] = head_out[static_cast<std::size_t>(nn::kPoseOutputs + k)];
    const double s_raw = head_out[nn::kPoseOutputs + nn::kShapeOutputs];
    f.cam.s = s_raw > 30 ? s_raw : std::log1p(std::exp(s_raw));
    f.cam.t.x() = head_out[nn::kPoseOutputs + nn::kShapeOutputs + 1];
    f.cam.t.y() = head_out[nn::kPoseOutputs + nn::kShapeOutputs + 2];
    f.j3d = geom::forward_kinematics(f.pose, f.shape, geom::default_template());
    return f;
}

namespace {

PointCloud joints_cloud(const geom::Keypoints3D& j) {
    return PointCloud(j.joints.begin(), j.joints.end());
}

SequenceMetrics evaluate_sequence(const nn::ModelParams& params,
                                  const synth::SequenceRecord& rec, const EvalOptions& options) {
    const auto& tmpl = geom::default_template();
    const int n = rec.n_frames();
    SequenceMetrics m;
    m.seq_id = rec.seq_id;
    m.n_frames = n;

    std::vector<PointCloud> pred_joints(static_cast<std::size_t>(n));
    std::vector<PointCloud> gt_joints(static_cast<std::size_t>(n));
    std::vector<PointCloud> pred_verts(static_cast<std::size_t>(n));
    std::vector<PointCloud> gt_verts(static_cast<std::size_t>(n));

    for (int t = 0; t < n; ++t) {
        geom::Keypoints3D pred;
        if (options.inject_ground_truth) {
            pred = rec.j3d[static_cast<std::size_t>(t)];
        } else {
            Tensor<float> z = nn::encode_image(params, rec.frames[static_cast<std::size_t>(t)]);
            Tensor<float> out = nn::head_outputs(params, z);
            pred = decode_outputs(out).j3d;
        }
        pred_joints[static_cast<std::size_t>(t)] = joints_cloud(pred);
        gt_joints[static_cast<std::size_t>(t)] = joints_cloud(rec.j3d[static_cast<std::size_t>(t)]);
        pred_verts[static_cast<std::size_t>(t)] = geom::virtual_vertices(pred, tmpl);
        gt_verts[static_cast<std::size_t>(t)] =
            geom::virtual_vertices(rec.j3d[static_cast<std::size_t>(t)], tmpl);
    }

    const AlignmentMode modes[] = {AlignmentMode::None, AlignmentMode::RootAligned,
                                   AlignmentMode::ScaleTranslationAligned,
                                   AlignmentMode::ProcrustesAligned};
    for (AlignmentMode mode : modes) {
        double epe_acc = 0.0, v2v_acc = 0.0;
        for (int t = 0; t < n; ++t) {
            const auto& pj = pred_joints[static_cast<std::size_t>(t)];
            const auto& gj = gt_joints[static_cast<std::size_t>(t)];
            const auto& pv = pred_verts[static_cast<std::size_t>(t)];
            const auto& gv = gt_verts[static_cast<std::size_t>(t)];
            epe_acc += epe_mm(apply_alignment(mode, pj, gj), gj);
            v2v_acc += epe_mm(apply_alignment(mode, pv, gv), gv);
        }
        m.epe[alignment_name(mode)] = epe_acc / n;
        m.v2v[alignment_name(mode)] = v2v_acc / n;
    }

    for (double thr : options.fscore_thresholds_mm) {
        double raw_acc = 0.0, pa_acc = 0.0;
        for (int t = 0; t < n; ++t) {
            const auto& pv = pred_verts[static_cast<std::size_t>(t)];
            const auto& gv = gt_verts[static_cast<std::size_t>(t)];
            raw_acc += fscore(pv, gv, thr);
            pa_acc += fscore(align_procrustes(pv, gv), gv, thr);
        }
        char key[32];
        std::snprintf(key, sizeof(key), "raw_%gmm", thr);
        m.fscore[key] = raw_acc / n;
        std::snprintf(key, sizeof(key), "pa_%gmm", thr);
        m.fscore[key] = pa_acc / n;
    }

    m.accel_mm_s2 = n >= 3 ? accel_error_mm_s2(pred_joints, gt_joints, rec.fps) : 0.0;
    return m;
}

} // namespace

MetricsReport evaluate(const nn::ModelParams& params, const synth::SequenceDataset& dataset,
                       const EvalOptions& options) {
    MetricsReport report;
    report.n_sequences = static_cast<int>(dataset.sequences.size());
    report.per_sequence.resize(dataset.sequences.size());
    parallel_for(dataset.sequences.size(), [&](std::size_t i) {
        report.per_sequence[i] = evaluate_sequence(params, dataset.sequences[i], options);
    });

    auto& agg = report.aggregate;
    agg.seq_id = "aggregate";
    for (const auto& s : report.per_sequence) {
        report.n_frames += s.n_frames;
        for (const auto& [k, v] : s.epe) agg.epe[k] += v;
        for (const auto& [k, v] : s.v2v) agg.v2v[k] += v;
        for (const auto& [k, v] : s.fscore) agg.fscore[k] += v;
        agg.accel_mm_s2 += s.accel_mm_s2;
    }
    const double denom = std::max(1, report.n_sequences);
    for (auto& [k, v] : agg.epe) v /= denom;
    for (auto& [k, v] : agg.v2v) v /= denom;
    for (auto& [k, v] : agg.fscore) v /= denom;
    agg.accel_mm_s2 /= denom;
    agg.n_frames = report.n_frames;
    return report;
}

namespace {

nlohmann::json sequence_to_json(const SequenceMetrics& m) {
    nlohmann::json j;
    j["seq_id"] = m.seq_id;
    j["n_frames"] = m.n_frames;
    j["epe_mm"] = m.epe;
    j["v2v_mm"] = m.v2v;
    j["fscore"] = m.fscore;
    j["accel_mm_s2"] = m.accel_mm_s2;
    return j;
}

} // namespace

std::string MetricsReport::to_json(int indent) const {
    nlohmann::json j;
    j["version"] = 1;
    j["n_sequences"] = n_sequences;
    j["n_frames"] = n_frames;
    j["aggregate"] = sequence_to_json(aggregate);
    j["per_sequence"] = nlohmann::json::array();
    for (const auto& s : per_sequence) j["per_sequence"].push_back(sequence_to_json(s));
    return j.dump(indent) + "\n";
}

} // namespace tchand::metrics
