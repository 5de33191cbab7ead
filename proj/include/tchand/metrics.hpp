#pragma once

#include <map>
#include <string>
#include <vector>

#include "tchand/geometry.hpp"
#include "tchand/model.hpp"
#include "tchand/synth.hpp"

namespace tchand::metrics {

using PointCloud = std::vector<geom::Vec3>;

enum class AlignmentMode { None, RootAligned, ScaleTranslationAligned, ProcrustesAligned };

std::string alignment_name(AlignmentMode mode);

// Mean Euclidean distance over matching points, reported in millimeters.
double epe_mm(const PointCloud& pred, const PointCloud& gt);

// pred translated so its root (point 0) coincides with gt's.
PointCloud align_root(const PointCloud& pred, const PointCloud& gt);

// Closed-form least-squares scale plus translation.
PointCloud align_scale_translation(const PointCloud& pred, const PointCloud& gt);

// Similarity Procrustes (rotation, scale, translation) via SVD with the
// determinant sign correction; never returns a reflection.
PointCloud align_procrustes(const PointCloud& pred, const PointCloud& gt);

PointCloud apply_alignment(AlignmentMode mode, const PointCloud& pred, const PointCloud& gt);

// Harmonic mean of precision and recall at a distance threshold (meters in,
// threshold in millimeters).
double fscore(const PointCloud& pred, const PointCloud& gt, double threshold_mm);

// Mean norm of the difference between second temporal differences, scaled
// by fps^2, in mm/s^2. trajectories: [frame][point].
double accel_error_mm_s2(const std::vector<PointCloud>& pred, const std::vector<PointCloud>& gt,
                         double fps);

struct SequenceMetrics {
    std::string seq_id;
    int n_frames = 0;
    std::map<std::string, double> epe;    // alignment mode -> mm
    std::map<std::string, double> v2v;    // alignment mode -> mm
    std::map<std::string, double> fscore; // "raw_5mm", "pa_15mm", ...
    double accel_mm_s2 = 0.0;
};

struct MetricsReport {
    std::vector<SequenceMetrics> per_sequence;
    SequenceMetrics aggregate; // mean over sequences
    int n_sequences = 0;
    int n_frames = 0;

    std::string to_json(int indent = 2) const;
};

struct EvalOptions {
    std::vector<double> fscore_thresholds_mm{5.0, 15.0};
    // test hook: replaces predictions with ground truth
    bool inject_ground_truth = false;
};

// Runs the model on every frame and aggregates all metrics under every
// alignment mode, mean per sequence then mean over sequences.
MetricsReport evaluate(const nn::ModelParams& params, const synth::SequenceDataset& dataset,
                       const EvalOptions& options = {});

// Model outputs decoded to geometry for one embedding.
struct DecodedFrame {
    geom::HandPose pose;
    geom::HandShape shape;
    geom::CameraWeakPerspective cam;
    geom::Keypoints3D j3d;
};

DecodedFrame decode_outputs(const Tensor<float>& head_out);

} // namespace tchand::metrics
