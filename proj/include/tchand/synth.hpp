#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "tchand/geometry.hpp"
#include "tchand/image.hpp"
#include "tchand/rng.hpp"

namespace tchand::synth {

struct SynthConfig {
    int n_frames = 60;
    double fps = 30.0;
    int image_size = 64;
    double grasp_hold_fraction = 0.35;
    double pose_noise_amplitude = 0.02; // radians
    double occluder_probability = 0.5;  // per hold frame
    std::vector<std::array<double, 3>> background_palette = {
        {0.10, 0.12, 0.16}, {0.16, 0.10, 0.12}, {0.09, 0.15, 0.11},
        {0.13, 0.13, 0.10}, {0.08, 0.10, 0.18},
    };

    void validate() const;
};

struct OccluderRect {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    std::array<double, 3> color{0.35, 0.35, 0.35};
};

struct RenderStyle {
    std::array<double, 3> background{0.1, 0.1, 0.1};
    std::optional<OccluderRect> occluder;
};

// A labeled synthetic video. Stored parameter and keypoint values are
// float32-quantized so the on-disk container round-trips bit-exactly.
struct SequenceRecord {
    std::string seq_id;
    double fps = 30.0;
    std::vector<Image> frames;
    std::vector<geom::HandPose> poses;
    geom::HandShape shape;
    std::vector<geom::Keypoints3D> j3d;
    std::vector<geom::Keypoints2D> j2d;
    geom::CameraWeakPerspective cam;

    int n_frames() const { return static_cast<int>(frames.size()); }
    int image_size() const { return frames.empty() ? 0 : frames.front().width; }
};

struct SequenceDataset {
    std::string root; // empty for in-memory datasets
    double fps = 30.0;
    int image_size = 64;
    std::vector<SequenceRecord> sequences;
};

// Grasp-like motion: smoothstep between two limit-respecting poses, a
// quasi-static hold, low-frequency angle noise. Deterministic in (cfg, seed).
SequenceRecord generate_sequence(const SynthConfig& cfg, uint64_t seed);

Image render_frame(const geom::Keypoints2D& j2d, const RenderStyle& style, int size);

// Writes manifest.json plus one container per sequence. Per-sequence seeds
// are seed + index.
void make_dataset(const std::string& dir, int n_sequences, const SynthConfig& cfg, uint64_t seed);

SequenceDataset generate_dataset_in_memory(int n_sequences, const SynthConfig& cfg, uint64_t seed);

void write_sequence(const std::string& path, const SequenceRecord& rec);
SequenceRecord read_sequence(const std::string& path);

SequenceDataset load_dataset(const std::string& dir);

} // namespace tchand::synth
