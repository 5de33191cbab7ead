#pragma once

#include <string>
#include <vector>

#include "tchand/config.hpp"

namespace tchand::train {

struct EpochLog {
    int epoch = 0;
    double lr = 0.0;
    double loss = 0.0;
};

struct TrainResult {
    nn::ModelParams params;
    std::vector<EpochLog> log;
};

// Time-contrastive pre-training. Anchors and their sampled positives and
// negatives share one geometric draw per sequence (unless
// coherent_augmentation is off), with independent appearance draws.
TrainResult pretrain(const std::vector<const synth::SequenceDataset*>& datasets,
                     const nn::ModelParams& init, const RunConfig& cfg, uint64_t seed);

// Supervised fine-tuning on labeled frames with geometric augmentation and
// consistently transformed targets.
TrainResult finetune(const synth::SequenceDataset& dataset, const nn::ModelParams& init,
                     const RunConfig& cfg, uint64_t seed);

// Image plus targets after a geometric warp: keypoints move with the image,
// the wrist rotation absorbs the in-plane rotation, and the camera absorbs
// scale and translation, so label invariants keep holding exactly.
struct LabeledSample {
    Image image;
    nn::FrameTargets targets;
    geom::CameraWeakPerspective cam; // camera consistent with the targets
};

LabeledSample make_labeled_sample(const synth::SequenceRecord& rec, int frame,
                                  const aug::GeometricParams& geo);

// mean in-window cosine similarity minus mean out-of-window same-sequence
// similarity, averaged over sequences
double embedding_coherence_margin(const nn::ModelParams& params,
                                  const synth::SequenceDataset& dataset, int radius);

enum class Arm { Baseline, Full, NoCoherentAug, NoProbSampling };

std::string arm_name(Arm arm);
std::vector<Arm> all_arms();

struct ArmRun {
    Arm arm = Arm::Baseline;
    int seed_index = 0;
    double pa_epe_mm = 0.0;
    double ra_epe_mm = 0.0;
    double accel_mm_s2 = 0.0;
    double embed_margin = 0.0;
};

struct AblationReport {
    std::vector<ArmRun> runs;
    // medians over seeds, keyed by arm
    std::map<std::string, double> median_pa_epe;
    std::map<std::string, double> median_ra_epe;
    std::map<std::string, double> median_accel;
    double wall_seconds = 0.0;

    std::string to_json() const;
    std::string to_csv() const;
    std::string to_table() const;
};

// Runs every arm over ablate_seeds seeds on freshly generated benchmark
// data. Fine-tuning data, order, and seeds are identical across arms.
AblationReport run_ablation(const RunConfig& cfg, bool verbose = false);

// Loss-curve CSV (epoch, lr, loss).
std::string log_to_csv(const std::vector<EpochLog>& log);

} // namespace tchand::train
