#pragma once

#include <cstdint>
#include <string>

#include "tchand/augment.hpp"
#include "tchand/losses.hpp"
#include "tchand/metrics.hpp"
#include "tchand/model.hpp"
#include "tchand/optim.hpp"
#include "tchand/sampling.hpp"
#include "tchand/synth.hpp"

namespace tchand {

// One JSON document drives every command; parsed leniently (unknown keys
// ignored, missing keys take defaults) and re-serialized in full for
// provenance.
struct RunConfig {
    int version = 1;
    uint64_t seed = 0;
    int threads = 0; // 0 = all cores, 1 = serial

    synth::SynthConfig synth;
    int synth_sequences = 200;

    nn::ModelConfig model;
    nn::ContrastiveConfig contrastive;

    sampling::Strategy strategy = sampling::Strategy::Linear;
    double strategy_sigma = 0.0;        // 0 = radius/2
    bool probabilistic_sampling = true; // false = uniform draws (ablation arm)
    bool coherent_augmentation = true;  // false = per-frame geometric draws

    aug::AugmentationPolicy augment_pretrain = aug::AugmentationPolicy::pretrain_default();
    aug::AugmentationPolicy augment_finetune = aug::AugmentationPolicy::finetune_default();

    nn::FineTuneLossWeights loss_weights;
    nn::TrainSchedule pretrain_schedule{1e-3, 10, 50, 32, 6};
    nn::TrainSchedule finetune_schedule{5e-4, 0, 30, 128, 8};

    int ablate_seeds = 5;
    int ablate_train_sequences = 200;
    int ablate_holdout_sequences = 20;

    int audit_draws = 1000000;
    int audit_seq_len = 200;

    metrics::EvalOptions eval;

    std::string dataset_dir;
    std::string eval_dataset_dir;
    std::string checkpoint_path;

    // Window radius for pair sampling; contrastive.radius <= 0 derives
    // round(fps / 2) from the dataset.
    int resolved_radius(double fps) const;

    sampling::BatchSpec batch_spec(double fps) const;

    void validate() const;

    static RunConfig from_json_text(const std::string& text);
    std::string to_json_text() const;
};

RunConfig load_run_config(const std::string& path);

} // namespace tchand
