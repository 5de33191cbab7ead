#pragma once

#include <array>
#include <optional>
#include <vector>

#include "tchand/image.hpp"
#include "tchand/rng.hpp"

namespace tchand::aug {

struct GeometricParams {
    double rotation_deg = 0.0;
    double scale = 1.0;
    double translation_x = 0.0; // pixels
    double translation_y = 0.0;

    bool is_identity() const {
        return rotation_deg == 0.0 && scale == 1.0 && translation_x == 0.0 && translation_y == 0.0;
    }
    bool operator==(const GeometricParams&) const = default;
};

struct AppearanceParams {
    std::array<double, 3> channel_gains{1.0, 1.0, 1.0};
    std::array<double, 3> jitter{0.0, 0.0, 0.0};
    bool color_drop = false;
    bool sobel = false;

    bool operator==(const AppearanceParams&) const = default;
};

struct AugmentationPolicy {
    double rotation_range_deg = 45.0;   // +/- degrees
    double scale_min = 0.6;
    double scale_max = 2.0;
    double translation_fraction = 0.3;  // of image size, +/-

    bool appearance_enabled = true;
    double gain_min = 0.6;
    double gain_max = 1.4;
    double jitter_range = 0.1;          // +/- per channel
    double p_channel_noise = 0.8;
    double p_jitter = 0.8;
    double p_color_drop = 0.2;
    double p_sobel = 0.2;

    // pre-training defaults (this struct) and the geometric-only
    // fine-tuning policy
    static AugmentationPolicy pretrain_default();
    static AugmentationPolicy finetune_default();
};

// Optional audit hook recording exactly which parameters were applied.
struct ParamLog {
    std::vector<GeometricParams> geometric; // one entry per frame
    std::vector<AppearanceParams> appearance;
};

GeometricParams sample_geometric(const AugmentationPolicy& policy, int image_size, Rng& rng);
AppearanceParams sample_appearance(const AugmentationPolicy& policy, Rng& rng);

// Affine warp about the image center (rotate, scale, then translate),
// bilinear interpolation, zero fill outside, output clamped to [0,1].
// Identity parameters return the input bit-exactly.
Image apply_geometric(const Image& img, const GeometricParams& p);

// Ops compose in fixed order: channel noise, jitter, color drop, sobel.
Image apply_appearance(const Image& img, const AppearanceParams& p);

// One geometric draw shared by every frame; a fresh appearance draw per
// frame. Deterministic given the rng.
std::vector<Image> augment_sequence(const std::vector<Image>& frames,
                                    const AugmentationPolicy& policy, Rng& rng,
                                    ParamLog* log = nullptr);

} // namespace tchand::aug
