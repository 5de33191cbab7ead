#include "tchand/augment.hpp"

#include <cmath>

#include "tchand/threading.hpp"

namespace tchand::aug {

AugmentationPolicy AugmentationPolicy::pretrain_default() { return AugmentationPolicy{}; }

AugmentationPolicy AugmentationPolicy::finetune_default() {
    AugmentationPolicy p;
    p.rotation_range_deg = 90.0;
    p.scale_min = 0.7;
    p.scale_max = 1.3;
    p.translation_fraction = 0.4;
    p.appearance_enabled = false;
    return p;
}

GeometricParams sample_geometric(const AugmentationPolicy& policy, int image_size, Rng& rng) {
    GeometricParams p;
    p.rotation_deg = rng.uniform(-policy.rotation_range_deg, policy.rotation_range_deg);
    p.scale = rng.uniform(policy.scale_min, policy.scale_max);
    const double t = policy.translation_fraction * image_size;
    p.translation_x = rng.uniform(-t, t);
    p.translation_y = rng.uniform(-t, t);
    return p;
}

AppearanceParams sample_appearance(const AugmentationPolicy& policy, Rng& rng) {
    AppearanceParams p;
    if (!policy.appearance_enabled) return p;
    if (rng.bernoulli(policy.p_channel_noise)) {
        for (auto& g : p.channel_gains) g = rng.uniform(policy.gain_min, policy.gain_max);
    }
    if (rng.bernoulli(policy.p_jitter)) {
        for (auto& j : p.jitter) j = rng.uniform(-policy.jitter_range, policy.jitter_range);
    }
    p.color_drop = rng.bernoulli(policy.p_color_drop);
    p.sobel = rng.bernoulli(policy.p_sobel);
    return p;
}

Image apply_geometric(const Image& img, const GeometricParams& p) {
    if (p.is_identity()) return img;

    Image out(img.height, img.width);
    const double cx = (img.width - 1) / 2.0;
    const double cy = (img.height - 1) / 2.0;
    const double rad = p.rotation_deg * M_PI / 180.0;
    const double cos_a = std::cos(rad);
    const double sin_a = std::sin(rad);
    // inverse of q = C + s*R*(p - C) + t
    const double inv_s = 1.0 / p.scale;

    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const double dx = x - cx - p.translation_x;
            const double dy = y - cy - p.translation_y;
            const double sx = cx + inv_s * (cos_a * dx + sin_a * dy);
            const double sy = cy + inv_s * (-sin_a * dx + cos_a * dy);

            const int x0 = static_cast<int>(std::floor(sx));
            const int y0 = static_cast<int>(std::floor(sy));
            const double fx = sx - x0;
            const double fy = sy - y0;
            float* dst = out.at(y, x);
            for (int c = 0; c < 3; ++c) {
                auto tap = [&](int yy, int xx) -> double {
                    if (xx < 0 || xx >= img.width || yy < 0 || yy >= img.height) return 0.0;
                    return img.at(yy, xx)[c];
                };
                double v = (1 - fy) * ((1 - fx) * tap(y0, x0) + fx * tap(y0, x0 + 1)) +
                           fy * ((1 - fx) * tap(y0 + 1, x0) + fx * tap(y0 + 1, x0 + 1));
                dst[c] = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
        }
    }
    return out;
}

namespace {

Image sobel_magnitude(const Image& img) {
    // 3x3 sobel on luminance, clamp-to-edge borders, magnitude scaled by
    // its theoretical maximum so output stays in [0,1]
    const int h = img.height;
    const int w = img.width;
    std::vector<double> lum(static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const float* px = img.at(y, x);
            lum[static_cast<std::size_t>(y) * w + x] = (px[0] + px[1] + px[2]) / 3.0;
        }
    auto at = [&](int y, int x) {
        y = std::clamp(y, 0, h - 1);
        x = std::clamp(x, 0, w - 1);
        return lum[static_cast<std::size_t>(y) * w + x];
    };
    const double max_mag = 4.0 * std::sqrt(2.0);
    Image out(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double gx = at(y - 1, x + 1) + 2 * at(y, x + 1) + at(y + 1, x + 1) -
                        at(y - 1, x - 1) - 2 * at(y, x - 1) - at(y + 1, x - 1);
            double gy = at(y + 1, x - 1) + 2 * at(y + 1, x) + at(y + 1, x + 1) -
                        at(y - 1, x - 1) - 2 * at(y - 1, x) - at(y - 1, x + 1);
            float v = static_cast<float>(std::clamp(std::sqrt(gx * gx + gy * gy) / max_mag, 0.0, 1.0));
            float* dst = out.at(y, x);
            dst[0] = dst[1] = dst[2] = v;
        }
    }
    return out;
}

} // namespace

Image apply_appearance(const Image& img, const AppearanceParams& p) {
    Image out = img;
    for (std::size_t i = 0; i < out.pixels.size(); i += 3) {
        for (int c = 0; c < 3; ++c) {
            double v = out.pixels[i + c] * p.channel_gains[c] + p.jitter[c];
            out.pixels[i + c] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
        if (p.color_drop) {
            float mean = (out.pixels[i] + out.pixels[i + 1] + out.pixels[i + 2]) / 3.f;
            out.pixels[i] = out.pixels[i + 1] = out.pixels[i + 2] = mean;
        }
    }
    if (p.sobel) out = sobel_magnitude(out);
    return out;
}

std::vector<Image> augment_sequence(const std::vector<Image>& frames,
                                    const AugmentationPolicy& policy, Rng& rng,
                                    ParamLog* log) {
    const int size = frames.empty() ? 0 : frames.front().width;
    const GeometricParams geo = sample_geometric(policy, size, rng);
    std::vector<AppearanceParams> appearance(frames.size());
    for (auto& a : appearance) a = sample_appearance(policy, rng);

    std::vector<Image> out(frames.size());
    parallel_for(frames.size(), [&](std::size_t i) {
        out[i] = apply_appearance(apply_geometric(frames[i], geo), appearance[i]);
    });
    if (log) {
        log->geometric.assign(frames.size(), geo);
        log->appearance = appearance;
    }
    return out;
}

} // namespace tchand::aug
