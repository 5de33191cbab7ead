#pragma once

#include <algorithm>
#include <vector>

namespace tchand {

// H x W x 3 float image, values in [0,1], channel-interleaved (HWC).
struct Image {
    int height = 0;
    int width = 0;
    std::vector<float> pixels;

    Image() = default;
    Image(int h, int w) : height(h), width(w), pixels(static_cast<std::size_t>(h) * w * 3, 0.f) {}

    float* at(int y, int x) { return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
    const float* at(int y, int x) const {
        return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
    }

    void fill(float r, float g, float b) {
        for (std::size_t i = 0; i < pixels.size(); i += 3) {
            pixels[i] = r;
            pixels[i + 1] = g;
            pixels[i + 2] = b;
        }
    }

    void clamp01() {
        for (float& v : pixels) v = std::clamp(v, 0.f, 1.f);
    }
};

} // namespace tchand
