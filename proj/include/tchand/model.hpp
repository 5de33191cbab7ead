#pragma once

#include <array>
#include <string>
#include <vector>

#include "tchand/image.hpp"
#include "tchand/rng.hpp"
#include "tchand/tape.hpp"
#include "tchand/tensor.hpp"

namespace tchand::nn {

constexpr int kPoseOutputs = 16 * 6;
constexpr int kShapeOutputs = 10;
constexpr int kCameraOutputs = 3;
constexpr int kHeadOutputs = kPoseOutputs + kShapeOutputs + kCameraOutputs; // 109

struct ModelConfig {
    int image_size = 64;
    std::array<int, 3> channels{8, 16, 32};
    int embed_dim = 64;
    int head_hidden = 128;

    bool operator==(const ModelConfig&) const = default;
};

// Conv stack (3 layers, stride 2, 3x3, ReLU), global average pool, linear
// embedding, then a 2-layer MLP head producing pose/shape/camera outputs.
template <class T>
struct ModelParamsT {
    ModelConfig config;

    Tensor<T> conv1_w, conv1_b;
    Tensor<T> conv2_w, conv2_b;
    Tensor<T> conv3_w, conv3_b;
    Tensor<T> embed_w, embed_b;
    Tensor<T> head1_w, head1_b;
    Tensor<T> head2_w, head2_b;

    template <class Fn>
    void visit(Fn&& fn) {
        fn("conv1_w", conv1_w); fn("conv1_b", conv1_b);
        fn("conv2_w", conv2_w); fn("conv2_b", conv2_b);
        fn("conv3_w", conv3_w); fn("conv3_b", conv3_b);
        fn("embed_w", embed_w); fn("embed_b", embed_b);
        fn("head1_w", head1_w); fn("head1_b", head1_b);
        fn("head2_w", head2_w); fn("head2_b", head2_b);
    }

    template <class Fn>
    void visit(Fn&& fn) const {
        const_cast<ModelParamsT*>(this)->visit(
            [&](const char* name, Tensor<T>& t) { fn(name, const_cast<const Tensor<T>&>(t)); });
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        visit([&](const char*, const Tensor<T>& t) { n += t.size(); });
        return n;
    }

    template <class U>
    ModelParamsT<U> cast() const {
        ModelParamsT<U> out;
        out.config = config;
        out.conv1_w = conv1_w.template cast<U>(); out.conv1_b = conv1_b.template cast<U>();
        out.conv2_w = conv2_w.template cast<U>(); out.conv2_b = conv2_b.template cast<U>();
        out.conv3_w = conv3_w.template cast<U>(); out.conv3_b = conv3_b.template cast<U>();
        out.embed_w = embed_w.template cast<U>(); out.embed_b = embed_b.template cast<U>();
        out.head1_w = head1_w.template cast<U>(); out.head1_b = head1_b.template cast<U>();
        out.head2_w = head2_w.template cast<U>(); out.head2_b = head2_b.template cast<U>();
        return out;
    }
};

using ModelParams = ModelParamsT<float>;

// He-normal conv/linear init; the head bias seeds every joint at the
// identity 6D rotation so the kinematic chain is well-defined from step 0.
ModelParams init_params(const ModelConfig& config, uint64_t seed);

// Tape-side handles for one parameter set.
template <class T>
struct ParamVars {
    Var conv1_w, conv1_b, conv2_w, conv2_b, conv3_w, conv3_b;
    Var embed_w, embed_b, head1_w, head1_b, head2_w, head2_b;

    static ParamVars insert(Tape<T>& tape, const ModelParamsT<T>& p, bool trainable = true) {
        auto put = [&](const Tensor<T>& t) { return trainable ? tape.leaf(t) : tape.constant(t); };
        ParamVars v;
        v.conv1_w = put(p.conv1_w); v.conv1_b = put(p.conv1_b);
        v.conv2_w = put(p.conv2_w); v.conv2_b = put(p.conv2_b);
        v.conv3_w = put(p.conv3_w); v.conv3_b = put(p.conv3_b);
        v.embed_w = put(p.embed_w); v.embed_b = put(p.embed_b);
        v.head1_w = put(p.head1_w); v.head1_b = put(p.head1_b);
        v.head2_w = put(p.head2_w); v.head2_b = put(p.head2_b);
        return v;
    }

    template <class Fn>
    void visit(Fn&& fn) {
        fn("conv1_w", conv1_w); fn("conv1_b", conv1_b);
        fn("conv2_w", conv2_w); fn("conv2_b", conv2_b);
        fn("conv3_w", conv3_w); fn("conv3_b", conv3_b);
        fn("embed_w", embed_w); fn("embed_b", embed_b);
        fn("head1_w", head1_w); fn("head1_b", head1_b);
        fn("head2_w", head2_w); fn("head2_b", head2_b);
    }
};

template <class T>
Tensor<T> image_to_tensor(const Image& img) {
    Tensor<T> t({img.height, img.width, 3});
    for (std::size_t i = 0; i < img.pixels.size(); ++i) t.data[i] = static_cast<T>(img.pixels[i]);
    return t;
}

// Embedding of one image. Throws ShapeMismatch when the image size does not
// match the configuration.
template <class T>
Var encode(Tape<T>& tape, const ParamVars<T>& p, const ModelConfig& config, Var image) {
    const auto& shape = tape.val(image).shape;
    if (shape.size() != 3 || shape[0] != config.image_size || shape[1] != config.image_size ||
        shape[2] != 3)
        throw ShapeMismatch("image does not match the configured input size");
    Var h1 = tape.relu(tape.conv2d(image, p.conv1_w, p.conv1_b));
    Var h2 = tape.relu(tape.conv2d(h1, p.conv2_w, p.conv2_b));
    Var h3 = tape.relu(tape.conv2d(h2, p.conv3_w, p.conv3_b));
    Var pooled = tape.global_avg_pool(h3);
    return tape.linear(p.embed_w, p.embed_b, pooled);
}

// Raw 109-dim head output; split and interpretation live in hand_diff.
// The head consumes the direction of the embedding (scaled back to unit
// per-entry variance): contrastive pre-training constrains directions only,
// so feeding raw magnitudes downstream would pass normless noise along.
template <class T>
Var head_forward(Tape<T>& tape, const ParamVars<T>& p, Var embedding) {
    const T dim = static_cast<T>(tape.val(embedding).size());
    Var inv = tape.reciprocal(tape.sqrt_(tape.add_const(tape.dot(embedding, embedding), T(1e-12))));
    Var unit = tape.mul_scalar(embedding, tape.scale(inv, std::sqrt(dim)));
    Var h = tape.relu(tape.linear(p.head1_w, p.head1_b, unit));
    return tape.linear(p.head2_w, p.head2_b, h);
}

// Non-tape convenience used by evaluation and the embedding export.
Tensor<float> encode_image(const ModelParams& params, const Image& img);
Tensor<float> head_outputs(const ModelParams& params, const Tensor<float>& embedding);

// Checkpoint container: named float32 tensors plus an embedded JSON config
// snapshot.
void save_checkpoint(const std::string& path, const ModelParams& params,
                     const std::string& config_json);
ModelParams load_checkpoint(const std::string& path, std::string* config_json = nullptr);

} // namespace tchand::nn
