#include "tchand/model.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "tchand/io.hpp"

namespace tchand::nn {

namespace {

Tensor<float> he_normal(std::vector<int> shape, int fan_in, Rng& rng, double gain = 2.0) {
    Tensor<float> t(std::move(shape));
    const double stddev = std::sqrt(gain / fan_in);
    for (auto& v : t.data) v = static_cast<float>(rng.gaussian() * stddev);
    return t;
}

} // namespace

ModelParams init_params(const ModelConfig& config, uint64_t seed) {
    Rng rng(seed);
    const auto [c1, c2, c3] = std::array{config.channels[0], config.channels[1], config.channels[2]};
    ModelParams p;
    p.config = config;
    Rng r1 = rng.child(1), r2 = rng.child(2), r3 = rng.child(3), r4 = rng.child(4),
        r5 = rng.child(5), r6 = rng.child(6);
    p.conv1_w = he_normal({c1, 3, 3, 3}, 3 * 3 * 3, r1);
    p.conv1_b = Tensor<float>({c1});
    p.conv2_w = he_normal({c2, 3, 3, c1}, 3 * 3 * c1, r2);
    p.conv2_b = Tensor<float>({c2});
    p.conv3_w = he_normal({c3, 3, 3, c2}, 3 * 3 * c2, r3);
    p.conv3_b = Tensor<float>({c3});
    p.embed_w = he_normal({config.embed_dim, c3}, c3, r4);
    p.embed_b = Tensor<float>({config.embed_dim});
    p.head1_w = he_normal({config.head_hidden, config.embed_dim}, config.embed_dim, r5);
    p.head1_b = Tensor<float>({config.head_hidden});
    p.head2_w = he_normal({kHeadOutputs, config.head_hidden}, config.head_hidden, r6, 0.02);
    p.head2_b = Tensor<float>({kHeadOutputs});
    // identity 6D block per joint
    for (int j = 0; j < 16; ++j) {
        p.head2_b.data[static_cast<std::size_t>(j) * 6 + 0] = 1.f;
        p.head2_b.data[static_cast<std::size_t>(j) * 6 + 4] = 1.f;
    }
    // camera: scale lands near typical synthetic values, translation centered
    p.head2_b.data[kPoseOutputs + kShapeOutputs + 0] = static_cast<float>(2.6 * config.image_size);
    p.head2_b.data[kPoseOutputs + kShapeOutputs + 1] = static_cast<float>(config.image_size / 2.0);
    p.head2_b.data[kPoseOutputs + kShapeOutputs + 2] = static_cast<float>(config.image_size / 4.0);
    return p;
}

Tensor<float> encode_image(const ModelParams& params, const Image& img) {
    Tape<float> tape;
    auto vars = ParamVars<float>::insert(tape, params, /*trainable=*/false);
    Var image = tape.constant(image_to_tensor<float>(img));
    Var z = encode(tape, vars, params.config, image);
    return tape.val(z);
}

Tensor<float> head_outputs(const ModelParams& params, const Tensor<float>& embedding) {
    Tape<float> tape;
    auto vars = ParamVars<float>::insert(tape, params, /*trainable=*/false);
    Var z = tape.constant(embedding);
    Var out = head_forward(tape, vars, z);
    return tape.val(out);
}

namespace {
constexpr char kCheckpointMagic[4] = {'T', 'C', 'L', 'R'};
constexpr uint32_t kCheckpointVersion = 1;
} // namespace

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const std::string& config_json) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + path + " for writing");
    write_magic(os, kCheckpointMagic);
    write_u32(os, kCheckpointVersion);

    uint32_t count = 0;
    params.visit([&](const char*, const Tensor<float>&) { ++count; });
    write_u32(os, count);
    params.visit([&](const char* name, const Tensor<float>& t) {
        write_string(os, name);
        write_u32(os, static_cast<uint32_t>(t.shape.size()));
        for (int d : t.shape) write_u32(os, static_cast<uint32_t>(d));
        write_f32_array(os, t.data.data(), t.data.size());
    });
    write_string(os, config_json);
    if (!os) throw IoError("short write to " + path);
}

ModelParams load_checkpoint(const std::string& path, std::string* config_json) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    expect_magic(is, kCheckpointMagic, path);
    if (read_u32(is) != kCheckpointVersion)
        throw IoError("unsupported checkpoint version in " + path);
    const uint32_t count = read_u32(is);

    std::vector<std::pair<std::string, Tensor<float>>> tensors;
    tensors.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        std::string name = read_string(is);
        const uint32_t ndim = read_u32(is);
        std::vector<int> shape(ndim);
        for (auto& d : shape) d = static_cast<int>(read_u32(is));
        Tensor<float> t(shape);
        read_f32_array(is, t.data.data(), t.data.size());
        tensors.emplace_back(std::move(name), std::move(t));
    }
    std::string json = read_string(is);
    if (config_json) *config_json = json;

    ModelParams p;
    // infer architecture sizes from the stored tensors
    auto find = [&](const std::string& name) -> Tensor<float>& {
        for (auto& [n, t] : tensors)
            if (n == name) return t;
        throw IoError("checkpoint " + path + " is missing tensor " + name);
    };
    p.conv1_w = find("conv1_w"); p.conv1_b = find("conv1_b");
    p.conv2_w = find("conv2_w"); p.conv2_b = find("conv2_b");
    p.conv3_w = find("conv3_w"); p.conv3_b = find("conv3_b");
    p.embed_w = find("embed_w"); p.embed_b = find("embed_b");
    p.head1_w = find("head1_w"); p.head1_b = find("head1_b");
    p.head2_w = find("head2_w"); p.head2_b = find("head2_b");
    p.config.channels = {p.conv1_w.shape[0], p.conv2_w.shape[0], p.conv3_w.shape[0]};
    p.config.embed_dim = p.embed_w.shape[0];
    p.config.head_hidden = p.head1_w.shape[0];
    try {
        auto j = nlohmann::json::parse(json);
        if (j.contains("model") && j["model"].contains("image_size"))
            p.config.image_size = j["model"]["image_size"].get<int>();
    } catch (const nlohmann::json::exception&) {
        // config snapshot is advisory; tensor shapes already define the model
    }
    return p;
}

} // namespace tchand::nn
