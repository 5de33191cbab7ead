#include "tchand/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "tchand/io.hpp"
#include "tchand/threading.hpp"

namespace tchand::synth {

using geom::kNumArticulated;
using geom::kNumJoints;
using geom::kNumShapeCoeffs;
using geom::Mat3;
using geom::Vec2;
using geom::Vec3;

void SynthConfig::validate() const {
    if (n_frames < 2) throw InvalidConfig("n_frames must be >= 2");
    if (!(fps > 0)) throw InvalidConfig("fps must be positive");
    if (image_size < 16) throw InvalidConfig("image_size must be >= 16");
    if (grasp_hold_fraction < 0 || grasp_hold_fraction > 1)
        throw InvalidConfig("grasp_hold_fraction outside [0,1]");
    if (occluder_probability < 0 || occluder_probability > 1)
        throw InvalidConfig("occluder_probability outside [0,1]");
    if (pose_noise_amplitude < 0) throw InvalidConfig("pose_noise_amplitude must be >= 0");
    if (background_palette.empty()) throw InvalidConfig("background_palette is empty");
}

namespace {

constexpr double kTau = 2.0 * M_PI;

// float32 rounding for stored labels; the volatile stop keeps the -O3 SLP
// vectorizer (gcc 11) from dropping the narrowing conversion
inline double quantize(double v) {
    volatile float narrowed = static_cast<float>(v);
    return static_cast<double>(narrowed);
}

Mat3 euler_zyx(double ax, double ay, double az) {
    return (Eigen::AngleAxisd(az, Vec3::UnitZ()) * Eigen::AngleAxisd(ay, Vec3::UnitY()) *
            Eigen::AngleAxisd(ax, Vec3::UnitX()))
        .toRotationMatrix();
}

// Per articulated joint: twist (local x), spread (local y), curl (local z).
struct AngleLimits {
    double lo[3];
    double hi[3];
};

AngleLimits limits_for_slot(const geom::KinematicTemplate& tmpl, int slot) {
    if (slot == 0) return {{-0.6, -0.6, -0.6}, {0.6, 0.6, 0.6}}; // wrist
    const int joint = tmpl.articulated[slot];
    const bool is_knuckle = tmpl.parent[joint] == 0;
    if (is_knuckle) return {{-0.05, -0.15, -0.10}, {0.05, 0.15, 1.10}};
    return {{0.0, 0.0, 0.0}, {0.0, 0.0, 1.30}};
}

using AngleVector = std::array<double, kNumArticulated * 3>;

AngleVector sample_limit_pose(const geom::KinematicTemplate& tmpl, Rng& rng) {
    AngleVector a{};
    for (int s = 0; s < kNumArticulated; ++s) {
        AngleLimits lim = limits_for_slot(tmpl, s);
        for (int c = 0; c < 3; ++c) a[3 * s + c] = rng.uniform(lim.lo[c], lim.hi[c]);
    }
    return a;
}

geom::HandPose pose_from_angles(const AngleVector& a) {
    geom::HandPose pose;
    for (int s = 0; s < kNumArticulated; ++s) {
        const double twist = a[3 * s];
        const double spread = a[3 * s + 1];
        const double curl = a[3 * s + 2];
        // curl about local z, spread about local y, twist about local x
        Mat3 r = (Eigen::AngleAxisd(curl, Vec3::UnitZ()) *
                  Eigen::AngleAxisd(spread, Vec3::UnitY()) *
                  Eigen::AngleAxisd(twist, Vec3::UnitX()))
                     .toRotationMatrix();
        if (s == 0) r = euler_zyx(a[0], a[1], a[2]);
        pose.joint(s) = geom::matrix_to_rot6d(r);
    }
    return pose;
}

double smoothstep01(double u) {
    u = std::clamp(u, 0.0, 1.0);
    return u * u * (3.0 - 2.0 * u);
}

geom::Rotation6D quantize_rot(const geom::Rotation6D& r) {
    geom::Rotation6D q = r;
    for (double& v : q.r) v = quantize(v);
    return q;
}

struct FingerColors {
    static std::array<double, 3> bone_color(int finger) {
        static const std::array<std::array<double, 3>, 5> colors = {{
            {0.85, 0.62, 0.45},
            {0.80, 0.75, 0.45},
            {0.55, 0.80, 0.50},
            {0.50, 0.70, 0.85},
            {0.75, 0.55, 0.82},
        }};
        return colors[static_cast<std::size_t>(finger)];
    }
};

void draw_segment(Image& img, double ax, double ay, double bx, double by,
                  const std::array<double, 3>& color, double half_width) {
    const int x_lo = std::max(0, static_cast<int>(std::floor(std::min(ax, bx) - half_width - 1)));
    const int x_hi = std::min(img.width - 1, static_cast<int>(std::ceil(std::max(ax, bx) + half_width + 1)));
    const int y_lo = std::max(0, static_cast<int>(std::floor(std::min(ay, by) - half_width - 1)));
    const int y_hi = std::min(img.height - 1, static_cast<int>(std::ceil(std::max(ay, by) + half_width + 1)));
    const double vx = bx - ax;
    const double vy = by - ay;
    const double len2 = vx * vx + vy * vy;
    for (int y = y_lo; y <= y_hi; ++y) {
        for (int x = x_lo; x <= x_hi; ++x) {
            double t = len2 > 0 ? std::clamp(((x - ax) * vx + (y - ay) * vy) / len2, 0.0, 1.0) : 0.0;
            double dx = x - (ax + t * vx);
            double dy = y - (ay + t * vy);
            double d = std::sqrt(dx * dx + dy * dy);
            double alpha = std::clamp(half_width + 0.5 - d, 0.0, 1.0);
            if (alpha <= 0) continue;
            float* px = img.at(y, x);
            for (int c = 0; c < 3; ++c)
                px[c] = static_cast<float>(px[c] * (1 - alpha) + color[c] * alpha);
        }
    }
}

void draw_blob(Image& img, double cx, double cy, const std::array<double, 3>& color,
               double sigma, double peak) {
    const double radius = 3.0 * sigma;
    const int x_lo = std::max(0, static_cast<int>(std::floor(cx - radius)));
    const int x_hi = std::min(img.width - 1, static_cast<int>(std::ceil(cx + radius)));
    const int y_lo = std::max(0, static_cast<int>(std::floor(cy - radius)));
    const int y_hi = std::min(img.height - 1, static_cast<int>(std::ceil(cy + radius)));
    for (int y = y_lo; y <= y_hi; ++y) {
        for (int x = x_lo; x <= x_hi; ++x) {
            double r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
            double alpha = peak * std::exp(-r2 / (2 * sigma * sigma));
            if (alpha < 1e-3) continue;
            float* px = img.at(y, x);
            for (int c = 0; c < 3; ++c)
                px[c] = static_cast<float>(px[c] * (1 - alpha) + color[c] * alpha);
        }
    }
}

} // namespace

Image render_frame(const geom::Keypoints2D& j2d, const RenderStyle& style, int size) {
    Image img(size, size);
    img.fill(static_cast<float>(style.background[0]), static_cast<float>(style.background[1]),
             static_cast<float>(style.background[2]));

    const auto& tmpl = geom::default_template();
    const double scale = size / 64.0;
    for (int i = 1; i < kNumJoints; ++i) {
        const int finger = (i - 1) / 4;
        const Vec2& a = j2d.joints[tmpl.parent[i]];
        const Vec2& b = j2d.joints[i];
        draw_segment(img, a.x(), a.y(), b.x(), b.y(), FingerColors::bone_color(finger),
                     0.9 * scale);
    }
    for (int i = 0; i < kNumJoints; ++i) {
        const Vec2& p = j2d.joints[i];
        draw_blob(img, p.x(), p.y(), {0.98, 0.98, 0.96}, 1.2 * scale, i == 0 ? 0.95 : 0.85);
    }
    if (style.occluder) {
        const auto& oc = *style.occluder;
        const int x_lo = std::max(0, static_cast<int>(std::floor(oc.x0)));
        const int x_hi = std::min(size - 1, static_cast<int>(std::ceil(oc.x1)));
        const int y_lo = std::max(0, static_cast<int>(std::floor(oc.y0)));
        const int y_hi = std::min(size - 1, static_cast<int>(std::ceil(oc.y1)));
        for (int y = y_lo; y <= y_hi; ++y)
            for (int x = x_lo; x <= x_hi; ++x) {
                float* px = img.at(y, x);
                for (int c = 0; c < 3; ++c) px[c] = static_cast<float>(oc.color[c]);
            }
    }
    img.clamp01();
    return img;
}

SequenceRecord generate_sequence(const SynthConfig& cfg, uint64_t seed) {
    cfg.validate();
    const auto& tmpl = geom::default_template();
    Rng rng(seed);
    Rng pose_rng = rng.child(1);
    Rng noise_rng = rng.child(2);
    Rng cam_rng = rng.child(3);
    Rng style_rng = rng.child(4);

    const int n = cfg.n_frames;
    SequenceRecord rec;
    rec.fps = cfg.fps;

    // constant per-sequence shape, quantized like everything stored
    geom::HandShape shape;
    for (double& b : shape.beta) b = quantize(pose_rng.uniform(-2.0, 2.0));
    rec.shape = shape;

    const AngleVector start = sample_limit_pose(tmpl, pose_rng);
    const AngleVector target = sample_limit_pose(tmpl, pose_rng);

    // low-frequency per-channel sinusoids
    std::array<double, kNumArticulated * 3> noise_freq{};
    std::array<double, kNumArticulated * 3> noise_phase{};
    for (std::size_t i = 0; i < noise_freq.size(); ++i) {
        noise_freq[i] = 1.0 + 2.0 * noise_rng.uniform();
        noise_phase[i] = noise_rng.uniform(0.0, kTau);
    }

    const int n_hold = static_cast<int>(std::lround(cfg.grasp_hold_fraction * n));
    const int n_move = n - n_hold;

    geom::CameraWeakPerspective cam;
    const double size_scale = cfg.image_size / 64.0;
    cam.s = quantize(cam_rng.uniform(140.0, 210.0) * size_scale);
    const Vec3 rest_mid = 0.5 * (tmpl.rest_joints[0] + tmpl.rest_joints[11]);
    cam.t.x() = quantize(cfg.image_size / 2.0 - cam.s * rest_mid.x() +
                         cam_rng.uniform(-3.0, 3.0) * size_scale);
    cam.t.y() = quantize(cfg.image_size / 2.0 - cam.s * rest_mid.y() +
                         cam_rng.uniform(-3.0, 3.0) * size_scale);
    rec.cam = cam;

    const int palette_pick =
        static_cast<int>(style_rng.uniform_index(cfg.background_palette.size()));
    RenderStyle base_style;
    base_style.background = cfg.background_palette[static_cast<std::size_t>(palette_pick)];

    rec.frames.reserve(static_cast<std::size_t>(n));
    rec.poses.reserve(static_cast<std::size_t>(n));
    rec.j3d.reserve(static_cast<std::size_t>(n));
    rec.j2d.reserve(static_cast<std::size_t>(n));

    for (int t = 0; t < n; ++t) {
        const double progress =
            n_move <= 0 ? 1.0 : smoothstep01(static_cast<double>(t + 1) / n_move);
        const double u = n > 1 ? static_cast<double>(t) / (n - 1) : 0.0;

        AngleVector a{};
        for (std::size_t i = 0; i < a.size(); ++i) {
            a[i] = start[i] + (target[i] - start[i]) * progress +
                   cfg.pose_noise_amplitude * std::sin(kTau * noise_freq[i] * u + noise_phase[i]);
        }

        geom::HandPose pose = pose_from_angles(a);
        for (int s = 0; s < kNumArticulated; ++s) pose.joint(s) = quantize_rot(pose.joint(s));
        rec.poses.push_back(pose);

        geom::Keypoints3D j3 = geom::forward_kinematics(pose, shape, tmpl);
        for (auto& p : j3.joints)
            p = Vec3(quantize(p.x()), quantize(p.y()), quantize(p.z()));
        rec.j3d.push_back(j3);

        geom::Keypoints2D j2 = geom::project_weak_perspective(j3, cam);
        for (auto& p : j2.joints) p = Vec2(quantize(p.x()), quantize(p.y()));
        rec.j2d.push_back(j2);

        RenderStyle style = base_style;
        const bool in_hold = t >= n_move;
        if (in_hold && style_rng.bernoulli(cfg.occluder_probability)) {
            OccluderRect oc;
            const double w = style_rng.uniform(0.18, 0.42) * cfg.image_size;
            const double h = style_rng.uniform(0.18, 0.42) * cfg.image_size;
            oc.x0 = style_rng.uniform(0.0, cfg.image_size - w);
            oc.y0 = style_rng.uniform(0.0, cfg.image_size - h);
            oc.x1 = oc.x0 + w;
            oc.y1 = oc.y0 + h;
            const double g = style_rng.uniform(0.25, 0.55);
            oc.color = {g, g, g * 0.9};
            style.occluder = oc;
        }
        rec.frames.push_back(render_frame(j2, style, cfg.image_size));
    }
    return rec;
}

namespace {

constexpr char kSequenceMagic[4] = {'T', 'C', 'S', 'Q'};
constexpr uint32_t kSequenceVersion = 1;

} // namespace

void write_sequence(const std::string& path, const SequenceRecord& rec) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + path + " for writing");
    const int n = rec.n_frames();
    const int size = rec.image_size();
    write_magic(os, kSequenceMagic);
    write_u32(os, kSequenceVersion);
    write_u32(os, static_cast<uint32_t>(n));
    write_u32(os, static_cast<uint32_t>(size));
    write_u32(os, static_cast<uint32_t>(size));
    write_f32(os, static_cast<float>(rec.fps));
    write_string(os, rec.seq_id);
    for (const auto& img : rec.frames)
        write_f32_array(os, img.pixels.data(), img.pixels.size());
    for (const auto& pose : rec.poses)
        for (int s = 0; s < kNumArticulated; ++s)
            for (double v : pose.joint(s).r) write_f32(os, static_cast<float>(v));
    for (double b : rec.shape.beta) write_f32(os, static_cast<float>(b));
    for (const auto& j3 : rec.j3d)
        for (const auto& p : j3.joints) {
            write_f32(os, static_cast<float>(p.x()));
            write_f32(os, static_cast<float>(p.y()));
            write_f32(os, static_cast<float>(p.z()));
        }
    for (const auto& j2 : rec.j2d)
        for (const auto& p : j2.joints) {
            write_f32(os, static_cast<float>(p.x()));
            write_f32(os, static_cast<float>(p.y()));
        }
    write_f32(os, static_cast<float>(rec.cam.s));
    write_f32(os, static_cast<float>(rec.cam.t.x()));
    write_f32(os, static_cast<float>(rec.cam.t.y()));
    if (!os) throw IoError("short write to " + path);
}

SequenceRecord read_sequence(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    expect_magic(is, kSequenceMagic, path);
    const uint32_t version = read_u32(is);
    if (version != kSequenceVersion)
        throw IoError("unsupported sequence container version in " + path);
    const int n = static_cast<int>(read_u32(is));
    const int h = static_cast<int>(read_u32(is));
    const int w = static_cast<int>(read_u32(is));
    SequenceRecord rec;
    rec.fps = read_f32(is);
    rec.seq_id = read_string(is);
    rec.frames.assign(static_cast<std::size_t>(n), Image(h, w));
    for (auto& img : rec.frames) read_f32_array(is, img.pixels.data(), img.pixels.size());
    rec.poses.resize(static_cast<std::size_t>(n));
    for (auto& pose : rec.poses)
        for (int s = 0; s < kNumArticulated; ++s)
            for (double& v : pose.joint(s).r) v = read_f32(is);
    for (double& b : rec.shape.beta) b = read_f32(is);
    rec.j3d.resize(static_cast<std::size_t>(n));
    for (auto& j3 : rec.j3d)
        for (auto& p : j3.joints) {
            p.x() = read_f32(is);
            p.y() = read_f32(is);
            p.z() = read_f32(is);
        }
    rec.j2d.resize(static_cast<std::size_t>(n));
    for (auto& j2 : rec.j2d)
        for (auto& p : j2.joints) {
            p.x() = read_f32(is);
            p.y() = read_f32(is);
        }
    rec.cam.s = read_f32(is);
    rec.cam.t.x() = read_f32(is);
    rec.cam.t.y() = read_f32(is);
    if (!is) throw IoError("truncated sequence container " + path);
    return rec;
}

namespace {

nlohmann::json template_to_json(const geom::KinematicTemplate& tmpl) {
    nlohmann::json j;
    for (int i = 0; i < kNumJoints; ++i) {
        j["rest_joints"].push_back(
            {tmpl.rest_joints[i].x(), tmpl.rest_joints[i].y(), tmpl.rest_joints[i].z()});
        j["parent"].push_back(tmpl.parent[i]);
        nlohmann::json dirs = nlohmann::json::array();
        for (int k = 0; k < kNumShapeCoeffs; ++k)
            dirs.push_back({tmpl.shape_dirs[i][k].x(), tmpl.shape_dirs[i][k].y(),
                            tmpl.shape_dirs[i][k].z()});
        j["shape_dirs"].push_back(dirs);
    }
    for (int s : tmpl.articulated) j["articulated"].push_back(s);
    return j;
}

nlohmann::json synth_config_to_json(const SynthConfig& cfg) {
    nlohmann::json j;
    j["n_frames"] = cfg.n_frames;
    j["fps"] = cfg.fps;
    j["image_size"] = cfg.image_size;
    j["grasp_hold_fraction"] = cfg.grasp_hold_fraction;
    j["pose_noise_amplitude"] = cfg.pose_noise_amplitude;
    j["occluder_probability"] = cfg.occluder_probability;
    j["background_palette"] = cfg.background_palette;
    return j;
}

std::string sequence_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "seq_%06d", index);
    return buf;
}

} // namespace

SequenceDataset generate_dataset_in_memory(int n_sequences, const SynthConfig& cfg,
                                           uint64_t seed) {
    cfg.validate();
    SequenceDataset ds;
    ds.fps = cfg.fps;
    ds.image_size = cfg.image_size;
    ds.sequences.resize(static_cast<std::size_t>(n_sequences));
    parallel_for(static_cast<std::size_t>(n_sequences), [&](std::size_t i) {
        SequenceRecord rec = generate_sequence(cfg, seed + i);
        rec.seq_id = sequence_name(static_cast<int>(i));
        ds.sequences[i] = std::move(rec);
    });
    return ds;
}

void make_dataset(const std::string& dir, int n_sequences, const SynthConfig& cfg,
                  uint64_t seed) {
    cfg.validate();
    if (n_sequences < 0) throw InvalidConfig("n_sequences must be >= 0");
    std::filesystem::create_directories(dir);

    SequenceDataset ds = generate_dataset_in_memory(n_sequences, cfg, seed);

    nlohmann::json manifest;
    manifest["format"] = "tcsq-dataset";
    manifest["version"] = 1;
    manifest["fps"] = cfg.fps;
    manifest["image_size"] = cfg.image_size;
    manifest["n_sequences"] = n_sequences;
    manifest["seed"] = seed;
    manifest["synth_config"] = synth_config_to_json(cfg);
    manifest["template"] = template_to_json(geom::default_template());
    manifest["sequences"] = nlohmann::json::array();
    for (int i = 0; i < n_sequences; ++i) {
        const auto& rec = ds.sequences[static_cast<std::size_t>(i)];
        write_sequence((std::filesystem::path(dir) / (rec.seq_id + ".tcsq")).string(), rec);
        manifest["sequences"].push_back(
            {{"id", rec.seq_id}, {"file", rec.seq_id + ".tcsq"}, {"n_frames", rec.n_frames()}});
    }
    write_text_file((std::filesystem::path(dir) / "manifest.json").string(),
                    manifest.dump(2) + "\n");
}

SequenceDataset load_dataset(const std::string& dir) {
    const auto manifest_path = std::filesystem::path(dir) / "manifest.json";
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_text_file(manifest_path.string()));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("cannot parse " + manifest_path.string() + ": " + e.what());
    }
    if (manifest.value("format", "") != "tcsq-dataset" || manifest.value("version", 0) != 1)
        throw IoError("unrecognized dataset manifest " + manifest_path.string());

    SequenceDataset ds;
    ds.root = dir;
    ds.fps = manifest.at("fps").get<double>();
    ds.image_size = manifest.at("image_size").get<int>();
    const auto& list = manifest.at("sequences");
    ds.sequences.resize(list.size());
    std::vector<std::string> files(list.size());
    for (std::size_t i = 0; i < list.size(); ++i)
        files[i] = (std::filesystem::path(dir) / list[i].at("file").get<std::string>()).string();
    parallel_for(list.size(), [&](std::size_t i) { ds.sequences[i] = read_sequence(files[i]); });
    const int declared = manifest.at("n_sequences").get<int>();
    if (declared != static_cast<int>(ds.sequences.size()))
        throw IoError("manifest sequence count mismatch in " + dir);
    return ds;
}

} // namespace tchand::synth
