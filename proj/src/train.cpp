#include "tchand/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "tchand/hand_diff.hpp"
#include "tchand/threading.hpp"

namespace tchand::train {

using aug::AugmentationPolicy;
using aug::GeometricParams;
using geom::Vec2;
using geom::Vec3;
using nn::ModelParams;
using nn::Tape;
using nn::Var;
using sampling::PairSample;
using synth::SequenceDataset;
using synth::SequenceRecord;

namespace {

// rng stream tags
constexpr uint64_t kStreamBatch = 1;
constexpr uint64_t kStreamAugment = 2;
constexpr uint64_t kStreamData = 3;

double run_epoch_lr(const nn::TrainSchedule& s, int epoch) { return nn::lr_at(epoch, s); }

std::vector<sampling::SequenceLengths> dataset_lengths(
    const std::vector<const SequenceDataset*>& datasets) {
    std::vector<sampling::SequenceLengths> out;
    out.reserve(datasets.size());
    for (const auto* ds : datasets) {
        sampling::SequenceLengths sl;
        for (const auto& rec : ds->sequences) {
            sl.lengths.push_back(rec.n_frames());
            sl.ids.push_back(rec.seq_id);
        }
        out.push_back(std::move(sl));
    }
    return out;
}

} // namespace

LabeledSample make_labeled_sample(const SequenceRecord& rec, int frame,
                                  const GeometricParams& geo) {
    LabeledSample out;
    out.image = aug::apply_geometric(rec.frames[static_cast<std::size_t>(frame)], geo);

    const double alpha = geo.rotation_deg * M_PI / 180.0;
    const double ca = std::cos(alpha);
    const double sa = std::sin(alpha);
    const double a = geo.scale;
    const int size = rec.image_size();
    const Vec2 center((size - 1) / 2.0, (size - 1) / 2.0);
    const Vec2 shift(geo.translation_x, geo.translation_y);
    Eigen::Matrix2d rot2;
    rot2 << ca, -sa, sa, ca;
    geom::Mat3 rot_z = geom::Mat3::Identity();
    rot_z.topLeftCorner<2, 2>() = rot2;

    const geom::HandPose& pose = rec.poses[static_cast<std::size_t>(frame)];
    geom::Rotation6D wrist6 =
        geom::matrix_to_rot6d(rot_z * geom::rot6d_to_matrix(pose.wrist));

    out.targets.pose6d.resize(static_cast<std::size_t>(nn::kPoseOutputs));
    for (int s = 0; s < geom::kNumArticulated; ++s) {
        const geom::Rotation6D& r = s == 0 ? wrist6 : pose.joint(s);
        for (int c = 0; c < 6; ++c)
            out.targets.pose6d[static_cast<std::size_t>(s * 6 + c)] = r.r[static_cast<std::size_t>(c)];
    }
    out.targets.beta.assign(rec.shape.beta.begin(), rec.shape.beta.end());

    // rotation acts about the root, matching the kinematic chain's pivot
    const Vec3 root = rec.j3d[static_cast<std::size_t>(frame)].joints[0];
    out.targets.j3d.reserve(3 * geom::kNumJoints);
    for (const Vec3& p : rec.j3d[static_cast<std::size_t>(frame)].joints) {
        const Vec3 q = rot_z * (p - root) + root;
        out.targets.j3d.push_back(q.x());
        out.targets.j3d.push_back(q.y());
        out.targets.j3d.push_back(q.z());
    }

    out.targets.j2d.reserve(2 * geom::kNumJoints);
    for (const Vec2& p : rec.j2d[static_cast<std::size_t>(frame)].joints) {
        const Vec2 q = center + a * (rot2 * (p - center)) + shift;
        out.targets.j2d.push_back(q.x());
        out.targets.j2d.push_back(q.y());
    }

    // camera consistent with the transformed labels
    out.cam.s = rec.cam.s * a;
    const Vec2 root_xy(root.x(), root.y());
    out.cam.t = center + a * (rot2 * (rec.cam.t - center)) + shift +
                rec.cam.s * a * (rot2 * root_xy - root_xy);
    return out;
}

TrainResult pretrain(const std::vector<const SequenceDataset*>& datasets,
                     const ModelParams& init, const RunConfig& cfg, uint64_t seed) {
    if (datasets.empty()) throw EmptyBatch("pretrain needs at least one dataset");
    const double fps = datasets[0]->fps;
    const int image_size = datasets[0]->image_size;
    sampling::BatchSpec spec = cfg.batch_spec(fps);
    const nn::TrainSchedule& schedule = cfg.pretrain_schedule;
    const AugmentationPolicy& policy = cfg.augment_pretrain;
    const int M = spec.anchors_per_batch;

    auto lengths = dataset_lengths(datasets);

    TrainResult result;
    result.params = init;
    nn::Adam adam(result.params);
    Rng root(seed);

    for (int epoch = 0; epoch < schedule.total_epochs; ++epoch) {
        const double lr = run_epoch_lr(schedule, epoch);
        double epoch_loss = 0.0;
        for (int step = 0; step < schedule.steps_per_epoch; ++step) {
            Rng batch_rng = root.child(kStreamBatch).child(static_cast<uint64_t>(epoch))
                                 .child(static_cast<uint64_t>(step));
            const uint64_t batch_index =
                static_cast<uint64_t>(epoch) * static_cast<uint64_t>(schedule.steps_per_epoch) +
                static_cast<uint64_t>(step);
            auto batch = sampling::build_batch(lengths, spec, batch_index, batch_rng);

            Rng aug_root = root.child(kStreamAugment).child(static_cast<uint64_t>(epoch))
                               .child(static_cast<uint64_t>(step));
            // one geometric draw per sequence appearing in this batch
            std::map<std::pair<int, int>, GeometricParams> shared_geo;
            for (const auto& ps : batch) {
                auto key = std::make_pair(ps.dataset, ps.sequence);
                if (!shared_geo.count(key)) {
                    Rng r = aug_root.child(1).child(
                        static_cast<uint64_t>(ps.dataset) * 1000003ULL +
                        static_cast<uint64_t>(ps.sequence));
                    shared_geo[key] = aug::sample_geometric(policy, image_size, r);
                }
            }

            std::vector<nn::GradBuffer> grads(static_cast<std::size_t>(M));
            std::vector<double> losses(static_cast<std::size_t>(M), 0.0);
            parallel_for(static_cast<std::size_t>(M), [&](std::size_t a) {
                const PairSample& ps = batch[a];
                const SequenceRecord& rec =
                    datasets[static_cast<std::size_t>(ps.dataset)]
                        ->sequences[static_cast<std::size_t>(ps.sequence)];

                std::vector<int> frames;
                frames.push_back(ps.anchor);
                frames.insert(frames.end(), ps.positives.begin(), ps.positives.end());
                frames.insert(frames.end(), ps.negatives.begin(), ps.negatives.end());

                Rng frame_rng = aug_root.child(2).child(a);
                const GeometricParams seq_geo =
                    shared_geo.at(std::make_pair(ps.dataset, ps.sequence));

                Tape<float> tape;
                auto pvars = nn::ParamVars<float>::insert(tape, result.params);
                std::vector<Var> zs;
                zs.reserve(frames.size());
                for (std::size_t f = 0; f < frames.size(); ++f) {
                    GeometricParams geo = seq_geo;
                    if (!cfg.coherent_augmentation) {
                        Rng geo_rng = aug_root.child(3).child(a * 64 + f);
                        geo = aug::sample_geometric(policy, image_size, geo_rng);
                    }
                    Rng app_rng = frame_rng.child(f);
                    const aug::AppearanceParams app = aug::sample_appearance(policy, app_rng);
                    Image img = aug::apply_appearance(
                        aug::apply_geometric(rec.frames[static_cast<std::size_t>(frames[f])], geo),
                        app);
                    Var x = tape.constant(nn::image_to_tensor<float>(img));
                    zs.push_back(nn::encode(tape, pvars, result.params.config, x));
                }

                std::vector<Var> pos(zs.begin() + 1, zs.begin() + 1 + ps.positives.size());
                std::vector<Var> neg(zs.begin() + 1 + ps.positives.size(), zs.end());
                Var loss = nn::ntxent_loss(tape, zs[0], pos, neg, cfg.contrastive.tau,
                                           cfg.contrastive.positive_in_denominator);
                tape.backward(loss);
                grads[a] = nn::grads_from_tape(tape, pvars);
                losses[a] = tape.val(loss).data[0];
            });

            nn::GradBuffer total = nn::zero_grads(result.params);
            double batch_loss = 0.0;
            for (int a = 0; a < M; ++a) {
                nn::accumulate_grads(total, grads[static_cast<std::size_t>(a)]);
                batch_loss += losses[static_cast<std::size_t>(a)];
            }
            nn::scale_grads(total, 1.0f / static_cast<float>(M));
            batch_loss /= M;
            epoch_loss += batch_loss;
            adam.step(result.params, total, lr);
        }
        result.log.push_back({epoch, lr, epoch_loss / schedule.steps_per_epoch});
    }
    return result;
}

TrainResult finetune(const SequenceDataset& dataset, const ModelParams& init,
                     const RunConfig& cfg, uint64_t seed) {
    if (dataset.sequences.empty()) throw EmptyBatch("finetune needs labeled sequences");
    const nn::TrainSchedule& schedule = cfg.finetune_schedule;
    const AugmentationPolicy& policy = cfg.augment_finetune;
    const int B = schedule.batch_size;
    const auto& tmpl = geom::default_template();

    TrainResult result;
    result.params = init;
    nn::Adam adam(result.params);
    Rng root(seed);

    for (int epoch = 0; epoch < schedule.total_epochs; ++epoch) {
        const double lr = run_epoch_lr(schedule, epoch);
        double epoch_loss = 0.0;
        for (int step = 0; step < schedule.steps_per_epoch; ++step) {
            Rng data_rng = root.child(kStreamData).child(static_cast<uint64_t>(epoch))
                               .child(static_cast<uint64_t>(step));
            std::vector<std::pair<int, int>> picks(static_cast<std::size_t>(B));
            for (auto& [s, f] : picks) {
                s = static_cast<int>(data_rng.uniform_index(dataset.sequences.size()));
                f = static_cast<int>(data_rng.uniform_index(
                    static_cast<uint64_t>(dataset.sequences[static_cast<std::size_t>(s)].n_frames())));
            }

            Rng aug_root = root.child(kStreamAugment).child(static_cast<uint64_t>(epoch))
                               .child(static_cast<uint64_t>(step));
            std::vector<nn::GradBuffer> grads(static_cast<std::size_t>(B));
            std::vector<double> losses(static_cast<std::size_t>(B), 0.0);
            parallel_for(static_cast<std::size_t>(B), [&](std::size_t i) {
                const auto [s, f] = picks[i];
                const SequenceRecord& rec = dataset.sequences[static_cast<std::size_t>(s)];
                Rng rng_i = aug_root.child(i);
                GeometricParams geo = aug::sample_geometric(policy, rec.image_size(), rng_i);
                LabeledSample sample = make_labeled_sample(rec, f, geo);
                if (policy.appearance_enabled) {
                    const auto app = aug::sample_appearance(policy, rng_i);
                    sample.image = aug::apply_appearance(sample.image, app);
                }

                Tape<float> tape;
                auto pvars = nn::ParamVars<float>::insert(tape, result.params);
                Var x = tape.constant(nn::image_to_tensor<float>(sample.image));
                Var z = nn::encode(tape, pvars, result.params.config, x);
                Var raw = nn::head_forward(tape, pvars, z);
                auto pred = nn::decode_head(tape, tmpl, raw);
                Var loss = nn::finetune_loss(tape, pred, sample.targets, cfg.loss_weights);
                tape.backward(loss);
                grads[i] = nn::grads_from_tape(tape, pvars);
                losses[i] = tape.val(loss).data[0];
            });

            nn::GradBuffer total = nn::zero_grads(result.params);
            double batch_loss = 0.0;
            for (int i = 0; i < B; ++i) {
                nn::accumulate_grads(total, grads[static_cast<std::size_t>(i)]);
                batch_loss += losses[static_cast<std::size_t>(i)];
            }
            nn::scale_grads(total, 1.0f / static_cast<float>(B));
            batch_loss /= B;
            epoch_loss += batch_loss;
            adam.step(result.params, total, lr);
        }
        result.log.push_back({epoch, lr, epoch_loss / schedule.steps_per_epoch});
    }
    return result;
}

double embedding_coherence_margin(const ModelParams& params, const SequenceDataset& dataset,
                                  int radius) {
    if (dataset.sequences.empty()) throw EmptyBatch("no sequences to measure");
    std::vector<double> margins(dataset.sequences.size(), 0.0);
    std::vector<char> valid(dataset.sequences.size(), 0);
    parallel_for(dataset.sequences.size(), [&](std::size_t si) {
        const auto& rec = dataset.sequences[si];
        const int n = rec.n_frames();
        std::vector<Tensor<float>> zs(static_cast<std::size_t>(n));
        for (int t = 0; t < n; ++t)
            zs[static_cast<std::size_t>(t)] =
                nn::encode_image(params, rec.frames[static_cast<std::size_t>(t)]);
        auto cos_sim = [](const Tensor<float>& u, const Tensor<float>& v) {
            double uv = 0, uu = 0, vv = 0;
            for (std::size_t i = 0; i < u.data.size(); ++i) {
                uv += static_cast<double>(u.data[i]) * v.data[i];
                uu += static_cast<double>(u.data[i]) * u.data[i];
                vv += static_cast<double>(v.data[i]) * v.data[i];
            }
            return uv / (std::sqrt(uu) * std::sqrt(vv));
        };
        double in_sum = 0, out_sum = 0;
        std::size_t in_count = 0, out_count = 0;
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                const double s = cos_sim(zs[static_cast<std::size_t>(i)], zs[static_cast<std::size_t>(j)]);
                if (j - i <= radius) {
                    in_sum += s;
                    ++in_count;
                } else {
                    out_sum += s;
                    ++out_count;
                }
            }
        }
        if (in_count > 0 && out_count > 0) {
            margins[si] = in_sum / in_count - out_sum / out_count;
            valid[si] = 1;
        }
    });
    double acc = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < margins.size(); ++i)
        if (valid[i]) {
            acc += margins[i];
            ++count;
        }
    if (count == 0) throw SequenceTooShort("no sequence long enough for the margin");
    return acc / count;
}

std::string arm_name(Arm arm) {
    switch (arm) {
        case Arm::Baseline: return "baseline";
        case Arm::Full: return "full";
        case Arm::NoCoherentAug: return "no_coherent_aug";
        case Arm::NoProbSampling: return "no_prob_sampling";
    }
    return "?";
}

std::vector<Arm> all_arms() {
    return {Arm::Baseline, Arm::Full, Arm::NoCoherentAug, Arm::NoProbSampling};
}

namespace {

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n == 0) return 0.0;
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

AblationReport run_ablation(const RunConfig& cfg, bool verbose) {
    const auto t_start = std::chrono::steady_clock::now();
    AblationReport report;
    Rng root(cfg.seed);

    for (int s = 0; s < cfg.ablate_seeds; ++s) {
        SequenceDataset train_ds = synth::generate_dataset_in_memory(
            cfg.ablate_train_sequences, cfg.synth, root.child(10).child(static_cast<uint64_t>(s)).seed());
        SequenceDataset holdout_ds = synth::generate_dataset_in_memory(
            cfg.ablate_holdout_sequences, cfg.synth,
            root.child(11).child(static_cast<uint64_t>(s)).seed());
        const ModelParams init =
            nn::init_params(cfg.model, root.child(12).child(static_cast<uint64_t>(s)).seed());
        const uint64_t pretrain_seed = root.child(13).child(static_cast<uint64_t>(s)).seed();
        const uint64_t finetune_seed = root.child(14).child(static_cast<uint64_t>(s)).seed();
        const int radius = cfg.resolved_radius(cfg.synth.fps);

        for (Arm arm : all_arms()) {
            RunConfig arm_cfg = cfg;
            if (arm == Arm::NoCoherentAug) arm_cfg.coherent_augmentation = false;
            if (arm == Arm::NoProbSampling) arm_cfg.probabilistic_sampling = false;

            ModelParams start = init;
            if (arm != Arm::Baseline)
                start = pretrain({&train_ds}, init, arm_cfg, pretrain_seed).params;

            const double margin = embedding_coherence_margin(start, holdout_ds, radius);
            TrainResult ft = finetune(train_ds, start, arm_cfg, finetune_seed);
            metrics::MetricsReport eval = metrics::evaluate(ft.params, holdout_ds, cfg.eval);

            ArmRun run;
            run.arm = arm;
            run.seed_index = s;
            run.pa_epe_mm = eval.aggregate.epe.at("pa");
            run.ra_epe_mm = eval.aggregate.epe.at("ra");
            run.accel_mm_s2 = eval.aggregate.accel_mm_s2;
            run.embed_margin = margin;
            report.runs.push_back(run);

            if (verbose) {
                const double elapsed =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
                        .count();
                std::fprintf(stderr,
                             "[ablate] seed %d arm %-16s pa_epe %.3f mm  ra_epe %.3f mm  "
                             "accel %.3f mm/s^2  margin %.4f  (%.1fs)\n",
                             s, arm_name(arm).c_str(), run.pa_epe_mm, run.ra_epe_mm,
                             run.accel_mm_s2, run.embed_margin, elapsed);
            }
        }
    }

    for (Arm arm : all_arms()) {
        std::vector<double> pa, ra, accel;
        for (const auto& r : report.runs)
            if (r.arm == arm) {
                pa.push_back(r.pa_epe_mm);
                ra.push_back(r.ra_epe_mm);
                accel.push_back(r.accel_mm_s2);
            }
        report.median_pa_epe[arm_name(arm)] = median(pa);
        report.median_ra_epe[arm_name(arm)] = median(ra);
        report.median_accel[arm_name(arm)] = median(accel);
    }
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return report;
}

std::string AblationReport::to_json() const {
    nlohmann::json j;
    j["version"] = 1;
    j["runs"] = nlohmann::json::array();
    for (const auto& r : runs) {
        j["runs"].push_back({{"arm", arm_name(r.arm)},
                             {"seed_index", r.seed_index},
                             {"pa_epe_mm", r.pa_epe_mm},
                             {"ra_epe_mm", r.ra_epe_mm},
                             {"accel_mm_s2", r.accel_mm_s2},
                             {"embed_margin", r.embed_margin}});
    }
    j["median_pa_epe_mm"] = median_pa_epe;
    j["median_ra_epe_mm"] = median_ra_epe;
    j["median_accel_mm_s2"] = median_accel;
    return j.dump(2) + "\n";
}

std::string AblationReport::to_csv() const {
    std::string out = "arm,seed_index,pa_epe_mm,ra_epe_mm,accel_mm_s2,embed_margin\n";
    char buf[256];
    for (const auto& r : runs) {
        std::snprintf(buf, sizeof(buf), "%s,%d,%.9g,%.9g,%.9g,%.9g\n", arm_name(r.arm).c_str(),
                      r.seed_index, r.pa_epe_mm, r.ra_epe_mm, r.accel_mm_s2, r.embed_margin);
        out += buf;
    }
    return out;
}

std::string AblationReport::to_table() const {
    std::string out =
        "arm               accel(mm/s^2)   RA-EPE(mm)   PA-EPE(mm)   [medians over seeds]\n";
    char buf[256];
    for (Arm arm : all_arms()) {
        const auto& name = arm_name(arm);
        std::snprintf(buf, sizeof(buf), "%-18s %12.3f %12.3f %12.3f\n", name.c_str(),
                      median_accel.at(name), median_ra_epe.at(name), median_pa_epe.at(name));
        out += buf;
    }
    return out;
}

std::string log_to_csv(const std::vector<EpochLog>& log) {
    std::string out = "epoch,lr,loss\n";
    char buf[128];
    for (const auto& e : log) {
        std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g\n", e.epoch, e.lr, e.loss);
        out += buf;
    }
    return out;
}

} // namespace tchand::train
