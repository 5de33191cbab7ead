#include "tchand/config.hpp"

#include <json.hpp>

#include "tchand/io.hpp"

namespace tchand {

using nlohmann::json;

int RunConfig::resolved_radius(double fps) const {
    return contrastive.radius > 0 ? contrastive.radius : sampling::default_radius(fps);
}

sampling::BatchSpec RunConfig::batch_spec(double fps) const {
    sampling::BatchSpec spec;
    spec.anchors_per_batch = contrastive.anchors_per_batch;
    spec.n_pos = contrastive.n_pos;
    spec.n_neg = contrastive.n_neg;
    spec.radius = resolved_radius(fps);
    spec.strategy = strategy;
    spec.sigma = strategy_sigma;
    spec.uniform = !probabilistic_sampling;
    return spec;
}

void RunConfig::validate() const {
    synth.validate();
    if (!(contrastive.tau > 0)) throw InvalidConfig("contrastive.tau must be positive");
    if (contrastive.n_pos < 1 || contrastive.n_neg < 1)
        throw InvalidConfig("contrastive.n_pos and n_neg must be >= 1");
    if (contrastive.anchors_per_batch < 1)
        throw InvalidConfig("contrastive.anchors_per_batch must be >= 1");
    if (loss_weights.lambda_2d == 0 && loss_weights.lambda_3d == 0 &&
        loss_weights.lambda_theta == 0)
        throw InvalidConfig("loss weights cannot all be zero");
    if (loss_weights.lambda_2d < 0 || loss_weights.lambda_3d < 0 || loss_weights.lambda_theta < 0)
        throw InvalidConfig("loss weights must be non-negative");
    for (const auto* s : {&pretrain_schedule, &finetune_schedule}) {
        if (s->warmup_epochs < 0 || s->warmup_epochs > s->total_epochs)
            throw InvalidConfig("warmup_epochs must lie in [0, total_epochs]");
        if (s->batch_size < 1 || s->steps_per_epoch < 1)
            throw InvalidConfig("batch_size and steps_per_epoch must be >= 1");
    }
    if (model.image_size != synth.image_size)
        throw InvalidConfig("model.image_size must match synth.image_size");
}

namespace {

json policy_to_json(const aug::AugmentationPolicy& p) {
    return json{{"rotation_range_deg", p.rotation_range_deg},
                {"scale_min", p.scale_min},
                {"scale_max", p.scale_max},
                {"translation_fraction", p.translation_fraction},
                {"appearance_enabled", p.appearance_enabled},
                {"gain_min", p.gain_min},
                {"gain_max", p.gain_max},
                {"jitter_range", p.jitter_range},
                {"p_channel_noise", p.p_channel_noise},
                {"p_jitter", p.p_jitter},
                {"p_color_drop", p.p_color_drop},
                {"p_sobel", p.p_sobel}};
}

void policy_from_json(const json& j, aug::AugmentationPolicy& p) {
    p.rotation_range_deg = j.value("rotation_range_deg", p.rotation_range_deg);
    p.scale_min = j.value("scale_min", p.scale_min);
    p.scale_max = j.value("scale_max", p.scale_max);
    p.translation_fraction = j.value("translation_fraction", p.translation_fraction);
    p.appearance_enabled = j.value("appearance_enabled", p.appearance_enabled);
    p.gain_min = j.value("gain_min", p.gain_min);
    p.gain_max = j.value("gain_max", p.gain_max);
    p.jitter_range = j.value("jitter_range", p.jitter_range);
    p.p_channel_noise = j.value("p_channel_noise", p.p_channel_noise);
    p.p_jitter = j.value("p_jitter", p.p_jitter);
    p.p_color_drop = j.value("p_color_drop", p.p_color_drop);
    p.p_sobel = j.value("p_sobel", p.p_sobel);
}

json schedule_to_json(const nn::TrainSchedule& s) {
    return json{{"base_lr", s.base_lr},
                {"warmup_epochs", s.warmup_epochs},
                {"total_epochs", s.total_epochs},
                {"batch_size", s.batch_size},
                {"steps_per_epoch", s.steps_per_epoch}};
}

void schedule_from_json(const json& j, nn::TrainSchedule& s) {
    s.base_lr = j.value("base_lr", s.base_lr);
    s.warmup_epochs = j.value("warmup_epochs", s.warmup_epochs);
    s.total_epochs = j.value("total_epochs", s.total_epochs);
    s.batch_size = j.value("batch_size", s.batch_size);
    s.steps_per_epoch = j.value("steps_per_epoch", s.steps_per_epoch);
}

} // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw InvalidConfig(std::string("config is not valid JSON: ") + e.what());
    }
    RunConfig c;
    c.version = j.value("version", 1);
    if (c.version != 1) throw InvalidConfig("unsupported config version");
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);

    if (j.contains("synth")) {
        const auto& s = j["synth"];
        c.synth.n_frames = s.value("n_frames", c.synth.n_frames);
        c.synth.fps = s.value("fps", c.synth.fps);
        c.synth.image_size = s.value("image_size", c.synth.image_size);
        c.synth.grasp_hold_fraction = s.value("grasp_hold_fraction", c.synth.grasp_hold_fraction);
        c.synth.pose_noise_amplitude =
            s.value("pose_noise_amplitude", c.synth.pose_noise_amplitude);
        c.synth.occluder_probability =
            s.value("occluder_probability", c.synth.occluder_probability);
        if (s.contains("background_palette"))
            c.synth.background_palette =
                s["background_palette"].get<std::vector<std::array<double, 3>>>();
        c.synth_sequences = s.value("n_sequences", c.synth_sequences);
    }
    c.model.image_size = c.synth.image_size;
    if (j.contains("model")) {
        const auto& m = j["model"];
        c.model.embed_dim = m.value("embed_dim", c.model.embed_dim);
        c.model.head_hidden = m.value("head_hidden", c.model.head_hidden);
        if (m.contains("channels")) {
            auto ch = m["channels"].get<std::vector<int>>();
            if (ch.size() != 3) throw InvalidConfig("model.channels needs three entries");
            c.model.channels = {ch[0], ch[1], ch[2]};
        }
    }
    if (j.contains("contrastive")) {
        const auto& t = j["contrastive"];
        c.contrastive.tau = t.value("tau", c.contrastive.tau);
        c.contrastive.n_pos = t.value("n_pos", c.contrastive.n_pos);
        c.contrastive.n_neg = t.value("n_neg", c.contrastive.n_neg);
        c.contrastive.anchors_per_batch =
            t.value("anchors_per_batch", c.contrastive.anchors_per_batch);
        c.contrastive.radius = t.value("radius", c.contrastive.radius);
        c.contrastive.positive_in_denominator =
            t.value("positive_in_denominator", c.contrastive.positive_in_denominator);
    }
    if (j.contains("sampling")) {
        const auto& s = j["sampling"];
        c.strategy = sampling::strategy_from_string(
            s.value("strategy", sampling::strategy_name(c.strategy)));
        c.strategy_sigma = s.value("sigma", c.strategy_sigma);
        c.probabilistic_sampling = s.value("probabilistic", c.probabilistic_sampling);
    }
    c.coherent_augmentation = j.value("coherent_augmentation", c.coherent_augmentation);
    if (j.contains("augment_pretrain")) policy_from_json(j["augment_pretrain"], c.augment_pretrain);
    if (j.contains("augment_finetune")) policy_from_json(j["augment_finetune"], c.augment_finetune);
    if (j.contains("loss_weights")) {
        const auto& w = j["loss_weights"];
        c.loss_weights.lambda_2d = w.value("lambda_2d", c.loss_weights.lambda_2d);
        c.loss_weights.lambda_3d = w.value("lambda_3d", c.loss_weights.lambda_3d);
        c.loss_weights.lambda_theta = w.value("lambda_theta", c.loss_weights.lambda_theta);
    }
    if (j.contains("pretrain")) schedule_from_json(j["pretrain"], c.pretrain_schedule);
    if (j.contains("finetune")) schedule_from_json(j["finetune"], c.finetune_schedule);
    if (j.contains("ablate")) {
        const auto& a = j["ablate"];
        c.ablate_seeds = a.value("seeds", c.ablate_seeds);
        c.ablate_train_sequences = a.value("train_sequences", c.ablate_train_sequences);
        c.ablate_holdout_sequences = a.value("holdout_sequences", c.ablate_holdout_sequences);
    }
    if (j.contains("audit")) {
        const auto& a = j["audit"];
        c.audit_draws = a.value("draws", c.audit_draws);
        c.audit_seq_len = a.value("seq_len", c.audit_seq_len);
    }
    if (j.contains("eval")) {
        const auto& e = j["eval"];
        if (e.contains("fscore_thresholds_mm"))
            c.eval.fscore_thresholds_mm = e["fscore_thresholds_mm"].get<std::vector<double>>();
        c.eval.inject_ground_truth = e.value("inject_ground_truth", c.eval.inject_ground_truth);
    }
    if (j.contains("data")) {
        const auto& d = j["data"];
        c.dataset_dir = d.value("dataset", c.dataset_dir);
        c.eval_dataset_dir = d.value("eval_dataset", c.eval_dataset_dir);
        c.checkpoint_path = d.value("checkpoint", c.checkpoint_path);
    }
    return c;
}

std::string RunConfig::to_json_text() const {
    json j;
    j["version"] = version;
    j["seed"] = seed;
    j["threads"] = threads;
    j["synth"] = {{"n_sequences", synth_sequences},
                  {"n_frames", synth.n_frames},
                  {"fps", synth.fps},
                  {"image_size", synth.image_size},
                  {"grasp_hold_fraction", synth.grasp_hold_fraction},
                  {"pose_noise_amplitude", synth.pose_noise_amplitude},
                  {"occluder_probability", synth.occluder_probability},
                  {"background_palette", synth.background_palette}};
    j["model"] = {{"image_size", model.image_size},
                  {"embed_dim", model.embed_dim},
                  {"head_hidden", model.head_hidden},
                  {"channels", model.channels}};
    j["contrastive"] = {{"tau", contrastive.tau},
                        {"n_pos", contrastive.n_pos},
                        {"n_neg", contrastive.n_neg},
                        {"anchors_per_batch", contrastive.anchors_per_batch},
                        {"radius", contrastive.radius},
                        {"positive_in_denominator", contrastive.positive_in_denominator}};
    j["sampling"] = {{"strategy", sampling::strategy_name(strategy)},
                     {"sigma", strategy_sigma},
                     {"probabilistic", probabilistic_sampling}};
    j["coherent_augmentation"] = coherent_augmentation;
    j["augment_pretrain"] = policy_to_json(augment_pretrain);
    j["augment_finetune"] = policy_to_json(augment_finetune);
    j["loss_weights"] = {{"lambda_2d", loss_weights.lambda_2d},
                         {"lambda_3d", loss_weights.lambda_3d},
                         {"lambda_theta", loss_weights.lambda_theta}};
    j["pretrain"] = schedule_to_json(pretrain_schedule);
    j["finetune"] = schedule_to_json(finetune_schedule);
    j["ablate"] = {{"seeds", ablate_seeds},
                   {"train_sequences", ablate_train_sequences},
                   {"holdout_sequences", ablate_holdout_sequences}};
    j["audit"] = {{"draws", audit_draws}, {"seq_len", audit_seq_len}};
    j["eval"] = {{"fscore_thresholds_mm", eval.fscore_thresholds_mm},
                 {"inject_ground_truth", eval.inject_ground_truth}};
    j["data"] = {{"dataset", dataset_dir},
                 {"eval_dataset", eval_dataset_dir},
                 {"checkpoint", checkpoint_path}};
    return j.dump(2) + "\n";
}

RunConfig load_run_config(const std::string& path) {
    return RunConfig::from_json_text(read_text_file(path));
}

} // namespace tchand
