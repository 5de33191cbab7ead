#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "tchand/config.hpp"
#include "tchand/io.hpp"
#include "tchand/threading.hpp"
#include "tchand/train.hpp"

namespace {

using namespace tchand;
namespace fs = std::filesystem;

struct CliArgs {
    std::string config_path;
    std::string out_dir;
    std::string checkpoint;
    uint64_t seed = 0;
    bool seed_set = false;
};

RunConfig resolve_config(const CliArgs& args) {
    RunConfig cfg = args.config_path.empty() ? RunConfig{} : load_run_config(args.config_path);
    if (args.seed_set) cfg.seed = args.seed;
    if (!args.checkpoint.empty()) cfg.checkpoint_path = args.checkpoint;
    cfg.validate();
    set_thread_count(cfg.threads);
    return cfg;
}

void materialize(const RunConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    write_text_file((fs::path(out_dir) / "config.resolved.json").string(), cfg.to_json_text());
}

nn::ModelParams initial_params(const RunConfig& cfg) {
    if (!cfg.checkpoint_path.empty()) return nn::load_checkpoint(cfg.checkpoint_path);
    return nn::init_params(cfg.model, Rng(cfg.seed).child(100).seed());
}

synth::SequenceDataset require_dataset(const std::string& dir, const char* what) {
    if (dir.empty()) throw InvalidConfig(std::string("data.") + what + " is not set");
    return synth::load_dataset(dir);
}

int cmd_synth(const CliArgs& args) {
    RunConfig cfg = resolve_config(args);
    materialize(cfg, args.out_dir);
    synth::make_dataset(args.out_dir, cfg.synth_sequences, cfg.synth, cfg.seed);
    std::printf("wrote %d sequences to %s\n", cfg.synth_sequences, args.out_dir.c_str());
    return 0;
}

int cmd_pretrain(const CliArgs& args) {
    RunConfig cfg = resolve_config(args);
    materialize(cfg, args.out_dir);
    synth::SequenceDataset ds = require_dataset(cfg.dataset_dir, "dataset");
    nn::ModelParams init = nn::init_params(cfg.model, Rng(cfg.seed).child(100).seed());
    train::TrainResult result = train::pretrain({&ds}, init, cfg, cfg.seed);
    nn::save_checkpoint((fs::path(args.out_dir) / "checkpoint.tclr").string(), result.params,
                    cfg.to_json_text());
    write_text_file((fs::path(args.out_dir) / "pretrain_loss.csv").string(),
                    train::log_to_csv(result.log));
    std::printf("pretrained %d epochs, final loss %.6f\n", cfg.pretrain_schedule.total_epochs,
                result.log.empty() ? 0.0 : result.log.back().loss);
    return 0;
}

int cmd_finetune(const CliArgs& args) {
    RunConfig cfg = resolve_config(args);
    materialize(cfg, args.out_dir);
    synth::SequenceDataset ds = require_dataset(cfg.dataset_dir, "dataset");
    nn::ModelParams init = initial_params(cfg);
    train::TrainResult result = train::finetune(ds, init, cfg, cfg.seed);
    nn::save_checkpoint((fs::path(args.out_dir) / "checkpoint.tclr").string(), result.params,
                    cfg.to_json_text());
    write_text_file((fs::path(args.out_dir) / "finetune_loss.csv").string(),
                    train::log_to_csv(result.log));
    std::printf("fine-tuned %d epochs, final loss %.6f\n", cfg.finetune_schedule.total_epochs,
                result.log.empty() ? 0.0 : result.log.back().loss);
    return 0;
}

int cmd_eval(const CliArgs& args) {
    RunConfig cfg = resolve_config(args);
    materialize(cfg, args.out_dir);
    const std::string dir = cfg.eval_dataset_dir.empty() ? cfg.dataset_dir : cfg.eval_dataset_dir;
    synth::SequenceDataset ds = require_dataset(dir, "eval_dataset");
    nn::ModelParams params = cfg.checkpoint_path.empty() && cfg.eval.inject_ground_truth
                                 ? nn::init_params(cfg.model, Rng(cfg.seed).child(100).seed())
                                 : nn::load_checkpoint(cfg.checkpoint_path);
    metrics::MetricsReport report = metrics::evaluate(params, ds, cfg.eval);
    write_text_file((fs::path(args.out_dir) / "metrics.json").string(), report.to_json());
    std::printf("pa_epe %.4f mm  ra_epe %.4f mm  sta_epe %.4f mm  epe %.4f mm  accel %.4f mm/s^2\n",
                report.aggregate.epe.at("pa"), report.aggregate.epe.at("ra"),
                report.aggregate.epe.at("sta"), report.aggregate.epe.at("none"),
                report.aggregate.accel_mm_s2);
    return 0;
}

int cmd_ablate(const CliArgs& args) {
    RunConfig cfg = resolve_config(args);
    materialize(cfg, args.out_dir);
    train::AblationReport report = train::run_ablation(cfg, /*verbose=*/true);
    write_text_file((fs::path(args.out_dir) / "ablation.json").string(), report.to_json());
    write_text_file((fs::path(args.out_dir) / "ablation.csv").string(), report.to_csv());
    std::printf("%s", report.to_table().c_str());
    std::fprintf(stderr, "[ablate] total wall time %.1fs\n", report.wall_seconds);
    return 0;
}

int cmd_audit_sampling(const CliArgs& args) {
    RunConfig cfg = resolve_config(args);
    materialize(cfg, args.out_dir);
    const int k = cfg.resolved_radius(cfg.synth.fps);
    const double sigma = cfg.strategy_sigma > 0 ? cfg.strategy_sigma : k / 2.0;
    const int n = cfg.audit_seq_len;
    const int anchor = n / 2;
    Rng rng(cfg.seed);

    // positives over signed distances
    std::vector<double> pos_w = sampling::positive_weights(cfg.strategy, k, sigma);
    std::vector<long> pos_hits(pos_w.size(), 0);
    Rng pos_rng = rng.child(1);
    for (int i = 0; i < cfg.audit_draws; ++i)
        ++pos_hits[static_cast<std::size_t>(
            sampling::draw_without_replacement(pos_w, 1, pos_rng)[0])];
    std::string pos_csv = "distance,analytic_p,empirical_p\n";
    char buf[128];
    for (std::size_t i = 0; i < pos_w.size(); ++i) {
        const int d = static_cast<int>(i) < k ? static_cast<int>(i) - k : static_cast<int>(i) - k + 1;
        std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g\n", d, pos_w[i],
                      static_cast<double>(pos_hits[i]) / cfg.audit_draws);
        pos_csv += buf;
    }
    write_text_file((fs::path(args.out_dir) / "audit_positive.csv").string(), pos_csv);

    // negatives from an interior anchor
    std::vector<int> distances;
    for (int i = 0; i < n; ++i)
        if (std::abs(i - anchor) > k) distances.push_back(std::abs(i - anchor));
    std::vector<double> neg_w = sampling::negative_weights(cfg.strategy, k, distances, sigma);
    std::vector<long> neg_hits(neg_w.size(), 0);
    Rng neg_rng = rng.child(2);
    for (int i = 0; i < cfg.audit_draws; ++i)
        ++neg_hits[static_cast<std::size_t>(
            sampling::draw_without_replacement(neg_w, 1, neg_rng)[0])];
    std::string neg_csv = "distance,analytic_p,empirical_p\n";
    for (std::size_t i = 0; i < neg_w.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g\n", distances[i], neg_w[i],
                      static_cast<double>(neg_hits[i]) / cfg.audit_draws);
        neg_csv += buf;
    }
    write_text_file((fs::path(args.out_dir) / "audit_negative.csv").string(), neg_csv);
    std::printf("audited %s sampling, k=%d, %d draws\n",
                sampling::strategy_name(cfg.strategy).c_str(), k, cfg.audit_draws);
    return 0;
}

int cmd_export_embeddings(const CliArgs& args) {
    RunConfig cfg = resolve_config(args);
    materialize(cfg, args.out_dir);
    synth::SequenceDataset ds = require_dataset(
        cfg.eval_dataset_dir.empty() ? cfg.dataset_dir : cfg.eval_dataset_dir, "dataset");
    nn::ModelParams params = nn::load_checkpoint(cfg.checkpoint_path);

    std::string csv = "seq_id,frame_index";
    for (int e = 0; e < params.config.embed_dim; ++e) csv += ",e" + std::to_string(e);
    csv += "\n";
    char buf[64];
    for (const auto& rec : ds.sequences) {
        for (int t = 0; t < rec.n_frames(); ++t) {
            Tensor<float> z = nn::encode_image(params, rec.frames[static_cast<std::size_t>(t)]);
            csv += rec.seq_id + "," + std::to_string(t);
            for (float v : z.data) {
                std::snprintf(buf, sizeof(buf), ",%.9g", static_cast<double>(v));
                csv += buf;
            }
            csv += "\n";
        }
    }
    write_text_file((fs::path(args.out_dir) / "embeddings.csv").string(), csv);
    std::printf("exported embeddings for %zu sequences\n", ds.sequences.size());
    return 0;
}

void emit_error_json(const std::string& kind, const std::string& message) {
    nlohmann::json j;
    j["error"] = {{"kind", kind}, {"message", message}};
    std::fprintf(stderr, "%s\n", j.dump().c_str());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"time-contrastive hand reconstruction pipeline"};
    app.require_subcommand(1);
    app.fallthrough(); // global flags may follow the subcommand

    CliArgs args;
    app.add_option("--config", args.config_path, "run configuration JSON");
    app.add_option("--out", args.out_dir, "output directory")->required();
    auto* seed_opt = app.add_option("--seed", args.seed, "seed override");
    app.add_option("--checkpoint", args.checkpoint, "checkpoint override");

    auto* synth_cmd = app.add_subcommand("synth", "generate a labeled synthetic dataset");
    auto* pretrain_cmd = app.add_subcommand("pretrain", "time-contrastive pre-training");
    auto* finetune_cmd = app.add_subcommand("finetune", "supervised fine-tuning");
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    auto* ablate_cmd = app.add_subcommand("ablate", "run the experiment arms over seeds");
    auto* audit_cmd = app.add_subcommand("audit-sampling", "analytic vs empirical sampling CSV");
    auto* export_cmd = app.add_subcommand("export-embeddings", "per-frame embedding CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        emit_error_json("InvalidArguments", e.what());
        return 2;
    }
    args.seed_set = seed_opt->count() > 0;

    try {
        if (synth_cmd->parsed()) return cmd_synth(args);
        if (pretrain_cmd->parsed()) return cmd_pretrain(args);
        if (finetune_cmd->parsed()) return cmd_finetune(args);
        if (eval_cmd->parsed()) return cmd_eval(args);
        if (ablate_cmd->parsed()) return cmd_ablate(args);
        if (audit_cmd->parsed()) return cmd_audit_sampling(args);
        if (export_cmd->parsed()) return cmd_export_embeddings(args);
    } catch (const Error& e) {
        emit_error_json(e.kind(), e.what());
        return 1;
    } catch (const std::exception& e) {
        emit_error_json("Internal", e.what());
        return 1;
    }
    return 0;
}
