// acmloc command line: synth | train | infer | eval | ablate | plot

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

#include "acmloc/checkpoint.hpp"
#include "acmloc/config.hpp"
#include "acmloc/pipeline.hpp"
#include "acmloc/plot.hpp"
#include "acmloc/synthetic.hpp"

using namespace acmloc;
using nlohmann::json;

namespace {

struct Common {
    std::string config;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--config", c.config, "JSON config file");
    app->add_option("--override", c.overrides, "key.path=value applied to the config (repeatable)");
    app->add_option("--seed", c.seed, "overrides train.seed");
}

// Config file (or base document) + overrides + --seed.
TrainConfig resolve_config(const Common& c, json base = json::object()) {
    json doc = c.config.empty() ? std::move(base) : read_json_file(c.config);
    if (doc.is_null()) doc = json::object();
    for (const auto& o : c.overrides) apply_override(doc, o);
    if (c.seed) doc["train"]["seed"] = *c.seed;
    return config_from_json(doc);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LoadError("cannot open '" + path + "' for writing");
    out << text;
}

void require_data(const TrainConfig& cfg) {
    if (cfg.feature_dir.empty() || cfg.annotation_file.empty())
        throw ValidationError("config: data.feature_dir and data.annotation_file are required");
}

Dataset load_split(const TrainConfig& cfg, const std::string& subset) {
    require_data(cfg);
    return load_dataset(cfg.feature_dir, cfg.annotation_file, 0, subset);
}

int cmd_synth(const std::string& spec_path, const std::string& out, std::optional<std::uint64_t> seed) {
    SyntheticSpec spec = spec_path.empty() ? SyntheticSpec{} : synthetic_spec_from_json(read_json_file(spec_path));
    if (seed) spec.seed = *seed;
    const SyntheticDataset data = generate_synthetic(spec);
    write_synthetic(data, out);
    std::cout << json{{"videos", data.annotations.videos.size()},
                      {"classes", data.annotations.num_classes()},
                      {"feature_dim", data.dataset.feature_dim()},
                      {"out", out}}
                     .dump()
              << '\n';
    return 0;
}

int cmd_train(const Common& c, const std::string& out) {
    TrainConfig cfg = resolve_config(c);
    if (!out.empty()) cfg.checkpoint_path = out;
    const Dataset train_set = load_split(cfg, cfg.train_subset);

    std::ofstream log_file;
    std::ostream* log = nullptr;
    if (!cfg.log_path.empty()) {
        log_file.open(cfg.log_path);
        if (!log_file) throw LoadError("cannot open log '" + cfg.log_path + "'");
        log = &log_file;
    }
    const json snapshot = config_to_json(cfg);
    auto on_epoch = [&](int epoch, const Network<float>& net, std::int64_t step) {
        if (cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 && epoch != cfg.epochs)
            save_checkpoint(cfg.checkpoint_path + ".epoch" + std::to_string(epoch), {net, step, snapshot});
    };
    const TrainResult r = train(cfg, train_set, log, on_epoch);
    const std::int64_t steps = r.steps.empty() ? 0 : r.steps.back().step;
    save_checkpoint(cfg.checkpoint_path, {r.network, steps, snapshot});
    std::cout << json{{"checkpoint", cfg.checkpoint_path},
                      {"steps", steps},
                      {"final_loss", r.epoch_loss.empty() ? 0.0 : r.epoch_loss.back().total}}
                     .dump()
              << '\n';
    return 0;
}

int cmd_infer(const Common& c, const std::string& ckpt_path, const std::string& out) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    TrainConfig cfg = resolve_config(c, ckpt.config);
    if (!out.empty()) cfg.detections_path = out;
    const Dataset test_set = load_split(cfg, cfg.test_subset);
    const DetectionMap dets = infer(ckpt.network, cfg.hyper, test_set, cfg.resample);
    write_text(cfg.detections_path, detections_to_json(dets, test_set.class_names).dump(2) + "\n");
    std::size_t n = 0;
    for (const auto& [vid, d] : dets) n += d.size();
    std::cout << json{{"detections", cfg.detections_path}, {"videos", dets.size()}, {"count", n}}.dump() << '\n';
    return 0;
}

int cmd_eval(const Common& c, const std::string& det_path, std::string ann_path, const std::string& out) {
    TrainConfig cfg = resolve_config(c);
    if (ann_path.empty()) ann_path = cfg.annotation_file;
    if (ann_path.empty()) throw ValidationError("eval: --annotations or data.annotation_file is required");
    if (!out.empty()) cfg.report_path = out;
    const Annotations ann = read_annotations(ann_path);
    const DetectionMap dets = detections_from_json(read_json_file(det_path), ann.class_names);
    const EvalReport report = evaluate(dets, ground_truth_of(ann, cfg.test_subset), ann.num_classes(), cfg.hyper.tiou_grid);
    write_text(cfg.report_path, report.to_json(ann.class_names).dump(2) + "\n");
    std::cout << report.to_table();
    return 0;
}

int cmd_ablate(const Common& c, const std::string& matrix_arg, const std::string& out) {
    const TrainConfig cfg = resolve_config(c);
    MatrixSpec matrix;
    if (matrix_arg.rfind("table", 0) == 0 && matrix_arg.find('.') == std::string::npos)
        matrix = matrix_preset(matrix_arg);
    else
        matrix = matrix_from_json(read_json_file(matrix_arg));
    Dataset train_set, test_set;
    if (!matrix.cells.empty()) {
        train_set = load_split(cfg, cfg.train_subset);
        test_set = load_split(cfg, cfg.test_subset);
    }
    const auto rows = run_ablation_matrix(cfg, matrix, train_set, test_set);
    if (!out.empty()) write_text(out, ablation_json(rows, test_set.class_names).dump(2) + "\n");
    std::cout << ablation_table(rows);
    return 0;
}

int cmd_plot(const Common& c, const std::string& ckpt_path, const std::string& video, const std::string& out) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const TrainConfig cfg = resolve_config(c, ckpt.config);
    const Dataset data = load_split(cfg, "");
    const auto idx = data.find(video);
    if (!idx) throw ValidationError("plot: unknown video id '" + video + "'");
    const Traces tr = collect_traces(ckpt.network, cfg.hyper, data.features[*idx].features, data.records[*idx],
                                     data.class_names, cfg.resample);
    write_traces_csv(out + ".csv", tr);
    write_traces_svg(out + ".svg", tr, video);
    std::cout << json{{"csv", out + ".csv"}, {"svg", out + ".svg"}, {"rows", tr.time_s.size()}}.dump() << '\n';
    return 0;
}

void print_error(const char* kind, const std::string& message) {
    std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Weakly-supervised temporal action localization"};
    app.require_subcommand(1);

    Common common;
    std::string spec, out, checkpoint, detections, annotations, matrix, video;

    auto* synth = app.add_subcommand("synth", "generate a synthetic benchmark");
    synth->add_option("--spec", spec, "synthetic spec JSON");
    synth->add_option("--out", out, "output directory")->required();
    synth->add_option("--seed", common.seed, "overrides the seed given in --spec");

    auto* train_cmd = app.add_subcommand("train", "train and write a checkpoint");
    add_common(train_cmd, common);
    train_cmd->add_option("--out", out, "checkpoint path (overrides output.checkpoint)");

    auto* infer_cmd = app.add_subcommand("infer", "write detections for the test subset");
    add_common(infer_cmd, common);
    infer_cmd->add_option("--checkpoint", checkpoint)->required();
    infer_cmd->add_option("--out", out, "detections path (overrides output.detections)");

    auto* eval_cmd = app.add_subcommand("eval", "score detections against annotations");
    add_common(eval_cmd, common);
    eval_cmd->add_option("--detections", detections)->required();
    eval_cmd->add_option("--annotations", annotations);
    eval_cmd->add_option("--out", out, "report path (overrides output.report)");

    auto* ablate_cmd = app.add_subcommand("ablate", "train and evaluate every cell of a matrix");
    add_common(ablate_cmd, common);
    ablate_cmd->add_option("--matrix", matrix, "matrix JSON or preset table3|table4|table5|table6")->required();
    ablate_cmd->add_option("--out", out, "JSON table path");

    auto* plot_cmd = app.add_subcommand("plot", "export CAS and attention traces of one video");
    add_common(plot_cmd, common);
    plot_cmd->add_option("--checkpoint", checkpoint)->required();
    plot_cmd->add_option("--video", video)->required();
    plot_cmd->add_option("--out", out, "output prefix (.csv and .svg are appended)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("usage", e.what());
        return 2;
    }

    try {
        if (*synth) return cmd_synth(spec, out, common.seed);
        if (*train_cmd) return cmd_train(common, out);
        if (*infer_cmd) return cmd_infer(common, checkpoint, out);
        if (*eval_cmd) return cmd_eval(common, detections, annotations, out);
        if (*ablate_cmd) return cmd_ablate(common, matrix, out);
        if (*plot_cmd) return cmd_plot(common, checkpoint, video, out);
    } catch (const Error& e) {
        print_error(e.kind(), e.what());
        return 1;
    } catch (const std::exception& e) {
        print_error("internal", e.what());
        return 1;
    }
    return 1;
}
