#include "acmloc/pipeline.hpp"

#include <map>

namespace acmloc {

using nlohmann::json;

VideoInference infer_video(const Network<float>& net, const HyperParams& hp, const MatF& native_features,
                           const VideoRecord& record, ResampleMode resample) {
    const MatF input = resample_to_T(native_features, hp.T, resample);
    VideoInference out;
    out.acts = net.forward(input);
    const RowVec<float> scores = topk_aggregate<float>(out.acts.cas_ins, hp.k_ins());
    const RowVec<double> p = video_probs<double>(scores.cast<double>());
    out.p_ins.assign(p.data(), p.data() + p.size());
    out.classes = classify_video(out.p_ins, net.num_classes(), hp.class_threshold);
    const TimeMap tm = time_map_for(record, static_cast<int>(native_features.rows()), hp.T);
    out.detections = nms(generate_proposals(out.acts, hp, out.classes, tm), hp.nms_iou);
    return out;
}

DetectionMap infer(const Network<float>& net, const HyperParams& hp, const Dataset& dataset, ResampleMode resample) {
    if (dataset.size() && dataset.feature_dim() != net.feature_dim())
        throw LoadError("checkpoint expects " + std::to_string(net.feature_dim()) + " feature channels, dataset has " +
                        std::to_string(dataset.feature_dim()));
    if (dataset.num_classes() != net.num_classes())
        throw LoadError("checkpoint has " + std::to_string(net.num_classes()) + " classes, dataset has " +
                        std::to_string(dataset.num_classes()));
    DetectionMap out;
    for (std::size_t i = 0; i < dataset.size(); ++i)
        out[dataset.records[i].video_id] =
            infer_video(net, hp, dataset.features[i].features, dataset.records[i], resample).detections;
    return out;
}

GroundTruthMap ground_truth_of(const Dataset& dataset) {
    GroundTruthMap out;
    for (const auto& rec : dataset.records) out[rec.video_id] = rec.instances;
    return out;
}

ExperimentResult run_experiment(const TrainConfig& cfg, const Dataset& train_set, const Dataset& test_set,
                                std::ostream* log) {
    ExperimentResult r;
    r.training = train(cfg, train_set, log);
    r.detections = infer(r.training.network, cfg.hyper, test_set, cfg.resample);
    r.report = evaluate(r.detections, ground_truth_of(test_set), cfg.hyper.C, cfg.hyper.tiou_grid);
    return r;
}

namespace {

LossFlags flags_of(bool ins, bool con, bool bak, bool guide, bool feat, bool sparse) {
    return {ins, con, bak, guide, feat, sparse};
}

LossFlags flags_from_json(const json& j) {
    LossFlags f;
    auto get = [&](const char* key, bool& dst) {
        if (j.contains(key)) dst = j.at(key).get<bool>();
    };
    get("cls_ins", f.cls_ins);
    get("cls_con", f.cls_con);
    get("cls_bak", f.cls_bak);
    get("guide", f.guide);
    get("feat", f.feat);
    get("sparse", f.sparse);
    return f;
}

}  // namespace

MatrixSpec matrix_preset(const std::string& name) {
    MatrixSpec m;
    if (name == "table3") {
        // Classification-branch ablation; additional losses only in the last row.
        m.cells = {{"Exp 1", flags_of(true, false, false, false, false, false), {}},
                   {"Exp 2", flags_of(true, false, true, false, false, false), {}},
                   {"Exp 3", flags_of(true, true, false, false, false, false), {}},
                   {"Exp 4", flags_of(true, true, true, false, false, false), {}},
                   {"Exp 5", flags_of(true, true, true, true, true, true), {}}};
    } else if (name == "table4") {
        m.cells = {{"Exp 1", flags_of(true, false, false, false, false, false), {}},
                   {"Exp 2", flags_of(true, true, false, false, false, false), {}},
                   {"Exp 3", flags_of(true, true, true, false, false, false), {}},
                   {"Exp 4", flags_of(true, true, true, true, true, true), {}}};
    } else if (name == "table5") {
        m.cells = {{"Exp 1", flags_of(true, true, true, false, false, false), {}},
                   {"Exp 2", flags_of(true, true, true, true, false, false), {}},
                   {"Exp 3", flags_of(true, true, true, false, true, false), {}},
                   {"Exp 4", flags_of(true, true, true, false, false, true), {}},
                   {"Exp 5", flags_of(true, true, true, true, true, false), {}},
                   {"Exp 6", flags_of(true, true, true, true, true, true), {}}};
    } else if (name == "table6") {
        int i = 1;
        for (int T : {250, 500, 750, 900, 1000})
            m.cells.push_back({"Exp " + std::to_string(i++) + " T=" + std::to_string(T), LossFlags{}, T});
    } else {
        throw ValidationError("unknown ablation preset '" + name + "'");
    }
    return m;
}

MatrixSpec matrix_from_json(const json& doc) {
    try {
        if (doc.contains("preset")) return matrix_preset(doc.at("preset").get<std::string>());
        MatrixSpec m;
        if (!doc.contains("cells")) return m;
        for (const auto& c : doc.at("cells")) {
            AblationCell cell;
            cell.name = c.value("name", "Exp " + std::to_string(m.cells.size() + 1));
            if (c.contains("losses")) cell.flags = flags_from_json(c.at("losses"));
            if (c.contains("T")) cell.T = c.at("T").get<int>();
            m.cells.push_back(std::move(cell));
        }
        return m;
    } catch (const json::exception& e) {
        throw ParseError(std::string("ablation matrix: ") + e.what());
    }
}

std::vector<AblationRow> run_ablation_matrix(const TrainConfig& base, const MatrixSpec& matrix,
                                             const Dataset& train_set, const Dataset& test_set) {
    std::vector<AblationRow> rows;
    for (const auto& cell : matrix.cells) {
        TrainConfig cfg = base;
        cfg.flags = cell.flags;
        if (cell.T) cfg.hyper.T = *cell.T;
        rows.push_back({cell.name, run_experiment(cfg, train_set, test_set).report});
    }
    return rows;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
    if (rows.empty()) return "(empty ablation matrix)\n";
    std::string out = "mAP@t-IoU(%)\n" + rows.front().report.table_header() + "\n";
    for (const auto& r : rows) out += r.report.table_row(r.name) + "\n";
    return out;
}

json ablation_json(const std::vector<AblationRow>& rows, const std::vector<std::string>& class_names) {
    json out = json::array();
    for (const auto& r : rows) out.push_back({{"name", r.name}, {"report", r.report.to_json(class_names)}});
    return out;
}

}  // namespace acmloc
