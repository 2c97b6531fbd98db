#pragma once
// End-to-end inference, single experiments, and ablation matrices.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "acmloc/config.hpp"
#include "acmloc/evaluation.hpp"
#include "acmloc/trainer.hpp"

namespace acmloc {

struct VideoInference {
    BranchActivations<float> acts;
    std::vector<double> p_ins;   // video-level instance-branch probabilities, C+1
    std::vector<int> classes;    // predicted action classes
    std::vector<Proposal> detections;
};

// classify_video -> generate_proposals -> nms on one video, eval mode.
VideoInference infer_video(const Network<float>& net, const HyperParams& hp, const MatF& native_features,
                           const VideoRecord& record, ResampleMode resample = ResampleMode::linear);

DetectionMap infer(const Network<float>& net, const HyperParams& hp, const Dataset& dataset,
                   ResampleMode resample = ResampleMode::linear);

GroundTruthMap ground_truth_of(const Dataset& dataset);

struct ExperimentResult {
    TrainResult training;
    DetectionMap detections;
    EvalReport report;
};

ExperimentResult run_experiment(const TrainConfig& cfg, const Dataset& train_set, const Dataset& test_set,
                                 std::ostream* log = nullptr);

struct AblationCell {
    std::string name;
    LossFlags flags;
    std::optional<int> T;
};

struct MatrixSpec {
    std::vector<AblationCell> cells;
};

// {"cells": [{"name": "Exp 1", "losses": {...}, "T": 250}, ...]} or
// {"preset": "table3" | "table4" | "table5" | "table6"}.
MatrixSpec matrix_from_json(const nlohmann::json& doc);
MatrixSpec matrix_preset(const std::string& name);

struct AblationRow {
    std::string name;
    EvalReport report;
};

std::vector<AblationRow> run_ablation_matrix(const TrainConfig& base, const MatrixSpec& matrix,
                                             const Dataset& train_set, const Dataset& test_set);

std::string ablation_table(const std::vector<AblationRow>& rows);
nlohmann::json ablation_json(const std::vector<AblationRow>& rows, const std::vector<std::string>& class_names);

}  // namespace acmloc
