#pragma once
// Training/inference configuration as a single JSON document.
//
//   {
//     "profile": "thumos" | "activitynet",
//     "hyper":   { "T": 750, "C": 20, "r_ins": 8, ... },
//     "arch":    { "embed_kernel": 3, "hidden_kernel": 3, "hidden_width": 0, "dropout": 0.5, "padding": "zero" },
//     "losses":  { "cls_ins": true, "cls_con": true, "cls_bak": true, "guide": true, "feat": true, "sparse": true },
//     "train":   { "batch_size": 16, "learning_rate": 1e-4, "weight_decay": 5e-4, "epochs": 200, "seed": 0,
//                  "resample": "linear", "init": "fan_in_uniform", "checkpoint_every": 0 },
//     "data":    { "feature_dir": "...", "annotation_file": "...", "train_subset": "train", "test_subset": "test" },
//     "output":  { "checkpoint": "...", "log": "...", "detections": "...", "report": "..." }
//   }
//
// The profile supplies every default; the other sections override fields.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "acmloc/core.hpp"
#include "acmloc/data.hpp"
#include "acmloc/network.hpp"

namespace acmloc {

struct TrainConfig {
    std::string profile = "thumos";
    HyperParams hyper = HyperParams::thumos();
    ArchConfig arch;
    LossFlags flags;

    int batch_size = 16;
    double learning_rate = 1e-4;
    double weight_decay = 5e-4;
    int epochs = 200;
    std::uint64_t seed = 0;
    ResampleMode resample = ResampleMode::linear;
    InitScheme init = InitScheme::fan_in_uniform;
    int checkpoint_every = 0;  // epochs; 0 writes only the final checkpoint

    std::string feature_dir;
    std::string annotation_file;
    std::string train_subset = "train";
    std::string test_subset = "test";

    std::string checkpoint_path = "checkpoint.acmc";
    std::string log_path;
    std::string detections_path = "detections.json";
    std::string report_path = "report.json";

    void validate() const;

    static TrainConfig for_profile(const std::string& profile);
};

TrainConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const TrainConfig& cfg);

// Applies "a.b.c=value" to the document. The value is parsed as JSON when it
// parses, otherwise taken as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

nlohmann::json read_json_file(const std::filesystem::path& path);

// Reads the file (or starts from an empty document), applies overrides in
// order, then builds the config.
TrainConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides);

}  // namespace acmloc
