#pragma once
// CAS / attention trace export: one CSV and one SVG per video.

#include <filesystem>
#include <string>
#include <vector>

#include "acmloc/pipeline.hpp"

namespace acmloc {

struct TraceSeries {
    std::string name;
    std::vector<double> values;  // length T
};

struct Traces {
    std::vector<double> time_s;  // snippet centers on the resampled grid
    std::vector<TraceSeries> series;
    std::vector<ActionInstance> ground_truth;
    double duration_s = 0.0;
};

// Series: raw CAS of every ground-truth class (predicted classes when the
// video has none), att_ins, and CAS_ins of the same classes.
Traces collect_traces(const Network<float>& net, const HyperParams& hp, const MatF& native_features,
                      const VideoRecord& record, const std::vector<std::string>& class_names,
                      ResampleMode resample = ResampleMode::linear);

// CSV: header "time_s,<series...>" then T rows.
void write_traces_csv(const std::filesystem::path& path, const Traces& traces);
// Three stacked panels (raw CAS, att_ins, CAS_ins) with ground truth shaded.
void write_traces_svg(const std::filesystem::path& path, const Traces& traces, const std::string& title);

}  // namespace acmloc
