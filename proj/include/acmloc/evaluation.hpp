#pragma once
// Detection mAP at a grid of t-IoU thresholds.
//
// Matching: detections of one class are pooled across videos and ranked by
// confidence (ties: earlier start, then video id). Each detection claims the
// unmatched ground truth of its video with the highest t-IoU if that t-IoU is
// at least tau; otherwise it is a false positive. AP is the non-interpolated
// sum of precision at every true positive divided by the ground-truth count.
// A class without ground truth scores 0; it enters the mean only when it has
// detections.

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "acmloc/core.hpp"
#include "acmloc/localization.hpp"

namespace acmloc {

struct MatchResult {
    Proposal detection;
    bool true_positive = false;
};

// Single video, single class.
std::vector<MatchResult> match_detections(std::vector<Proposal> detections, const std::vector<ActionInstance>& gts,
                                          double tau);

// ranked_tp lists true/false-positive flags in rank order.
double average_precision(const std::vector<bool>& ranked_tp, int num_gt);

using GroundTruthMap = std::map<std::string, std::vector<ActionInstance>>;

struct EvalReport {
    std::vector<double> tiou_grid;
    std::vector<std::vector<double>> ap;  // [class][tiou index]
    std::vector<double> map_at;           // per tiou index
    double avg_map = 0.0;
    std::vector<int> gt_counts;           // per class

    double map_at_tiou(double tau) const;
    // Mean of map_at over grid entries inside [lo, hi]; NaN when none.
    double average_between(double lo, double hi) const;

    nlohmann::json to_json(const std::vector<std::string>& class_names) const;
    // Aligned text table: one column per threshold, then the range averages
    // that the grid supports, then the overall average.
    std::string to_table(const std::string& row_label = "model") const;
    std::string table_header() const;
    std::string table_row(const std::string& row_label) const;
};

EvalReport evaluate(const DetectionMap& detections, const GroundTruthMap& ground_truth, int num_classes,
                    const std::vector<double>& tiou_grid);

GroundTruthMap ground_truth_of(const Annotations& ann, const std::string& subset = "");

}  // namespace acmloc
