#pragma once
// Inference-time localization: video classification, multi-threshold segment
// extraction, Outer-Inner-Contrast scoring, and class-wise NMS.

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "acmloc/core.hpp"
#include "acmloc/data.hpp"
#include "acmloc/network.hpp"

namespace acmloc {

// Action classes whose probability clears the threshold; when none does, the
// single most probable action class (lowest index on ties).
std::vector<int> classify_video(std::span<const double> p_ins, int num_classes, double threshold);

// v = (1 - alpha) * CAS_ins + alpha * att_ins, attention broadcast over classes.
MatD fused_signal(const MatD& cas_ins, const Vec<double>& att_ins, double alpha);

// Runs of the min-max normalized signal at or above theta, as [first, last+1).
std::vector<std::pair<int, int>> extract_segments(std::span<const double> signal, double theta);

// Inner mean over [start, end) minus the mean over the flanking windows of
// length max(1, (end - start) / 5) on either side. A flank sample i belongs to
// a window when its center i + 0.5 falls inside it; samples outside [0, T)
// are dropped and with no flank samples at all the outer term is zero.
double oic_score(std::span<const double> v, int start, int end);

std::vector<Proposal> generate_proposals(const MatD& cas_ins, const Vec<double>& att_ins, const HyperParams& hp,
                                         const std::vector<int>& classes, const TimeMap& time_map);

template <class S>
std::vector<Proposal> generate_proposals(const BranchActivations<S>& acts, const HyperParams& hp,
                                         const std::vector<int>& classes, const TimeMap& time_map) {
    return generate_proposals(acts.cas_ins.template cast<double>(), acts.att.col(kIns).template cast<double>(), hp,
                              classes, time_map);
}

// Greedy per-class NMS; output sorted by confidence descending (ties: earlier
// start, then class id).
std::vector<Proposal> nms(std::vector<Proposal> proposals, double iou_threshold);

using DetectionMap = std::map<std::string, std::vector<Proposal>>;

nlohmann::json detections_to_json(const DetectionMap& dets, const std::vector<std::string>& class_names);
DetectionMap detections_from_json(const nlohmann::json& doc, const std::vector<std::string>& class_names);

}  // namespace acmloc
