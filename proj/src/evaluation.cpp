#include "acmloc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace acmloc {

using nlohmann::json;

namespace {

struct PooledDetection {
    const std::string* video_id;
    Proposal det;
};

// Index of the unmatched ground truth with the highest t-IoU >= tau, or -1.
int best_unmatched(const Proposal& det, const std::vector<ActionInstance>& gts, const std::vector<bool>& used,
                   double tau) {
    int best = -1;
    double best_iou = -1.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
        if (used[g] || gts[g].class_id != det.class_id) continue;
        const double iou = temporal_iou(det.segment(), gts[g].segment());
        if (iou >= tau && iou > best_iou) {
            best_iou = iou;
            best = static_cast<int>(g);
        }
    }
    return best;
}

bool rank_before(const Proposal& a, const Proposal& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.start_s < b.start_s;
}

std::string fmt(double v, const char* spec) {
    char buf[32];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

}  // namespace

std::vector<MatchResult> match_detections(std::vector<Proposal> detections, const std::vector<ActionInstance>& gts,
                                          double tau) {
    std::stable_sort(detections.begin(), detections.end(), rank_before);
    std::vector<bool> used(gts.size(), false);
    std::vector<MatchResult> out;
    out.reserve(detections.size());
    for (const auto& det : detections) {
        const int g = best_unmatched(det, gts, used, tau);
        if (g >= 0) used[g] = true;
        out.push_back({det, g >= 0});
    }
    return out;
}

double average_precision(const std::vector<bool>& ranked_tp, int num_gt) {
    if (num_gt <= 0) return 0.0;
    double sum = 0.0;
    int tp = 0;
    for (std::size_t i = 0; i < ranked_tp.size(); ++i) {
        if (!ranked_tp[i]) continue;
        ++tp;
        sum += static_cast<double>(tp) / static_cast<double>(i + 1);
    }
    return sum / num_gt;
}

double EvalReport::map_at_tiou(double tau) const {
    for (std::size_t i = 0; i < tiou_grid.size(); ++i)
        if (std::abs(tiou_grid[i] - tau) < 1e-9) return map_at[i];
    throw ValidationError("t-IoU " + std::to_string(tau) + " is not on the evaluation grid");
}

double EvalReport::average_between(double lo, double hi) const {
    double sum = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < tiou_grid.size(); ++i) {
        if (tiou_grid[i] >= lo - 1e-9 && tiou_grid[i] <= hi + 1e-9) {
            sum += map_at[i];
            ++n;
        }
    }
    return n ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

json EvalReport::to_json(const std::vector<std::string>& class_names) const {
    json ap_obj = json::object();
    json counts = json::object();
    for (std::size_t c = 0; c < ap.size(); ++c) {
        const std::string name = c < class_names.size() ? class_names[c] : std::to_string(c);
        ap_obj[name] = ap[c];
        counts[name] = gt_counts[c];
    }
    return {{"tiou", tiou_grid}, {"map", map_at}, {"avg_map", avg_map}, {"ap", ap_obj}, {"gt_counts", counts}};
}

namespace {

struct Column {
    std::string title;
    double value;
};

std::vector<Column> table_columns(const EvalReport& r) {
    std::vector<Column> cols;
    for (std::size_t i = 0; i < r.tiou_grid.size(); ++i) cols.push_back({fmt(r.tiou_grid[i], "%.2f"), r.map_at[i]});
    auto has = [&](double tau) {
        return std::any_of(r.tiou_grid.begin(), r.tiou_grid.end(), [&](double g) { return std::abs(g - tau) < 1e-9; });
    };
    if (has(0.1) && has(0.5)) cols.push_back({"Avg[0.1-0.5]", r.average_between(0.1, 0.5)});
    if (has(0.3) && has(0.7)) cols.push_back({"Avg[0.3-0.7]", r.average_between(0.3, 0.7)});
    cols.push_back({"Avg", r.avg_map});
    return cols;
}

std::string pad(const std::string& s, std::size_t width) { return s.size() >= width ? s : std::string(width - s.size(), ' ') + s; }

}  // namespace

std::string EvalReport::table_header() const {
    std::string line = pad("", 16);
    for (const auto& col : table_columns(*this)) line += " " + pad(col.title, std::max<std::size_t>(6, col.title.size()));
    return line;
}

std::string EvalReport::table_row(const std::string& row_label) const {
    std::string line = row_label.size() > 16 ? row_label.substr(0, 16) : row_label + std::string(16 - row_label.size(), ' ');
    for (const auto& col : table_columns(*this))
        line += " " + pad(fmt(100.0 * col.value, "%.1f"), std::max<std::size_t>(6, col.title.size()));
    return line;
}

std::string EvalReport::to_table(const std::string& row_label) const {
    return "mAP@t-IoU(%)\n" + table_header() + "\n" + table_row(row_label) + "\n";
}

EvalReport evaluate(const DetectionMap& detections, const GroundTruthMap& ground_truth, int num_classes,
                    const std::vector<double>& tiou_grid) {
    EvalReport report;
    report.tiou_grid = tiou_grid;
    report.gt_counts.assign(num_classes, 0);
    report.ap.assign(num_classes, std::vector<double>(tiou_grid.size(), 0.0));
    report.map_at.assign(tiou_grid.size(), 0.0);

    for (const auto& [vid, gts] : ground_truth)
        for (const auto& g : gts) {
            if (g.class_id < 0 || g.class_id >= num_classes) throw ValidationError("ground truth class out of range in '" + vid + "'");
            ++report.gt_counts[g.class_id];
        }

    // Pool per class, ranked across videos.
    std::vector<std::vector<PooledDetection>> pooled(num_classes);
    for (const auto& [vid, dets] : detections) {
        for (const auto& d : dets) {
            if (d.class_id < 0 || d.class_id >= num_classes)
                throw ValidationError("detection class id out of range in video '" + vid + "'");
            pooled[d.class_id].push_back({&vid, d});
        }
    }
    for (auto& list : pooled) {
        std::stable_sort(list.begin(), list.end(), [](const PooledDetection& a, const PooledDetection& b) {
            if (a.det.confidence != b.det.confidence) return a.det.confidence > b.det.confidence;
            if (a.det.start_s != b.det.start_s) return a.det.start_s < b.det.start_s;
            return *a.video_id < *b.video_id;
        });
    }

    static const std::vector<ActionInstance> kNone;
    for (std::size_t ti = 0; ti < tiou_grid.size(); ++ti) {
        const double tau = tiou_grid[ti];
        double sum = 0.0;
        int scored = 0;
        for (int c = 0; c < num_classes; ++c) {
            std::map<std::string, std::vector<bool>> used;
            std::vector<bool> ranked;
            ranked.reserve(pooled[c].size());
            for (const auto& pd : pooled[c]) {
                auto it = ground_truth.find(*pd.video_id);
                const auto& gts = it == ground_truth.end() ? kNone : it->second;
                auto& u = used.try_emplace(*pd.video_id, gts.size(), false).first->second;
                const int g = best_unmatched(pd.det, gts, u, tau);
                if (g >= 0) u[g] = true;
                ranked.push_back(g >= 0);
            }
            report.ap[c][ti] = average_precision(ranked, report.gt_counts[c]);
            // A class with no ground truth counts (as 0) only when it was predicted.
            if (report.gt_counts[c] > 0 || !pooled[c].empty()) {
                sum += report.ap[c][ti];
                ++scored;
            }
        }
        report.map_at[ti] = scored ? sum / scored : 0.0;
    }
    double total = 0.0;
    for (double m : report.map_at) total += m;
    report.avg_map = report.map_at.empty() ? 0.0 : total / static_cast<double>(report.map_at.size());
    return report;
}

GroundTruthMap ground_truth_of(const Annotations& ann, const std::string& subset) {
    GroundTruthMap out;
    for (const auto& rec : ann.videos)
        if (subset.empty() || rec.subset == subset) out[rec.video_id] = rec.instances;
    return out;
}

}  // namespace acmloc
