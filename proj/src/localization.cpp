#include "acmloc/localization.hpp"

#include <algorithm>
#include <cmath>

namespace acmloc {

using nlohmann::json;

std::vector<int> classify_video(std::span<const double> p_ins, int num_classes, double threshold) {
    if (static_cast<int>(p_ins.size()) < num_classes) throw ValidationError("classify_video: probability vector too short");
    std::vector<int> out;
    int best = 0;
    for (int c = 0; c < num_classes; ++c) {
        if (p_ins[c] >= threshold) out.push_back(c);
        if (p_ins[c] > p_ins[best]) best = c;
    }
    if (out.empty()) out.push_back(best);
    return out;
}

MatD fused_signal(const MatD& cas_ins, const Vec<double>& att_ins, double alpha) {
    if (att_ins.size() != cas_ins.rows()) throw ValidationError("fused_signal: attention length does not match CAS");
    MatD v = (1.0 - alpha) * cas_ins;
    v.colwise() += alpha * att_ins;
    return v;
}

std::vector<std::pair<int, int>> extract_segments(std::span<const double> signal, double theta) {
    std::vector<std::pair<int, int>> runs;
    const int T = static_cast<int>(signal.size());
    if (T == 0) return runs;
    const auto [lo_it, hi_it] = std::minmax_element(signal.begin(), signal.end());
    const double lo = *lo_it;
    const double range = *hi_it - lo;
    auto above = [&](int t) {
        const double norm = range > 0 ? (signal[t] - lo) / range : 0.0;
        return norm >= theta;
    };
    int start = -1;
    for (int t = 0; t < T; ++t) {
        if (above(t)) {
            if (start < 0) start = t;
        } else if (start >= 0) {
            runs.emplace_back(start, t);
            start = -1;
        }
    }
    if (start >= 0) runs.emplace_back(start, T);
    return runs;
}

double oic_score(std::span<const double> v, int start, int end) {
    const int T = static_cast<int>(v.size());
    if (start < 0 || end > T || end <= start) throw ValidationError("oic_score: segment must satisfy 0 <= start < end <= T");
    double inner = 0.0;
    for (int t = start; t < end; ++t) inner += v[t];
    inner /= (end - start);

    const double flank = std::max(1.0, (end - start) / 5.0);
    double outer = 0.0;
    int n = 0;
    for (int i = start - 1; i >= 0 && i + 0.5 >= start - flank; --i) {
        outer += v[i];
        ++n;
    }
    for (int i = end; i < T && i + 0.5 < end + flank; ++i) {
        outer += v[i];
        ++n;
    }
    return n > 0 ? inner - outer / n : inner;
}

std::vector<Proposal> generate_proposals(const MatD& cas_ins, const Vec<double>& att_ins, const HyperParams& hp,
                                         const std::vector<int>& classes, const TimeMap& time_map) {
    const MatD v = fused_signal(cas_ins, att_ins, hp.alpha);
    std::vector<Proposal> out;
    for (double theta : hp.proposal_thresholds) {
        for (int c : classes) {
            if (c < 0 || c >= v.cols() - 1) throw ValidationError("generate_proposals: class id out of range");
            // Row-major columns are strided; copy into a contiguous vector.
            const Vec<double> col = v.col(c);
            const std::span<const double> signal(col.data(), static_cast<std::size_t>(col.size()));
            for (const auto& [s, e] : extract_segments(signal, theta)) {
                const Segment sec = time_map.to_seconds(s, e);
                if (!(sec.end > sec.start)) continue;
                out.push_back({sec.start, sec.end, c, oic_score(signal, s, e)});
            }
        }
    }
    return out;
}

std::vector<Proposal> nms(std::vector<Proposal> proposals, double iou_threshold) {
    auto order = [](const Proposal& a, const Proposal& b) {
        if (a.confidence != b.confidence) return a.confidence > b.confidence;
        if (a.start_s != b.start_s) return a.start_s < b.start_s;
        if (a.class_id != b.class_id) return a.class_id < b.class_id;
        return a.end_s < b.end_s;
    };
    std::stable_sort(proposals.begin(), proposals.end(), order);
    std::vector<Proposal> kept;
    std::vector<bool> removed(proposals.size(), false);
    for (std::size_t i = 0; i < proposals.size(); ++i) {
        if (removed[i]) continue;
        kept.push_back(proposals[i]);
        for (std::size_t j = i + 1; j < proposals.size(); ++j) {
            if (removed[j] || proposals[j].class_id != proposals[i].class_id) continue;
            if (temporal_iou(proposals[i].segment(), proposals[j].segment()) > iou_threshold) removed[j] = true;
        }
    }
    return kept;
}

json detections_to_json(const DetectionMap& dets, const std::vector<std::string>& class_names) {
    json doc = json::object();
    for (const auto& [vid, props] : dets) {
        json list = json::array();
        for (const auto& p : props)
            list.push_back({{"start_s", p.start_s}, {"end_s", p.end_s}, {"label", class_names.at(p.class_id)},
                            {"score", p.confidence}});
        doc[vid] = std::move(list);
    }
    return doc;
}

DetectionMap detections_from_json(const json& doc, const std::vector<std::string>& class_names) {
    if (!doc.is_object()) throw ParseError("detections: expected an object keyed by video id");
    DetectionMap out;
    for (const auto& [vid, list] : doc.items()) {
        if (!list.is_array()) throw ParseError("detections: entry for '" + vid + "' is not a list");
        auto& props = out[vid];
        for (const auto& item : list) {
            try {
                const auto name = item.at("label").get<std::string>();
                auto it = std::find(class_names.begin(), class_names.end(), name);
                if (it == class_names.end())
                    throw ValidationError("detections: unknown class name '" + name + "' in video '" + vid + "'");
                Proposal p{item.at("start_s").get<double>(), item.at("end_s").get<double>(),
                           static_cast<int>(it - class_names.begin()), item.at("score").get<double>()};
                if (!(p.end_s > p.start_s)) throw ValidationError("detections: end <= start in video '" + vid + "'");
                props.push_back(p);
            } catch (const json::exception& e) {
                throw ParseError("detections: malformed entry in '" + vid + "': " + e.what());
            }
        }
    }
    return out;
}

}  // namespace acmloc
