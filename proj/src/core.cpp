#include "acmloc/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace acmloc {

bool VideoLabel::contains(int c) const {
    return std::binary_search(class_ids.begin(), class_ids.end(), c);
}

void VideoLabel::validate(bool require_nonempty) const {
    if (num_classes < 1) {
        throw ValidationError("video label: num_classes must be >= 1");
    }
    if (require_nonempty && class_ids.empty()) {
        throw ValidationError("video label: empty class set");
    }
    for (int c : class_ids) {
        if (c < 0 || c >= num_classes) {
            std::ostringstream msg;
            msg << "video label: class id " << c << " outside [0, " << num_classes << ")";
            throw ValidationError(msg.str());
        }
    }
}

VideoLabel make_label(std::vector<int> class_ids, int num_classes) {
    std::sort(class_ids.begin(), class_ids.end());
    class_ids.erase(std::unique(class_ids.begin(), class_ids.end()), class_ids.end());
    VideoLabel label{std::move(class_ids), num_classes};
    label.validate(false);
    return label;
}

int HyperParams::k_ins() const { return topk_count(T, r_ins); }
int HyperParams::k_con() const { return topk_count(T, r_con); }
int HyperParams::k_bak() const { return topk_count(T, r_bak); }

void HyperParams::validate() const {
    auto fail = [](const std::string& what) { throw ValidationError("hyperparameters: " + what); };
    if (T < 1) fail("T must be >= 1");
    if (C < 1) fail("C must be >= 1");
    if (r_ins < 1 || r_con < 1 || r_bak < 1) fail("top-k divisors must be >= 1");
    if (lambda_guide < 0 || lambda_feat < 0 || lambda_sparse < 0) fail("loss weights must be >= 0");
    if (!(margin > 0)) fail("margin must be > 0");
    if (!(alpha >= 0 && alpha <= 1)) fail("alpha must lie in [0, 1]");
    if (!(class_threshold > 0 && class_threshold < 1)) fail("class threshold must lie in (0, 1)");
    if (proposal_thresholds.empty()) fail("proposal threshold list is empty");
    if (!std::is_sorted(proposal_thresholds.begin(), proposal_thresholds.end()))
        fail("proposal thresholds must be ascending");
    if (!(nms_iou > 0 && nms_iou < 1)) fail("NMS IoU must lie in (0, 1)");
    if (!std::is_sorted(tiou_grid.begin(), tiou_grid.end())) fail("t-IoU grid must be ascending");
}

HyperParams HyperParams::thumos() {
    HyperParams hp;
    hp.T = 750;
    hp.C = 20;
    hp.r_ins = 8;
    hp.r_con = 3;
    hp.r_bak = 3;
    hp.lambda_guide = 2e-3;
    hp.lambda_feat = 5e-5;
    hp.lambda_sparse = 2e-4;
    hp.alpha = 0.0;
    hp.proposal_thresholds = arange_inclusive(0.15, 0.25, 0.05);
    hp.nms_iou = 0.5;
    hp.tiou_grid = arange_inclusive(0.1, 0.7, 0.1);
    return hp;
}

HyperParams HyperParams::activitynet() {
    HyperParams hp;
    hp.T = 75;
    hp.C = 200;
    hp.r_ins = 2;
    hp.r_con = 10;
    hp.r_bak = 10;
    hp.lambda_guide = 5e-3;
    hp.lambda_feat = 1e-5;
    hp.lambda_sparse = 0.0;
    hp.alpha = 0.5;
    hp.proposal_thresholds = arange_inclusive(0.01, 0.02, 0.005);
    hp.nms_iou = 0.9;
    hp.tiou_grid = arange_inclusive(0.5, 0.95, 0.05);
    return hp;
}

std::vector<double> arange_inclusive(double start, double stop, double step) {
    if (!(step > 0)) throw ValidationError("arange: step must be > 0");
    std::vector<double> out;
    const auto n = static_cast<long>(std::floor((stop - start) / step + 1e-9));
    for (long i = 0; i <= n; ++i) {
        // Round to 12 decimals so 0.1 * 3 prints and compares as 0.3.
        const double v = start + static_cast<double>(i) * step;
        out.push_back(std::round(v * 1e12) / 1e12);
    }
    return out;
}

double temporal_iou(const Segment& a, const Segment& b) {
    if (!(a.end > a.start) || !(b.end > b.start)) {
        std::ostringstream msg;
        msg << "temporal_iou: degenerate segment [" << a.start << ", " << a.end << "] or [" << b.start
            << ", " << b.end << "]";
        throw ValidationError(msg.str());
    }
    const double inter = std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
    const double uni = (a.end - a.start) + (b.end - b.start) - inter;
    return inter / uni;
}

int topk_count(int T, int r) { return std::max(1, T / r); }

double snippet_seconds(double fps, int snippet_frames) {
    if (!(fps > 0) || snippet_frames < 1) throw ValidationError("snippet_seconds: fps and frames must be positive");
    return static_cast<double>(snippet_frames) / fps;
}

}  // namespace acmloc
