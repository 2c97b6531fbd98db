#pragma once
// Domain types and geometric primitives shared by every other module.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace acmloc {

// Error hierarchy. Every failure surfaced by the library derives from Error so
// the CLI can report a single machine-readable line.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "error"; }
};

class ValidationError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "validation"; }
};

class LoadError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "load"; }
};

class ParseError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "parse"; }
};

class TrainingError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "training"; }
};

// Closed time interval in seconds (or snippet units, the math is the same).
struct Segment {
    double start = 0.0;
    double end = 0.0;

    double length() const { return end - start; }
};

struct ActionInstance {
    double start_s = 0.0;
    double end_s = 0.0;
    int class_id = 0;

    Segment segment() const { return {start_s, end_s}; }
};

struct VideoLabel {
    std::vector<int> class_ids;  // sorted, unique
    int num_classes = 0;

    bool contains(int c) const;
    void validate(bool require_nonempty) const;
};

VideoLabel make_label(std::vector<int> class_ids, int num_classes);

struct Proposal {
    double start_s = 0.0;
    double end_s = 0.0;
    int class_id = 0;
    double confidence = 0.0;

    Segment segment() const { return {start_s, end_s}; }
};

// Six switches reproducing the loss ablation rows. Disabled terms contribute
// zero to both the total and the breakdown.
struct LossFlags {
    bool cls_ins = true;
    bool cls_con = true;
    bool cls_bak = true;
    bool guide = true;
    bool feat = true;
    bool sparse = true;

    bool operator==(const LossFlags&) const = default;
};

struct HyperParams {
    int T = 750;
    int C = 20;
    int r_ins = 8;
    int r_con = 3;
    int r_bak = 3;
    double lambda_guide = 2e-3;
    double lambda_feat = 5e-5;
    double lambda_sparse = 2e-4;
    double margin = 50.0;
    double alpha = 0.0;
    double class_threshold = 0.2;
    std::vector<double> proposal_thresholds{0.15, 0.20, 0.25};
    double nms_iou = 0.5;
    std::vector<double> tiou_grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};

    int k_ins() const;
    int k_con() const;
    int k_bak() const;

    void validate() const;

    static HyperParams thumos();
    static HyperParams activitynet();
};

// Inclusive arithmetic grid start, start+step, ..., stop with the endpoint
// snapped so accumulated rounding never drops it.
std::vector<double> arange_inclusive(double start, double stop, double step);

double temporal_iou(const Segment& a, const Segment& b);

int topk_count(int T, int r);

// Seconds spanned by one snippet: snippet_frames / fps (16 / 25 by default).
double snippet_seconds(double fps, int snippet_frames);

}  // namespace acmloc
