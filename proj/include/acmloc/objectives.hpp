#pragma once
// Training objectives: per-branch top-k MIL classification, attention guide,
// feature-norm separation, attention sparsity, and their weighted total.
//
// Every loss optionally writes its gradient with respect to its inputs.
// Top-k selections are stable (ties go to the lower time index) and act as a
// fixed-index gather in the backward pass.

#include <string>
#include <vector>

#include "acmloc/core.hpp"
#include "acmloc/network.hpp"

namespace acmloc {

struct LossBreakdown {
    double cls_ins = 0.0;
    double cls_con = 0.0;
    double cls_bak = 0.0;
    double guide = 0.0;
    double feat = 0.0;
    double sparse = 0.0;
    double total = 0.0;

    // Name of the first non-finite component, or empty.
    std::string first_non_finite() const;
    LossBreakdown& operator+=(const LossBreakdown& o);
    LossBreakdown scaled(double s) const;
};

template <class S>
struct BranchLabels {
    RowVec<S> ins, con, bak;
};

// Normalized indicator vectors over C+1 entries (background is index C).
template <class S>
BranchLabels<S> branch_labels(const VideoLabel& label);

// Indices of the k largest entries, descending, ties to the lower index.
template <class S>
std::vector<int> topk_indices(const Vec<S>& values, int k);

// Per-column mean of the k largest entries. indices (optional) receives the
// selected rows of every column.
template <class S>
RowVec<S> topk_aggregate(const Mat<S>& cas, int k, std::vector<std::vector<int>>* indices = nullptr);

template <class S>
RowVec<S> video_probs(const RowVec<S>& scores);

template <class S>
S branch_cls_loss(const Mat<S>& cas, int k, const RowVec<S>& y, Mat<S>* dcas = nullptr);

template <class S>
S guide_loss(const Mat<S>& cas_ins, const Vec<S>& att_ins, Mat<S>* dcas = nullptr, Vec<S>* datt = nullptr);

template <class S>
RowVec<S> pool_branch_feature(const Mat<S>& X, const Vec<S>& att_b, int k, std::vector<int>* indices = nullptr);

template <class S>
S feature_separation_loss(const RowVec<S>& x_ins, const RowVec<S>& x_con, const RowVec<S>& x_bak, S margin,
                          RowVec<S>* d_ins = nullptr, RowVec<S>* d_con = nullptr, RowVec<S>* d_bak = nullptr);

template <class S>
S sparsity_loss(const Vec<S>& att_ins, const Vec<S>& att_con, Vec<S>* d_ins = nullptr, Vec<S>* d_con = nullptr);

// Full objective. grads (optional) receives dL/dX, dL/dphi, dL/datt with the
// weighted-CAS products already differentiated through.
template <class S>
LossBreakdown total_loss(const BranchActivations<S>& acts, const VideoLabel& label, const HyperParams& hp,
                         const LossFlags& flags, ActivationGrads<S>* grads = nullptr);

}  // namespace acmloc
