#include "acmloc/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace acmloc {

std::string LossBreakdown::first_non_finite() const {
    const std::pair<const char*, double> parts[] = {{"cls_ins", cls_ins}, {"cls_con", cls_con}, {"cls_bak", cls_bak},
                                                    {"guide", guide},     {"feat", feat},       {"sparse", sparse},
                                                    {"total", total}};
    for (const auto& [name, v] : parts)
        if (!std::isfinite(v)) return name;
    return {};
}

LossBreakdown& LossBreakdown::operator+=(const LossBreakdown& o) {
    cls_ins += o.cls_ins;
    cls_con += o.cls_con;
    cls_bak += o.cls_bak;
    guide += o.guide;
    feat += o.feat;
    sparse += o.sparse;
    total += o.total;
    return *this;
}

LossBreakdown LossBreakdown::scaled(double s) const {
    return {cls_ins * s, cls_con * s, cls_bak * s, guide * s, feat * s, sparse * s, total * s};
}

template <class S>
BranchLabels<S> branch_labels(const VideoLabel& label) {
    label.validate(true);
    const int C = label.num_classes;
    BranchLabels<S> y;
    y.ins = RowVec<S>::Zero(C + 1);
    y.con = RowVec<S>::Zero(C + 1);
    y.bak = RowVec<S>::Zero(C + 1);
    for (int c : label.class_ids) {
        y.ins(c) = S(1);
        y.con(c) = S(1);
    }
    y.con(C) = S(1);
    y.bak(C) = S(1);
    y.ins /= y.ins.sum();
    y.con /= y.con.sum();
    return y;
}

template <class S>
std::vector<int> topk_indices(const Vec<S>& values, int k) {
    const int T = static_cast<int>(values.size());
    if (k < 1 || k > T) throw ValidationError("top-k: k must lie in [1, T]");
    std::vector<int> idx(T);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return values(a) > values(b); });
    idx.resize(k);
    return idx;
}

template <class S>
RowVec<S> topk_aggregate(const Mat<S>& cas, int k, std::vector<std::vector<int>>* indices) {
    if (k < 1 || k > cas.rows()) throw ValidationError("topk_aggregate: k must lie in [1, T]");
    RowVec<S> out(cas.cols());
    if (indices) indices->assign(cas.cols(), {});
    for (Eigen::Index c = 0; c < cas.cols(); ++c) {
        const Vec<S> column = cas.col(c);
        auto idx = topk_indices<S>(column, k);
        S sum = 0;
        for (int t : idx) sum += column(t);
        out(c) = sum / static_cast<S>(k);
        if (indices) (*indices)[c] = std::move(idx);
    }
    return out;
}

template <class S>
RowVec<S> video_probs(const RowVec<S>& scores) {
    const S mx = scores.maxCoeff();
    RowVec<S> p = (scores.array() - mx).exp().matrix();
    return p / p.sum();
}

template <class S>
S branch_cls_loss(const Mat<S>& cas, int k, const RowVec<S>& y, Mat<S>* dcas) {
    if (y.size() != cas.cols()) throw ValidationError("branch_cls_loss: label size does not match CAS width");
    std::vector<std::vector<int>> idx;
    const RowVec<S> scores = topk_aggregate<S>(cas, k, dcas ? &idx : nullptr);
    // log-softmax computed directly for stability.
    const S mx = scores.maxCoeff();
    const S log_z = mx + std::log((scores.array() - mx).exp().sum());
    S loss = 0;
    for (Eigen::Index c = 0; c < y.size(); ++c)
        if (y(c) != S(0)) loss -= y(c) * (scores(c) - log_z);
    if (dcas) {
        // dL/dscore = p - y (y sums to one); each selected entry gets 1/k of it.
        const RowVec<S> g = video_probs<S>(scores) - y;
        if (dcas->size() == 0) *dcas = Mat<S>::Zero(cas.rows(), cas.cols());
        for (Eigen::Index c = 0; c < cas.cols(); ++c)
            for (int t : idx[c]) (*dcas)(t, c) += g(c) / static_cast<S>(k);
    }
    return loss;
}

template <class S>
S guide_loss(const Mat<S>& cas_ins, const Vec<S>& att_ins, Mat<S>* dcas, Vec<S>* datt) {
    const Eigen::Index T = cas_ins.rows();
    const Eigen::Index bg = cas_ins.cols() - 1;
    if (att_ins.size() != T) throw ValidationError("guide_loss: attention length does not match CAS");
    const Mat<S> p = softmax_rows<S>(cas_ins);
    if (dcas && dcas->size() == 0) *dcas = Mat<S>::Zero(cas_ins.rows(), cas_ins.cols());
    if (datt && datt->size() == 0) *datt = Vec<S>::Zero(T);
    S loss = 0;
    for (Eigen::Index t = 0; t < T; ++t) {
        const S u = S(1) - p(t, bg) - att_ins(t);
        loss += std::abs(u);
        const S sgn = u > S(0) ? S(1) : (u < S(0) ? S(-1) : S(0));
        const S g = sgn / static_cast<S>(T);
        if (datt) (*datt)(t) -= g;
        if (dcas) {
            // d p_bg / d z_j = p_bg (delta_{j,bg} - p_j); u carries a minus sign.
            for (Eigen::Index j = 0; j <= bg; ++j) {
                const S dpbg = p(t, bg) * ((j == bg ? S(1) : S(0)) - p(t, j));
                (*dcas)(t, j) -= g * dpbg;
            }
        }
    }
    return loss / static_cast<S>(T);
}

template <class S>
RowVec<S> pool_branch_feature(const Mat<S>& X, const Vec<S>& att_b, int k, std::vector<int>* indices) {
    if (att_b.size() != X.rows()) throw ValidationError("pool_branch_feature: attention length does not match X");
    if (k < 1 || k > X.rows()) throw ValidationError("pool_branch_feature: k must lie in [1, T]");
    auto idx = topk_indices<S>(att_b, k);
    RowVec<S> out = RowVec<S>::Zero(X.cols());
    for (int t : idx) out += X.row(t);
    out /= static_cast<S>(k);
    if (indices) *indices = std::move(idx);
    return out;
}

template <class S>
S feature_separation_loss(const RowVec<S>& x_ins, const RowVec<S>& x_con, const RowVec<S>& x_bak, S margin,
                          RowVec<S>* d_ins, RowVec<S>* d_con, RowVec<S>* d_bak) {
    if (!(margin > S(0))) throw ValidationError("feature_separation_loss: margin must be > 0");
    const S n_ins = x_ins.norm();
    const S n_con = x_con.norm();
    const S n_bak = x_bak.norm();
    const S a_ins = margin - n_ins + n_con;
    const S a_con = margin - n_con + n_bak;
    const S h_ins = std::max(S(0), a_ins);
    const S h_con = std::max(S(0), a_con);
    const S sum = h_ins + h_con + n_bak;

    if (d_ins || d_con || d_bak) {
        const S g = S(2) * sum;
        S g_ins = 0, g_con = 0, g_bak = g;  // dL/d||x_b||
        if (a_ins > S(0)) {
            g_ins -= g;
            g_con += g;
        }
        if (a_con > S(0)) {
            g_con -= g;
            g_bak += g;
        }
        auto unit = [](const RowVec<S>& x, S n) -> RowVec<S> {
            return n > S(0) ? RowVec<S>(x / n) : RowVec<S>(RowVec<S>::Zero(x.size()));
        };
        if (d_ins) *d_ins = g_ins * unit(x_ins, n_ins);
        if (d_con) *d_con = g_con * unit(x_con, n_con);
        if (d_bak) *d_bak = g_bak * unit(x_bak, n_bak);
    }
    return sum * sum;
}

template <class S>
S sparsity_loss(const Vec<S>& att_ins, const Vec<S>& att_con, Vec<S>* d_ins, Vec<S>* d_con) {
    const Eigen::Index T = att_ins.size();
    if (att_con.size() != T || T == 0) throw ValidationError("sparsity_loss: attention lengths differ");
    const S inv_t = S(1) / static_cast<S>(T);
    if (d_ins) *d_ins = Vec<S>::Constant(T, inv_t);
    if (d_con) *d_con = Vec<S>::Constant(T, inv_t);
    return (att_ins.sum() + att_con.sum()) * inv_t;
}

template <class S>
LossBreakdown total_loss(const BranchActivations<S>& acts, const VideoLabel& label, const HyperParams& hp,
                         const LossFlags& flags, ActivationGrads<S>* grads) {
    if (label.num_classes + 1 != acts.num_outputs())
        throw ValidationError("total_loss: label class count does not match CAS width");
    const Eigen::Index T = acts.T();
    const auto y = branch_labels<S>(label);
    const int k[kNumBranches] = {topk_count(static_cast<int>(T), hp.r_ins), topk_count(static_cast<int>(T), hp.r_con),
                                 topk_count(static_cast<int>(T), hp.r_bak)};
    const bool want = grads != nullptr;

    WeightedCas<S> dcas;
    Mat<S> datt = Mat<S>::Zero(T, kNumBranches);
    Mat<S> dX = Mat<S>::Zero(T, acts.X.cols());
    LossBreakdown out;

    auto add_cls = [&](bool on, const Mat<S>& cas, int kb, const RowVec<S>& yb, Mat<S>& d, double& slot) {
        if (!on) return;
        slot = static_cast<double>(branch_cls_loss<S>(cas, kb, yb, want ? &d : nullptr));
    };
    add_cls(flags.cls_ins, acts.cas_ins, k[kIns], y.ins, dcas.ins, out.cls_ins);
    add_cls(flags.cls_con, acts.cas_con, k[kCon], y.con, dcas.con, out.cls_con);
    add_cls(flags.cls_bak, acts.cas_bak, k[kBak], y.bak, dcas.bak, out.cls_bak);

    const Vec<S> att_ins = acts.att.col(kIns);
    const Vec<S> att_con = acts.att.col(kCon);

    if (flags.guide && hp.lambda_guide != 0.0) {
        const S w = static_cast<S>(hp.lambda_guide);
        Mat<S> dc;
        Vec<S> da;
        out.guide = static_cast<double>(guide_loss<S>(acts.cas_ins, att_ins, want ? &dc : nullptr, want ? &da : nullptr));
        if (want) {
            if (dcas.ins.size() == 0) dcas.ins = Mat<S>::Zero(T, acts.num_outputs());
            dcas.ins += w * dc;
            datt.col(kIns) += w * da;
        }
    }

    if (flags.feat && hp.lambda_feat != 0.0) {
        const S w = static_cast<S>(hp.lambda_feat);
        std::vector<int> idx[kNumBranches];
        RowVec<S> pooled[kNumBranches];
        for (int b = 0; b < kNumBranches; ++b)
            pooled[b] = pool_branch_feature<S>(acts.X, Vec<S>(acts.att.col(b)), k[b], &idx[b]);
        RowVec<S> dp[kNumBranches];
        out.feat = static_cast<double>(feature_separation_loss<S>(pooled[kIns], pooled[kCon], pooled[kBak],
                                                                   static_cast<S>(hp.margin), &dp[kIns], &dp[kCon],
                                                                   &dp[kBak]));
        if (want) {
            for (int b = 0; b < kNumBranches; ++b)
                for (int t : idx[b]) dX.row(t) += w * dp[b] / static_cast<S>(k[b]);
        }
    }

    if (flags.sparse && hp.lambda_sparse != 0.0) {
        const S w = static_cast<S>(hp.lambda_sparse);
        Vec<S> di, dc;
        out.sparse = static_cast<double>(sparsity_loss<S>(att_ins, att_con, &di, &dc));
        if (want) {
            datt.col(kIns) += w * di;
            datt.col(kCon) += w * dc;
        }
    }

    out.total = out.cls_ins + out.cls_con + out.cls_bak + hp.lambda_guide * out.guide + hp.lambda_feat * out.feat +
                hp.lambda_sparse * out.sparse;

    if (want) {
        grads->dX = std::move(dX);
        grads->dphi = Mat<S>::Zero(T, acts.num_outputs());
        grads->datt = std::move(datt);
        weighted_cas_backward<S>(acts.phi, acts.att, dcas, grads->dphi, grads->datt);
    }
    return out;
}

#define ACMLOC_INSTANTIATE(S)                                                                                    \
    template BranchLabels<S> branch_labels<S>(const VideoLabel&);                                                \
    template std::vector<int> topk_indices<S>(const Vec<S>&, int);                                               \
    template RowVec<S> topk_aggregate<S>(const Mat<S>&, int, std::vector<std::vector<int>>*);                    \
    template RowVec<S> video_probs<S>(const RowVec<S>&);                                                         \
    template S branch_cls_loss<S>(const Mat<S>&, int, const RowVec<S>&, Mat<S>*);                                \
    template S guide_loss<S>(const Mat<S>&, const Vec<S>&, Mat<S>*, Vec<S>*);                                    \
    template RowVec<S> pool_branch_feature<S>(const Mat<S>&, const Vec<S>&, int, std::vector<int>*);             \
    template S feature_separation_loss<S>(const RowVec<S>&, const RowVec<S>&, const RowVec<S>&, S, RowVec<S>*, \
                                          RowVec<S>*, RowVec<S>*);                                               \
    template S sparsity_loss<S>(const Vec<S>&, const Vec<S>&, Vec<S>*, Vec<S>*);                                 \
    template LossBreakdown total_loss<S>(const BranchActivations<S>&, const VideoLabel&, const HyperParams&,     \
                                         const LossFlags&, ActivationGrads<S>*);

ACMLOC_INSTANTIATE(float)
ACMLOC_INSTANTIATE(double)

#undef ACMLOC_INSTANTIATE

}  // namespace acmloc
