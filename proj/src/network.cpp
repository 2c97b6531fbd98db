#include "acmloc/network.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "acmloc/core.hpp"

namespace acmloc {

namespace {

[[noreturn]] void shape_error(const std::string& what, Eigen::Index got_r, Eigen::Index got_c, Eigen::Index want_r,
                              Eigen::Index want_c) {
    std::ostringstream msg;
    msg << what << ": shape " << got_r << "x" << got_c << ", expected " << want_r << "x" << want_c;
    throw ValidationError(msg.str());
}

template <class S>
void expect_shape(const Mat<S>& m, Eigen::Index rows, Eigen::Index cols, const char* what) {
    if (m.rows() != rows || m.cols() != cols) shape_error(what, m.rows(), m.cols(), rows, cols);
}

// Source row for tap offset, or -1 when it falls into zero padding.
inline Eigen::Index tap_row(Eigen::Index t, int offset, Eigen::Index T, Padding padding) {
    Eigen::Index src = t + offset;
    if (src >= 0 && src < T) return src;
    if (padding == Padding::zero) return -1;
    src %= T;
    return src < 0 ? src + T : src;
}

template <class S>
Mat<S> relu(const Mat<S>& m) {
    return m.cwiseMax(S(0));
}

template <class S>
Mat<S> relu_mask(const Mat<S>& pre) {
    return (pre.array() > S(0)).template cast<S>().matrix();
}

template <class S>
void init_uniform(Mat<S>& w, std::mt19937_64& rng, double bound) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<S>(dist(rng));
}

}  // namespace

template <class S>
Mat<S> im2col(const Mat<S>& in, int kernel, Padding padding) {
    if (kernel < 1 || kernel % 2 == 0) throw ValidationError("conv1d: kernel width must be odd and positive");
    if (kernel == 1) return in;
    const Eigen::Index T = in.rows();
    const Eigen::Index C = in.cols();
    const int half = kernel / 2;
    Mat<S> cols = Mat<S>::Zero(T, kernel * C);
    for (Eigen::Index t = 0; t < T; ++t) {
        for (int k = 0; k < kernel; ++k) {
            const Eigen::Index src = tap_row(t, k - half, T, padding);
            if (src >= 0) cols.block(t, k * C, 1, C) = in.row(src);
        }
    }
    return cols;
}

template <class S>
Mat<S> col2im(const Mat<S>& cols, int channels, int kernel, Padding padding) {
    if (kernel == 1) return cols;
    const Eigen::Index T = cols.rows();
    const int half = kernel / 2;
    Mat<S> out = Mat<S>::Zero(T, channels);
    for (Eigen::Index t = 0; t < T; ++t) {
        for (int k = 0; k < kernel; ++k) {
            const Eigen::Index src = tap_row(t, k - half, T, padding);
            if (src >= 0) out.row(src) += cols.block(t, k * channels, 1, channels);
        }
    }
    return out;
}

template <class S>
Mat<S> conv1d(const Mat<S>& in, const Mat<S>& w, const Mat<S>& b, int kernel, Padding padding) {
    expect_shape(w, kernel * in.cols(), w.cols(), "conv1d weight");
    expect_shape(b, 1, w.cols(), "conv1d bias");
    Mat<S> out = im2col(in, kernel, padding) * w;
    out.rowwise() += b.row(0);
    return out;
}

template <class S>
Mat<S> softmax_rows(const Mat<S>& logits) {
    Mat<S> out(logits.rows(), logits.cols());
    for (Eigen::Index t = 0; t < logits.rows(); ++t) {
        const S mx = logits.row(t).maxCoeff();
        out.row(t) = (logits.row(t).array() - mx).exp().matrix();
        out.row(t) /= out.row(t).sum();
    }
    return out;
}

template <class S>
Mat<S> embed(const Mat<S>& F, const NetworkParams<S>& p, const ArchConfig& arch) {
    expect_shape(p.embed_w, arch.embed_kernel * F.cols(), F.cols(), "embed weight");
    return relu<S>(conv1d(F, p.embed_w, p.embed_b, arch.embed_kernel, arch.padding));
}

template <class S>
Mat<S> classify(const Mat<S>& X, const NetworkParams<S>& p, const ArchConfig& arch) {
    const Mat<S> hidden = relu<S>(conv1d(X, p.hidden_w, p.hidden_b, arch.hidden_kernel, arch.padding));
    return conv1d(hidden, p.out_w, p.out_b, 1, arch.padding);
}

template <class S>
Mat<S> attend(const Mat<S>& X, const NetworkParams<S>& p, const ArchConfig& arch) {
    expect_shape(p.att_w, X.cols(), kNumBranches, "attention weight");
    return softmax_rows<S>(conv1d(X, p.att_w, p.att_b, 1, arch.padding));
}

template <class S>
WeightedCas<S> weighted_cas(const Mat<S>& phi, const Mat<S>& att) {
    expect_shape(att, phi.rows(), kNumBranches, "attention");
    WeightedCas<S> out;
    out.ins = att.col(kIns).asDiagonal() * phi;
    out.con = att.col(kCon).asDiagonal() * phi;
    out.bak = att.col(kBak).asDiagonal() * phi;
    return out;
}

template <class S>
void weighted_cas_backward(const Mat<S>& phi, const Mat<S>& att, const WeightedCas<S>& dcas, Mat<S>& dphi,
                           Mat<S>& datt) {
    if (dphi.size() == 0) dphi = Mat<S>::Zero(phi.rows(), phi.cols());
    if (datt.size() == 0) datt = Mat<S>::Zero(att.rows(), att.cols());
    const Mat<S>* grads[kNumBranches] = {&dcas.ins, &dcas.con, &dcas.bak};
    for (int b = 0; b < kNumBranches; ++b) {
        const Mat<S>& g = *grads[b];
        if (g.size() == 0) continue;
        dphi += att.col(b).asDiagonal() * g;
        datt.col(b) += g.cwiseProduct(phi).rowwise().sum();
    }
}

template <class S>
Network<S>::Network(int feature_dim, int num_classes, ArchConfig arch, NetworkParams<S> params)
    : feature_dim_(feature_dim), num_classes_(num_classes), arch_(arch), params_(std::move(params)) {
    if (feature_dim < 1 || num_classes < 1) throw ValidationError("network: dimensions must be positive");
    if (arch_.embed_kernel < 1 || arch_.embed_kernel % 2 == 0 || arch_.hidden_kernel < 1 ||
        arch_.hidden_kernel % 2 == 0)
        throw ValidationError("network: kernel widths must be odd and positive");
    if (!(arch_.dropout >= 0 && arch_.dropout < 1)) throw ValidationError("network: dropout must lie in [0, 1)");
    const int D2 = feature_dim_;
    const int H = hidden_width();
    const int out = num_classes_ + 1;
    expect_shape(params_.embed_w, arch_.embed_kernel * D2, D2, "embed_w");
    expect_shape(params_.embed_b, 1, D2, "embed_b");
    expect_shape(params_.hidden_w, arch_.hidden_kernel * D2, H, "hidden_w");
    expect_shape(params_.hidden_b, 1, H, "hidden_b");
    expect_shape(params_.out_w, H, out, "out_w");
    expect_shape(params_.out_b, 1, out, "out_b");
    expect_shape(params_.att_w, D2, kNumBranches, "att_w");
    expect_shape(params_.att_b, 1, kNumBranches, "att_b");
}

template <class S>
Network<S> Network<S>::create(int feature_dim, int num_classes, const ArchConfig& arch, std::uint64_t seed,
                              InitScheme init) {
    const int H = arch.hidden_width > 0 ? arch.hidden_width : feature_dim;
    const int out = num_classes + 1;
    NetworkParams<S> p;
    p.embed_w = Mat<S>::Zero(arch.embed_kernel * feature_dim, feature_dim);
    p.embed_b = Mat<S>::Zero(1, feature_dim);
    p.hidden_w = Mat<S>::Zero(arch.hidden_kernel * feature_dim, H);
    p.hidden_b = Mat<S>::Zero(1, H);
    p.out_w = Mat<S>::Zero(H, out);
    p.out_b = Mat<S>::Zero(1, out);
    p.att_w = Mat<S>::Zero(feature_dim, kNumBranches);
    p.att_b = Mat<S>::Zero(1, kNumBranches);
    if (init == InitScheme::fan_in_uniform) {
        std::mt19937_64 rng(seed);
        // Weight rows are the fan-in of each output channel.
        for (Mat<S>* w : {&p.embed_w, &p.hidden_w, &p.out_w, &p.att_w})
            init_uniform(*w, rng, 1.0 / std::sqrt(static_cast<double>(w->rows())));
    }
    return Network(feature_dim, num_classes, arch, std::move(p));
}

template <class S>
void Network<S>::check_input(const Mat<S>& F) const {
    if (F.rows() < 1) throw ValidationError("network: empty input sequence");
    if (F.cols() != feature_dim_) {
        std::ostringstream msg;
        msg << "network: input has " << F.cols() << " channels, network expects " << feature_dim_;
        throw ValidationError(msg.str());
    }
}

template <class S>
BranchActivations<S> Network<S>::forward(const Mat<S>& F, ForwardCache<S>* cache,
                                         std::optional<std::uint64_t> dropout_seed) const {
    check_input(F);
    const auto& p = params_;
    const Padding pad = arch_.padding;

    Mat<S> input_cols = im2col(F, arch_.embed_kernel, pad);
    Mat<S> embed_pre = input_cols * p.embed_w;
    embed_pre.rowwise() += p.embed_b.row(0);
    Mat<S> X = relu<S>(embed_pre);

    Mat<S> x_cols = im2col(X, arch_.hidden_kernel, pad);
    Mat<S> hidden_pre = x_cols * p.hidden_w;
    hidden_pre.rowwise() += p.hidden_b.row(0);
    Mat<S> hidden = relu<S>(hidden_pre);

    Mat<S> mask;
    if (dropout_seed && arch_.dropout > 0) {
        std::mt19937_64 rng(*dropout_seed);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const S keep_scale = static_cast<S>(1.0 / (1.0 - arch_.dropout));
        mask.resize(hidden.rows(), hidden.cols());
        for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = u(rng) < arch_.dropout ? S(0) : keep_scale;
        hidden = hidden.cwiseProduct(mask);
    }

    BranchActivations<S> acts;
    acts.phi = hidden * p.out_w;
    acts.phi.rowwise() += p.out_b.row(0);

    Mat<S> att_logits = X * p.att_w;
    att_logits.rowwise() += p.att_b.row(0);
    acts.att = softmax_rows<S>(att_logits);

    auto w = weighted_cas<S>(acts.phi, acts.att);
    acts.cas_ins = std::move(w.ins);
    acts.cas_con = std::move(w.con);
    acts.cas_bak = std::move(w.bak);

    if (cache) {
        cache->input_cols = std::move(input_cols);
        cache->embed_pre = std::move(embed_pre);
        cache->X = X;
        cache->x_cols = std::move(x_cols);
        cache->hidden_pre = std::move(hidden_pre);
        cache->dropout_mask = std::move(mask);
        cache->hidden = std::move(hidden);
        cache->att = acts.att;
    }
    acts.X = std::move(X);
    return acts;
}

template <class S>
NetworkParams<S> Network<S>::backward(const ForwardCache<S>& cache, const ActivationGrads<S>& grads) const {
    const auto& p = params_;
    const Eigen::Index T = cache.X.rows();
    NetworkParams<S> g;

    Mat<S> dX = grads.dX.size() ? grads.dX : Mat<S>::Zero(T, feature_dim_);

    // Attention: softmax Jacobian then the 1x1 conv.
    Mat<S> datt = grads.datt.size() ? grads.datt : Mat<S>::Zero(T, kNumBranches);
    Mat<S> dlogits = cache.att.cwiseProduct(
        (datt - (datt.cwiseProduct(cache.att).rowwise().sum()).replicate(1, kNumBranches)));
    g.att_w = cache.X.transpose() * dlogits;
    g.att_b = dlogits.colwise().sum();
    dX.noalias() += dlogits * p.att_w.transpose();

    // Classification branch.
    Mat<S> dphi = grads.dphi.size() ? grads.dphi : Mat<S>::Zero(T, num_classes_ + 1);
    g.out_w = cache.hidden.transpose() * dphi;
    g.out_b = dphi.colwise().sum();
    Mat<S> dhidden = dphi * p.out_w.transpose();
    if (cache.dropout_mask.size()) dhidden = dhidden.cwiseProduct(cache.dropout_mask);
    dhidden = dhidden.cwiseProduct(relu_mask<S>(cache.hidden_pre));
    g.hidden_w = cache.x_cols.transpose() * dhidden;
    g.hidden_b = dhidden.colwise().sum();
    dX += col2im<S>(dhidden * p.hidden_w.transpose(), feature_dim_, arch_.hidden_kernel, arch_.padding);

    // Embedding.
    Mat<S> dpre = dX.cwiseProduct(relu_mask<S>(cache.embed_pre));
    g.embed_w = cache.input_cols.transpose() * dpre;
    g.embed_b = dpre.colwise().sum();
    return g;
}

#define ACMLOC_INSTANTIATE(S)                                                                              \
    template Mat<S> im2col<S>(const Mat<S>&, int, Padding);                                                \
    template Mat<S> col2im<S>(const Mat<S>&, int, int, Padding);                                           \
    template Mat<S> conv1d<S>(const Mat<S>&, const Mat<S>&, const Mat<S>&, int, Padding);                  \
    template Mat<S> softmax_rows<S>(const Mat<S>&);                                                        \
    template Mat<S> embed<S>(const Mat<S>&, const NetworkParams<S>&, const ArchConfig&);                   \
    template Mat<S> classify<S>(const Mat<S>&, const NetworkParams<S>&, const ArchConfig&);                \
    template Mat<S> attend<S>(const Mat<S>&, const NetworkParams<S>&, const ArchConfig&);                  \
    template WeightedCas<S> weighted_cas<S>(const Mat<S>&, const Mat<S>&);                                 \
    template void weighted_cas_backward<S>(const Mat<S>&, const Mat<S>&, const WeightedCas<S>&, Mat<S>&, \
                                           Mat<S>&);                                                       \
    template class Network<S>;

ACMLOC_INSTANTIATE(float)
ACMLOC_INSTANTIATE(double)

#undef ACMLOC_INSTANTIATE

}  // namespace acmloc
