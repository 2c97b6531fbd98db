#pragma once
// Forward and backward pass of the three-branch attention network.
//
//   X       = ReLU(conv_embed(F))                     [T x 2D]
//   Phi     = conv_out(dropout(ReLU(conv_hidden(X)))) [T x (C+1)]
//   A       = softmax_rows(conv_att(X))               [T x 3]  (ins, con, bak)
//   CAS_b   = A(:, b) .* Phi                          b in {ins, con, bak}
//
// Convolutions are temporal (along rows) with odd kernel widths and "same"
// padding. Weights are stored im2col-style as [kernel * C_in x C_out], row
// index k * C_in + c_in, tap k reading input row t + k - kernel / 2.

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "acmloc/core.hpp"
#include "acmloc/tensor.hpp"

namespace acmloc {

enum class Padding { zero, circular };

struct ArchConfig {
    int embed_kernel = 3;
    int hidden_kernel = 3;
    int hidden_width = 0;  // 0 means "same as the feature dimension"
    double dropout = 0.5;
    Padding padding = Padding::zero;

    bool operator==(const ArchConfig&) const = default;
};

enum class InitScheme { fan_in_uniform, zero };

inline constexpr int kNumBranches = 3;
enum Branch : int { kIns = 0, kCon = 1, kBak = 2 };

template <class S>
struct NetworkParams {
    Mat<S> embed_w, embed_b;
    Mat<S> hidden_w, hidden_b;
    Mat<S> out_w, out_b;
    Mat<S> att_w, att_b;

    static constexpr std::array<const char*, 8> names{"embed_w", "embed_b", "hidden_w", "hidden_b",
                                                      "out_w",   "out_b",   "att_w",    "att_b"};

    std::array<Mat<S>*, 8> tensors() {
        return {&embed_w, &embed_b, &hidden_w, &hidden_b, &out_w, &out_b, &att_w, &att_b};
    }
    std::array<const Mat<S>*, 8> tensors() const {
        return {&embed_w, &embed_b, &hidden_w, &hidden_b, &out_w, &out_b, &att_w, &att_b};
    }

    std::size_t num_scalars() const {
        std::size_t n = 0;
        for (const auto* t : tensors()) n += static_cast<std::size_t>(t->size());
        return n;
    }

    bool all_finite() const {
        for (const auto* t : tensors())
            if (!t->allFinite()) return false;
        return true;
    }

    // Same shapes, all zeros.
    NetworkParams zeros_like() const {
        NetworkParams z = *this;
        for (auto* t : z.tensors()) t->setZero();
        return z;
    }

    template <class T>
    NetworkParams<T> cast() const {
        NetworkParams<T> out;
        auto dst = out.tensors();
        auto src = tensors();
        for (std::size_t i = 0; i < src.size(); ++i) *dst[i] = src[i]->template cast<T>();
        return out;
    }
};

template <class S>
struct BranchActivations {
    Mat<S> X;      // embedded features [T x 2D]
    Mat<S> phi;    // raw CAS logits [T x (C+1)]
    Mat<S> att;    // attention [T x 3]
    Mat<S> cas_ins, cas_con, cas_bak;

    const Mat<S>& cas(int branch) const { return branch == kIns ? cas_ins : branch == kCon ? cas_con : cas_bak; }
    int T() const { return static_cast<int>(phi.rows()); }
    int num_outputs() const { return static_cast<int>(phi.cols()); }
};

// Loss gradients with respect to the network outputs. Gradients w.r.t. the
// weighted sequences must already be folded into phi and att (see
// weighted_cas_backward).
template <class S>
struct ActivationGrads {
    Mat<S> dX, dphi, datt;
};

template <class S>
struct ForwardCache {
    Mat<S> input_cols;
    Mat<S> embed_pre;
    Mat<S> X;
    Mat<S> x_cols;
    Mat<S> hidden_pre;
    Mat<S> dropout_mask;  // empty in eval mode
    Mat<S> hidden;
    Mat<S> att;
};

template <class S>
struct WeightedCas {
    Mat<S> ins, con, bak;
};

// Building blocks. All throw ValidationError on shape mismatch.
template <class S>
Mat<S> im2col(const Mat<S>& in, int kernel, Padding padding);
template <class S>
Mat<S> col2im(const Mat<S>& cols, int channels, int kernel, Padding padding);
template <class S>
Mat<S> conv1d(const Mat<S>& in, const Mat<S>& w, const Mat<S>& b, int kernel, Padding padding);
template <class S>
Mat<S> softmax_rows(const Mat<S>& logits);

template <class S>
Mat<S> embed(const Mat<S>& F, const NetworkParams<S>& p, const ArchConfig& arch);
// Eval-mode classification branch (no dropout).
template <class S>
Mat<S> classify(const Mat<S>& X, const NetworkParams<S>& p, const ArchConfig& arch);
template <class S>
Mat<S> attend(const Mat<S>& X, const NetworkParams<S>& p, const ArchConfig& arch);
template <class S>
WeightedCas<S> weighted_cas(const Mat<S>& phi, const Mat<S>& att);
// Folds gradients w.r.t. CAS_ins/con/bak into (dphi, datt), accumulating.
template <class S>
void weighted_cas_backward(const Mat<S>& phi, const Mat<S>& att, const WeightedCas<S>& dcas, Mat<S>& dphi,
                           Mat<S>& datt);

template <class S>
class Network {
public:
    Network() = default;
    Network(int feature_dim, int num_classes, ArchConfig arch, NetworkParams<S> params);

    static Network create(int feature_dim, int num_classes, const ArchConfig& arch, std::uint64_t seed,
                          InitScheme init = InitScheme::fan_in_uniform);

    int feature_dim() const { return feature_dim_; }
    int num_classes() const { return num_classes_; }
    int hidden_width() const { return arch_.hidden_width > 0 ? arch_.hidden_width : feature_dim_; }
    const ArchConfig& arch() const { return arch_; }
    const NetworkParams<S>& params() const { return params_; }
    NetworkParams<S>& params() { return params_; }

    // dropout_seed set and arch().dropout > 0 selects training mode; the
    // mask is a pure function of the seed.
    BranchActivations<S> forward(const Mat<S>& F, ForwardCache<S>* cache = nullptr,
                                 std::optional<std::uint64_t> dropout_seed = std::nullopt) const;

    NetworkParams<S> backward(const ForwardCache<S>& cache, const ActivationGrads<S>& grads) const;

    template <class T>
    Network<T> cast() const {
        return Network<T>(feature_dim_, num_classes_, arch_, params_.template cast<T>());
    }

private:
    void check_input(const Mat<S>& F) const;

    int feature_dim_ = 0;
    int num_classes_ = 0;
    ArchConfig arch_;
    NetworkParams<S> params_;
};

}  // namespace acmloc
