#include "acmloc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#if defined(__SSE2__)
#include <xmmintrin.h>
#endif

namespace acmloc {

Adam::Adam(const NetworkParams<float>& like, Options opts) : opts_(opts), m_(like.zeros_like()), v_(like.zeros_like()) {}

void Adam::step(NetworkParams<float>& params, const NetworkParams<float>& grads) {
    ++t_;
    const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
    const float b1 = static_cast<float>(opts_.beta1);
    const float b2 = static_cast<float>(opts_.beta2);
    const float wd = static_cast<float>(opts_.weight_decay);
    const float step_size = static_cast<float>(opts_.learning_rate / bc1);
    const float sqrt_bc2 = static_cast<float>(std::sqrt(bc2));
    const float eps = static_cast<float>(opts_.eps);

    auto p = params.tensors();
    auto g = grads.tensors();
    auto m = m_.tensors();
    auto v = v_.tensors();
    for (std::size_t i = 0; i < p.size(); ++i) {
        auto pa = p[i]->array();
        const auto grad = (g[i]->array() + wd * pa).eval();
        m[i]->array() = b1 * m[i]->array() + (1.0f - b1) * grad;
        v[i]->array() = b2 * v[i]->array() + (1.0f - b2) * grad.square();
        pa -= step_size * m[i]->array() / (v[i]->array().sqrt() / sqrt_bc2 + eps);
    }
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    // splitmix64 finalizer over a combined word.
    std::uint64_t z = a * 0x9E3779B97F4A7C15ULL + b + 0x632BE59BD9B4E019ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

BatchResult batch_gradients(const Network<float>& net, const std::vector<const MatF*>& inputs,
                            const std::vector<const VideoLabel*>& labels, const HyperParams& hp,
                            const LossFlags& flags, const std::vector<std::uint64_t>& dropout_seeds) {
    BatchResult out;
    out.grads = net.params().zeros_like();
    auto acc = out.grads.tensors();
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        ForwardCache<float> cache;
        const auto acts = net.forward(*inputs[i], &cache, dropout_seeds.empty() ? std::nullopt
                                                                                 : std::optional(dropout_seeds[i]));
        ActivationGrads<float> ag;
        const LossBreakdown loss = total_loss<float>(acts, *labels[i], hp, flags, &ag);
        const std::string bad = loss.first_non_finite();
        if (!bad.empty()) {
            std::ostringstream msg;
            msg << "non-finite loss component '" << bad << "' on batch item " << i;
            throw TrainingError(msg.str());
        }
        out.loss += loss;
        const auto g = net.backward(cache, ag);
        const auto gt = g.tensors();
        for (std::size_t j = 0; j < acc.size(); ++j) *acc[j] += *gt[j];
    }
    const float inv = 1.0f / static_cast<float>(inputs.size());
    for (auto* t : acc) *t *= inv;
    out.loss = out.loss.scaled(1.0 / static_cast<double>(inputs.size()));
    return out;
}

namespace {

nlohmann::json loss_json(const LossBreakdown& l) {
    return {{"cls_ins", l.cls_ins}, {"cls_con", l.cls_con}, {"cls_bak", l.cls_bak}, {"guide", l.guide},
            {"feat", l.feat},       {"sparse", l.sparse},   {"total", l.total}};
}

}  // namespace

namespace {

// Subnormal floats appear once weight decay has shrunk unused weights and make
// every step several times slower. Flushed to zero for the duration of a run.
class FlushDenormals {
public:
#if defined(__SSE2__)
    FlushDenormals() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | 0x8040); }  // FTZ | DAZ
    ~FlushDenormals() { _mm_setcsr(saved_); }

private:
    unsigned saved_;
#endif
};

}  // namespace

TrainResult train(const TrainConfig& cfg, const Dataset& train_set, std::ostream* log, const EpochCallback& on_epoch) {
    cfg.validate();
    const FlushDenormals ftz;
    if (train_set.size() == 0) throw ValidationError("train: empty training set");
    if (train_set.num_classes() != cfg.hyper.C) {
        std::ostringstream msg;
        msg << "train: dataset has " << train_set.num_classes() << " classes, config C = " << cfg.hyper.C;
        throw ValidationError(msg.str());
    }

    std::vector<MatF> inputs;
    inputs.reserve(train_set.size());
    for (const auto& seq : train_set.features) inputs.push_back(resample_to_T(seq.features, cfg.hyper.T, cfg.resample));
    for (const auto& rec : train_set.records) rec.label.validate(true);

    TrainResult result;
    result.network = Network<float>::create(train_set.feature_dim(), cfg.hyper.C, cfg.arch, mix_seed(cfg.seed, 1),
                                            cfg.init);
    Adam adam(result.network.params(), {cfg.learning_rate, cfg.weight_decay});
    std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, 2));

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    std::int64_t step = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        LossBreakdown epoch_sum;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<const MatF*> batch_inputs;
            std::vector<const VideoLabel*> batch_labels;
            std::vector<std::uint64_t> seeds;
            for (std::size_t i = start; i < stop; ++i) {
                batch_inputs.push_back(&inputs[order[i]]);
                batch_labels.push_back(&train_set.records[order[i]].label);
                seeds.push_back(mix_seed(mix_seed(cfg.seed, 3 + static_cast<std::uint64_t>(step)), i - start));
            }
            BatchResult br;
            try {
                br = batch_gradients(result.network, batch_inputs, batch_labels, cfg.hyper, cfg.flags, seeds);
            } catch (const TrainingError& e) {
                std::ostringstream msg;
                msg << e.what() << " (epoch " << epoch << ", step " << step + 1 << ")";
                throw TrainingError(msg.str());
            }
            adam.step(result.network.params(), br.grads);
            ++step;
            if (!result.network.params().all_finite())
                throw TrainingError("parameters became non-finite at step " + std::to_string(step));
            epoch_sum += br.loss.scaled(static_cast<double>(stop - start));
            StepLog entry{epoch, step, static_cast<int>(stop - start), br.loss};
            if (log) {
                *log << nlohmann::json{{"epoch", epoch}, {"step", step}, {"videos", entry.batch_videos},
                                       {"loss", loss_json(br.loss)}}
                            .dump()
                     << '\n';
            }
            result.steps.push_back(entry);
        }
        result.epoch_loss.push_back(epoch_sum.scaled(1.0 / static_cast<double>(order.size())));
        if (on_epoch) on_epoch(epoch, result.network, step);
    }
    return result;
}

}  // namespace acmloc
