#pragma once
// Mini-batch training loop with an Adam optimizer (L2 weight decay added to
// the gradient before the moment updates).

#include <cstdint>
#include <functional>
#include <ostream>
#include <vector>

#include "acmloc/config.hpp"
#include "acmloc/objectives.hpp"

namespace acmloc {

class Adam {
public:
    struct Options {
        double learning_rate = 1e-4;
        double weight_decay = 0.0;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
    };

    Adam(const NetworkParams<float>& like, Options opts);

    void step(NetworkParams<float>& params, const NetworkParams<float>& grads);
    std::int64_t steps() const { return t_; }

private:
    Options opts_;
    NetworkParams<float> m_, v_;
    std::int64_t t_ = 0;
};

struct StepLog {
    int epoch = 0;
    std::int64_t step = 0;
    int batch_videos = 0;
    LossBreakdown loss;  // mean over the batch
};

struct TrainResult {
    Network<float> network;
    std::vector<StepLog> steps;
    std::vector<LossBreakdown> epoch_loss;  // mean per video, one per epoch
};

// Per-video gradients of the batch are summed in order and divided by the
// batch size.
struct BatchResult {
    LossBreakdown loss;
    NetworkParams<float> grads;
};

BatchResult batch_gradients(const Network<float>& net, const std::vector<const MatF*>& inputs,
                            const std::vector<const VideoLabel*>& labels, const HyperParams& hp,
                            const LossFlags& flags, const std::vector<std::uint64_t>& dropout_seeds);

// Called after every epoch with (epoch index starting at 1, current network, step count).
using EpochCallback = std::function<void(int, const Network<float>&, std::int64_t)>;

// Trains on every video of the dataset. log (optional) receives one JSON
// object per step. Throws TrainingError on a non-finite loss.
TrainResult train(const TrainConfig& cfg, const Dataset& train_set, std::ostream* log = nullptr,
                  const EpochCallback& on_epoch = {});

// Stateless 64-bit mix used to derive per-(step, video) seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace acmloc
