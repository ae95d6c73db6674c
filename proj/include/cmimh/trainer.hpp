#pragma once

#include <map>
#include <string>
#include <vector>

#include "cmimh/dataio.hpp"
#include "cmimh/networks.hpp"
#include "cmimh/objectives.hpp"

namespace cmimh {

struct TrainConfig {
    std::size_t batch_size = 128;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    double lr_main = 0.01;      // encoders, critic T, classifier D
    double lr_decoders = 0.001;
    Lambdas lambdas;
    std::size_t epochs = 100;
    std::uint64_t seed = 0;
    std::size_t critic_steps_per_main = 1;
    ObjectiveOptions objective;

    void validate() const;
};

struct OptimizerState {
    std::map<std::string, Tensor> velocity;  // zero-initialized on first use
};

// v <- momentum*v + grad + weight_decay*param; param <- param - lr*v.
void sgd_step(const std::vector<std::pair<std::string, Var>>& params, OptimizerState& state,
              double lr, double momentum, double weight_decay);

class Trainer {
  public:
    Trainer(ModelBundle bundle, TrainConfig config);

    // One pass over the train rows: per batch, critic/classifier updates on
    // detached codes, then an encoder/decoder update on the full objective.
    // The last short batch is dropped. Returns the mean breakdown.
    LossBreakdown train_epoch(const Tensor& x_i_train, const Tensor& x_t_train);

    ModelBundle& bundle() { return bundle_; }
    const ModelBundle& bundle() const { return bundle_; }
    const TrainConfig& config() const { return config_; }
    OptimizerState& opt_state() { return state_; }
    std::size_t epoch() const { return epoch_; }

    void save(const std::string& path) const;
    static Trainer load(const std::string& path);

  private:
    Trainer() = default;

    ModelBundle bundle_;
    TrainConfig config_;
    OptimizerState state_;
    Rng rng_shuffle_{0}, rng_obj_{0};
    std::size_t epoch_ = 0;
};

}  // namespace cmimh
