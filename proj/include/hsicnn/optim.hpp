#pragma once

// The SGD training recipe: stepped learning rate, classical momentum with
// L2 weight decay folded into the gradient, augmented patch sampling.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "hsicnn/data.hpp"
#include "hsicnn/network.hpp"
#include "hsicnn/tensor.hpp"

namespace hsicnn {

struct TrainPlan {
  double base_lr = 0.001;
  double gamma = 0.1;
  std::vector<long> step_iters = {33333, 66666};
  double momentum = 0.9;
  double weight_decay = 0.0005;
  int batch_size = 10;
  long max_iters = 100000;
  std::uint32_t seed = 0;
  bool augmentation = true;
  long snapshot_every = 0;  // 0 = no checkpoints
  std::string snapshot_prefix;
  long log_every = 100;

  void validate() const {
    if (base_lr <= 0) throw std::invalid_argument("plan: base_lr must be positive");
    if (momentum < 0 || momentum >= 1)
      throw std::invalid_argument("plan: momentum must lie in [0,1)");
    if (batch_size < 1) throw std::invalid_argument("plan: batch_size must be >= 1");
    if (max_iters < 0) throw std::invalid_argument("plan: max_iters must be >= 0");
    for (std::size_t i = 0; i < step_iters.size(); ++i) {
      if (step_iters[i] >= max_iters && max_iters > 0)
        throw std::invalid_argument("plan: step_iters must be < max_iters");
      if (i > 0 && step_iters[i] <= step_iters[i - 1])
        throw std::invalid_argument("plan: step_iters must be strictly increasing");
    }
  }
};

// base_lr * gamma^(number of steps at or before iter).
inline double lr_at(const TrainPlan& plan, long iter) {
  double lr = plan.base_lr;
  for (long step : plan.step_iters)
    if (iter >= step) lr *= plan.gamma;
  return lr;
}

// v <- momentum*v - lr*(grad + weight_decay*param); param <- param + v
template <class T>
void sgd_step(T* params, const T* grads, T* velocity, std::size_t n, double lr,
              double momentum, double weight_decay) {
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(grads[i]))
      throw std::runtime_error("sgd_step: non-finite gradient, aborting update");
    const T g = grads[i] + T(weight_decay) * params[i];
    velocity[i] = T(momentum) * velocity[i] - T(lr) * g;
    params[i] += velocity[i];
  }
}

struct TrainLogEntry {
  long iteration;
  double lr;
  double loss;  // mean batch loss
  double seconds;
};

struct TrainLog {
  std::vector<TrainLogEntry> entries;

  void write_csv(const std::string& path) const;
};

// The augmented training pool: (pixel, mirror variant, 0-based class) per
// sample. 4x the train pixels when augmentation is on.
struct TrainingSet {
  const HSICube* cube = nullptr;
  struct Sample {
    std::size_t pixel;
    MirrorVariant variant;
    int label;  // 0-based
  };
  std::vector<Sample> samples;
};

TrainingSet make_training_set(const HSICube& cube, const SplitSpec& split,
                              bool augmentation);

// Runs the full iteration budget: each iteration samples batch_size
// augmented patches uniformly with replacement, backpropagates the mean
// center-pixel softmax loss and applies one SGD step. Deterministic in
// (net seed, plan seed, split).
TrainLog train(ContextualNet& net, const TrainingSet& ts, const TrainPlan& plan);

}  // namespace hsicnn
