#include "hsicnn/optim.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

namespace hsicnn {

void TrainLog::write_csv(const std::string& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << "iteration,lr,loss,seconds\n";
  for (const TrainLogEntry& e : entries)
    os << e.iteration << ',' << e.lr << ',' << e.loss << ',' << e.seconds << '\n';
  if (!os) throw std::runtime_error("write failed: " + path);
}

TrainingSet make_training_set(const HSICube& cube, const SplitSpec& split,
                              bool augmentation) {
  TrainingSet ts;
  ts.cube = &cube;
  for (std::size_t ci = 0; ci < split.classes.size(); ++ci)
    for (std::size_t p : split.train[ci]) {
      if (augmentation) {
        for (MirrorVariant v : kAllVariants)
          ts.samples.push_back({p, v, static_cast<int>(ci)});
      } else {
        ts.samples.push_back({p, MirrorVariant::orig, static_cast<int>(ci)});
      }
    }
  return ts;
}

TrainLog train(ContextualNet& net, const TrainingSet& ts, const TrainPlan& plan) {
  plan.validate();
  if (ts.samples.size() < static_cast<std::size_t>(plan.batch_size))
    throw std::invalid_argument("train: pool smaller than one batch");
  const HSICube& cube = *ts.cube;
  const int radius = net.cfg.pad();
  const bool was_training = net.train_mode;
  net.train_mode = true;
  std::mt19937 rng(plan.seed);
  std::uniform_int_distribution<std::size_t> pick(0, ts.samples.size() - 1);

  TrainLog log;
  const auto t0 = std::chrono::steady_clock::now();
  Workspace<float> ws;
  for (long iter = 0; iter < plan.max_iters; ++iter) {
    const double lr = lr_at(plan, iter);
    net.zero_grads();
    double batch_loss = 0.0;
    for (int b = 0; b < plan.batch_size; ++b) {
      const TrainingSet::Sample& s = ts.samples[pick(rng)];
      const int y = static_cast<int>(s.pixel / static_cast<std::size_t>(cube.W));
      const int x = static_cast<int>(s.pixel % static_cast<std::size_t>(cube.W));
      Tensor patch = apply_mirror(extract_patch(cube, y, x, radius), s.variant);
      std::vector<float> logits = forward_patch(net, patch, &ws);
      SoftmaxResult<float> sm = softmax_xent(logits, s.label);
      batch_loss += sm.loss;
      Tensor grad_logits({1, 1, net.cfg.n_classes});
      const float scale = 1.0f / static_cast<float>(plan.batch_size);
      for (int c = 0; c < net.cfg.n_classes; ++c)
        grad_logits.at(0, 0, c) = sm.grad_logits[static_cast<std::size_t>(c)] * scale;
      backward(net, ws, grad_logits);
    }
    batch_loss /= plan.batch_size;
    if (!std::isfinite(batch_loss))
      throw std::runtime_error("train: loss diverged (non-finite) at iteration " +
                               std::to_string(iter));
    for (auto& p : net.params) {
      sgd_step(p.w.data(), p.gw.data(), p.vw.data(), p.w.size(), lr, plan.momentum,
               plan.weight_decay);
      sgd_step(p.b.data(), p.gb.data(), p.vb.data(), p.b.size(), lr, plan.momentum,
               plan.weight_decay);
    }
    if (plan.log_every > 0 &&
        (iter % plan.log_every == 0 || iter == plan.max_iters - 1)) {
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      log.entries.push_back({iter, lr, batch_loss, secs});
    }
    if (plan.snapshot_every > 0 && (iter + 1) % plan.snapshot_every == 0 &&
        !plan.snapshot_prefix.empty()) {
      save_weights(net, plan.snapshot_prefix + "_iter" + std::to_string(iter + 1) +
                            ".hsiw");
    }
  }
  net.train_mode = was_training;
  return log;
}

}  // namespace hsicnn
