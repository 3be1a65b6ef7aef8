#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hsicnn/eval.hpp"
#include "hsicnn/optim.hpp"
#include "test_util.hpp"

using namespace hsicnn;

TEST_CASE("lr_at reproduces the stepped schedule") {
  TrainPlan plan;
  CHECK(lr_at(plan, 0) == doctest::Approx(0.001));
  CHECK(lr_at(plan, 33332) == doctest::Approx(0.001));
  CHECK(lr_at(plan, 40000) == doctest::Approx(0.0001));
  CHECK(lr_at(plan, 99999) == doctest::Approx(0.00001));
}

TEST_CASE("lr_at is piecewise constant and non-increasing with 3 distinct values") {
  TrainPlan plan;
  double prev = lr_at(plan, 0);
  std::vector<double> distinct = {prev};
  for (long i = 1; i < plan.max_iters; i += 97) {
    const double lr = lr_at(plan, i);
    CHECK(lr <= prev);
    if (lr != prev) distinct.push_back(lr);
    prev = lr;
  }
  CHECK(distinct.size() == plan.step_iters.size() + 1);
}

TEST_CASE("plan validation") {
  TrainPlan plan;
  plan.step_iters = {50, 40};
  CHECK_THROWS(plan.validate());
  plan = TrainPlan{};
  plan.momentum = 1.0;
  CHECK_THROWS(plan.validate());
  plan = TrainPlan{};
  plan.step_iters = {200000};
  CHECK_THROWS(plan.validate());
}

TEST_CASE("sgd_step: zero grad, zero velocity, no decay leaves params unchanged") {
  std::vector<float> p = {1.0f, -2.0f}, g = {0.0f, 0.0f}, v = {0.0f, 0.0f};
  sgd_step(p.data(), g.data(), v.data(), 2, 0.1, 0.9, 0.0);
  CHECK(p[0] == 1.0f);
  CHECK(p[1] == -2.0f);
}

TEST_CASE("sgd_step: one step from rest moves by -lr*(g + wd*p)") {
  std::vector<double> p = {2.0}, g = {0.5}, v = {0.0};
  sgd_step(p.data(), g.data(), v.data(), 1, 0.1, 0.9, 0.01);
  CHECK(p[0] == doctest::Approx(2.0 - 0.1 * (0.5 + 0.01 * 2.0)));
}

TEST_CASE("sgd_step: second step with constant grad gains the momentum factor") {
  std::vector<double> p = {0.0}, g = {1.0}, v = {0.0};
  const double lr = 0.1, mom = 0.9;
  sgd_step(p.data(), g.data(), v.data(), 1, lr, mom, 0.0);
  const double after_first = p[0];
  sgd_step(p.data(), g.data(), v.data(), 1, lr, mom, 0.0);
  CHECK(p[0] - after_first == doctest::Approx(-lr * 1.0 * (1.0 + mom)));
}

TEST_CASE("sgd_step with zero momentum and decay is vanilla gradient descent") {
  std::vector<double> p = {1.0, 2.0}, g = {0.3, -0.4}, v = {0.0, 0.0};
  sgd_step(p.data(), g.data(), v.data(), 2, 0.5, 0.0, 0.0);
  CHECK(p[0] == doctest::Approx(1.0 - 0.5 * 0.3));
  CHECK(p[1] == doctest::Approx(2.0 + 0.5 * 0.4));
}

TEST_CASE("sgd_step aborts on non-finite gradients") {
  std::vector<float> p = {1.0f}, g = {std::nanf("")}, v = {0.0f};
  CHECK_THROWS(sgd_step(p.data(), g.data(), v.data(), 1, 0.1, 0.9, 0.0));
}

namespace {

struct TinyRun {
  ContextualNet net;
  TrainLog log;
};

TinyRun run_tiny(std::uint32_t seed, long iters) {
  auto scene = testutil::make_synth_scene(24, 24, 8, 4, 101, 0.2);
  SplitSpec split = sample_split(scene.labels, {1, 2, 3, 4}, 20, seed);
  std::vector<std::size_t> train_pixels;
  for (const auto& v : split.train)
    train_pixels.insert(train_pixels.end(), v.begin(), v.end());
  standardize(scene.cube, train_pixels);

  NetworkConfig cfg;
  cfg.bands = 8;
  cfg.n_classes = 4;
  cfg.width = 4;
  ContextualNet net = build<float>(cfg, seed);
  TrainPlan plan;
  plan.max_iters = iters;
  plan.step_iters = {};
  plan.seed = seed;
  plan.log_every = 1;
  TrainingSet ts = make_training_set(scene.cube, split, true);
  CHECK(ts.samples.size() == 4 * split.train_total());
  TrainLog log = train(net, ts, plan);
  return {std::move(net), std::move(log)};
}

}  // namespace

TEST_CASE("train: zero iterations leaves parameters unchanged") {
  auto scene = testutil::make_synth_scene(16, 16, 6, 2, 5, 0.2);
  SplitSpec split = sample_split(scene.labels, {1, 2}, 10, 3);
  NetworkConfig cfg;
  cfg.bands = 6;
  cfg.n_classes = 2;
  cfg.width = 3;
  ContextualNet net = build<float>(cfg, 7);
  ContextualNet before = build<float>(cfg, 7);
  TrainPlan plan;
  plan.max_iters = 0;
  plan.step_iters = {};
  train(net, make_training_set(scene.cube, split, true), plan);
  for (std::size_t i = 0; i < net.params.size(); ++i)
    for (std::size_t j = 0; j < net.params[i].w.size(); ++j)
      CHECK(net.params[i].w[j] == before.params[i].w[j]);
}

TEST_CASE("train: identical seeds give bitwise-identical losses and weights") {
  TinyRun a = run_tiny(11, 30);
  TinyRun b = run_tiny(11, 30);
  REQUIRE(a.log.entries.size() == b.log.entries.size());
  for (std::size_t i = 0; i < a.log.entries.size(); ++i)
    CHECK(a.log.entries[i].loss == b.log.entries[i].loss);
  for (std::size_t i = 0; i < a.net.params.size(); ++i)
    for (std::size_t j = 0; j < a.net.params[i].w.size(); ++j)
      CHECK(a.net.params[i].w[j] == b.net.params[i].w[j]);
}

TEST_CASE("train: loss decreases on an easy synthetic split") {
  TinyRun r = run_tiny(13, 300);
  double early = 0.0, late = 0.0;
  const std::size_t n = r.log.entries.size();
  for (std::size_t i = 0; i < 30; ++i) early += r.log.entries[i].loss;
  for (std::size_t i = n - 30; i < n; ++i) late += r.log.entries[i].loss;
  CHECK(late < early);
}

TEST_CASE("train log CSV round trip has the expected columns") {
  TinyRun r = run_tiny(17, 5);
  const std::string path = "tinylog.csv";
  r.log.write_csv(path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "iteration,lr,loss,seconds");
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == r.log.entries.size());
  std::remove(path.c_str());
}

TEST_CASE("train rejects pools smaller than one batch") {
  auto scene = testutil::make_synth_scene(8, 8, 4, 2, 23, 0.2);
  SplitSpec split = sample_split(scene.labels, {1, 2}, 1, 3);
  NetworkConfig cfg;
  cfg.bands = 4;
  cfg.n_classes = 2;
  cfg.width = 2;
  ContextualNet net = build<float>(cfg, 7);
  TrainPlan plan;
  plan.batch_size = 100;
  TrainingSet ts = make_training_set(scene.cube, split, false);
  CHECK_THROWS(train(net, ts, plan));
}
