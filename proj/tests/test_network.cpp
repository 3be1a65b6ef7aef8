#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <random>

#include "hsicnn/network.hpp"
#include "test_util.hpp"

using namespace hsicnn;
using testutil::random_tensor;

namespace {

NetworkConfig tiny_config(int bands = 6, int classes = 3, int width = 4) {
  NetworkConfig cfg;
  cfg.bands = bands;
  cfg.n_classes = classes;
  cfg.width = width;
  return cfg;
}

std::vector<char> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("build: same seed gives bitwise-identical parameters") {
  auto a = build<float>(tiny_config(), 42);
  auto b = build<float>(tiny_config(), 42);
  REQUIRE(a.params.size() == b.params.size());
  for (std::size_t i = 0; i < a.params.size(); ++i) {
    for (std::size_t j = 0; j < a.params[i].w.size(); ++j)
      CHECK(a.params[i].w[j] == b.params[i].w[j]);
    for (std::size_t j = 0; j < a.params[i].b.size(); ++j)
      CHECK(a.params[i].b[j] == b.params[i].b[j]);
  }
}

TEST_CASE("build: biases are 1 except the head's zeros") {
  auto net = build<float>(tiny_config(), 1);
  for (std::size_t i = 0; i + 1 < net.params.size(); ++i)
    for (float b : net.params[i].b) CHECK(b == 1.0f);
  for (float b : net.params.back().b) CHECK(b == 0.0f);
}

TEST_CASE("weighted layer counts: 9 at defaults, 7 with one residual module") {
  NetworkConfig ip;
  ip.bands = 220;
  ip.n_classes = 8;
  CHECK(weighted_layer_count(ip) == 9);
  NetworkConfig one = ip;
  one.n_residual_modules = 1;
  CHECK(weighted_layer_count(one) == 7);
}

TEST_CASE("param_count equals the built net's element count exactly") {
  for (int width : {1, 4, 64, 128}) {
    NetworkConfig cfg = tiny_config(5, 3, width);
    CHECK(param_count(cfg) == build<float>(cfg, 0).parameter_elements());
  }
}

TEST_CASE("param_count: hand-countable minimal config") {
  NetworkConfig cfg;
  cfg.bands = 1;
  cfg.n_classes = 2;
  cfg.width = 1;
  cfg.n_residual_modules = 0;
  cfg.bank_scales = {1};
  // bank 1*1*1*1+1=2, mixing 1*1+1=2, fc1 2, fc2 2, head 2*1+2=4
  CHECK(param_count(cfg) == 12);
}

TEST_CASE("param_count: reference configurations land near the reported sizes") {
  NetworkConfig pavia;
  pavia.bands = 103;
  pavia.n_classes = 9;
  CHECK(std::abs(static_cast<double>(param_count(pavia)) - 610600.0) / 610600.0 < 0.01);

  NetworkConfig indian;
  indian.bands = 220;
  indian.n_classes = 8;
  const double ip_gap =
      std::abs(static_cast<double>(param_count(indian)) - 1122500.0) / 1122500.0;
  MESSAGE("Indian Pines parameter count ", param_count(indian), " vs reported 1122.5K (",
          ip_gap * 100.0, "% off)");
  CHECK(ip_gap < 0.03);

  NetworkConfig salinas;
  salinas.bands = 224;
  salinas.n_classes = 16;
  salinas.width = 192;
  const double sa_gap =
      std::abs(static_cast<double>(param_count(salinas)) - 1875800.0) / 1875800.0;
  MESSAGE("Salinas parameter count ", param_count(salinas), " vs reported 1875.8K (",
          sa_gap * 100.0, "% off)");
  CHECK(sa_gap < 0.03);
}

TEST_CASE("forward_patch: fresh net with tiny weights gives near-uniform softmax") {
  auto net = build<float>(tiny_config(), 5);
  std::mt19937 rng(7);
  Tensor patch = random_tensor<float>({5, 5, 6}, rng);
  auto logits = forward_patch(net, patch);
  REQUIRE(logits.size() == 3);
  auto sm = softmax_xent(logits, 0);
  for (float p : sm.probs) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(0.02));
}

TEST_CASE("forward_patch is a pure function of the patch in eval mode") {
  auto net = build<float>(tiny_config(), 5);
  Tensor zeros({5, 5, 6});
  auto a = forward_patch(net, zeros);
  auto b = forward_patch(net, zeros);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("forward_patch rejects wrong patch sizes and band counts") {
  auto net = build<float>(tiny_config(), 5);
  CHECK_THROWS(forward_patch(net, Tensor({3, 3, 6})));
  CHECK_THROWS(forward_patch(net, Tensor({5, 5, 7})));
}

TEST_CASE("patch/image equivalence at every pixel, including borders") {
  auto net = build<float>(tiny_config(8, 4, 6), 11);
  std::mt19937 rng(13);
  Tensor cube = random_tensor<float>({9, 7, 8}, rng);
  Tensor image_logits = forward_image(net, cube);
  REQUIRE(image_logits.shape() == std::vector<int>{9, 7, 4});
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 7; ++x) {
      // zero-filled 5x5 patch centered on (y,x)
      Tensor patch({5, 5, 8});
      for (int dy = -2; dy <= 2; ++dy)
        for (int dx = -2; dx <= 2; ++dx) {
          const int sy = y + dy, sx = x + dx;
          if (sy < 0 || sy >= 9 || sx < 0 || sx >= 7) continue;
          for (int b = 0; b < 8; ++b)
            patch.at(dy + 2, dx + 2, b) = cube.at(sy, sx, b);
        }
      auto logits = forward_patch(net, patch);
      for (int c = 0; c < 4; ++c)
        CHECK(testutil::rel_err(image_logits.at(y, x, c),
                                logits[static_cast<std::size_t>(c)]) < 1e-5);
    }
}

TEST_CASE("patch/image equivalence is exact in double precision") {
  auto net = build<double>(tiny_config(4, 3, 3), 17);
  std::mt19937 rng(19);
  TensorT<double> cube = random_tensor<double>({6, 5, 4}, rng);
  TensorT<double> image_logits = forward_image(net, cube);
  for (int y : {0, 3, 5})
    for (int x : {0, 2, 4}) {
      TensorT<double> patch({5, 5, 4});
      for (int dy = -2; dy <= 2; ++dy)
        for (int dx = -2; dx <= 2; ++dx) {
          const int sy = y + dy, sx = x + dx;
          if (sy < 0 || sy >= 6 || sx < 0 || sx >= 5) continue;
          for (int b = 0; b < 4; ++b) patch.at(dy + 2, dx + 2, b) = cube.at(sy, sx, b);
        }
      auto logits = forward_patch(net, patch);
      for (int c = 0; c < 3; ++c)
        CHECK(image_logits.at(y, x, c) == logits[static_cast<std::size_t>(c)]);
    }
}

TEST_CASE("spatial shape preservation across configs") {
  std::mt19937 rng(23);
  for (auto scales : std::vector<std::vector<int>>{{1}, {1, 3}, {1, 3, 5}, {1, 3, 5, 7}}) {
    NetworkConfig cfg = tiny_config(3, 2, 2);
    cfg.bank_scales = scales;
    auto net = build<float>(cfg, 29);
    Tensor cube = random_tensor<float>({8, 9, 3}, rng);
    Tensor out = forward_image(net, cube);
    CHECK(out.extent(0) == 8);
    CHECK(out.extent(1) == 9);
    CHECK(out.extent(2) == 2);
  }
}

TEST_CASE("tiled and untiled forward_image agree bitwise") {
  auto net = build<float>(tiny_config(10, 5, 4), 31);
  std::mt19937 rng(37);
  Tensor cube = random_tensor<float>({100, 80, 10}, rng);
  Tensor whole = forward_image(net, cube, 0);
  Tensor tiled = forward_image(net, cube, 64);
  REQUIRE(whole.shape() == tiled.shape());
  for (std::size_t i = 0; i < whole.size(); ++i) CHECK(whole[i] == tiled[i]);
}

TEST_CASE("predict: strict max wins, ties go to the lowest class") {
  auto net = build<float>(tiny_config(3, 2, 2), 41);
  // Zero the head so all logits tie at the bias (0): everything is class 1.
  auto& head = net.head();
  std::fill(head.w.data(), head.w.data() + head.w.size(), 0.0f);
  std::mt19937 rng(43);
  Tensor cube = random_tensor<float>({4, 4, 3}, rng);
  auto labels = predict(net, cube);
  for (auto v : labels) CHECK(v == 1);
}

TEST_CASE("predict equals the per-pixel argmax of forward_patch") {
  auto net = build<float>(tiny_config(4, 3, 3), 47);
  std::mt19937 rng(53);
  Tensor cube = random_tensor<float>({6, 6, 4}, rng);
  auto labels = predict(net, cube);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) {
      Tensor patch({5, 5, 4});
      for (int dy = -2; dy <= 2; ++dy)
        for (int dx = -2; dx <= 2; ++dx) {
          const int sy = y + dy, sx = x + dx;
          if (sy < 0 || sy >= 6 || sx < 0 || sx >= 6) continue;
          for (int b = 0; b < 4; ++b) patch.at(dy + 2, dx + 2, b) = cube.at(sy, sx, b);
        }
      auto logits = forward_patch(net, patch);
      int best = 0;
      for (int c = 1; c < 3; ++c)
        if (logits[static_cast<std::size_t>(c)] > logits[static_cast<std::size_t>(best)])
          best = c;
      CHECK(labels[static_cast<std::size_t>(y) * 6 + x] == best + 1);
    }
}

TEST_CASE("softmax-head monotonicity: argmax of logits equals argmax of probs") {
  auto net = build<float>(tiny_config(4, 4, 3), 59);
  std::mt19937 rng(61);
  Tensor cube = random_tensor<float>({5, 5, 4}, rng);
  Tensor logits = forward_image(net, cube);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 5; ++x) {
      std::vector<float> lv(4);
      for (int c = 0; c < 4; ++c) lv[static_cast<std::size_t>(c)] = logits.at(y, x, c);
      auto sm = softmax_xent(lv, 0);
      int am_logit = 0, am_prob = 0;
      for (int c = 1; c < 4; ++c) {
        if (lv[static_cast<std::size_t>(c)] > lv[static_cast<std::size_t>(am_logit)])
          am_logit = c;
        if (sm.probs[static_cast<std::size_t>(c)] >
            sm.probs[static_cast<std::size_t>(am_prob)])
          am_prob = c;
      }
      CHECK(am_logit == am_prob);
    }
}

TEST_CASE("end-to-end gradient matches finite differences (width 4, B=6, C=3)") {
  auto net = build<double>(tiny_config(6, 3, 4), 67);
  net.train_mode = false;  // deterministic forward; dropout is identity
  std::mt19937 rng(71);
  TensorT<double> patch = random_tensor<double>({5, 5, 6}, rng);
  const int label = 1;

  auto objective = [&]() {
    auto logits = forward_patch(net, patch);
    return static_cast<double>(softmax_xent(logits, label).loss);
  };

  net.zero_grads();
  Workspace<double> ws;
  auto logits = forward_patch(net, patch, &ws);
  auto sm = softmax_xent(logits, label);
  TensorT<double> grad_logits({1, 1, 3});
  for (int c = 0; c < 3; ++c) grad_logits.at(0, 0, c) = sm.grad_logits[static_cast<std::size_t>(c)];
  backward(net, ws, grad_logits);

  std::size_t checked = 0, kinks = 0;
  for (auto& p : net.params) {
    auto rw = testutil::check_grads<double>(p.w.data(), p.gw.data(), p.w.size(), objective);
    CHECK(rw.max_rel_err < 1e-4);
    auto rb = testutil::check_grads<double>(p.b.data(), p.gb.data(), p.b.size(), objective);
    CHECK(rb.max_rel_err < 1e-4);
    checked += rw.checked + rb.checked;
    kinks += rw.skipped_kinks + rb.skipped_kinks;
  }
  MESSAGE("checked ", checked, " parameters, ", kinks, " excluded at kinks");
  CHECK(checked > 100);
}

TEST_CASE("weight file: save -> load -> save is byte-identical") {
  auto net = build<float>(tiny_config(), 73);
  const std::string p1 = "net_a.hsiw", p2 = "net_b.hsiw";
  save_weights(net, p1);
  ContextualNet loaded = load_weights(p1);
  save_weights(loaded, p2);
  CHECK(slurp(p1) == slurp(p2));
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("weight file: truncation reported with the failing offset") {
  auto net = build<float>(tiny_config(), 79);
  const std::string path = "net_trunc.hsiw";
  save_weights(net, path);
  auto bytes = slurp(path);
  bytes.resize(bytes.size() / 2);
  std::ofstream(path, std::ios::binary | std::ios::trunc)
      .write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  CHECK_THROWS_WITH_AS(static_cast<void>(load_weights(path)),
                       doctest::Contains("offset"), std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("weight file: corrupt corpus is rejected without partial nets") {
  auto net = build<float>(tiny_config(), 83);
  const std::string path = "net_corrupt.hsiw";
  save_weights(net, path);
  auto good = slurp(path);

  auto write_bytes = [&](std::vector<char> b) {
    std::ofstream(path, std::ios::binary | std::ios::trunc)
        .write(b.data(), static_cast<std::streamsize>(b.size()));
  };

  SUBCASE("bad magic") {
    auto b = good;
    b[0] = 'X';
    write_bytes(b);
    CHECK_THROWS_WITH_AS(static_cast<void>(load_weights(path)),
                         doctest::Contains("magic"), std::runtime_error);
  }
  SUBCASE("bad version") {
    auto b = good;
    b[4] = 9;
    write_bytes(b);
    CHECK_THROWS_WITH_AS(static_cast<void>(load_weights(path)),
                         doctest::Contains("version"), std::runtime_error);
  }
  SUBCASE("edited width causes a config mismatch, not a partial net") {
    auto b = good;
    b[16] = 7;  // width field
    write_bytes(b);
    CHECK_THROWS(static_cast<void>(load_weights(path)));
  }
  std::remove(path.c_str());
}

TEST_CASE("ablation variant cannot be serialized") {
  NetworkConfig cfg = tiny_config();
  cfg.plain_first_module = true;
  auto net = build<float>(cfg, 89);
  CHECK_THROWS(save_weights(net, "nope.hsiw"));
}

TEST_CASE("config validation rejects bad values") {
  NetworkConfig cfg;
  CHECK_THROWS(cfg.validate());  // bands = 0
  cfg = tiny_config();
  cfg.bank_scales = {2};
  CHECK_THROWS(cfg.validate());
  cfg = tiny_config();
  cfg.bank_scales.clear();
  CHECK_THROWS(cfg.validate());
  cfg = tiny_config();
  cfg.n_classes = 1;
  CHECK_THROWS(cfg.validate());
}
