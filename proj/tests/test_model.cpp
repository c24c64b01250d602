#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "subens/model.hpp"
#include "subens/rng.hpp"

using namespace subens;
using namespace subens::model;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, RngStream& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = scale * rng.next_gaussian();
  return t;
}

bool params_equal(const ModelParams& a, const ModelParams& b) {
  auto ta = param_tensors(a);
  auto tb = param_tensors(b);
  if (ta.size() != tb.size()) return false;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (!ta[i]->same_shape(*tb[i])) return false;
    if (std::memcmp(ta[i]->data().data(), tb[i]->data().data(), ta[i]->size() * sizeof(double)) != 0)
      return false;
  }
  return true;
}

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.input_dim = 6;
  cfg.encoder_layers = {5};
  cfg.repr_dim = 4;
  cfg.num_subnets = 3;
  cfg.subnet_hidden = 3;
  cfg.embed_dim = 2;
  cfg.seed = 9;
  return cfg;
}

}  // namespace

TEST_CASE("init is deterministic per seed") {
  ModelConfig cfg = small_config();
  CHECK(params_equal(init(cfg), init(cfg)));
  ModelConfig other = cfg;
  other.seed = 10;
  CHECK_FALSE(params_equal(init(cfg), init(other)));
}

TEST_CASE("heads start distinct in every weight") {
  ModelConfig cfg = small_config();
  cfg.num_subnets = 2;
  ModelParams p = init(cfg);
  for (std::size_t j = 0; j < p.subnets[0].size(); ++j)
    for (std::size_t i = 0; i < p.subnets[0][j].w.size(); ++i)
      CHECK(p.subnets[0][j].w[i] != p.subnets[1][j].w[i]);
}

TEST_CASE("init respects the uniform bound and zeroes biases") {
  ModelConfig cfg;
  cfg.input_dim = 1;
  cfg.encoder_layers = {};
  cfg.repr_dim = 1;
  cfg.num_subnets = 2;
  cfg.subnet_depth = 1;
  cfg.embed_dim = 1;
  cfg.seed = 4;
  ModelParams p = init(cfg);
  for (const auto& head : p.subnets) {
    CHECK(std::abs(head[0].w[0]) <= std::sqrt(3.0));  // fan_in = fan_out = 1
    CHECK(head[0].b[0] == 0.0);
  }
}

TEST_CASE("empty encoder with matching dims is the identity") {
  ModelConfig cfg = small_config();
  cfg.encoder_layers = {};
  cfg.input_dim = cfg.repr_dim = 4;
  ModelParams p = init(cfg);
  RngStream rng(5);
  Tensor x = random_tensor({3, 4}, rng);
  Tensor b = encode_value(p, x);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(b[i] == x[i]);

  ModelConfig bad = cfg;
  bad.repr_dim = 5;
  CHECK_THROWS_AS(init(bad), contract_error);
}

TEST_CASE("all-zero encoder weights produce zero representations") {
  ModelConfig cfg = small_config();
  ModelParams p = init(cfg);
  for (DenseLayer& l : p.encoder) {
    for (double& v : l.w.data()) v = 0.0;
    for (double& v : l.b.data()) v = 0.0;
  }
  RngStream rng(6);
  Tensor b = encode_value(p, random_tensor({4, 6}, rng));
  for (std::size_t i = 0; i < b.size(); ++i) CHECK(b[i] == 0.0);
}

TEST_CASE("encode matches a layer-by-layer re-evaluation") {
  ModelConfig cfg = small_config();
  cfg.encoder_layers = {7, 5};
  ModelParams p = init(cfg);
  RngStream rng(7);
  Tensor x = random_tensor({3, 6}, rng);
  Tensor got = encode_value(p, x);

  Tensor h = x;
  for (std::size_t i = 0; i < p.encoder.size(); ++i) {
    h = add_bias(matmul(h, p.encoder[i].w), p.encoder[i].b);
    if (i + 1 < p.encoder.size()) h = map(h, MapKind::Relu);
  }
  REQUIRE(got.same_shape(h));
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - h[i]) < 1e-12);
}

TEST_CASE("identical heads give std == sqrt(epsilon)") {
  ModelConfig cfg = small_config();
  cfg.num_subnets = 2;
  ModelParams p = init(cfg);
  p.subnets[1] = p.subnets[0];
  RngStream rng(8);
  Tensor b = random_tensor({3, 4}, rng);
  double eps = 1e-4;
  EmbeddingValues ev = project_value(p, b, eps);
  for (std::size_t i = 0; i < ev.std.size(); ++i)
    CHECK(ev.std[i] == doctest::Approx(std::sqrt(eps)).epsilon(1e-12));
}

TEST_CASE("two linear heads at outputs 0 and 2 give std sqrt(2 + epsilon)") {
  ModelConfig cfg;
  cfg.input_dim = 1;
  cfg.encoder_layers = {};
  cfg.repr_dim = 1;
  cfg.num_subnets = 2;
  cfg.subnet_depth = 1;
  cfg.embed_dim = 1;
  ModelParams p = init(cfg);
  p.subnets[0][0].w[0] = 0.0;
  p.subnets[1][0].w[0] = 2.0;
  double eps = 1e-4;
  EmbeddingValues ev = project_value(p, Tensor({1, 1}, {1.0}), eps);
  CHECK(ev.z.at(0, 0, 0) == 0.0);
  CHECK(ev.z.at(0, 1, 0) == 2.0);
  CHECK(ev.mean[0] == doctest::Approx(1.0));
  CHECK(ev.std[0] == doctest::Approx(std::sqrt(2.0 + eps)).epsilon(1e-12));
}

TEST_CASE("mean and std match direct recomputation from z") {
  ModelConfig cfg = small_config();
  ModelParams p = init(cfg);
  RngStream rng(9);
  Tensor b = random_tensor({5, 4}, rng);
  double eps = 1e-4;
  EmbeddingValues ev = project_value(p, b, eps);
  std::size_t m = cfg.num_subnets, q = cfg.embed_dim;
  for (std::size_t k = 0; k < 5; ++k) {
    for (std::size_t o = 0; o < q; ++o) {
      double mean = 0.0;
      for (std::size_t j = 0; j < m; ++j) mean += ev.z.at(k, j, o);
      mean /= static_cast<double>(m);
      double ss = 0.0;
      for (std::size_t j = 0; j < m; ++j)
        ss += (ev.z.at(k, j, o) - mean) * (ev.z.at(k, j, o) - mean);
      double sd = std::sqrt(ss / static_cast<double>(m - 1) + eps);
      CHECK(std::abs(ev.mean.at(k, o) - mean) < 1e-12);
      CHECK(std::abs(ev.std.at(k, o) - sd) < 1e-12);
      CHECK(ev.std.at(k, o) >= std::sqrt(eps));  // epsilon floors the spread
    }
  }
}

TEST_CASE("head order does not affect mean or std") {
  ModelConfig cfg = small_config();
  ModelParams p = init(cfg);
  ModelParams permuted = p;
  std::swap(permuted.subnets[0], permuted.subnets[2]);
  RngStream rng(10);
  Tensor b = random_tensor({4, 4}, rng);
  EmbeddingValues ev1 = project_value(p, b, 1e-4);
  EmbeddingValues ev2 = project_value(permuted, b, 1e-4);
  for (std::size_t i = 0; i < ev1.mean.size(); ++i) {
    CHECK(ev1.mean[i] == doctest::Approx(ev2.mean[i]).epsilon(1e-12));
    CHECK(ev1.std[i] == doctest::Approx(ev2.std[i]).epsilon(1e-12));
  }
}

TEST_CASE("residuals around the head mean sum to zero") {
  ModelConfig cfg = small_config();
  cfg.num_subnets = 5;
  ModelParams p = init(cfg);
  RngStream rng(11);
  Tensor b = random_tensor({6, 4}, rng, 2.0);
  EmbeddingValues ev = project_value(p, b, 1e-4);
  for (std::size_t k = 0; k < 6; ++k)
    for (std::size_t o = 0; o < cfg.embed_dim; ++o) {
      double s = 0.0;
      for (std::size_t j = 0; j < cfg.num_subnets; ++j) s += ev.z.at(k, j, o) - ev.mean.at(k, o);
      CHECK(std::abs(s) < 1e-10);
    }
}

TEST_CASE("a loss on the mean sends equal gradients to identical heads") {
  ModelConfig cfg = small_config();
  ModelParams p = init(cfg);
  for (std::size_t m = 1; m < p.subnets.size(); ++m) p.subnets[m] = p.subnets[0];

  Graph g;
  ParamNodes pn = bind_params(g, p);
  RngStream rng(12);
  NodeId b = g.constant(random_tensor({4, 4}, rng));
  EmbeddingSet e = project(g, pn, p, b, 1e-4);
  NodeId root = g.sum_all(g.mul(e.mean, e.mean));
  g.forward(root);
  auto grads = g.backward(root);

  const Tensor& w0 = grads.at(pn.subnets[0][0].first);
  for (std::size_t m = 1; m < pn.subnets.size(); ++m) {
    const Tensor& wm = grads.at(pn.subnets[m][0].first);
    for (std::size_t i = 0; i < w0.size(); ++i) CHECK(wm[i] == doctest::Approx(w0[i]).epsilon(1e-12));
  }
}
