#include "subens/train.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

namespace subens::train {

namespace {

constexpr std::uint64_t kOrderTag = 21;
constexpr std::uint64_t kAugTag = 22;

Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& order, std::size_t begin,
                   std::size_t count) {
  Tensor out({count, x.extent(1)});
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t j = 0; j < x.extent(1); ++j) out.at(i, j) = x.at(order[begin + i], j);
  return out;
}

Tensor softmax_rows(const Tensor& logits) {
  Tensor out(logits.shape());
  for (std::size_t r = 0; r < logits.extent(0); ++r) {
    double mx = logits.at(r, 0);
    for (std::size_t c = 1; c < logits.extent(1); ++c) mx = std::max(mx, logits.at(r, c));
    double sum = 0.0;
    for (std::size_t c = 0; c < logits.extent(1); ++c) {
      out.at(r, c) = std::exp(logits.at(r, c) - mx);
      sum += out.at(r, c);
    }
    for (std::size_t c = 0; c < logits.extent(1); ++c) out.at(r, c) /= sum;
  }
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw contract_error("train config: epochs must be >= 1");
  if (batch_size < 2) throw contract_error("train config: batch_size must be >= 2");
  if (lr < 0.0) throw contract_error("train config: lr must be >= 0");
  if (momentum < 0.0 || momentum >= 1.0) throw contract_error("train config: momentum must be in [0,1)");
  loss.validate();
  model.validate();
  if (loss.lambda > 0.0 && model.num_subnets < 2)
    throw contract_error("train config: diversity loss needs at least 2 sub-networks");
}

void sgd_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
              SgdState& state, double lr, double momentum) {
  if (params.size() != grads.size()) throw contract_error("sgd_step: params/grads size mismatch");
  if (state.velocity.empty()) {
    state.velocity.reserve(params.size());
    for (Tensor* p : params) state.velocity.emplace_back(p->shape());
  }
  if (state.velocity.size() != params.size()) throw contract_error("sgd_step: stale momentum state");
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = *grads[i];
    Tensor& v = state.velocity[i];
    if (!p.same_shape(g)) throw contract_error("sgd_step: gradient shape mismatch");
    for (std::size_t j = 0; j < p.size(); ++j) {
      v[j] = momentum * v[j] + g[j];
      p[j] -= lr * v[j];
    }
  }
}

TrainTrace pretrain(const data::Dataset& d, const TrainConfig& cfg) {
  cfg.validate();
  d.validate();
  if (d.dim() != cfg.model.input_dim)
    throw contract_error("pretrain: dataset dim " + std::to_string(d.dim()) +
                         " does not match model input dim " + std::to_string(cfg.model.input_dim));
  std::size_t steps_per_epoch = d.n() / cfg.batch_size;
  if (steps_per_epoch == 0)
    throw contract_error("pretrain: batch_size " + std::to_string(cfg.batch_size) +
                         " exceeds dataset size " + std::to_string(d.n()));

  TrainTrace trace;
  trace.params = model::init(cfg.model);
  SgdState opt;
  std::size_t total_steps = static_cast<std::size_t>(cfg.epochs) * steps_per_epoch;
  std::size_t step = 0;

  std::vector<std::size_t> order(d.n());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    RngStream order_rng(cfg.seed, kOrderTag, static_cast<std::uint64_t>(epoch));
    order_rng.shuffle(order);
    for (std::size_t b = 0; b < steps_per_epoch; ++b) {
      ++step;
      Tensor xb = gather_rows(d.x, order, b * cfg.batch_size, cfg.batch_size);
      RngStream aug_rng(cfg.seed, kAugTag, step);
      auto [view_a, view_b] = data::augment(xb, cfg.augment, aug_rng);

      Graph g;
      model::ParamNodes pn = model::bind_params(g, trace.params);
      NodeId xa = g.constant(std::move(view_a), "view_a");
      NodeId xb2 = g.constant(std::move(view_b), "view_b");
      model::EmbeddingSet e1 = model::project(g, pn, trace.params, model::encode(g, pn, trace.params, xa),
                                              cfg.loss.epsilon);
      model::EmbeddingSet e2 = model::project(g, pn, trace.params, model::encode(g, pn, trace.params, xb2),
                                              cfg.loss.epsilon);
      losses::LossBreakdown bd = losses::total_loss(g, e1, e2, cfg.loss);

      if (!std::isfinite(bd.total))
        throw contract_error("pretrain: non-finite loss at step " + std::to_string(step) + " (ssl=" +
                             std::to_string(bd.ssl) + ", div=" + std::to_string(bd.div) + ", total=" +
                             std::to_string(bd.total) + ")");

      g.forward(bd.total_node);
      auto grads = g.backward(bd.total_node);

      std::vector<Tensor*> params = model::param_tensors(trace.params);
      std::vector<const Tensor*> gptrs;
      gptrs.reserve(params.size());
      for (NodeId id : pn.flat) gptrs.push_back(&grads.at(id));

      double lr = cfg.lr;
      if (cfg.cosine_lr)
        lr *= 0.5 * (1.0 + std::cos(3.14159265358979323846 * static_cast<double>(step - 1) /
                                    static_cast<double>(total_steps)));
      sgd_step(params, gptrs, opt, lr, cfg.momentum);

      trace.records.push_back({step, bd.ssl, bd.div, bd.total, bd.total_std});
    }
  }
  return trace;
}

ProbeResult probe_features(const Tensor& ftrain, const std::vector<int>& ytrain, int num_classes,
                           const Tensor& ftest, const ProbeConfig& pcfg) {
  if (pcfg.lr <= 0.0 || pcfg.epochs < 1) throw contract_error("probe: lr must be > 0 and epochs >= 1");
  if (ftrain.rank() != 2 || ftest.rank() != 2 || ftrain.extent(1) != ftest.extent(1))
    throw contract_error("probe: feature shapes " + shape_str(ftrain.shape()) + " vs " +
                         shape_str(ftest.shape()) + " are incompatible");
  if (ytrain.size() != ftrain.extent(0)) throw contract_error("probe: label count mismatch");
  if (num_classes < 2) throw contract_error("probe: need at least 2 classes");

  std::set<int> present(ytrain.begin(), ytrain.end());
  for (int c = 0; c < num_classes; ++c)
    if (!present.count(c))
      throw contract_error("probe: class " + std::to_string(c) + " absent from the labeled set");

  std::size_t n = ftrain.extent(0);
  std::size_t dim = ftrain.extent(1);
  std::size_t classes = static_cast<std::size_t>(num_classes);

  Tensor onehot({n, classes});
  for (std::size_t i = 0; i < n; ++i) onehot.at(i, static_cast<std::size_t>(ytrain[i])) = 1.0;

  model::DenseLayer probe;
  probe.w = Tensor({dim, classes});
  probe.b = Tensor({classes});
  SgdState opt;

  for (int epoch = 0; epoch < pcfg.epochs; ++epoch) {
    Graph g;
    NodeId w = g.leaf(probe.w, "probe.w");
    NodeId bias = g.leaf(probe.b, "probe.b");
    NodeId feats = g.constant(ftrain, "probe.features");
    NodeId logits = g.add_bias(g.matmul(feats, w), bias);
    NodeId lse = g.masked_lse_rows(logits, g.constant(Tensor::full({n, classes}, 1.0)));
    NodeId picked = g.reduce(g.mul(logits, g.constant(onehot)), 1, ReduceKind::Sum);
    NodeId loss = g.map(g.sum_all(g.sub(lse, picked)), MapKind::MulScalar, 1.0 / static_cast<double>(n));
    g.forward(loss);
    auto grads = g.backward(loss);
    sgd_step({&probe.w, &probe.b}, {&grads.at(w), &grads.at(bias)}, opt, pcfg.lr, 0.0);
  }

  ProbeResult res;
  res.probs = probe_apply(probe, ftest);
  res.weights = std::move(probe);
  return res;
}

Tensor probe_apply(const model::DenseLayer& probe, const Tensor& features) {
  return softmax_rows(add_bias(matmul(features, probe.w), probe.b));
}

ProbeResult linear_probe(const model::ModelParams& params, const data::Dataset& labeled,
                         const data::Dataset& test, const ProbeConfig& pcfg) {
  labeled.validate();
  test.validate();
  Tensor ftrain = model::encode_value(params, labeled.x);
  Tensor ftest = model::encode_value(params, test.x);
  return probe_features(ftrain, labeled.y, labeled.num_classes, ftest, pcfg);
}

std::uint64_t ensemble_member_seed(std::uint64_t seed, int member) {
  return seed ^ (static_cast<std::uint64_t>(member) * 0x9e3779b97f4a7c15ULL);
}

std::vector<TrainTrace> train_deep_ensemble(const data::Dataset& d, const TrainConfig& cfg,
                                            int members) {
  if (members < 1) throw contract_error("deep ensemble: need at least 1 member");
  std::vector<TrainTrace> out;
  out.reserve(static_cast<std::size_t>(members));
  for (int j = 0; j < members; ++j) {
    TrainConfig mc = cfg;
    mc.model.num_subnets = 1;
    mc.loss.lambda = 0.0;  // no spread is defined for a single head
    mc.seed = ensemble_member_seed(cfg.seed, j);
    mc.model.seed = ensemble_member_seed(cfg.model.seed, j);
    out.push_back(pretrain(d, mc));
  }
  return out;
}

Tensor ensemble_probe_probs(const std::vector<model::ModelParams>& members,
                            const data::Dataset& labeled, const data::Dataset& test,
                            const ProbeConfig& pcfg) {
  if (members.empty()) throw contract_error("ensemble probe: no members");
  Tensor avg;
  for (std::size_t j = 0; j < members.size(); ++j) {
    ProbeResult r = linear_probe(members[j], labeled, test, pcfg);
    if (j == 0) {
      avg = std::move(r.probs);
    } else {
      for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += r.probs[i];
    }
  }
  for (std::size_t i = 0; i < avg.size(); ++i) avg[i] /= static_cast<double>(members.size());
  return avg;
}

}  // namespace subens::train
