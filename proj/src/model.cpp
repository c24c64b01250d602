#include "subens/model.hpp"

#include <cmath>

#include "subens/rng.hpp"

namespace subens::model {

namespace {

constexpr std::uint64_t kEncoderTag = 1;
constexpr std::uint64_t kSubnetTag = 2;

DenseLayer glorot_layer(std::size_t fan_in, std::size_t fan_out, RngStream& rng) {
  DenseLayer layer;
  layer.w = Tensor({fan_in, fan_out});
  double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& x : layer.w.data()) x = rng.next_uniform(-s, s);
  layer.b = Tensor({fan_out});
  return layer;
}

std::vector<std::size_t> encoder_dims(const ModelConfig& cfg) {
  std::vector<std::size_t> dims;
  dims.push_back(cfg.input_dim);
  for (std::size_t w : cfg.encoder_layers) dims.push_back(w);
  dims.push_back(cfg.repr_dim);
  return dims;
}

}  // namespace

void ModelConfig::validate() const {
  if (input_dim == 0 || repr_dim == 0 || embed_dim == 0 || subnet_hidden == 0)
    throw contract_error("model config: all dimensions must be >= 1");
  if (num_subnets == 0) throw contract_error("model config: need at least one sub-network");
  for (std::size_t w : encoder_layers)
    if (w == 0) throw contract_error("model config: encoder layer widths must be >= 1");
  if (encoder_layers.empty() && input_dim != repr_dim)
    throw contract_error("model config: identity encoder requires input_dim == repr_dim, got " +
                         std::to_string(input_dim) + " vs " + std::to_string(repr_dim));
  if (subnet_depth != 1 && subnet_depth != 2)
    throw contract_error("model config: subnet_depth must be 1 or 2");
}

ModelParams init(const ModelConfig& cfg) {
  cfg.validate();
  ModelParams p;
  if (!cfg.encoder_layers.empty()) {
    auto dims = encoder_dims(cfg);
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
      RngStream rng(cfg.seed, kEncoderTag, i);
      p.encoder.push_back(glorot_layer(dims[i], dims[i + 1], rng));
    }
  }
  for (std::size_t m = 0; m < cfg.num_subnets; ++m) {
    RngStream rng(cfg.seed, kSubnetTag, m);
    std::vector<DenseLayer> head;
    if (cfg.subnet_depth == 1) {
      head.push_back(glorot_layer(cfg.repr_dim, cfg.embed_dim, rng));
    } else {
      head.push_back(glorot_layer(cfg.repr_dim, cfg.subnet_hidden, rng));
      head.push_back(glorot_layer(cfg.subnet_hidden, cfg.embed_dim, rng));
    }
    p.subnets.push_back(std::move(head));
  }
  return p;
}

std::vector<Tensor*> param_tensors(ModelParams& p) {
  std::vector<Tensor*> out;
  for (DenseLayer& l : p.encoder) {
    out.push_back(&l.w);
    out.push_back(&l.b);
  }
  for (auto& head : p.subnets)
    for (DenseLayer& l : head) {
      out.push_back(&l.w);
      out.push_back(&l.b);
    }
  return out;
}

std::vector<const Tensor*> param_tensors(const ModelParams& p) {
  std::vector<const Tensor*> out;
  for (const DenseLayer& l : p.encoder) {
    out.push_back(&l.w);
    out.push_back(&l.b);
  }
  for (const auto& head : p.subnets)
    for (const DenseLayer& l : head) {
      out.push_back(&l.w);
      out.push_back(&l.b);
    }
  return out;
}

std::vector<std::string> param_names(const ModelParams& p) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < p.encoder.size(); ++i) {
    out.push_back("enc." + std::to_string(i) + ".w");
    out.push_back("enc." + std::to_string(i) + ".b");
  }
  for (std::size_t m = 0; m < p.subnets.size(); ++m)
    for (std::size_t j = 0; j < p.subnets[m].size(); ++j) {
      out.push_back("head." + std::to_string(m) + "." + std::to_string(j) + ".w");
      out.push_back("head." + std::to_string(m) + "." + std::to_string(j) + ".b");
    }
  return out;
}

ParamNodes bind_params(Graph& g, const ModelParams& p, bool requires_grad) {
  ParamNodes pn;
  auto names = param_names(p);
  std::size_t idx = 0;
  for (const DenseLayer& l : p.encoder) {
    NodeId w = g.leaf(l.w, names[idx++], requires_grad);
    NodeId b = g.leaf(l.b, names[idx++], requires_grad);
    pn.encoder.emplace_back(w, b);
    pn.flat.push_back(w);
    pn.flat.push_back(b);
  }
  for (const auto& head : p.subnets) {
    std::vector<std::pair<NodeId, NodeId>> nodes;
    for (const DenseLayer& l : head) {
      NodeId w = g.leaf(l.w, names[idx++], requires_grad);
      NodeId b = g.leaf(l.b, names[idx++], requires_grad);
      nodes.emplace_back(w, b);
      pn.flat.push_back(w);
      pn.flat.push_back(b);
    }
    pn.subnets.push_back(std::move(nodes));
  }
  return pn;
}

NodeId encode(Graph& g, const ParamNodes& pn, const ModelParams& p, NodeId x) {
  // with no encoder layers the representation is the input itself, and the
  // expected width is whatever the heads consume
  std::size_t want = p.encoder.empty() ? p.subnets.front().front().w.extent(0)
                                       : p.encoder.front().w.extent(0);
  if (g.value(x).rank() != 2 || g.value(x).extent(1) != want)
    throw contract_error("encode: input shape " + shape_str(g.value(x).shape()) +
                         " does not match encoder input dim " + std::to_string(want));
  if (p.encoder.empty()) return x;
  NodeId h = x;
  for (std::size_t i = 0; i < pn.encoder.size(); ++i) {
    h = g.add_bias(g.matmul(h, pn.encoder[i].first), pn.encoder[i].second);
    if (i + 1 < pn.encoder.size()) h = g.map(h, MapKind::Relu);
  }
  return h;
}

EmbeddingSet project(Graph& g, const ParamNodes& pn, const ModelParams& p, NodeId b, double epsilon) {
  if (epsilon <= 0.0) throw contract_error("project: epsilon must be positive");
  if (g.value(b).rank() != 2 || g.value(b).extent(1) != p.subnets.front().front().w.extent(0))
    throw contract_error("project: representation shape " + shape_str(g.value(b).shape()) +
                         " does not match head input dim " +
                         std::to_string(p.subnets.front().front().w.extent(0)));
  std::vector<NodeId> zs;
  for (const auto& head : pn.subnets) {
    NodeId h = b;
    for (std::size_t j = 0; j < head.size(); ++j) {
      h = g.add_bias(g.matmul(h, head[j].first), head[j].second);
      if (j + 1 < head.size()) h = g.map(h, MapKind::Relu);
    }
    zs.push_back(h);
  }
  EmbeddingSet e;
  e.z = g.stack_mid(zs);
  e.mean = g.reduce(e.z, 1, ReduceKind::Mean);
  if (zs.size() >= 2) {
    NodeId var = g.reduce(e.z, 1, ReduceKind::VarUnbiased);
    e.std = g.map(g.map(var, MapKind::AddScalar, epsilon), MapKind::Sqrt);
  }
  return e;
}

Tensor encode_value(const ModelParams& p, const Tensor& x) {
  Graph g;
  ParamNodes pn = bind_params(g, p, /*requires_grad=*/false);
  NodeId xn = g.constant(x);
  return g.value(encode(g, pn, p, xn));
}

EmbeddingValues project_value(const ModelParams& p, const Tensor& b, double epsilon) {
  if (p.subnets.size() < 2)
    throw contract_error("project_value: embedding spread needs at least 2 sub-networks");
  Graph g;
  ParamNodes pn = bind_params(g, p, /*requires_grad=*/false);
  NodeId bn = g.constant(b);
  EmbeddingSet e = project(g, pn, p, bn, epsilon);
  return EmbeddingValues{g.value(e.z), g.value(e.mean), g.value(*e.std)};
}

}  // namespace subens::model
