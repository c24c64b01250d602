#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "subens/autodiff.hpp"
#include "subens/tensor.hpp"

namespace subens::model {

// Encoder plus M independent projection heads. Each head maps the shared
// representation (dim repr_dim) to an embedding (dim embed_dim); heads never
// share parameter storage.
struct ModelConfig {
  std::size_t input_dim = 16;
  std::vector<std::size_t> encoder_layers = {32};  // hidden widths; empty means identity encoder
  std::size_t repr_dim = 16;
  std::size_t num_subnets = 5;
  std::size_t subnet_hidden = 16;
  std::size_t embed_dim = 8;
  int subnet_depth = 2;  // 1: single linear layer, 2: linear-relu-linear
  std::uint64_t seed = 0;

  void validate() const;
};

struct DenseLayer {
  Tensor w;  // [in, out]
  Tensor b;  // [out]
};

struct ModelParams {
  std::vector<DenseLayer> encoder;               // empty for the identity encoder
  std::vector<std::vector<DenseLayer>> subnets;  // one weight set per head
};

// Glorot-uniform weights, zero biases. Fully determined by cfg.seed; every
// head draws from its own (seed, head-index) stream so heads start distinct.
ModelParams init(const ModelConfig& cfg);

// Flat views over the parameter tensors in a stable order (encoder layers
// first, then heads); names match the checkpoint tensor directory.
std::vector<Tensor*> param_tensors(ModelParams& p);
std::vector<const Tensor*> param_tensors(const ModelParams& p);
std::vector<std::string> param_names(const ModelParams& p);

// Parameter leaves registered on a graph, mirroring ModelParams.
struct ParamNodes {
  std::vector<std::pair<NodeId, NodeId>> encoder;               // (w, b)
  std::vector<std::vector<std::pair<NodeId, NodeId>>> subnets;  // per head
  std::vector<NodeId> flat;                                     // same order as param_tensors
};

ParamNodes bind_params(Graph& g, const ModelParams& p, bool requires_grad = true);

// Per-sample embeddings of all heads plus their per-coordinate mean and
// standard deviation across heads. std is absent when there is a single head
// (no spread is defined then).
struct EmbeddingSet {
  NodeId z = 0;     // [N, M, q]
  NodeId mean = 0;  // [N, q]
  std::optional<NodeId> std;  // [N, q], sqrt(var + epsilon)
};

// x [N, input_dim] -> representation [N, repr_dim], recorded on the graph.
NodeId encode(Graph& g, const ParamNodes& pn, const ModelParams& p, NodeId x);

// Runs every head on the shared representation and assembles the embedding
// statistics; epsilon is added to the variance before the square root.
EmbeddingSet project(Graph& g, const ParamNodes& pn, const ModelParams& p, NodeId b, double epsilon);

// Plain-value forward passes for evaluation paths (no gradients kept).
Tensor encode_value(const ModelParams& p, const Tensor& x);

struct EmbeddingValues {
  Tensor z;     // [N, M, q]
  Tensor mean;  // [N, q]
  Tensor std;   // [N, q]; requires at least two heads
};
EmbeddingValues project_value(const ModelParams& p, const Tensor& b, double epsilon);

}  // namespace subens::model
