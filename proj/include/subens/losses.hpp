#pragma once

#include <optional>

#include "subens/autodiff.hpp"
#include "subens/model.hpp"
#include "subens/tensor.hpp"

namespace subens::losses {

struct LossConfig {
  double temperature = 0.07;
  double alpha = 0.15;    // minimum per-coordinate spread the hinge pushes toward
  double lambda = 2.0;    // weight of the diversity term; 0 disables it
  double epsilon = 1e-4;  // added to the variance before the square root

  void validate() const;
};

struct LossBreakdown {
  double ssl = 0.0;
  double div = 0.0;
  double total = 0.0;      // ssl + lambda * div
  double total_std = 0.0;  // summed embedding std, averaged over the two views

  NodeId ssl_node = 0;
  NodeId total_node = 0;
  std::optional<NodeId> div_node;
  std::optional<NodeId> total_std_node;
};

// Normalized-temperature cross entropy over the 2N mean embeddings of the two
// views. Every row is an anchor; its positive is the counterpart view, the
// denominator runs over the 2N-1 other rows. Cosine similarity on L2
// normalized vectors; returns the mean over all 2N anchors.
NodeId ssl_loss(Graph& g, const model::EmbeddingSet& e1, const model::EmbeddingSet& e2,
                double temperature);

// Mean over the batch of the summed hinge penalties max(0, alpha - std) for
// both views. Needs at least two heads.
NodeId diversity_loss(Graph& g, const model::EmbeddingSet& e1, const model::EmbeddingSet& e2,
                      double alpha);

LossBreakdown total_loss(Graph& g, const model::EmbeddingSet& e1, const model::EmbeddingSet& e2,
                         const LossConfig& cfg);

// Closed form of the per-sample diversity gradient with respect to the raw
// embeddings z [N, M, q]:
//   0 where std >= alpha, else -(z - mean) / ((M-1) * std),
// with std = sqrt(unbiased variance across heads + epsilon). Verified against
// both reverse-mode gradients and central finite differences; independent of
// the graph machinery.
Tensor diversity_grad_oracle(const Tensor& z, double alpha, double epsilon);

}  // namespace subens::losses
