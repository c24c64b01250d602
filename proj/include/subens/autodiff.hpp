#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "subens/tensor.hpp"

namespace subens {

using NodeId = std::size_t;

enum class OpKind {
  Leaf,
  Matmul,
  Transpose,
  Add,
  Sub,
  Mul,
  AddBias,
  RowsScale,
  ConcatRows,
  StackMid,
  Reduce,
  Map,
  SumAll,
  MaskedLseRows,
};

struct Node {
  OpKind op = OpKind::Leaf;
  std::vector<NodeId> inputs;
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  bool has_grad = false;
  std::size_t axis = 0;
  ReduceKind reduce_kind = ReduceKind::Sum;
  MapKind map_kind = MapKind::Relu;
  double scalar = 0.0;
  std::string name;  // leaves only
};

// Define-by-run computation graph. Node values are computed eagerly at
// construction; creation order is the topological order. A graph has a single
// writer; distinct graphs may be used concurrently.
class Graph {
 public:
  NodeId leaf(Tensor value, std::string name = "", bool requires_grad = true);
  NodeId constant(Tensor value, std::string name = "");

  NodeId matmul(NodeId a, NodeId b);
  NodeId transpose(NodeId a);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId add_bias(NodeId m, NodeId bias);
  NodeId rows_scale(NodeId m, NodeId v);
  NodeId concat_rows(NodeId a, NodeId b);
  NodeId stack_mid(const std::vector<NodeId>& parts);
  NodeId reduce(NodeId t, std::size_t axis, ReduceKind kind);
  NodeId map(NodeId t, MapKind kind, double c = 0.0);
  NodeId sum_all(NodeId t);
  // Per-row log-sum-exp over cells where mask != 0, max-shifted for
  // stability; a row with a single active cell equal to x returns exactly x.
  // mask must not require gradients.
  NodeId masked_lse_rows(NodeId m, NodeId mask);

  const Tensor& value(NodeId id) const;
  const Tensor& grad(NodeId id) const;  // throws unless backward reached id
  bool has_grad(NodeId id) const;
  std::size_t num_nodes() const { return nodes_.size(); }
  const std::vector<NodeId>& leaves() const { return leaves_; }
  const std::string& name(NodeId id) const;

  // Replaces a leaf value (same shape) and marks the graph stale; the next
  // forward() recomputes every node.
  void set_leaf(NodeId id, Tensor v);

  // Recomputes stale nodes in creation order and returns the scalar at root.
  double forward(NodeId root);

  // Reverse-mode sweep from root (forward must have run). Gradients of
  // fan-out nodes accumulate by addition in reverse creation order, so the
  // result is deterministic. Returns the gradient for every grad-requiring
  // leaf, keyed by node id.
  std::map<NodeId, Tensor> backward(NodeId root);

  // Activity pattern of every Relu/HingeBelow node, one byte per element.
  // Two perturbed forwards with different signatures straddle a kink.
  std::vector<std::uint8_t> kink_signature() const;

 private:
  NodeId push(Node n);
  void check_id(NodeId id) const;
  void compute_value(Node& n);

  std::vector<Node> nodes_;
  std::vector<NodeId> leaves_;
  bool stale_ = false;
  bool forward_done_ = false;
};

struct LeafCheck {
  NodeId leaf = 0;
  std::string name;
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // coordinates whose perturbation straddled a kink
  bool pass = true;
};

struct GradcheckReport {
  std::vector<LeafCheck> leaves;
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  bool pass = true;
  double step = 0.0;
  double tol = 0.0;
};

// Central finite differences (f(x+h) - f(x-h)) / 2h against backward() for
// every coordinate of every grad-requiring leaf. Relative error is
// |a-b| / max(|a|, |b|, 1e-8).
GradcheckReport gradcheck(Graph& g, NodeId root, double step, double tol);

}  // namespace subens
