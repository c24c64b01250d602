#include "subens/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace subens {

namespace {

void accumulate(Node& n, const Tensor& g) {
  if (!n.requires_grad) return;
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape());
    n.has_grad = true;
  }
  for (std::size_t i = 0; i < g.size(); ++i) n.grad[i] += g[i];
}

}  // namespace

NodeId Graph::push(Node n) {
  for (NodeId in : n.inputs) check_id(in);
  if (n.op != OpKind::Leaf) {
    for (NodeId in : n.inputs)
      if (nodes_[in].requires_grad) n.requires_grad = true;
    compute_value(n);
  }
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

void Graph::check_id(NodeId id) const {
  if (id >= nodes_.size()) throw contract_error("graph: node id " + std::to_string(id) + " out of range");
}

NodeId Graph::leaf(Tensor value, std::string name, bool requires_grad) {
  Node n;
  n.op = OpKind::Leaf;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.name = std::move(name);
  nodes_.push_back(std::move(n));
  NodeId id = nodes_.size() - 1;
  leaves_.push_back(id);
  return id;
}

NodeId Graph::constant(Tensor value, std::string name) {
  return leaf(std::move(value), std::move(name), false);
}

NodeId Graph::matmul(NodeId a, NodeId b) {
  Node n;
  n.op = OpKind::Matmul;
  n.inputs = {a, b};
  return push(std::move(n));
}

NodeId Graph::transpose(NodeId a) {
  Node n;
  n.op = OpKind::Transpose;
  n.inputs = {a};
  return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
  Node n;
  n.op = OpKind::Add;
  n.inputs = {a, b};
  return push(std::move(n));
}

NodeId Graph::sub(NodeId a, NodeId b) {
  Node n;
  n.op = OpKind::Sub;
  n.inputs = {a, b};
  return push(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b) {
  Node n;
  n.op = OpKind::Mul;
  n.inputs = {a, b};
  return push(std::move(n));
}

NodeId Graph::add_bias(NodeId m, NodeId bias) {
  Node n;
  n.op = OpKind::AddBias;
  n.inputs = {m, bias};
  return push(std::move(n));
}

NodeId Graph::rows_scale(NodeId m, NodeId v) {
  Node n;
  n.op = OpKind::RowsScale;
  n.inputs = {m, v};
  return push(std::move(n));
}

NodeId Graph::concat_rows(NodeId a, NodeId b) {
  Node n;
  n.op = OpKind::ConcatRows;
  n.inputs = {a, b};
  return push(std::move(n));
}

NodeId Graph::stack_mid(const std::vector<NodeId>& parts) {
  Node n;
  n.op = OpKind::StackMid;
  n.inputs = parts;
  return push(std::move(n));
}

NodeId Graph::reduce(NodeId t, std::size_t axis, ReduceKind kind) {
  Node n;
  n.op = OpKind::Reduce;
  n.inputs = {t};
  n.axis = axis;
  n.reduce_kind = kind;
  return push(std::move(n));
}

NodeId Graph::map(NodeId t, MapKind kind, double c) {
  Node n;
  n.op = OpKind::Map;
  n.inputs = {t};
  n.map_kind = kind;
  n.scalar = c;
  return push(std::move(n));
}

NodeId Graph::sum_all(NodeId t) {
  Node n;
  n.op = OpKind::SumAll;
  n.inputs = {t};
  return push(std::move(n));
}

NodeId Graph::masked_lse_rows(NodeId m, NodeId mask) {
  check_id(mask);
  if (nodes_[mask].requires_grad)
    throw contract_error("masked_lse_rows: mask must not require gradients");
  Node n;
  n.op = OpKind::MaskedLseRows;
  n.inputs = {m, mask};
  return push(std::move(n));
}

void Graph::compute_value(Node& n) {
  auto in = [&](std::size_t i) -> const Tensor& { return nodes_[n.inputs[i]].value; };
  switch (n.op) {
    case OpKind::Leaf:
      return;
    case OpKind::Matmul:
      n.value = subens::matmul(in(0), in(1));
      return;
    case OpKind::Transpose:
      n.value = subens::transpose(in(0));
      return;
    case OpKind::Add:
      n.value = subens::add(in(0), in(1));
      return;
    case OpKind::Sub:
      n.value = subens::sub(in(0), in(1));
      return;
    case OpKind::Mul:
      n.value = subens::mul(in(0), in(1));
      return;
    case OpKind::AddBias:
      n.value = subens::add_bias(in(0), in(1));
      return;
    case OpKind::RowsScale:
      n.value = subens::rows_scale(in(0), in(1));
      return;
    case OpKind::ConcatRows:
      n.value = subens::concat_rows(in(0), in(1));
      return;
    case OpKind::StackMid: {
      std::vector<Tensor> parts;
      parts.reserve(n.inputs.size());
      for (NodeId id : n.inputs) parts.push_back(nodes_[id].value);
      n.value = subens::stack_mid(parts);
      return;
    }
    case OpKind::Reduce:
      n.value = subens::reduce(in(0), n.axis, n.reduce_kind);
      return;
    case OpKind::Map:
      if (n.map_kind == MapKind::Sqrt) {
        // d(sqrt)/dx blows up at 0; the loss construction keeps arguments
        // >= epsilon, anything else is a caller bug
        const Tensor& x = in(0);
        for (std::size_t i = 0; i < x.size(); ++i)
          if (x[i] == 0.0)
            throw contract_error("graph sqrt: derivative undefined at 0 (index " + std::to_string(i) + ")");
      }
      n.value = subens::map(in(0), n.map_kind, n.scalar);
      return;
    case OpKind::SumAll:
      n.value = Tensor::scalar(subens::sum_all(in(0)));
      return;
    case OpKind::MaskedLseRows: {
      const Tensor& m = in(0);
      const Tensor& mask = in(1);
      if (m.rank() != 2 || !m.same_shape(mask))
        throw contract_error("masked_lse_rows: need rank-2 inputs of equal shape, got " +
                             shape_str(m.shape()) + " and " + shape_str(mask.shape()));
      std::size_t rows = m.extent(0), cols = m.extent(1);
      Tensor out({rows});
      for (std::size_t r = 0; r < rows; ++r) {
        double mx = 0.0;
        bool any = false;
        for (std::size_t c = 0; c < cols; ++c)
          if (mask.at(r, c) != 0.0 && (!any || m.at(r, c) > mx)) {
            mx = m.at(r, c);
            any = true;
          }
        if (!any) throw contract_error("masked_lse_rows: row " + std::to_string(r) + " has no active cells");
        double s = 0.0;
        for (std::size_t c = 0; c < cols; ++c)
          if (mask.at(r, c) != 0.0) s += std::exp(m.at(r, c) - mx);
        out[r] = mx + std::log(s);
      }
      n.value = std::move(out);
      return;
    }
  }
  throw contract_error("graph: unknown op");
}

const Tensor& Graph::value(NodeId id) const {
  check_id(id);
  return nodes_[id].value;
}

const Tensor& Graph::grad(NodeId id) const {
  check_id(id);
  if (!nodes_[id].has_grad) throw contract_error("graph: node " + std::to_string(id) + " has no gradient");
  return nodes_[id].grad;
}

bool Graph::has_grad(NodeId id) const {
  check_id(id);
  return nodes_[id].has_grad;
}

const std::string& Graph::name(NodeId id) const {
  check_id(id);
  return nodes_[id].name;
}

void Graph::set_leaf(NodeId id, Tensor v) {
  check_id(id);
  if (nodes_[id].op != OpKind::Leaf) throw contract_error("graph: set_leaf on non-leaf node");
  if (!nodes_[id].value.same_shape(v))
    throw contract_error("graph: set_leaf shape mismatch " + shape_str(nodes_[id].value.shape()) +
                         " vs " + shape_str(v.shape()));
  nodes_[id].value = std::move(v);
  stale_ = true;
  forward_done_ = false;
}

double Graph::forward(NodeId root) {
  check_id(root);
  if (nodes_[root].value.size() != 1)
    throw contract_error("forward: root must be scalar, got shape " + shape_str(nodes_[root].value.shape()));
  if (stale_) {
    for (Node& n : nodes_)
      if (n.op != OpKind::Leaf) compute_value(n);
    stale_ = false;
  }
  forward_done_ = true;
  return nodes_[root].value[0];
}

std::map<NodeId, Tensor> Graph::backward(NodeId root) {
  check_id(root);
  if (!forward_done_) throw contract_error("backward: forward must run first");
  if (nodes_[root].value.size() != 1) throw contract_error("backward: root must be scalar");

  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  accumulate(nodes_[root], Tensor::scalar(1.0));

  for (std::size_t idx = root + 1; idx-- > 0;) {
    Node& n = nodes_[idx];
    if (!n.has_grad || n.op == OpKind::Leaf) continue;
    const Tensor& g = n.grad;
    auto inval = [&](std::size_t i) -> const Tensor& { return nodes_[n.inputs[i]].value; };
    auto innode = [&](std::size_t i) -> Node& { return nodes_[n.inputs[i]]; };
    switch (n.op) {
      case OpKind::Leaf:
        break;
      case OpKind::Matmul:
        if (innode(0).requires_grad) accumulate(innode(0), subens::matmul(g, subens::transpose(inval(1))));
        if (innode(1).requires_grad) accumulate(innode(1), subens::matmul(subens::transpose(inval(0)), g));
        break;
      case OpKind::Transpose:
        accumulate(innode(0), subens::transpose(g));
        break;
      case OpKind::Add:
        accumulate(innode(0), g);
        accumulate(innode(1), g);
        break;
      case OpKind::Sub:
        accumulate(innode(0), g);
        accumulate(innode(1), subens::map(g, MapKind::Negate));
        break;
      case OpKind::Mul:
        if (innode(0).requires_grad) accumulate(innode(0), subens::mul(g, inval(1)));
        if (innode(1).requires_grad) accumulate(innode(1), subens::mul(g, inval(0)));
        break;
      case OpKind::AddBias: {
        accumulate(innode(0), g);
        if (innode(1).requires_grad) accumulate(innode(1), subens::reduce(g, 0, ReduceKind::Sum));
        break;
      }
      case OpKind::RowsScale: {
        if (innode(0).requires_grad) accumulate(innode(0), subens::rows_scale(g, inval(1)));
        if (innode(1).requires_grad)
          accumulate(innode(1), subens::reduce(subens::mul(g, inval(0)), 1, ReduceKind::Sum));
        break;
      }
      case OpKind::ConcatRows: {
        std::size_t ra = inval(0).extent(0), cols = inval(0).extent(1);
        Tensor ga({ra, cols});
        Tensor gb({inval(1).extent(0), cols});
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] = g[i];
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] = g[ga.size() + i];
        accumulate(innode(0), ga);
        accumulate(innode(1), gb);
        break;
      }
      case OpKind::StackMid: {
        std::size_t nrows = n.value.extent(0), m = n.value.extent(1), q = n.value.extent(2);
        for (std::size_t j = 0; j < m; ++j) {
          if (!innode(j).requires_grad) continue;
          Tensor gp({nrows, q});
          for (std::size_t k = 0; k < nrows; ++k)
            for (std::size_t o = 0; o < q; ++o) gp.at(k, o) = g.at(k, j, o);
          accumulate(innode(j), gp);
        }
        break;
      }
      case OpKind::Reduce: {
        const Tensor& x = inval(0);
        std::size_t outer = 1, inner = 1, cnt = x.extent(n.axis);
        for (std::size_t i = 0; i < n.axis; ++i) outer *= x.extent(i);
        for (std::size_t i = n.axis + 1; i < x.rank(); ++i) inner *= x.extent(i);
        Tensor gx(x.shape());
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t i = 0; i < inner; ++i) {
            double go = g[o * inner + i];
            if (n.reduce_kind == ReduceKind::Sum) {
              for (std::size_t j = 0; j < cnt; ++j) gx[(o * cnt + j) * inner + i] = go;
            } else if (n.reduce_kind == ReduceKind::Mean) {
              double v = go / static_cast<double>(cnt);
              for (std::size_t j = 0; j < cnt; ++j) gx[(o * cnt + j) * inner + i] = v;
            } else {
              double mean = 0.0;
              for (std::size_t j = 0; j < cnt; ++j) mean += x[(o * cnt + j) * inner + i];
              mean /= static_cast<double>(cnt);
              double scale = 2.0 * go / static_cast<double>(cnt - 1);
              for (std::size_t j = 0; j < cnt; ++j)
                gx[(o * cnt + j) * inner + i] = scale * (x[(o * cnt + j) * inner + i] - mean);
            }
          }
        }
        accumulate(innode(0), gx);
        break;
      }
      case OpKind::Map: {
        const Tensor& x = inval(0);
        Tensor gx(x.shape());
        switch (n.map_kind) {
          case MapKind::Relu:
            for (std::size_t i = 0; i < x.size(); ++i) gx[i] = x[i] > 0.0 ? g[i] : 0.0;
            break;
          case MapKind::Sqrt:
            for (std::size_t i = 0; i < x.size(); ++i) gx[i] = 0.5 * g[i] / n.value[i];
            break;
          case MapKind::Exp:
            for (std::size_t i = 0; i < x.size(); ++i) gx[i] = g[i] * n.value[i];
            break;
          case MapKind::Log:
            for (std::size_t i = 0; i < x.size(); ++i) gx[i] = g[i] / x[i];
            break;
          case MapKind::Negate:
            for (std::size_t i = 0; i < x.size(); ++i) gx[i] = -g[i];
            break;
          case MapKind::AddScalar:
            for (std::size_t i = 0; i < x.size(); ++i) gx[i] = g[i];
            break;
          case MapKind::MulScalar:
            for (std::size_t i = 0; i < x.size(); ++i) gx[i] = g[i] * n.scalar;
            break;
          case MapKind::HingeBelow:
            // derivative 0 at the kink itself: once the hinge is inactive the
            // loss is flat
            for (std::size_t i = 0; i < x.size(); ++i) gx[i] = x[i] < n.scalar ? -g[i] : 0.0;
            break;
          case MapKind::Recip:
            for (std::size_t i = 0; i < x.size(); ++i) gx[i] = -g[i] / (x[i] * x[i]);
            break;
        }
        accumulate(innode(0), gx);
        break;
      }
      case OpKind::SumAll: {
        accumulate(innode(0), Tensor::full(inval(0).shape(), g[0]));
        break;
      }
      case OpKind::MaskedLseRows: {
        const Tensor& m = inval(0);
        const Tensor& mask = inval(1);
        Tensor gm(m.shape());
        for (std::size_t r = 0; r < m.extent(0); ++r)
          for (std::size_t c = 0; c < m.extent(1); ++c)
            if (mask.at(r, c) != 0.0) gm.at(r, c) = g[r] * std::exp(m.at(r, c) - n.value[r]);
        accumulate(innode(0), gm);
        break;
      }
    }
  }

  std::map<NodeId, Tensor> out;
  for (NodeId id : leaves_) {
    if (!nodes_[id].requires_grad) continue;
    out[id] = nodes_[id].has_grad ? nodes_[id].grad : Tensor(nodes_[id].value.shape());
  }
  return out;
}

std::vector<std::uint8_t> Graph::kink_signature() const {
  std::vector<std::uint8_t> sig;
  for (const Node& n : nodes_) {
    if (n.op != OpKind::Map) continue;
    if (n.map_kind != MapKind::Relu && n.map_kind != MapKind::HingeBelow) continue;
    const Tensor& x = nodes_[n.inputs[0]].value;
    for (std::size_t i = 0; i < x.size(); ++i)
      sig.push_back(n.map_kind == MapKind::Relu ? (x[i] > 0.0 ? 1 : 0) : (x[i] < n.scalar ? 1 : 0));
  }
  return sig;
}

GradcheckReport gradcheck(Graph& g, NodeId root, double step, double tol) {
  if (step <= 0.0 || tol <= 0.0) throw contract_error("gradcheck: step and tol must be positive");
  GradcheckReport report;
  report.step = step;
  report.tol = tol;

  g.forward(root);
  auto grads = g.backward(root);

  for (NodeId id : g.leaves()) {
    auto it = grads.find(id);
    if (it == grads.end()) continue;
    LeafCheck lc;
    lc.leaf = id;
    lc.name = g.name(id);
    const Tensor base = g.value(id);
    for (std::size_t i = 0; i < base.size(); ++i) {
      Tensor perturbed = base;
      perturbed[i] = base[i] + step;
      g.set_leaf(id, perturbed);
      double fp = g.forward(root);
      auto sig_p = g.kink_signature();
      perturbed[i] = base[i] - step;
      g.set_leaf(id, perturbed);
      double fm = g.forward(root);
      auto sig_m = g.kink_signature();
      if (sig_p != sig_m) {
        ++lc.skipped;
        continue;
      }
      double fd = (fp - fm) / (2.0 * step);
      double a = it->second[i];
      double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-8});
      lc.max_rel_err = std::max(lc.max_rel_err, rel);
      ++lc.checked;
    }
    g.set_leaf(id, base);
    lc.pass = lc.max_rel_err < tol;
    report.max_rel_err = std::max(report.max_rel_err, lc.max_rel_err);
    report.checked += lc.checked;
    report.skipped += lc.skipped;
    report.pass = report.pass && lc.pass;
    report.leaves.push_back(std::move(lc));
  }
  g.forward(root);  // leave values consistent with the restored leaves
  return report;
}

}  // namespace subens
