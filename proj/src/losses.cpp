#include "subens/losses.hpp"

#include <cmath>
#include <string>

namespace subens::losses {

void LossConfig::validate() const {
  if (temperature <= 0.0) throw contract_error("loss config: temperature must be > 0");
  if (alpha <= 0.0) throw contract_error("loss config: alpha must be > 0");
  if (lambda < 0.0) throw contract_error("loss config: lambda must be >= 0");
  if (epsilon <= 0.0) throw contract_error("loss config: epsilon must be > 0");
}

NodeId ssl_loss(Graph& g, const model::EmbeddingSet& e1, const model::EmbeddingSet& e2,
                double temperature) {
  if (temperature <= 0.0) throw contract_error("ssl_loss: temperature must be > 0");
  const Tensor& m1 = g.value(e1.mean);
  const Tensor& m2 = g.value(e2.mean);
  if (!m1.same_shape(m2))
    throw contract_error("ssl_loss: view shapes differ, " + shape_str(m1.shape()) + " vs " +
                         shape_str(m2.shape()));
  std::size_t n = m1.extent(0);
  std::size_t rows = 2 * n;

  NodeId u = g.concat_rows(e1.mean, e2.mean);
  NodeId sqnorm = g.reduce(g.mul(u, u), 1, ReduceKind::Sum);
  const Tensor& sq = g.value(sqnorm);
  for (std::size_t r = 0; r < rows; ++r)
    if (sq[r] == 0.0)
      throw contract_error("ssl_loss: zero-norm mean embedding at row " + std::to_string(r) +
                           " (cosine undefined)");
  NodeId inv_norm = g.map(g.map(sqnorm, MapKind::Sqrt), MapKind::Recip);
  NodeId unit = g.rows_scale(u, inv_norm);
  NodeId sim = g.map(g.matmul(unit, g.transpose(unit)), MapKind::MulScalar, 1.0 / temperature);

  Tensor others({rows, rows});
  Tensor positives({rows, rows});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < rows; ++c) others.at(r, c) = r == c ? 0.0 : 1.0;
    positives.at(r, (r + n) % rows) = 1.0;
  }
  NodeId denom = g.masked_lse_rows(sim, g.constant(std::move(others), "ssl.others"));
  NodeId pos = g.reduce(g.mul(sim, g.constant(std::move(positives), "ssl.positives")), 1, ReduceKind::Sum);
  NodeId per_anchor = g.sub(denom, pos);
  return g.map(g.sum_all(per_anchor), MapKind::MulScalar, 1.0 / static_cast<double>(rows));
}

NodeId diversity_loss(Graph& g, const model::EmbeddingSet& e1, const model::EmbeddingSet& e2,
                      double alpha) {
  if (alpha <= 0.0) throw contract_error("diversity_loss: alpha must be > 0");
  if (!e1.std || !e2.std)
    throw contract_error("diversity_loss: needs at least 2 sub-networks (no spread defined)");
  std::size_t n = g.value(*e1.std).extent(0);
  NodeId h1 = g.sum_all(g.map(*e1.std, MapKind::HingeBelow, alpha));
  NodeId h2 = g.sum_all(g.map(*e2.std, MapKind::HingeBelow, alpha));
  return g.map(g.add(h1, h2), MapKind::MulScalar, 1.0 / static_cast<double>(n));
}

LossBreakdown total_loss(Graph& g, const model::EmbeddingSet& e1, const model::EmbeddingSet& e2,
                         const LossConfig& cfg) {
  cfg.validate();
  LossBreakdown out;
  out.ssl_node = ssl_loss(g, e1, e2, cfg.temperature);
  out.ssl = g.value(out.ssl_node)[0];

  bool have_spread = e1.std && e2.std;
  if (cfg.lambda > 0.0 && !have_spread)
    throw contract_error("total_loss: diversity weight is positive but there is a single sub-network");

  if (have_spread) {
    out.div_node = diversity_loss(g, e1, e2, cfg.alpha);
    out.div = g.value(*out.div_node)[0];
    out.total_node = g.add(out.ssl_node, g.map(*out.div_node, MapKind::MulScalar, cfg.lambda));
    out.total_std_node =
        g.map(g.add(g.sum_all(*e1.std), g.sum_all(*e2.std)), MapKind::MulScalar, 0.5);
    out.total_std = g.value(*out.total_std_node)[0];
  } else {
    out.total_node = out.ssl_node;
  }
  out.total = g.value(out.total_node)[0];
  return out;
}

Tensor diversity_grad_oracle(const Tensor& z, double alpha, double epsilon) {
  if (z.rank() != 3) throw contract_error("diversity_grad_oracle: expected [N,M,q], got " + shape_str(z.shape()));
  std::size_t n = z.extent(0), m = z.extent(1), q = z.extent(2);
  if (m < 2) throw contract_error("diversity_grad_oracle: needs at least 2 sub-networks");
  if (epsilon < 0.0) throw contract_error("diversity_grad_oracle: epsilon must be >= 0");
  Tensor grad({n, m, q});
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t o = 0; o < q; ++o) {
      double mean = 0.0;
      for (std::size_t j = 0; j < m; ++j) mean += z.at(k, j, o);
      mean /= static_cast<double>(m);
      double ss = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        double d = z.at(k, j, o) - mean;
        ss += d * d;
      }
      double sigma = std::sqrt(ss / static_cast<double>(m - 1) + epsilon);
      if (sigma >= alpha || sigma == 0.0) continue;
      double scale = -1.0 / (static_cast<double>(m - 1) * sigma);
      for (std::size_t j = 0; j < m; ++j) grad.at(k, j, o) = scale * (z.at(k, j, o) - mean);
    }
  }
  return grad;
}

}  // namespace subens::losses
