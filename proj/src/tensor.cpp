#include "subens/tensor.hpp"

#include <cmath>
#include <cstdint>

namespace subens {

namespace {

std::size_t g_parallel_grain = std::size_t{1} << 16;

std::size_t checked_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) {
    if (e == 0) throw contract_error("tensor extents must be positive, got shape " + shape_str(shape));
    n *= e;
  }
  return n;
}

[[noreturn]] void domain_fail(const char* op, std::size_t index, double value) {
  throw contract_error(std::string(op) + ": domain violation at index " + std::to_string(index) +
                       " (value " + std::to_string(value) + ")");
}

double apply_one(MapKind kind, double c, double x, const char* opname, std::size_t i) {
  switch (kind) {
    case MapKind::Relu: return x > 0.0 ? x : 0.0;
    case MapKind::Sqrt:
      if (x < 0.0) domain_fail(opname, i, x);
      return std::sqrt(x);
    case MapKind::Exp: return std::exp(x);
    case MapKind::Log:
      if (x <= 0.0) domain_fail(opname, i, x);
      return std::log(x);
    case MapKind::Negate: return -x;
    case MapKind::AddScalar: return x + c;
    case MapKind::MulScalar: return x * c;
    case MapKind::HingeBelow: return c - x > 0.0 ? c - x : 0.0;
    case MapKind::Recip:
      if (x == 0.0) domain_fail(opname, i, x);
      return 1.0 / x;
  }
  throw contract_error("map: unknown kind");
}

struct AxisSplit {
  std::size_t outer, n, inner;
};

AxisSplit split_axis(const Tensor& t, std::size_t axis) {
  if (axis >= t.rank())
    throw contract_error("reduce: axis " + std::to_string(axis) + " out of range for rank " +
                         std::to_string(t.rank()));
  AxisSplit s{1, t.extent(axis), 1};
  for (std::size_t i = 0; i < axis; ++i) s.outer *= t.extent(i);
  for (std::size_t i = axis + 1; i < t.rank(); ++i) s.inner *= t.extent(i);
  return s;
}

std::vector<std::size_t> drop_axis(const std::vector<std::size_t>& shape, std::size_t axis) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < shape.size(); ++i)
    if (i != axis) out.push_back(shape[i]);
  if (out.empty()) out.push_back(1);  // full reduction of rank-1 yields a scalar tensor
  return out;
}

double reduce_one(const double* base, std::size_t n, std::size_t stride, ReduceKind kind) {
  if (kind == ReduceKind::Sum || kind == ReduceKind::Mean) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += base[j * stride];
    return kind == ReduceKind::Sum ? s : s / static_cast<double>(n);
  }
  // unbiased variance, two-pass
  double mean = 0.0;
  for (std::size_t j = 0; j < n; ++j) mean += base[j * stride];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double d = base[j * stride] - mean;
    ss += d * d;
  }
  return ss / static_cast<double>(n - 1);
}

}  // namespace

std::string shape_str(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
  data_.assign(checked_product(shape_), 0.0);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (checked_product(shape_) != data_.size())
    throw contract_error("tensor shape " + shape_str(shape_) + " does not match data length " +
                         std::to_string(data_.size()));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double v) {
  Tensor t(std::move(shape));
  for (double& x : t.data_) x = v;
  return t;
}

std::size_t Tensor::extent(std::size_t axis) const {
  if (axis >= shape_.size())
    throw contract_error("axis " + std::to_string(axis) + " out of range for shape " + shape_str(shape_));
  return shape_[axis];
}

bool Tensor::all_finite() const {
  for (double x : data_)
    if (!std::isfinite(x)) return false;
  return true;
}

void set_parallel_grain(std::size_t min_work) { g_parallel_grain = min_work; }
std::size_t parallel_grain() { return g_parallel_grain; }

// ---------------------------------------------------------------------------
// serial reference kernels
// ---------------------------------------------------------------------------

namespace ref {

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(0))
    throw contract_error("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  std::size_t r = a.extent(0), k = a.extent(1), c = b.extent(1);
  Tensor out({r, c});
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      double s = 0.0;
      for (std::size_t l = 0; l < k; ++l) s += a.at(i, l) * b.at(l, j);
      out.at(i, j) = s;
    }
  }
  return out;
}

Tensor reduce(const Tensor& t, std::size_t axis, ReduceKind kind) {
  AxisSplit sp = split_axis(t, axis);
  if (kind == ReduceKind::VarUnbiased && sp.n < 2)
    throw contract_error("reduce: unbiased variance needs extent >= 2 along axis " + std::to_string(axis));
  Tensor out(drop_axis(t.shape(), axis));
  const double* src = t.data().data();
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t i = 0; i < sp.inner; ++i)
      out[o * sp.inner + i] = reduce_one(src + (o * sp.n) * sp.inner + i, sp.n, sp.inner, kind);
  return out;
}

Tensor map(const Tensor& t, MapKind kind, double c) {
  Tensor out(t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = apply_one(kind, c, t[i], "map", i);
  return out;
}

}  // namespace ref

// ---------------------------------------------------------------------------
// primary kernels (OpenMP above the grain threshold)
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(0))
    throw contract_error("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  std::size_t r = a.extent(0), k = a.extent(1), c = b.extent(1);
  if (r * k * c < g_parallel_grain) return ref::matmul(a, b);
  Tensor out({r, c});
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(r); ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      double s = 0.0;
      for (std::size_t l = 0; l < k; ++l) s += a.at(static_cast<std::size_t>(i), l) * b.at(l, j);
      out.at(static_cast<std::size_t>(i), j) = s;
    }
  }
  return out;
}

Tensor reduce(const Tensor& t, std::size_t axis, ReduceKind kind) {
  AxisSplit sp = split_axis(t, axis);
  if (kind == ReduceKind::VarUnbiased && sp.n < 2)
    throw contract_error("reduce: unbiased variance needs extent >= 2 along axis " + std::to_string(axis));
  if (t.size() < g_parallel_grain) return ref::reduce(t, axis, kind);
  Tensor out(drop_axis(t.shape(), axis));
  const double* src = t.data().data();
#pragma omp parallel for schedule(static) collapse(2)
  for (std::int64_t o = 0; o < static_cast<std::int64_t>(sp.outer); ++o)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(sp.inner); ++i)
      out[static_cast<std::size_t>(o) * sp.inner + static_cast<std::size_t>(i)] = reduce_one(
          src + (static_cast<std::size_t>(o) * sp.n) * sp.inner + static_cast<std::size_t>(i), sp.n,
          sp.inner, kind);
  return out;
}

Tensor map(const Tensor& t, MapKind kind, double c) {
  if (t.size() < g_parallel_grain) return ref::map(t, kind, c);
  Tensor out(t.shape());
  // domain checks happen inside apply_one; rethrowing out of a parallel
  // region is not allowed, so scan first
  if (kind == MapKind::Sqrt || kind == MapKind::Log || kind == MapKind::Recip)
    for (std::size_t i = 0; i < t.size(); ++i) (void)apply_one(kind, c, t[i], "map", i);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(t.size()); ++i)
    out[static_cast<std::size_t>(i)] =
        apply_one(kind, c, t[static_cast<std::size_t>(i)], "map", static_cast<std::size_t>(i));
  return out;
}

// ---------------------------------------------------------------------------
// structural / binary ops (always serial; they are memory-bound and tiny here)
// ---------------------------------------------------------------------------

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw contract_error("transpose: expected rank-2, got " + shape_str(a.shape()));
  std::size_t r = a.extent(0), c = a.extent(1);
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(j, i) = a.at(i, j);
  return out;
}

namespace {
void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    throw contract_error(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}
}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape("mul", a, b);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

Tensor add_bias(const Tensor& m, const Tensor& bias) {
  if (m.rank() != 2 || bias.rank() != 1 || bias.extent(0) != m.extent(1))
    throw contract_error("add_bias: incompatible shapes " + shape_str(m.shape()) + " and " +
                         shape_str(bias.shape()));
  Tensor out(m.shape());
  for (std::size_t i = 0; i < m.extent(0); ++i)
    for (std::size_t j = 0; j < m.extent(1); ++j) out.at(i, j) = m.at(i, j) + bias[j];
  return out;
}

Tensor rows_scale(const Tensor& m, const Tensor& v) {
  if (m.rank() != 2 || v.rank() != 1 || v.extent(0) != m.extent(0))
    throw contract_error("rows_scale: incompatible shapes " + shape_str(m.shape()) + " and " +
                         shape_str(v.shape()));
  Tensor out(m.shape());
  for (std::size_t i = 0; i < m.extent(0); ++i)
    for (std::size_t j = 0; j < m.extent(1); ++j) out.at(i, j) = m.at(i, j) * v[i];
  return out;
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(1))
    throw contract_error("concat_rows: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  Tensor out({a.extent(0) + b.extent(0), a.extent(1)});
  std::size_t na = a.size();
  for (std::size_t i = 0; i < na; ++i) out[i] = a[i];
  for (std::size_t i = 0; i < b.size(); ++i) out[na + i] = b[i];
  return out;
}

Tensor stack_mid(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw contract_error("stack_mid: no inputs");
  const Tensor& first = parts.front();
  if (first.rank() != 2) throw contract_error("stack_mid: expected rank-2 inputs");
  std::size_t n = first.extent(0), q = first.extent(1), m = parts.size();
  for (const Tensor& p : parts) check_same_shape("stack_mid", first, p);
  Tensor out({n, m, q});
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t o = 0; o < q; ++o) out.at(k, j, o) = parts[j].at(k, o);
  return out;
}

double sum_all(const Tensor& t) {
  double s = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) s += t[i];
  return s;
}

}  // namespace subens
