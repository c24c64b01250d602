#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace subens {

// Violated precondition or broken invariant. The CLI maps these to exit code 1.
class contract_error : public std::runtime_error {
 public:
  explicit contract_error(const std::string& what) : std::runtime_error(what) {}
};

std::string shape_str(const std::vector<std::size_t>& shape);

// Dense n-dimensional array of doubles, flat row-major storage.
// Values are immutable by convention once handed to the graph; all free
// functions below are pure.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);  // zero-filled
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  static Tensor full(std::vector<std::size_t> shape, double v);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t extent(std::size_t axis) const;

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  double& at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

enum class ReduceKind { Sum, Mean, VarUnbiased };
enum class MapKind { Relu, Sqrt, Exp, Log, Negate, AddScalar, MulScalar, HingeBelow, Recip };

// Primary kernels. matmul/map/reduce run their element loops under OpenMP once
// the work size crosses parallel_grain(); below it they take the same code
// path as the serial reference. Each output element is owned by exactly one
// thread and computed in the same inner order as the reference, so results are
// bit-identical at any thread count.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_bias(const Tensor& m, const Tensor& bias);   // bias[c] added to every row
Tensor rows_scale(const Tensor& m, const Tensor& v);    // row r scaled by v[r]
Tensor concat_rows(const Tensor& a, const Tensor& b);
Tensor stack_mid(const std::vector<Tensor>& parts);     // M x [N,q] -> [N,M,q]
Tensor reduce(const Tensor& t, std::size_t axis, ReduceKind kind);
Tensor map(const Tensor& t, MapKind kind, double c = 0.0);
double sum_all(const Tensor& t);

// Serial reference kernels, kept for tests and the kernel benchmark.
namespace ref {
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor reduce(const Tensor& t, std::size_t axis, ReduceKind kind);
Tensor map(const Tensor& t, MapKind kind, double c = 0.0);
}  // namespace ref

// Work-size threshold below which the primary kernels stay serial.
// 0 forces the parallel path everywhere (used by tests and the benchmark).
void set_parallel_grain(std::size_t min_work);
std::size_t parallel_grain();

}  // namespace subens
