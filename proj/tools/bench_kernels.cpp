// Times the OpenMP kernel path against the serial reference at a few sizes
// and checks that both produce identical bytes.

#include <chrono>
#include <cstdio>
#include <cstring>

#include "subens/rng.hpp"
#include "subens/tensor.hpp"

using namespace subens;

namespace {

template <class F>
double time_best_of(int reps, F&& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    f();
    auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
  }
  return best;
}

Tensor random_tensor(std::vector<std::size_t> shape, RngStream& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.next_gaussian();
  return t;
}

bool identical(const Tensor& a, const Tensor& b) {
  return a.same_shape(b) &&
         std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

int main() {
  RngStream rng(7);
  std::printf("%-28s %12s %12s %8s %6s\n", "kernel", "serial (s)", "parallel (s)", "speedup", "equal");

  for (std::size_t n : {128u, 256u, 512u}) {
    Tensor a = random_tensor({n, n}, rng);
    Tensor b = random_tensor({n, n}, rng);
    set_parallel_grain(SIZE_MAX);
    Tensor serial_out;
    double ts = time_best_of(3, [&] { serial_out = ref::matmul(a, b); });
    set_parallel_grain(0);
    Tensor par_out;
    double tp = time_best_of(3, [&] { par_out = matmul(a, b); });
    std::printf("matmul %4zux%-4zu              %12.6f %12.6f %7.2fx %6s\n", n, n, ts, tp, ts / tp,
                identical(serial_out, par_out) ? "yes" : "NO");
  }

  for (std::size_t n : {std::size_t{1} << 20, std::size_t{1} << 23}) {
    Tensor x = random_tensor({n}, rng);
    set_parallel_grain(SIZE_MAX);
    Tensor serial_out;
    double ts = time_best_of(3, [&] { serial_out = ref::map(x, MapKind::Exp); });
    set_parallel_grain(0);
    Tensor par_out;
    double tp = time_best_of(3, [&] { par_out = map(x, MapKind::Exp); });
    std::printf("map exp n=%-10zu         %12.6f %12.6f %7.2fx %6s\n", n, ts, tp, ts / tp,
                identical(serial_out, par_out) ? "yes" : "NO");
  }

  for (std::size_t rows : {std::size_t{1} << 14, std::size_t{1} << 17}) {
    Tensor x = random_tensor({rows, 64}, rng);
    set_parallel_grain(SIZE_MAX);
    Tensor serial_out;
    double ts = time_best_of(3, [&] { serial_out = ref::reduce(x, 1, ReduceKind::VarUnbiased); });
    set_parallel_grain(0);
    Tensor par_out;
    double tp = time_best_of(3, [&] { par_out = reduce(x, 1, ReduceKind::VarUnbiased); });
    std::printf("reduce var rows=%-9zu    %12.6f %12.6f %7.2fx %6s\n", rows, ts, tp, ts / tp,
                identical(serial_out, par_out) ? "yes" : "NO");
  }

  set_parallel_grain(std::size_t{1} << 16);
  return 0;
}
