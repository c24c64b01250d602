#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "subens/rng.hpp"
#include "subens/tensor.hpp"

namespace subens::data {

struct Dataset {
  Tensor x;            // [n, p]
  std::vector<int> y;  // labels in 0..num_classes-1
  int num_classes = 0;
  std::string name;
  std::string provenance;

  std::size_t n() const { return x.rank() >= 1 ? x.extent(0) : 0; }
  std::size_t dim() const { return x.rank() >= 2 ? x.extent(1) : 0; }
  void validate() const;
};

struct AugmentConfig {
  double noise_sigma = 0.25;
  double mask_prob = 0.1;
  std::uint64_t seed = 0;
};

// Gaussian blobs around class centers drawn uniformly on the unit sphere;
// spread is the isotropic noise scale (0 collapses every sample onto its
// center). Deterministic per seed.
Dataset gen_synthetic(int classes, int per_class, int dim, double spread, std::uint64_t seed);

// Two independent stochastic views of a batch: additive Gaussian noise
// followed by coordinate masking to zero. Never mutates the input.
std::pair<Tensor, Tensor> augment(const Tensor& x, const AugmentConfig& cfg, RngStream& draw);

// Test-time covariate shift at one of five graded severities: additive
// Gaussian noise with per-feature scale level * 0.1 * feature std. Labels are
// untouched.
Dataset corrupt(const Dataset& d, int level, std::uint64_t seed);

// IDX image/label pair (big-endian headers, magic 0x803 / 0x801); pixels are
// scaled to [0,1] and flattened.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// CSV with a header row, feature columns, and an integer label in the last
// column.
Dataset load_csv(const std::string& path);

struct Split {
  Dataset train;
  Dataset probe_labeled;  // stratified label_frac subsample of train
  Dataset test;
  std::vector<std::size_t> train_idx, probe_idx, test_idx;  // indices into the source dataset
};

Split split(const Dataset& d, double train_frac, double label_frac, std::uint64_t seed);

Dataset take(const Dataset& d, const std::vector<std::size_t>& idx);

}  // namespace subens::data
