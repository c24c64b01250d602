#pragma once

#include <cstdint>
#include <vector>

#include "subens/data.hpp"
#include "subens/losses.hpp"
#include "subens/model.hpp"

namespace subens::train {

struct TrainConfig {
  int epochs = 30;
  std::size_t batch_size = 64;
  double lr = 0.05;
  double momentum = 0.9;
  bool cosine_lr = false;
  std::uint64_t seed = 0;
  losses::LossConfig loss;
  model::ModelConfig model;
  data::AugmentConfig augment;

  void validate() const;
};

struct StepRecord {
  std::size_t step = 0;  // 1-based optimizer step
  double ssl = 0.0;
  double div = 0.0;
  double total = 0.0;
  double total_std = 0.0;
};

struct TrainTrace {
  std::vector<StepRecord> records;
  model::ModelParams params;
};

// v <- momentum * v + g;  p <- p - lr * v
struct SgdState {
  std::vector<Tensor> velocity;
};
void sgd_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
              SgdState& state, double lr, double momentum);

// Self-supervised pretraining: shuffle, batch (last partial batch dropped),
// augment into two views, minimize the combined loss with SGD+momentum.
// Deterministic per seed. Aborts with step index and loss breakdown if the
// loss ever goes non-finite.
TrainTrace pretrain(const data::Dataset& d, const TrainConfig& cfg);

struct ProbeConfig {
  double lr = 0.1;
  int epochs = 100;  // full batch
};

struct ProbeResult {
  Tensor probs;  // [n_test, C], rows sum to 1
  model::DenseLayer weights;
};

// Softmax regression on frozen representations; the heads play no part here.
// Every class must appear in the labeled set.
ProbeResult linear_probe(const model::ModelParams& params, const data::Dataset& labeled,
                         const data::Dataset& test, const ProbeConfig& pcfg);

// Same probe on arbitrary feature rows (used for the raw-input baseline).
ProbeResult probe_features(const Tensor& ftrain, const std::vector<int>& ytrain, int num_classes,
                           const Tensor& ftest, const ProbeConfig& pcfg);

// Class probabilities of an already-trained probe on new features.
Tensor probe_apply(const model::DenseLayer& probe, const Tensor& features);

// Independent baseline runs (single head, diversity off), member j seeded by
// (seed, j) with member 0 keeping the base seed, so a 1-member ensemble
// coincides with the baseline run.
std::vector<TrainTrace> train_deep_ensemble(const data::Dataset& d, const TrainConfig& cfg,
                                            int members);

Tensor ensemble_probe_probs(const std::vector<model::ModelParams>& members,
                            const data::Dataset& labeled, const data::Dataset& test,
                            const ProbeConfig& pcfg);

std::uint64_t ensemble_member_seed(std::uint64_t seed, int member);

}  // namespace subens::train
