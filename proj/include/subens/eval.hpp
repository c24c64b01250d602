#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "subens/data.hpp"
#include "subens/model.hpp"
#include "subens/tensor.hpp"

namespace subens::eval {

struct Prediction {
  Tensor probs;            // [n, C], rows sum to 1
  std::vector<int> labels;  // true classes

  void validate() const;
};

// (top-1 accuracy, mean negative log-likelihood). Argmax ties break toward
// the lowest class index; probabilities are floored at 1e-12 before the log.
std::pair<double, double> top1_nll(const Prediction& p);

// Expected calibration error over equal-width confidence bins: partition of
// (0,1] into B left-open intervals, confidence 0 assigned to the first bin.
double ece(const Prediction& p, int bins);

struct EceBin {
  double lo = 0.0, hi = 0.0;
  std::size_t count = 0;
  double mean_conf = 0.0;
  double acc = 0.0;
};
std::vector<EceBin> ece_bin_stats(const Prediction& p, int bins);

// Thresholded adaptive calibration error over all n*C class probabilities:
// entries below the threshold are dropped, survivors are sorted and cut into
// B near-equal groups (larger groups first), and each group's mean
// probability is compared with the empirical frequency of being correct.
double tace(const Prediction& p, int bins, double threshold);

// Mann-Whitney AUROC; higher score must mean "more out-of-distribution".
double auroc(const std::vector<double>& scores_in, const std::vector<double>& scores_out);

enum class OodKind { SubnetStd, Knn };

// Per-sample uncertainty scores. SubnetStd: head disagreement (mean embedding
// std). Knn: Euclidean distance to the nearest L2-normalized training
// representation. Higher means more out-of-distribution for both.
std::vector<double> ood_score(const model::ModelParams& params, double epsilon, const Tensor& x,
                              const data::Dataset& ref, OodKind kind);

// Fraction of points where two prediction vectors disagree, normalized by
// 1 - accuracy.
double diversity_disagreement(const std::vector<int>& preds_a, const std::vector<int>& preds_b,
                              double acc);

struct EvalReport {
  double acc = 0.0;
  double nll = 0.0;
  double ece = 0.0;
  double tace = 0.0;
  std::optional<double> auroc;
  std::optional<double> disagreement;
  int ece_bins = 15;
  int tace_bins = 15;
  double tace_threshold = 0.01;
  std::string dataset;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string note;

  void validate() const;
  std::string to_json() const;
  static std::string csv_header();
  std::string csv_row() const;
};

Prediction predict(Tensor probs, std::vector<int> labels);

}  // namespace subens::eval
