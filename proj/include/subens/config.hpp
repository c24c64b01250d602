#pragma once

#include <cstdint>
#include <string>

#include "subens/data.hpp"
#include "subens/eval.hpp"
#include "subens/train.hpp"

namespace subens::cli {

struct DataConfig {
  std::string source = "synthetic";  // synthetic | idx | csv
  int classes = 4;
  int per_class = 350;
  int dim = 16;
  double spread = 0.25;
  double train_frac = 5.0 / 7.0;  // 1000 train / 400 test at the default sizes
  double label_frac = 1.0;
  std::string idx_images;
  std::string idx_labels;
  std::string csv_path;
};

struct EvalConfig {
  int ece_bins = 15;
  int tace_bins = 15;
  double tace_threshold = 0.01;
  int ood_level = 5;
};

// Flat INI-style experiment file: [section] headers, key=value pairs, '#'
// comments. Every field has a default, so an empty file is a runnable
// experiment. to_text() emits a canonical form that reparses to an identical
// config; its FNV-1a hash identifies the run.
struct ExperimentConfig {
  std::string name = "exp";
  std::uint64_t seed = 0;
  std::string out_dir = "runs";

  DataConfig data;
  model::ModelConfig model;
  losses::LossConfig loss;
  data::AugmentConfig augment;
  EvalConfig eval;
  train::ProbeConfig probe;

  int epochs = 30;
  std::size_t batch_size = 64;
  double lr = 0.05;
  double momentum = 0.9;
  bool cosine_lr = false;
  int ensemble_members = 0;  // > 0 switches pretraining to a deep ensemble of baselines

  static ExperimentConfig parse_text(const std::string& text);
  static ExperimentConfig from_file(const std::string& path);
  std::string to_text() const;
  std::string hash() const;

  // "section.key=value"; the shorthand keys M, lambda, alpha and temperature
  // address the matching loss/model fields.
  void apply_override(const std::string& assignment);
  void set_value(const std::string& section, const std::string& key, const std::string& value);

  data::Dataset make_dataset() const;
  train::TrainConfig train_config(std::size_t input_dim) const;
};

}  // namespace subens::cli
