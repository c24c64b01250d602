#include "subens/config.hpp"

#include <fstream>
#include <sstream>

#include "subens/strfmt.hpp"

namespace subens::cli {

namespace {

std::uint64_t parse_u64(const std::string& v, const std::string& where) {
  try {
    std::size_t used = 0;
    unsigned long long x = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return static_cast<std::uint64_t>(x);
  } catch (const std::exception&) {
    throw contract_error("config: expected unsigned integer for " + where + ", got '" + v + "'");
  }
}

long parse_int(const std::string& v, const std::string& where) {
  try {
    std::size_t used = 0;
    long x = std::stol(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw contract_error("config: expected integer for " + where + ", got '" + v + "'");
  }
}

double parse_real(const std::string& v, const std::string& where) {
  try {
    std::size_t used = 0;
    double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw contract_error("config: expected real for " + where + ", got '" + v + "'");
  }
}

bool parse_bool(const std::string& v, const std::string& where) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw contract_error("config: expected true/false for " + where + ", got '" + v + "'");
}

std::vector<std::size_t> parse_size_list(const std::string& v, const std::string& where) {
  std::vector<std::size_t> out;
  if (trim(v).empty()) return out;
  for (const std::string& part : split_str(v, ','))
    out.push_back(static_cast<std::size_t>(parse_u64(trim(part), where)));
  return out;
}

std::string size_list_str(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s;
}

}  // namespace

void ExperimentConfig::set_value(const std::string& section, const std::string& key,
                                 const std::string& value) {
  const std::string where = section + "." + key;
  if (section == "experiment") {
    if (key == "name") name = value;
    else if (key == "seed") seed = parse_u64(value, where);
    else if (key == "out") out_dir = value;
    else throw contract_error("config: unknown key " + where);
  } else if (section == "data") {
    if (key == "source") {
      if (value != "synthetic" && value != "idx" && value != "csv")
        throw contract_error("config: data.source must be synthetic, idx or csv");
      data.source = value;
    } else if (key == "classes") data.classes = static_cast<int>(parse_int(value, where));
    else if (key == "per_class") data.per_class = static_cast<int>(parse_int(value, where));
    else if (key == "dim") data.dim = static_cast<int>(parse_int(value, where));
    else if (key == "spread") data.spread = parse_real(value, where);
    else if (key == "train_frac") data.train_frac = parse_real(value, where);
    else if (key == "label_frac") data.label_frac = parse_real(value, where);
    else if (key == "idx_images") data.idx_images = value;
    else if (key == "idx_labels") data.idx_labels = value;
    else if (key == "csv_path") data.csv_path = value;
    else throw contract_error("config: unknown key " + where);
  } else if (section == "model") {
    if (key == "encoder_layers") model.encoder_layers = parse_size_list(value, where);
    else if (key == "repr_dim") model.repr_dim = parse_u64(value, where);
    else if (key == "num_subnets") model.num_subnets = parse_u64(value, where);
    else if (key == "subnet_hidden") model.subnet_hidden = parse_u64(value, where);
    else if (key == "embed_dim") model.embed_dim = parse_u64(value, where);
    else if (key == "subnet_depth") model.subnet_depth = static_cast<int>(parse_int(value, where));
    else throw contract_error("config: unknown key " + where);
  } else if (section == "loss") {
    if (key == "temperature") loss.temperature = parse_real(value, where);
    else if (key == "alpha") loss.alpha = parse_real(value, where);
    else if (key == "lambda") loss.lambda = parse_real(value, where);
    else if (key == "epsilon") loss.epsilon = parse_real(value, where);
    else throw contract_error("config: unknown key " + where);
  } else if (section == "augment") {
    if (key == "noise_sigma") augment.noise_sigma = parse_real(value, where);
    else if (key == "mask_prob") augment.mask_prob = parse_real(value, where);
    else throw contract_error("config: unknown key " + where);
  } else if (section == "train") {
    if (key == "epochs") epochs = static_cast<int>(parse_int(value, where));
    else if (key == "batch_size") batch_size = parse_u64(value, where);
    else if (key == "lr") lr = parse_real(value, where);
    else if (key == "momentum") momentum = parse_real(value, where);
    else if (key == "cosine_lr") cosine_lr = parse_bool(value, where);
    else if (key == "ensemble_members") ensemble_members = static_cast<int>(parse_int(value, where));
    else throw contract_error("config: unknown key " + where);
  } else if (section == "probe") {
    if (key == "lr") probe.lr = parse_real(value, where);
    else if (key == "epochs") probe.epochs = static_cast<int>(parse_int(value, where));
    else throw contract_error("config: unknown key " + where);
  } else if (section == "eval") {
    if (key == "ece_bins") eval.ece_bins = static_cast<int>(parse_int(value, where));
    else if (key == "tace_bins") eval.tace_bins = static_cast<int>(parse_int(value, where));
    else if (key == "tace_threshold") eval.tace_threshold = parse_real(value, where);
    else if (key == "ood_level") eval.ood_level = static_cast<int>(parse_int(value, where));
    else throw contract_error("config: unknown key " + where);
  } else {
    throw contract_error("config: unknown section [" + section + "]");
  }
}

ExperimentConfig ExperimentConfig::parse_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw contract_error("config: malformed section header at line " + std::to_string(lineno));
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw contract_error("config: expected key=value at line " + std::to_string(lineno));
    if (section.empty())
      throw contract_error("config: key outside any section at line " + std::to_string(lineno));
    cfg.set_value(section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw contract_error("config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str());
}

std::string ExperimentConfig::to_text() const {
  std::string s;
  s += "[experiment]\n";
  s += "name=" + name + "\n";
  s += "seed=" + std::to_string(seed) + "\n";
  s += "out=" + out_dir + "\n\n";
  s += "[data]\n";
  s += "source=" + data.source + "\n";
  s += "classes=" + std::to_string(data.classes) + "\n";
  s += "per_class=" + std::to_string(data.per_class) + "\n";
  s += "dim=" + std::to_string(data.dim) + "\n";
  s += "spread=" + fmt_double(data.spread) + "\n";
  s += "train_frac=" + fmt_double(data.train_frac) + "\n";
  s += "label_frac=" + fmt_double(data.label_frac) + "\n";
  s += "idx_images=" + data.idx_images + "\n";
  s += "idx_labels=" + data.idx_labels + "\n";
  s += "csv_path=" + data.csv_path + "\n\n";
  s += "[model]\n";
  s += "encoder_layers=" + size_list_str(model.encoder_layers) + "\n";
  s += "repr_dim=" + std::to_string(model.repr_dim) + "\n";
  s += "num_subnets=" + std::to_string(model.num_subnets) + "\n";
  s += "subnet_hidden=" + std::to_string(model.subnet_hidden) + "\n";
  s += "embed_dim=" + std::to_string(model.embed_dim) + "\n";
  s += "subnet_depth=" + std::to_string(model.subnet_depth) + "\n\n";
  s += "[loss]\n";
  s += "temperature=" + fmt_double(loss.temperature) + "\n";
  s += "alpha=" + fmt_double(loss.alpha) + "\n";
  s += "lambda=" + fmt_double(loss.lambda) + "\n";
  s += "epsilon=" + fmt_double(loss.epsilon) + "\n\n";
  s += "[augment]\n";
  s += "noise_sigma=" + fmt_double(augment.noise_sigma) + "\n";
  s += "mask_prob=" + fmt_double(augment.mask_prob) + "\n\n";
  s += "[train]\n";
  s += "epochs=" + std::to_string(epochs) + "\n";
  s += "batch_size=" + std::to_string(batch_size) + "\n";
  s += "lr=" + fmt_double(lr) + "\n";
  s += "momentum=" + fmt_double(momentum) + "\n";
  s += std::string("cosine_lr=") + (cosine_lr ? "true" : "false") + "\n";
  s += "ensemble_members=" + std::to_string(ensemble_members) + "\n\n";
  s += "[probe]\n";
  s += "lr=" + fmt_double(probe.lr) + "\n";
  s += "epochs=" + std::to_string(probe.epochs) + "\n\n";
  s += "[eval]\n";
  s += "ece_bins=" + std::to_string(eval.ece_bins) + "\n";
  s += "tace_bins=" + std::to_string(eval.tace_bins) + "\n";
  s += "tace_threshold=" + fmt_double(eval.tace_threshold) + "\n";
  s += "ood_level=" + std::to_string(eval.ood_level) + "\n";
  return s;
}

std::string ExperimentConfig::hash() const {
  // identifies the computation: the experiment name and output directory do
  // not change any result, so they stay out of the hash
  ExperimentConfig canon = *this;
  canon.name = "";
  canon.out_dir = "";
  return fnv1a_hex(canon.to_text());
}

void ExperimentConfig::apply_override(const std::string& assignment) {
  std::size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    throw contract_error("override: expected key=value, got '" + assignment + "'");
  std::string key = trim(assignment.substr(0, eq));
  std::string value = trim(assignment.substr(eq + 1));
  if (key == "M") key = "model.num_subnets";
  else if (key == "lambda") key = "loss.lambda";
  else if (key == "alpha") key = "loss.alpha";
  else if (key == "temperature") key = "loss.temperature";
  std::size_t dot = key.find('.');
  if (dot == std::string::npos)
    throw contract_error("override: key must be section.key, got '" + key + "'");
  set_value(key.substr(0, dot), key.substr(dot + 1), value);
}

data::Dataset ExperimentConfig::make_dataset() const {
  if (data.source == "synthetic")
    return data::gen_synthetic(data.classes, data.per_class, data.dim, data.spread, seed);
  if (data.source == "idx") return data::load_idx(data.idx_images, data.idx_labels);
  return data::load_csv(data.csv_path);
}

train::TrainConfig ExperimentConfig::train_config(std::size_t input_dim) const {
  train::TrainConfig tc;
  tc.epochs = epochs;
  tc.batch_size = batch_size;
  tc.lr = lr;
  tc.momentum = momentum;
  tc.cosine_lr = cosine_lr;
  tc.seed = seed;
  tc.loss = loss;
  tc.model = model;
  tc.model.input_dim = input_dim;
  tc.model.seed = seed;
  tc.augment = augment;
  return tc;
}

}  // namespace subens::cli
