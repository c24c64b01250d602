#include "subens/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace subens::data {

namespace {

constexpr std::uint64_t kCenterTag = 11;
constexpr std::uint64_t kSampleTag = 12;
constexpr std::uint64_t kCorruptTag = 13;
constexpr std::uint64_t kSplitTag = 14;
constexpr std::uint64_t kStratTag = 15;

std::uint32_t read_be_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw contract_error("idx: truncated header in " + path);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

std::string hex_str(std::uint32_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

}  // namespace

void Dataset::validate() const {
  if (n() == 0) throw contract_error("dataset: empty");
  if (y.size() != n()) throw contract_error("dataset: label count does not match sample count");
  for (int label : y)
    if (label < 0 || label >= num_classes)
      throw contract_error("dataset: label " + std::to_string(label) + " out of range for " +
                           std::to_string(num_classes) + " classes");
}

Dataset gen_synthetic(int classes, int per_class, int dim, double spread, std::uint64_t seed) {
  if (classes < 2) throw contract_error("gen_synthetic: need at least 2 classes");
  if (per_class < 1) throw contract_error("gen_synthetic: need at least 1 sample per class");
  if (dim < 2) throw contract_error("gen_synthetic: need dim >= 2");
  if (spread < 0.0) throw contract_error("gen_synthetic: spread must be >= 0");

  RngStream center_rng(seed, kCenterTag);
  std::vector<std::vector<double>> centers;
  for (int c = 0; c < classes; ++c) {
    std::vector<double> v(static_cast<std::size_t>(dim));
    double norm = 0.0;
    for (double& x : v) {
      x = center_rng.next_gaussian();
      norm += x * x;
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) norm = 1.0;
    for (double& x : v) x /= norm;
    centers.push_back(std::move(v));
  }

  RngStream noise_rng(seed, kSampleTag);
  std::size_t n = static_cast<std::size_t>(classes) * static_cast<std::size_t>(per_class);
  Dataset d;
  d.x = Tensor({n, static_cast<std::size_t>(dim)});
  d.y.resize(n);
  d.num_classes = classes;
  d.name = "synthetic";
  d.provenance = "generated";
  std::size_t row = 0;
  for (int c = 0; c < classes; ++c) {
    for (int i = 0; i < per_class; ++i, ++row) {
      d.y[row] = c;
      for (int j = 0; j < dim; ++j)
        d.x.at(row, static_cast<std::size_t>(j)) =
            centers[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)] +
            spread * noise_rng.next_gaussian();
    }
  }
  return d;
}

std::pair<Tensor, Tensor> augment(const Tensor& x, const AugmentConfig& cfg, RngStream& draw) {
  if (cfg.noise_sigma < 0.0) throw contract_error("augment: noise_sigma must be >= 0");
  if (cfg.mask_prob < 0.0 || cfg.mask_prob > 1.0)
    throw contract_error("augment: mask_prob must be in [0,1]");
  auto one_view = [&]() {
    Tensor v(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) v[i] = x[i] + cfg.noise_sigma * draw.next_gaussian();
    for (std::size_t i = 0; i < v.size(); ++i)
      if (draw.next_double() < cfg.mask_prob) v[i] = 0.0;
    return v;
  };
  Tensor a = one_view();
  Tensor b = one_view();
  return {std::move(a), std::move(b)};
}

Dataset corrupt(const Dataset& d, int level, std::uint64_t seed) {
  d.validate();
  if (level < 1 || level > 5)
    throw contract_error("corrupt: level must be in 1..5, got " + std::to_string(level));
  Tensor feat_std = map(reduce(d.x, 0, ReduceKind::VarUnbiased), MapKind::Sqrt);
  RngStream rng(seed, kCorruptTag, static_cast<std::uint64_t>(level));
  Dataset out = d;
  out.name = d.name + "_corrupt" + std::to_string(level);
  out.provenance = d.provenance + ";corrupt level " + std::to_string(level);
  double scale = 0.1 * static_cast<double>(level);
  for (std::size_t i = 0; i < out.x.extent(0); ++i)
    for (std::size_t j = 0; j < out.x.extent(1); ++j)
      out.x.at(i, j) += scale * feat_std[j] * rng.next_gaussian();
  return out;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw contract_error("idx: cannot open " + images_path);
  std::uint32_t magic = read_be_u32(img, images_path);
  if (magic != 0x00000803u)
    throw contract_error("idx: bad image magic 0x" + hex_str(magic) + " in " + images_path);
  std::uint32_t n = read_be_u32(img, images_path);
  std::uint32_t rows = read_be_u32(img, images_path);
  std::uint32_t cols = read_be_u32(img, images_path);

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw contract_error("idx: cannot open " + labels_path);
  std::uint32_t lmagic = read_be_u32(lab, labels_path);
  if (lmagic != 0x00000801u)
    throw contract_error("idx: bad label magic 0x" + hex_str(lmagic) + " in " + labels_path);
  std::uint32_t ln = read_be_u32(lab, labels_path);
  if (n != ln)
    throw contract_error("idx: image count " + std::to_string(n) + " does not match label count " +
                         std::to_string(ln));
  if (n == 0) throw contract_error("idx: empty dataset in " + images_path);

  std::size_t p = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  std::vector<unsigned char> pixels(static_cast<std::size_t>(n) * p);
  img.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (static_cast<std::size_t>(img.gcount()) != pixels.size())
    throw contract_error("idx: truncated image data in " + images_path);
  std::vector<unsigned char> labels(n);
  lab.read(reinterpret_cast<char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
  if (static_cast<std::size_t>(lab.gcount()) != labels.size())
    throw contract_error("idx: truncated label data in " + labels_path);

  Dataset d;
  d.x = Tensor({n, p});
  for (std::size_t i = 0; i < pixels.size(); ++i) d.x[i] = static_cast<double>(pixels[i]) / 255.0;
  d.y.resize(n);
  int max_label = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    d.y[i] = static_cast<int>(labels[i]);
    max_label = std::max(max_label, d.y[i]);
  }
  d.num_classes = max_label + 1;
  d.name = "idx";
  d.provenance = images_path;
  return d;
}

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw contract_error("csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw contract_error("csv: missing header row in " + path);

  std::vector<double> values;
  std::vector<int> labels;
  std::size_t cols = 0, lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        double v = std::stod(cell, &used);
        while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
        if (used != cell.size()) throw std::invalid_argument(cell);
        row.push_back(v);
      } catch (const std::exception&) {
        throw contract_error("csv: non-numeric cell '" + cell + "' at line " + std::to_string(lineno) +
                             " of " + path);
      }
    }
    if (row.size() < 2)
      throw contract_error("csv: line " + std::to_string(lineno) + " needs features and a label");
    if (cols == 0) cols = row.size();
    if (row.size() != cols)
      throw contract_error("csv: ragged row at line " + std::to_string(lineno) + " of " + path);
    double label = row.back();
    if (label != std::floor(label) || label < 0)
      throw contract_error("csv: label must be a non-negative integer at line " + std::to_string(lineno));
    labels.push_back(static_cast<int>(label));
    values.insert(values.end(), row.begin(), row.end() - 1);
  }
  if (labels.empty()) throw contract_error("csv: no data rows in " + path);

  Dataset d;
  d.x = Tensor({labels.size(), cols - 1}, std::move(values));
  d.y = std::move(labels);
  d.num_classes = *std::max_element(d.y.begin(), d.y.end()) + 1;
  d.name = "csv";
  d.provenance = path;
  return d;
}

Dataset take(const Dataset& d, const std::vector<std::size_t>& idx) {
  Dataset out;
  out.num_classes = d.num_classes;
  out.name = d.name;
  out.provenance = d.provenance;
  if (idx.empty()) return out;  // x stays rank-0, n() == 0
  out.x = Tensor({idx.size(), d.dim()});
  out.y.resize(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= d.n()) throw contract_error("take: index out of range");
    for (std::size_t j = 0; j < d.dim(); ++j) out.x.at(i, j) = d.x.at(idx[i], j);
    out.y[i] = d.y[idx[i]];
  }
  return out;
}

Split split(const Dataset& d, double train_frac, double label_frac, std::uint64_t seed) {
  d.validate();
  if (train_frac <= 0.0 || train_frac > 1.0)
    throw contract_error("split: train_frac must be in (0,1]");
  if (label_frac <= 0.0 || label_frac > 1.0)
    throw contract_error("split: label_frac must be in (0,1]");

  std::vector<std::size_t> order(d.n());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  RngStream rng(seed, kSplitTag);
  rng.shuffle(order);

  std::size_t n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(d.n())));
  n_train = std::min(std::max<std::size_t>(n_train, 1), d.n());

  Split s;
  s.train_idx.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());

  // stratified probe subset: per class, keep floor(label_frac * class size)
  // members chosen at random, emitted in train order
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(d.num_classes));
  for (std::size_t pos = 0; pos < s.train_idx.size(); ++pos)
    by_class[static_cast<std::size_t>(d.y[s.train_idx[pos]])].push_back(pos);
  std::vector<char> selected(s.train_idx.size(), 0);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    if (by_class[c].empty())
      throw contract_error("split: class " + std::to_string(c) + " absent from the training split");
    std::size_t want =
        static_cast<std::size_t>(std::floor(label_frac * static_cast<double>(by_class[c].size())));
    if (want == 0)
      throw contract_error("split: label_frac " + std::to_string(label_frac) +
                           " leaves class " + std::to_string(c) + " empty");
    RngStream crng(seed, kStratTag, c);
    crng.shuffle(by_class[c]);
    for (std::size_t i = 0; i < want; ++i) selected[by_class[c][i]] = 1;
  }
  for (std::size_t pos = 0; pos < s.train_idx.size(); ++pos)
    if (selected[pos]) s.probe_idx.push_back(s.train_idx[pos]);

  s.train = take(d, s.train_idx);
  s.probe_labeled = take(d, s.probe_idx);
  s.test = take(d, s.test_idx);
  return s;
}

}  // namespace subens::data
