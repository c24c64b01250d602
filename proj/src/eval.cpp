#include "subens/eval.hpp"

#include <algorithm>
#include <cmath>

#include "subens/strfmt.hpp"

namespace subens::eval {

namespace {

std::size_t argmax_row(const Tensor& probs, std::size_t r) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < probs.extent(1); ++c)
    if (probs.at(r, c) > probs.at(r, best)) best = c;
  return best;
}

Tensor normalize_rows(const Tensor& m) {
  Tensor out = m;
  for (std::size_t r = 0; r < m.extent(0); ++r) {
    double norm = 0.0;
    for (std::size_t c = 0; c < m.extent(1); ++c) norm += m.at(r, c) * m.at(r, c);
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    for (std::size_t c = 0; c < m.extent(1); ++c) out.at(r, c) /= norm;
  }
  return out;
}

}  // namespace

Prediction predict(Tensor probs, std::vector<int> labels) {
  Prediction p{std::move(probs), std::move(labels)};
  p.validate();
  return p;
}

void Prediction::validate() const {
  if (probs.rank() != 2) throw contract_error("prediction: probs must be [n, C]");
  if (labels.size() != probs.extent(0)) throw contract_error("prediction: label count mismatch");
  for (std::size_t r = 0; r < probs.extent(0); ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < probs.extent(1); ++c) {
      double v = probs.at(r, c);
      if (v < 0.0 || v > 1.0 || !std::isfinite(v))
        throw contract_error("prediction: probability out of [0,1] at row " + std::to_string(r));
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw contract_error("prediction: row " + std::to_string(r) + " sums to " + fmt_double(sum));
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= probs.extent(1))
      throw contract_error("prediction: label out of range at row " + std::to_string(r));
  }
}

std::pair<double, double> top1_nll(const Prediction& p) {
  std::size_t n = p.probs.extent(0);
  double correct = 0.0;
  double nll = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    if (argmax_row(p.probs, r) == static_cast<std::size_t>(p.labels[r])) correct += 1.0;
    double q = std::max(p.probs.at(r, static_cast<std::size_t>(p.labels[r])), 1e-12);
    nll -= std::log(q);
  }
  return {correct / static_cast<double>(n), nll / static_cast<double>(n)};
}

std::vector<EceBin> ece_bin_stats(const Prediction& p, int bins) {
  if (bins < 1) throw contract_error("ece: need at least 1 bin");
  std::size_t nb = static_cast<std::size_t>(bins);
  std::vector<EceBin> stats(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    stats[b].lo = static_cast<double>(b) / static_cast<double>(bins);
    stats[b].hi = static_cast<double>(b + 1) / static_cast<double>(bins);
  }
  std::size_t n = p.probs.extent(0);
  for (std::size_t r = 0; r < n; ++r) {
    std::size_t cls = argmax_row(p.probs, r);
    double conf = p.probs.at(r, cls);
    std::size_t b = nb - 1;
    for (std::size_t k = 0; k < nb; ++k)
      if (conf <= static_cast<double>(k + 1) / static_cast<double>(bins)) {
        b = k;
        break;
      }
    ++stats[b].count;
    stats[b].mean_conf += conf;
    if (cls == static_cast<std::size_t>(p.labels[r])) stats[b].acc += 1.0;
  }
  for (EceBin& s : stats) {
    if (s.count == 0) continue;
    s.mean_conf /= static_cast<double>(s.count);
    s.acc /= static_cast<double>(s.count);
  }
  return stats;
}

double ece(const Prediction& p, int bins) {
  auto stats = ece_bin_stats(p, bins);
  double n = static_cast<double>(p.probs.extent(0));
  double e = 0.0;
  for (const EceBin& s : stats)
    if (s.count > 0) e += (static_cast<double>(s.count) / n) * std::abs(s.acc - s.mean_conf);
  return e;
}

double tace(const Prediction& p, int bins, double threshold) {
  if (bins < 1) throw contract_error("tace: need at least 1 bin");
  if (threshold < 0.0 || threshold >= 1.0) throw contract_error("tace: threshold must be in [0,1)");

  struct Entry {
    double prob;
    std::size_t row, cls;
    bool hit;
  };
  std::vector<Entry> entries;
  for (std::size_t r = 0; r < p.probs.extent(0); ++r)
    for (std::size_t c = 0; c < p.probs.extent(1); ++c) {
      double v = p.probs.at(r, c);
      if (v < threshold) continue;
      entries.push_back({v, r, c, static_cast<std::size_t>(p.labels[r]) == c});
    }
  if (entries.empty()) throw contract_error("tace: no predictions above threshold");

  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.prob != b.prob) return a.prob < b.prob;
    if (a.row != b.row) return a.row < b.row;
    return a.cls < b.cls;
  });

  std::size_t total = entries.size();
  std::size_t nb = static_cast<std::size_t>(bins);
  std::size_t base = total / nb, rem = total % nb;
  double err = 0.0;
  std::size_t pos = 0;
  for (std::size_t g = 0; g < nb; ++g) {
    std::size_t size = base + (g < rem ? 1 : 0);
    if (size == 0) continue;
    double conf = 0.0, hit = 0.0;
    for (std::size_t i = 0; i < size; ++i) {
      conf += entries[pos + i].prob;
      hit += entries[pos + i].hit ? 1.0 : 0.0;
    }
    conf /= static_cast<double>(size);
    hit /= static_cast<double>(size);
    err += (static_cast<double>(size) / static_cast<double>(total)) * std::abs(hit - conf);
    pos += size;
  }
  return err;
}

double auroc(const std::vector<double>& scores_in, const std::vector<double>& scores_out) {
  if (scores_in.empty() || scores_out.empty()) throw contract_error("auroc: empty score list");
  struct Item {
    double score;
    bool out;
  };
  std::vector<Item> items;
  items.reserve(scores_in.size() + scores_out.size());
  for (double s : scores_in) items.push_back({s, false});
  for (double s : scores_out) items.push_back({s, true});
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.score < b.score; });

  // rank sum with average ranks over tie groups
  double rank_sum_out = 0.0;
  std::size_t i = 0;
  while (i < items.size()) {
    std::size_t j = i;
    while (j < items.size() && items[j].score == items[i].score) ++j;
    double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // (first + last) / 2, 1-based
    for (std::size_t k = i; k < j; ++k)
      if (items[k].out) rank_sum_out += avg_rank;
    i = j;
  }
  double n_out = static_cast<double>(scores_out.size());
  double n_in = static_cast<double>(scores_in.size());
  double u = rank_sum_out - n_out * (n_out + 1.0) / 2.0;
  return u / (n_in * n_out);
}

std::vector<double> ood_score(const model::ModelParams& params, double epsilon, const Tensor& x,
                              const data::Dataset& ref, OodKind kind) {
  std::vector<double> scores(x.extent(0));
  if (kind == OodKind::SubnetStd) {
    Tensor b = model::encode_value(params, x);
    model::EmbeddingValues ev = model::project_value(params, b, epsilon);
    std::size_t q = ev.std.extent(1);
    for (std::size_t k = 0; k < scores.size(); ++k) {
      double s = 0.0;
      for (std::size_t o = 0; o < q; ++o) s += ev.std.at(k, o);
      scores[k] = s / static_cast<double>(q);
    }
    return scores;
  }
  if (ref.n() == 0) throw contract_error("ood_score: knn needs a non-empty reference set");
  Tensor rq = normalize_rows(model::encode_value(params, x));
  Tensor rr = normalize_rows(model::encode_value(params, ref.x));
  std::size_t dim = rq.extent(1);
  for (std::size_t k = 0; k < scores.size(); ++k) {
    double best = 0.0;
    bool first = true;
    for (std::size_t j = 0; j < rr.extent(0); ++j) {
      double d2 = 0.0;
      for (std::size_t c = 0; c < dim; ++c) {
        double d = rq.at(k, c) - rr.at(j, c);
        d2 += d * d;
      }
      if (first || d2 < best) {
        best = d2;
        first = false;
      }
    }
    scores[k] = std::sqrt(best);
  }
  return scores;
}

double diversity_disagreement(const std::vector<int>& preds_a, const std::vector<int>& preds_b,
                              double acc) {
  if (preds_a.size() != preds_b.size() || preds_a.empty())
    throw contract_error("diversity_disagreement: prediction vectors must be non-empty and equal length");
  if (acc >= 1.0) throw contract_error("diversity disagreement undefined at perfect accuracy");
  double dis = 0.0;
  for (std::size_t i = 0; i < preds_a.size(); ++i)
    if (preds_a[i] != preds_b[i]) dis += 1.0;
  dis /= static_cast<double>(preds_a.size());
  return dis / (1.0 - acc);
}

void EvalReport::validate() const {
  auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in01(acc) || !in01(ece) || !in01(tace))
    throw contract_error("eval report: acc/ece/tace must be in [0,1]");
  if (auroc && !in01(*auroc)) throw contract_error("eval report: auroc must be in [0,1]");
  if (nll < 0.0) throw contract_error("eval report: nll must be >= 0");
}

std::string EvalReport::to_json() const {
  validate();
  std::string s = "{";
  s += "\"acc\":" + fmt_double(acc);
  s += ",\"nll\":" + fmt_double(nll);
  s += ",\"ece\":" + fmt_double(ece);
  s += ",\"tace\":" + fmt_double(tace);
  s += ",\"auroc\":" + (auroc ? fmt_double(*auroc) : "null");
  s += ",\"disagreement\":" + (disagreement ? fmt_double(*disagreement) : "null");
  s += ",\"ece_bins\":" + std::to_string(ece_bins);
  s += ",\"tace_bins\":" + std::to_string(tace_bins);
  s += ",\"tace_threshold\":" + fmt_double(tace_threshold);
  s += ",\"dataset\":\"" + dataset + "\"";
  s += ",\"seed\":" + std::to_string(seed);
  s += ",\"config_hash\":\"" + config_hash + "\"";
  s += ",\"note\":\"" + note + "\"";
  s += "}";
  return s;
}

std::string EvalReport::csv_header() {
  return "acc,nll,ece,tace,auroc,disagreement,dataset,seed,config_hash,note";
}

std::string EvalReport::csv_row() const {
  validate();
  std::string s;
  s += fmt_double(acc) + ",";
  s += fmt_double(nll) + ",";
  s += fmt_double(ece) + ",";
  s += fmt_double(tace) + ",";
  s += (auroc ? fmt_double(*auroc) : "") + ",";
  s += (disagreement ? fmt_double(*disagreement) : "") + ",";
  s += dataset + ",";
  s += std::to_string(seed) + ",";
  s += config_hash + ",";
  s += note;
  return s;
}

}  // namespace subens::eval
