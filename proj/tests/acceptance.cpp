// End-to-end acceptance suite. Each case prints one PASS/FAIL line with the
// measured quantities so a run log documents the full verification.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "subens/checkpoint.hpp"
#include "subens/cli.hpp"
#include "subens/config.hpp"
#include "subens/eval.hpp"
#include "subens/train.hpp"

using namespace subens;
namespace fs = std::filesystem;

namespace {

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

void report(int number, const char* name, bool pass, const std::string& details) {
  std::printf("[criterion %d] %s: %s (%s)\n", number, name, pass ? "PASS" : "FAIL", details.c_str());
  std::fflush(stdout);
  CHECK_MESSAGE(pass, name, ": ", details);
}

Tensor random_tensor(std::vector<std::size_t> shape, RngStream& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = scale * rng.next_gaussian();
  return t;
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

// the synthetic benchmark: 4 classes, 16 features, 1000 train / 400 test
train::TrainConfig benchmark_config(std::uint64_t seed, double lambda) {
  train::TrainConfig tc;
  tc.epochs = 30;
  tc.batch_size = 64;
  tc.lr = 0.05;
  tc.momentum = 0.9;
  tc.seed = seed;
  tc.loss.lambda = lambda;
  tc.loss.alpha = 0.15;
  tc.loss.epsilon = 1e-4;
  tc.loss.temperature = 0.07;
  tc.model.input_dim = 16;
  tc.model.encoder_layers = {32};
  tc.model.repr_dim = 16;
  tc.model.num_subnets = 5;
  tc.model.subnet_hidden = 16;
  tc.model.embed_dim = 8;
  tc.model.seed = seed;
  tc.augment.noise_sigma = 0.25;
  tc.augment.mask_prob = 0.1;
  return tc;
}

struct BenchmarkRun {
  train::TrainTrace trace;
  data::Split split;
};

BenchmarkRun run_benchmark(std::uint64_t seed, double lambda) {
  data::Dataset d = data::gen_synthetic(4, 350, 16, 0.5, seed);
  BenchmarkRun out{{}, data::split(d, 5.0 / 7.0, 1.0, seed)};
  out.trace = train::pretrain(out.split.train, benchmark_config(seed, lambda));
  return out;
}

double final_epoch_mean_total_std(const train::TrainTrace& trace, int epochs) {
  std::size_t per_epoch = trace.records.size() / static_cast<std::size_t>(epochs);
  double sum = 0.0;
  for (std::size_t i = trace.records.size() - per_epoch; i < trace.records.size(); ++i)
    sum += trace.records[i].total_std;
  return sum / static_cast<double>(per_epoch);
}

double accuracy_of(const Tensor& probs, const std::vector<int>& labels) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < probs.extent(0); ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < probs.extent(1); ++c)
      if (probs.at(i, c) > probs.at(i, best)) best = c;
    if (static_cast<int>(best) == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(probs.extent(0));
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("1: reverse-mode gradients match finite differences on the full objective") {
  double t0 = now_seconds();
  losses::LossConfig lc;  // lambda 2, alpha 0.15, epsilon 1e-4, t 0.07
  bool all_pass = true;
  double worst = 0.0;
  std::size_t checked = 0, skipped = 0;
  int seeds_run = 0;

  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    model::ModelConfig mc;
    mc.input_dim = 6;
    mc.encoder_layers = {5};
    mc.repr_dim = 4;
    mc.num_subnets = 5;
    mc.subnet_hidden = 3;
    mc.embed_dim = 8;
    mc.seed = seed;
    model::ModelParams params = model::init(mc);

    bool built = false;
    for (std::uint64_t attempt = 0; attempt < 8 && !built; ++attempt) {
      RngStream rng(seed, 77, attempt);
      Graph g;
      model::ParamNodes pn = model::bind_params(g, params);
      NodeId xa = g.constant(random_tensor({4, 6}, rng));
      NodeId xb = g.constant(random_tensor({4, 6}, rng));
      model::EmbeddingSet e1 = model::project(g, pn, params, model::encode(g, pn, params, xa), lc.epsilon);
      model::EmbeddingSet e2 = model::project(g, pn, params, model::encode(g, pn, params, xb), lc.epsilon);
      losses::LossBreakdown bd;
      try {
        bd = losses::total_loss(g, e1, e2, lc);
      } catch (const contract_error&) {
        continue;  // relu-dead row made a mean embedding vanish; redraw
      }
      built = true;
      GradcheckReport rep = gradcheck(g, bd.total_node, 1e-5, 1e-4);
      all_pass = all_pass && rep.pass;
      worst = std::max(worst, rep.max_rel_err);
      checked += rep.checked;
      skipped += rep.skipped;
    }
    if (built) ++seeds_run;
  }
  double elapsed = now_seconds() - t0;
  bool ok = all_pass && seeds_run >= 20 && elapsed < 30.0;
  std::ostringstream ss;
  ss << "seeds=" << seeds_run << " max_rel_err=" << worst << " checked=" << checked
     << " skipped=" << skipped << " elapsed=" << elapsed << "s";
  report(1, "gradient correctness vs central differences", ok, ss.str());
}

TEST_CASE("2: closed-form diversity gradient matches reverse mode and finite differences") {
  RngStream rng(202);
  double alpha = 0.3, eps = 1e-4, step = 1e-5;
  Tensor z = random_tensor({6, 5, 4}, rng, 0.1);
  Tensor oracle = losses::diversity_grad_oracle(z, alpha, eps);

  // per-view hinge-sum graph (the oracle's objective, before batch averaging)
  Graph g;
  NodeId zn = g.leaf(z, "z");
  NodeId var = g.reduce(zn, 1, ReduceKind::VarUnbiased);
  NodeId sd = g.map(g.map(var, MapKind::AddScalar, eps), MapKind::Sqrt);
  NodeId root = g.sum_all(g.map(sd, MapKind::HingeBelow, alpha));
  g.forward(root);
  Tensor back = g.backward(root).at(zn);
  const Tensor& sigma = g.value(sd);

  // independent finite differences over a scalar re-evaluation of the loss
  auto loss_of = [&](const Tensor& zz) {
    double total = 0.0;
    for (std::size_t k = 0; k < zz.extent(0); ++k)
      for (std::size_t o = 0; o < zz.extent(2); ++o) {
        double mean = 0.0;
        for (std::size_t j = 0; j < zz.extent(1); ++j) mean += zz.at(k, j, o);
        mean /= static_cast<double>(zz.extent(1));
        double ss = 0.0;
        for (std::size_t j = 0; j < zz.extent(1); ++j)
          ss += (zz.at(k, j, o) - mean) * (zz.at(k, j, o) - mean);
        double s = std::sqrt(ss / static_cast<double>(zz.extent(1) - 1) + eps);
        total += std::max(0.0, alpha - s);
      }
    return total;
  };

  double worst_autodiff = 0.0, worst_fd = 0.0, worst_sum = 0.0;
  std::size_t compared = 0;
  for (std::size_t k = 0; k < z.extent(0); ++k)
    for (std::size_t o = 0; o < z.extent(2); ++o) {
      double head_sum = 0.0;
      bool near_kink = std::abs(sigma.at(k, o) - alpha) < 2.0 * step;
      for (std::size_t j = 0; j < z.extent(1); ++j) {
        head_sum += oracle.at(k, j, o);
        if (near_kink) continue;
        worst_autodiff = std::max(worst_autodiff, rel_err(oracle.at(k, j, o), back.at(k, j, o)));
        Tensor zp = z, zm = z;
        zp.at(k, j, o) += step;
        zm.at(k, j, o) -= step;
        double fd = (loss_of(zp) - loss_of(zm)) / (2.0 * step);
        worst_fd = std::max(worst_fd, rel_err(oracle.at(k, j, o), fd));
        ++compared;
      }
      worst_sum = std::max(worst_sum, std::abs(head_sum));
    }

  bool ok = compared > 0 && worst_autodiff < 1e-8 && worst_fd < 1e-4 && worst_sum < 1e-10;
  std::ostringstream ss;
  ss << "compared=" << compared << " vs_autodiff=" << worst_autodiff << " vs_fd=" << worst_fd
     << " head_sum=" << worst_sum;
  report(2, "diversity gradient closed form", ok, ss.str());
}

TEST_CASE("3: one SGD step on single-layer heads moves weights by -lr * oracle x input") {
  model::ModelConfig mc;
  mc.input_dim = 6;
  mc.encoder_layers = {};  // identity encoder
  mc.repr_dim = 6;
  mc.num_subnets = 4;
  mc.subnet_depth = 1;
  mc.embed_dim = 3;
  mc.seed = 11;
  model::ModelParams params = model::init(mc);

  RngStream rng(303);
  std::size_t n = 5;
  Tensor b1 = random_tensor({n, 6}, rng, 0.4);
  Tensor b2 = random_tensor({n, 6}, rng, 0.4);
  double alpha = 5.0, eps = 1e-4, lr = 0.01;

  Graph g;
  model::ParamNodes pn = model::bind_params(g, params);
  model::EmbeddingSet e1 = model::project(g, pn, params, g.constant(b1), eps);
  model::EmbeddingSet e2 = model::project(g, pn, params, g.constant(b2), eps);
  NodeId loss = losses::diversity_loss(g, e1, e2, alpha);
  g.forward(loss);
  auto grads = g.backward(loss);

  Tensor o1 = losses::diversity_grad_oracle(g.value(e1.z), alpha, eps);
  Tensor o2 = losses::diversity_grad_oracle(g.value(e2.z), alpha, eps);

  model::ModelParams stepped = params;
  std::vector<Tensor*> tensors = model::param_tensors(stepped);
  std::vector<const Tensor*> gptrs;
  for (NodeId id : pn.flat) gptrs.push_back(&grads.at(id));
  train::SgdState st;
  train::sgd_step(tensors, gptrs, st, lr, 0.0);

  double worst = 0.0;
  for (std::size_t m = 0; m < mc.num_subnets; ++m) {
    const Tensor& before = params.subnets[m][0].w;
    const Tensor& after = stepped.subnets[m][0].w;
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t o = 0; o < 3; ++o) {
        double chain = 0.0;
        for (std::size_t k = 0; k < n; ++k)
          chain += b1.at(k, i) * o1.at(k, m, o) + b2.at(k, i) * o2.at(k, m, o);
        double expected = -lr * chain / static_cast<double>(n);
        double got = after.at(i, o) - before.at(i, o);
        worst = std::max(worst, rel_err(expected, got));
      }
  }
  bool ok = worst < 1e-8;
  std::ostringstream ss;
  ss << "max_rel_err=" << worst;
  report(3, "SGD update structure on linear heads", ok, ss.str());
}

TEST_CASE("4: diversity pressure raises the final total embedding spread (3 of 3 seeds)") {
  double t0 = now_seconds();
  int larger = 0;
  std::ostringstream detail;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    BenchmarkRun with = run_benchmark(seed, 2.0);
    BenchmarkRun without = run_benchmark(seed, 0.0);
    double s_with = final_epoch_mean_total_std(with.trace, 30);
    double s_without = final_epoch_mean_total_std(without.trace, 30);
    if (s_with > s_without) ++larger;
    detail << "seed" << seed << "=" << s_with << ">" << s_without << " ";
  }
  double elapsed = now_seconds() - t0;
  bool ok = larger == 3 && elapsed < 120.0;
  detail << "elapsed=" << elapsed << "s";
  report(4, "total std trend with vs without the diversity term", ok, detail.str());
}

TEST_CASE("5: calibration of the 5-head model vs the lambda=0 baseline") {
  double t0 = now_seconds();
  int ece_wins = 0;
  double acc_ours = 0.0, acc_base = 0.0;
  std::ostringstream detail;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    BenchmarkRun ours = run_benchmark(seed, 2.0);
    BenchmarkRun base = run_benchmark(seed, 0.0);
    train::ProbeConfig pc;
    Tensor po = train::linear_probe(ours.trace.params, ours.split.probe_labeled, ours.split.test, pc).probs;
    Tensor pb = train::linear_probe(base.trace.params, base.split.probe_labeled, base.split.test, pc).probs;
    double eo = eval::ece(eval::predict(po, ours.split.test.y), 15);
    double eb = eval::ece(eval::predict(pb, base.split.test.y), 15);
    if (eo <= eb) ++ece_wins;
    acc_ours += accuracy_of(po, ours.split.test.y) / 3.0;
    acc_base += accuracy_of(pb, base.split.test.y) / 3.0;
    detail << "seed" << seed << " ece=" << eo << " vs " << eb << "; ";
  }
  double elapsed = now_seconds() - t0;
  bool ok = ece_wins >= 2 && std::abs(acc_ours - acc_base) <= 0.02 && elapsed < 300.0;
  detail << "mean acc " << acc_ours << " vs " << acc_base << "; elapsed=" << elapsed << "s";
  report(5, "calibration direction at matched accuracy", ok, detail.str());
}

TEST_CASE("6: metric implementations equal brute-force oracles to 1e-12") {
  double t0 = now_seconds();
  RngStream rng(606);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t n = 1 + rng.next_below(100);
    std::size_t classes = 2 + rng.next_below(9);
    Tensor probs({n, classes});
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      double sum = 0.0;
      for (std::size_t c = 0; c < classes; ++c) {
        probs.at(i, c) = std::exp(rng.next_gaussian());
        sum += probs.at(i, c);
      }
      for (std::size_t c = 0; c < classes; ++c) probs.at(i, c) /= sum;
      labels[i] = static_cast<int>(rng.next_below(classes));
    }
    eval::Prediction p = eval::predict(probs, labels);

    // scalar-loop oracles
    double oacc = 0, onll = 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < classes; ++c)
        if (probs.at(i, c) > probs.at(i, best)) best = c;
      if (best == static_cast<std::size_t>(labels[i])) oacc += 1;
      onll -= std::log(std::max(probs.at(i, static_cast<std::size_t>(labels[i])), 1e-12));
    }
    oacc /= static_cast<double>(n);
    onll /= static_cast<double>(n);
    auto [acc, nll] = eval::top1_nll(p);
    worst = std::max({worst, std::abs(acc - oacc), std::abs(nll - onll)});

    int bins = 15;
    std::vector<double> conf_sum(bins, 0), hit_sum(bins, 0);
    std::vector<std::size_t> count(bins, 0);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < classes; ++c)
        if (probs.at(i, c) > probs.at(i, best)) best = c;
      double conf = probs.at(i, best);
      int b = bins - 1;
      for (int k = 0; k < bins; ++k)
        if (conf <= static_cast<double>(k + 1) / bins) {
          b = k;
          break;
        }
      conf_sum[b] += conf;
      hit_sum[b] += best == static_cast<std::size_t>(labels[i]) ? 1 : 0;
      ++count[b];
    }
    double oece = 0.0;
    for (int b = 0; b < bins; ++b)
      if (count[b])
        oece += (static_cast<double>(count[b]) / n) * std::abs(hit_sum[b] / count[b] - conf_sum[b] / count[b]);
    worst = std::max(worst, std::abs(eval::ece(p, bins) - oece));

    // sort-and-group oracle for the thresholded adaptive error
    struct E {
      double prob;
      std::size_t row, cls;
      bool hit;
    };
    std::vector<E> entries;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < classes; ++c)
        if (probs.at(i, c) >= 0.01)
          entries.push_back({probs.at(i, c), i, c, static_cast<std::size_t>(labels[i]) == c});
    std::sort(entries.begin(), entries.end(), [](const E& a, const E& b) {
      if (a.prob != b.prob) return a.prob < b.prob;
      if (a.row != b.row) return a.row < b.row;
      return a.cls < b.cls;
    });
    double otace = 0.0;
    {
      std::size_t total = entries.size(), nb = 10, base = total / nb, rem = total % nb, pos = 0;
      for (std::size_t gidx = 0; gidx < nb; ++gidx) {
        std::size_t size = base + (gidx < rem ? 1 : 0);
        if (!size) continue;
        double conf = 0, hit = 0;
        for (std::size_t i = 0; i < size; ++i) {
          conf += entries[pos + i].prob;
          hit += entries[pos + i].hit;
        }
        otace += (static_cast<double>(size) / total) * std::abs(hit / size - conf / size);
        pos += size;
      }
    }
    worst = std::max(worst, std::abs(eval::tace(p, 10, 0.01) - otace));

    // pair-counting oracle for the ranking metric
    std::size_t n_in = 1 + rng.next_below(40), n_out = 1 + rng.next_below(40);
    std::vector<double> in(n_in), out(n_out);
    for (double& v : in) v = static_cast<double>(rng.next_below(8)) * 0.125;
    for (double& v : out) v = static_cast<double>(rng.next_below(8)) * 0.125 + 0.0625;
    double pairs = 0.0;
    for (double o : out)
      for (double i : in) pairs += o > i ? 1.0 : (o == i ? 0.5 : 0.0);
    pairs /= static_cast<double>(n_in) * static_cast<double>(n_out);
    worst = std::max(worst, std::abs(eval::auroc(in, out) - pairs));

    // disagreement oracle
    std::vector<int> pa(n), pb(n);
    for (auto& v : pa) v = static_cast<int>(rng.next_below(classes));
    for (auto& v : pb) v = static_cast<int>(rng.next_below(classes));
    double dis = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (pa[i] != pb[i]) dis += 1.0;
    worst = std::max(worst,
                     std::abs(eval::diversity_disagreement(pa, pb, 0.75) - dis / static_cast<double>(n) / 0.25));
  }
  double elapsed = now_seconds() - t0;
  bool ok = worst < 1e-12 && elapsed < 10.0;
  std::ostringstream ss;
  ss << "instances=100 worst_abs_gap=" << worst << " elapsed=" << elapsed << "s";
  report(6, "metric equivalence against brute-force oracles", ok, ss.str());
}

TEST_CASE("7: uncertainty scores separate heavy covariate shift (AUROC > 0.5)") {
  int std_wins = 0, knn_wins = 0;
  std::ostringstream detail;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    BenchmarkRun ours = run_benchmark(seed, 2.0);
    data::Dataset ood = data::corrupt(ours.split.test, 5, seed);
    auto si = eval::ood_score(ours.trace.params, 1e-4, ours.split.test.x, ours.split.train,
                              eval::OodKind::SubnetStd);
    auto so = eval::ood_score(ours.trace.params, 1e-4, ood.x, ours.split.train, eval::OodKind::SubnetStd);
    auto ki = eval::ood_score(ours.trace.params, 1e-4, ours.split.test.x, ours.split.train,
                              eval::OodKind::Knn);
    auto ko = eval::ood_score(ours.trace.params, 1e-4, ood.x, ours.split.train, eval::OodKind::Knn);
    double a_std = eval::auroc(si, so), a_knn = eval::auroc(ki, ko);
    if (a_std > 0.5) ++std_wins;
    if (a_knn > 0.5) ++knn_wins;
    detail << "seed" << seed << " std=" << a_std << " knn=" << a_knn << "; ";
  }
  bool ok = std_wins >= 2 && knn_wins >= 2;
  report(7, "out-of-distribution detection sanity", ok, detail.str());
}

TEST_CASE("8: contrastive edge case and scale invariance") {
  Graph g;
  Tensor m({1, 3}, {0.4, -0.1, 0.6});
  NodeId mn = g.leaf(m, "m");
  model::EmbeddingSet e1{mn, mn, std::nullopt};
  model::EmbeddingSet e2{mn, mn, std::nullopt};
  double single = g.forward(losses::ssl_loss(g, e1, e2, 0.07));

  RngStream rng(808);
  Tensor r1 = random_tensor({3, 4}, rng);
  Tensor r2 = random_tensor({3, 4}, rng);
  Graph ga;
  NodeId a1 = ga.leaf(r1), a2 = ga.leaf(r2);
  double base =
      ga.forward(losses::ssl_loss(ga, {a1, a1, std::nullopt}, {a2, a2, std::nullopt}, 0.07));
  Graph gb;
  NodeId b1 = gb.leaf(map(r1, MapKind::MulScalar, 3.0));
  NodeId b2 = gb.leaf(map(r2, MapKind::MulScalar, 3.0));
  double scaled =
      gb.forward(losses::ssl_loss(gb, {b1, b1, std::nullopt}, {b2, b2, std::nullopt}, 0.07));

  bool ok = single == 0.0 && std::abs(base - scaled) < 1e-12;
  std::ostringstream ss;
  ss << "single-pair loss=" << single << " scale_gap=" << std::abs(base - scaled);
  report(8, "single-pair loss is exactly zero; cosine scale invariance", ok, ss.str());
}

TEST_CASE("9: head ensembling is cheap, deep ensembling is not") {
  auto cost_config = [](std::uint64_t seed, std::size_t heads) {
    train::TrainConfig tc;
    tc.epochs = 4;
    tc.batch_size = 64;
    tc.lr = 0.05;
    tc.momentum = 0.9;
    tc.seed = seed;
    tc.loss.lambda = heads > 1 ? 2.0 : 0.0;
    tc.loss.alpha = 0.15;
    tc.model.input_dim = 64;
    tc.model.encoder_layers = {128, 128};
    tc.model.repr_dim = 32;
    tc.model.num_subnets = heads;
    tc.model.subnet_depth = 1;  // single-layer heads cannot relu-die into a zero embedding
    tc.model.subnet_hidden = 8;
    tc.model.embed_dim = 4;
    tc.model.seed = seed;
    tc.augment.noise_sigma = 0.25;
    tc.augment.mask_prob = 0.1;
    return tc;
  };
  data::Dataset d = data::gen_synthetic(4, 128, 64, 0.4, 99);

  (void)train::pretrain(d, cost_config(99, 1));  // warmup

  double t0 = now_seconds();
  (void)train::pretrain(d, cost_config(99, 1));
  double baseline = now_seconds() - t0;

  t0 = now_seconds();
  (void)train::pretrain(d, cost_config(99, 10));
  double heads10 = now_seconds() - t0;

  t0 = now_seconds();
  (void)train::train_deep_ensemble(d, cost_config(99, 1), 10);
  double ensemble10 = now_seconds() - t0;

  double head_ratio = heads10 / baseline;
  double ens_ratio = ensemble10 / baseline;
  bool ok = head_ratio <= 1.5 && ens_ratio >= 5.0;
  std::ostringstream ss;
  ss << "baseline=" << baseline << "s heads10=" << heads10 << "s (x" << head_ratio << ") ensemble10="
     << ensemble10 << "s (x" << ens_ratio << ")";
  report(9, "computational cost of 10 heads vs 10 full models", ok, ss.str());
}

TEST_CASE("10: identical config and seed reproduce metric files byte for byte") {
  fs::path dir = fs::temp_directory_path() / "subens_acceptance_det";
  fs::remove_all(dir);
  fs::create_directories(dir);
  fs::path cfg_path = dir / "exp.cfg";
  {
    std::ofstream out(cfg_path);
    out << "[experiment]\nname=det\nseed=3\n[data]\nclasses=3\nper_class=60\ndim=12\nspread=0.4\n"
           "train_frac=0.75\n[model]\nencoder_layers=16\nrepr_dim=8\nnum_subnets=3\nsubnet_hidden=8\n"
           "embed_dim=4\n[train]\nepochs=3\nbatch_size=32\n[probe]\nepochs=40\n";
  }
  fs::path out1 = dir / "run1", out2 = dir / "run2";
  bool ok = true;
  for (const fs::path& out : {out1, out2}) {
    ok = ok && cli::run({"pretrain", "--config", cfg_path.string(), "--out", out.string()}) == 0;
    ok = ok && cli::run({"probe", "--config", cfg_path.string(), "--out", out.string()}) == 0;
  }
  std::string csv1 = slurp(out1 / "det" / "probe" / "metrics.csv");
  std::string csv2 = slurp(out2 / "det" / "probe" / "metrics.csv");
  std::string tr1 = slurp(out1 / "det" / "trace.jsonl");
  std::string tr2 = slurp(out2 / "det" / "trace.jsonl");
  ok = ok && !csv1.empty() && csv1 == csv2 && tr1 == tr2;
  std::ostringstream ss;
  ss << "metrics.csv bytes=" << csv1.size() << " trace bytes=" << tr1.size()
     << (csv1 == csv2 && tr1 == tr2 ? " identical" : " DIFFER");
  report(10, "byte-identical reruns", ok, ss.str());
}
