#include "subens/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "subens/checkpoint.hpp"
#include "subens/config.hpp"
#include "subens/eval.hpp"
#include "subens/strfmt.hpp"

namespace subens::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Invocation {
  ExperimentConfig cfg;
  std::string sweep;  // ablate only
};

Invocation parse_flags(const std::vector<std::string>& args, std::size_t first) {
  Invocation inv;
  // --config loads first so that later flags override file values
  for (std::size_t i = first; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw usage_error("--config needs a path");
      inv.cfg = ExperimentConfig::from_file(args[i + 1]);
      break;
    }
  }
  for (std::size_t i = first; i < args.size(); ++i) {
    const std::string& a = args[i];
    auto need_value = [&]() -> const std::string& {
      if (i + 1 >= args.size()) throw usage_error(a + " needs a value");
      return args[++i];
    };
    if (a == "--config") {
      (void)need_value();  // already applied
    } else if (a == "--seed") {
      inv.cfg.set_value("experiment", "seed", need_value());
    } else if (a == "--out") {
      inv.cfg.set_value("experiment", "out", need_value());
    } else if (a == "--override") {
      inv.cfg.apply_override(need_value());
    } else if (a == "--sweep") {
      inv.sweep = need_value();
    } else {
      throw usage_error("unknown flag: " + a);
    }
  }
  return inv;
}

fs::path run_dir(const ExperimentConfig& cfg) { return fs::path(cfg.out_dir) / cfg.name; }

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw contract_error("cannot write " + path.string());
  out << text;
}

void write_run_manifest(const ExperimentConfig& cfg, const std::string& command) {
  json m;
  m["format_version"] = kCheckpointVersion;
  m["command"] = command;
  m["seed"] = cfg.seed;
  m["config_hash"] = cfg.hash();
  m["config"] = cfg.to_text();
  write_text(run_dir(cfg) / ("manifest." + command + ".json"), m.dump(2) + "\n");
}

void write_trace(const fs::path& path, const train::TrainTrace& trace) {
  std::string out;
  for (const train::StepRecord& r : trace.records) {
    out += "{\"step\":" + std::to_string(r.step);
    out += ",\"ssl\":" + fmt_double(r.ssl);
    out += ",\"div\":" + fmt_double(r.div);
    out += ",\"total\":" + fmt_double(r.total);
    out += ",\"total_std\":" + fmt_double(r.total_std);
    out += "}\n";
  }
  write_text(path, out);
}

void write_reports(const fs::path& dir, const std::vector<eval::EvalReport>& reports) {
  std::string jsonl, csv = eval::EvalReport::csv_header() + "\n";
  for (const eval::EvalReport& r : reports) {
    jsonl += r.to_json() + "\n";
    csv += r.csv_row() + "\n";
  }
  write_text(dir / "reports.jsonl", jsonl);
  write_text(dir / "metrics.csv", csv);
}

// Loaded checkpoint set: one entry for a plain run, one per member for a deep
// ensemble run.
struct LoadedModels {
  std::vector<model::ModelParams> members;
  bool ensemble() const { return members.size() > 1; }
};

LoadedModels load_models(const ExperimentConfig& cfg) {
  LoadedModels lm;
  if (cfg.ensemble_members > 0) {
    for (int j = 0; j < cfg.ensemble_members; ++j) {
      fs::path dir = run_dir(cfg) / ("member" + std::to_string(j)) / "checkpoint";
      lm.members.push_back(load_checkpoint(dir.string()).first);
    }
  } else {
    lm.members.push_back(load_checkpoint((run_dir(cfg) / "checkpoint").string()).first);
  }
  return lm;
}

// Probes trained per member on that member's frozen representation.
struct TrainedProbes {
  std::vector<model::DenseLayer> probes;

  // averaged class probabilities over members
  Tensor apply(const LoadedModels& lm, const Tensor& x) const {
    Tensor avg;
    for (std::size_t j = 0; j < probes.size(); ++j) {
      Tensor probs = train::probe_apply(probes[j], model::encode_value(lm.members[j], x));
      if (j == 0) {
        avg = std::move(probs);
      } else {
        for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += probs[i];
      }
    }
    for (std::size_t i = 0; i < avg.size(); ++i) avg[i] /= static_cast<double>(probes.size());
    return avg;
  }

  std::vector<Tensor> member_probs(const LoadedModels& lm, const Tensor& x) const {
    std::vector<Tensor> out;
    for (std::size_t j = 0; j < probes.size(); ++j)
      out.push_back(train::probe_apply(probes[j], model::encode_value(lm.members[j], x)));
    return out;
  }
};

TrainedProbes fit_probes(const LoadedModels& lm, const ExperimentConfig& cfg,
                         const data::Dataset& labeled, const data::Dataset& test) {
  TrainedProbes tp;
  for (const model::ModelParams& p : lm.members)
    tp.probes.push_back(train::linear_probe(p, labeled, test, cfg.probe).weights);
  return tp;
}

eval::EvalReport base_report(const ExperimentConfig& cfg, const data::Dataset& d) {
  eval::EvalReport r;
  r.dataset = d.name;
  r.seed = cfg.seed;
  r.config_hash = cfg.hash();
  return r;
}

void fill_calibration(eval::EvalReport& r, const ExperimentConfig& cfg, const Tensor& probs,
                      const std::vector<int>& labels) {
  eval::Prediction pred = eval::predict(probs, labels);
  auto [acc, nll] = eval::top1_nll(pred);
  r.acc = acc;
  r.nll = nll;
  r.ece = eval::ece(pred, cfg.eval.ece_bins);
  r.tace = eval::tace(pred, cfg.eval.tace_bins, cfg.eval.tace_threshold);
  r.ece_bins = cfg.eval.ece_bins;
  r.tace_bins = cfg.eval.tace_bins;
  r.tace_threshold = cfg.eval.tace_threshold;
}

std::vector<int> argmax_rows(const Tensor& probs) {
  std::vector<int> out(probs.extent(0));
  for (std::size_t r = 0; r < probs.extent(0); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < probs.extent(1); ++c)
      if (probs.at(r, c) > probs.at(r, best)) best = c;
    out[r] = static_cast<int>(best);
  }
  return out;
}

void write_ece_bins(const fs::path& path, const eval::Prediction& pred, int bins) {
  auto stats = eval::ece_bin_stats(pred, bins);
  std::string csv = "bin,lo,hi,count,mean_conf,acc\n";
  for (std::size_t b = 0; b < stats.size(); ++b) {
    csv += std::to_string(b + 1) + "," + fmt_double(stats[b].lo) + "," + fmt_double(stats[b].hi) + "," +
           std::to_string(stats[b].count) + "," + fmt_double(stats[b].mean_conf) + "," +
           fmt_double(stats[b].acc) + "\n";
  }
  write_text(path, csv);
}

// ---------------------------------------------------------------------------
// commands
// ---------------------------------------------------------------------------

int cmd_pretrain(const ExperimentConfig& cfg) {
  data::Dataset d = cfg.make_dataset();
  data::Split sp = data::split(d, cfg.data.train_frac, cfg.data.label_frac, cfg.seed);
  train::TrainConfig tc = cfg.train_config(d.dim());

  if (cfg.ensemble_members > 0) {
    auto traces = train::train_deep_ensemble(sp.train, tc, cfg.ensemble_members);
    for (std::size_t j = 0; j < traces.size(); ++j) {
      ExperimentConfig mc = cfg;
      mc.model.num_subnets = 1;
      mc.loss.lambda = 0.0;
      mc.seed = train::ensemble_member_seed(cfg.seed, static_cast<int>(j));
      fs::path mdir = run_dir(cfg) / ("member" + std::to_string(j));
      save_checkpoint(traces[j].params, mc, (mdir / "checkpoint").string());
      write_trace(mdir / "trace.jsonl", traces[j]);
    }
    std::cout << "pretrain: " << traces.size() << " ensemble members, "
              << traces.front().records.size() << " steps each\n";
  } else {
    train::TrainTrace trace = train::pretrain(sp.train, tc);
    save_checkpoint(trace.params, cfg, (run_dir(cfg) / "checkpoint").string());
    write_trace(run_dir(cfg) / "trace.jsonl", trace);
    const train::StepRecord& last = trace.records.back();
    std::cout << "pretrain: " << trace.records.size() << " steps, final total=" << fmt_double(last.total)
              << " ssl=" << fmt_double(last.ssl) << " div=" << fmt_double(last.div)
              << " total_std=" << fmt_double(last.total_std) << "\n";
  }
  write_run_manifest(cfg, "pretrain");
  return 0;
}

int cmd_probe(const ExperimentConfig& cfg) {
  data::Dataset d = cfg.make_dataset();
  data::Split sp = data::split(d, cfg.data.train_frac, cfg.data.label_frac, cfg.seed);
  LoadedModels lm = load_models(cfg);
  TrainedProbes tp = fit_probes(lm, cfg, sp.probe_labeled, sp.test);

  Tensor probs = tp.apply(lm, sp.test.x);
  eval::EvalReport r = base_report(cfg, sp.test);
  fill_calibration(r, cfg, probs, sp.test.y);
  r.note = lm.ensemble() ? "probe ensemble=" + std::to_string(lm.members.size()) : "probe";

  if (lm.ensemble() && r.acc < 1.0) {
    auto member_probs = tp.member_probs(lm, sp.test.x);
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < member_probs.size(); ++a)
      for (std::size_t b = a + 1; b < member_probs.size(); ++b) {
        total += eval::diversity_disagreement(argmax_rows(member_probs[a]), argmax_rows(member_probs[b]),
                                              r.acc);
        ++pairs;
      }
    if (pairs > 0) r.disagreement = total / static_cast<double>(pairs);
  }

  write_reports(run_dir(cfg) / "probe", {r});
  write_ece_bins(run_dir(cfg) / "probe" / "ece_bins.csv", eval::predict(probs, sp.test.y),
                 cfg.eval.ece_bins);
  write_run_manifest(cfg, "probe");
  std::cout << "probe: acc=" << fmt_double(r.acc) << " nll=" << fmt_double(r.nll)
            << " ece=" << fmt_double(r.ece) << " tace=" << fmt_double(r.tace) << "\n";
  return 0;
}

int cmd_eval_ood(const ExperimentConfig& cfg) {
  data::Dataset d = cfg.make_dataset();
  data::Split sp = data::split(d, cfg.data.train_frac, cfg.data.label_frac, cfg.seed);
  LoadedModels lm = load_models(cfg);
  data::Dataset ood = data::corrupt(sp.test, cfg.eval.ood_level, cfg.seed);

  TrainedProbes tp = fit_probes(lm, cfg, sp.probe_labeled, sp.test);
  Tensor probs = tp.apply(lm, sp.test.x);

  std::vector<eval::EvalReport> reports;
  auto scored = [&](eval::OodKind kind, const std::string& label) {
    // scores averaged over members so the ensemble baseline gets a fair run
    std::vector<double> in_scores, out_scores;
    for (const model::ModelParams& p : lm.members) {
      auto si = eval::ood_score(p, cfg.loss.epsilon, sp.test.x, sp.train, kind);
      auto so = eval::ood_score(p, cfg.loss.epsilon, ood.x, sp.train, kind);
      if (in_scores.empty()) {
        in_scores = si;
        out_scores = so;
      } else {
        for (std::size_t i = 0; i < si.size(); ++i) in_scores[i] += si[i];
        for (std::size_t i = 0; i < so.size(); ++i) out_scores[i] += so[i];
      }
    }
    eval::EvalReport r = base_report(cfg, sp.test);
    fill_calibration(r, cfg, probs, sp.test.y);
    r.auroc = eval::auroc(in_scores, out_scores);
    r.note = "ood=" + label + " level=" + std::to_string(cfg.eval.ood_level);
    reports.push_back(r);
  };

  bool have_spread = true;
  for (const model::ModelParams& p : lm.members)
    if (p.subnets.size() < 2) have_spread = false;
  if (have_spread) scored(eval::OodKind::SubnetStd, "subnet_std");
  scored(eval::OodKind::Knn, "knn");

  write_reports(run_dir(cfg) / "ood", reports);
  write_run_manifest(cfg, "eval-ood");
  for (const eval::EvalReport& r : reports)
    std::cout << "eval-ood: " << r.note << " auroc=" << fmt_double(*r.auroc) << "\n";
  return 0;
}

int cmd_corrupt_eval(const ExperimentConfig& cfg) {
  data::Dataset d = cfg.make_dataset();
  data::Split sp = data::split(d, cfg.data.train_frac, cfg.data.label_frac, cfg.seed);
  LoadedModels lm = load_models(cfg);
  TrainedProbes tp = fit_probes(lm, cfg, sp.probe_labeled, sp.test);

  std::vector<eval::EvalReport> reports;
  auto eval_on = [&](const data::Dataset& ds, int level) {
    Tensor probs = tp.apply(lm, ds.x);
    eval::EvalReport r = base_report(cfg, ds);
    fill_calibration(r, cfg, probs, ds.y);
    if (level > 0 && lm.members.front().subnets.size() >= 2) {
      std::vector<double> si =
          eval::ood_score(lm.members.front(), cfg.loss.epsilon, sp.test.x, sp.train,
                          eval::OodKind::SubnetStd);
      std::vector<double> so = eval::ood_score(lm.members.front(), cfg.loss.epsilon, ds.x, sp.train,
                                               eval::OodKind::SubnetStd);
      r.auroc = eval::auroc(si, so);
    }
    r.note = "level=" + std::to_string(level);
    reports.push_back(r);
  };

  eval_on(sp.test, 0);  // uncorrupted reference
  for (int level = 1; level <= 5; ++level) eval_on(data::corrupt(sp.test, level, cfg.seed), level);

  write_reports(run_dir(cfg) / "corrupt", reports);
  write_run_manifest(cfg, "corrupt-eval");
  for (const eval::EvalReport& r : reports)
    std::cout << "corrupt-eval: " << r.note << " acc=" << fmt_double(r.acc)
              << " tace=" << fmt_double(r.tace) << "\n";
  return 0;
}

int sweep_threads(std::size_t points) {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  std::size_t cap = std::min<std::size_t>(points, hw);
  if (const char* env = std::getenv("SUBNET_ENSEMBLE_THREADS")) {
    try {
      cap = std::min<std::size_t>(cap, std::max(1ul, std::stoul(env)));
    } catch (const std::exception&) {
      throw usage_error("SUBNET_ENSEMBLE_THREADS must be a positive integer");
    }
  }
  return static_cast<int>(cap);
}

int cmd_ablate(const Invocation& inv) {
  if (inv.sweep.empty()) throw usage_error("ablate needs --sweep key=v1,v2,...");
  std::size_t eq = inv.sweep.find('=');
  if (eq == std::string::npos) throw usage_error("--sweep expects key=v1,v2,...");
  std::string key = trim(inv.sweep.substr(0, eq));
  std::vector<std::string> values = split_str(inv.sweep.substr(eq + 1), ',');
  if (values.empty()) throw usage_error("--sweep has no values");

  struct Point {
    ExperimentConfig cfg;
    eval::EvalReport report;
    std::string error;
  };
  std::vector<Point> points(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    points[i].cfg = inv.cfg;
    points[i].cfg.apply_override(key + "=" + trim(values[i]));
    points[i].cfg.name = inv.cfg.name + "/sweep/" + key + "=" + trim(values[i]);
    // a single-head sweep point has no spread to regularize
    if (points[i].cfg.model.num_subnets == 1) points[i].cfg.loss.lambda = 0.0;
  }

  auto run_point = [&](Point& pt, const std::string& value) {
    try {
      data::Dataset d = pt.cfg.make_dataset();
      data::Split sp = data::split(d, pt.cfg.data.train_frac, pt.cfg.data.label_frac, pt.cfg.seed);
      train::TrainConfig tc = pt.cfg.train_config(d.dim());
      train::TrainTrace trace = train::pretrain(sp.train, tc);
      save_checkpoint(trace.params, pt.cfg, (run_dir(pt.cfg) / "checkpoint").string());
      write_trace(run_dir(pt.cfg) / "trace.jsonl", trace);
      train::ProbeResult pr = train::linear_probe(trace.params, sp.probe_labeled, sp.test, pt.cfg.probe);
      pt.report = base_report(pt.cfg, sp.test);
      fill_calibration(pt.report, pt.cfg, pr.probs, sp.test.y);
      pt.report.note = key + "=" + value;
      // the sweep summary under ablate/ is the single report of record;
      // per-point directories keep checkpoint and trace only
    } catch (const std::exception& e) {
      pt.error = e.what();
    }
  };

  int workers = sweep_threads(points.size());
  std::size_t next = 0;
  std::vector<std::thread> pool;
  std::mutex mu;
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&]() {
      while (true) {
        std::size_t i;
        {
          std::lock_guard<std::mutex> lock(mu);
          if (next >= points.size()) return;
          i = next++;
        }
        run_point(points[i], trim(values[i]));
      }
    });
  }
  for (std::thread& t : pool) t.join();

  for (const Point& pt : points)
    if (!pt.error.empty()) throw contract_error("ablate point " + pt.cfg.name + " failed: " + pt.error);

  std::vector<eval::EvalReport> reports;
  for (const Point& pt : points) reports.push_back(pt.report);
  write_reports(run_dir(inv.cfg) / "ablate", reports);
  write_run_manifest(inv.cfg, "ablate");
  for (const eval::EvalReport& r : reports)
    std::cout << "ablate: " << r.note << " acc=" << fmt_double(r.acc) << " ece=" << fmt_double(r.ece)
              << "\n";
  return 0;
}

int cmd_gradcheck(const ExperimentConfig& cfg) {
  // Full-objective graph on a small random instance; every parameter
  // coordinate is checked against central differences.
  const std::size_t batch = 4, q = 8, m = 5;
  model::ModelConfig mc;
  mc.input_dim = 6;
  mc.encoder_layers = {5};
  mc.repr_dim = 4;
  mc.num_subnets = m;
  mc.subnet_hidden = 3;
  mc.embed_dim = q;
  mc.seed = cfg.seed;
  model::ModelParams params = model::init(mc);

  // a relu-dead row would zero a mean embedding and make the cosine
  // undefined; resample the batch until the instance is valid
  Graph g;
  losses::LossBreakdown bd;
  bool built = false;
  for (std::uint64_t attempt = 0; attempt < 16 && !built; ++attempt) {
    RngStream rng(cfg.seed, 31, attempt);
    Tensor xa({batch, mc.input_dim}), xb({batch, mc.input_dim});
    for (double& v : xa.data()) v = rng.next_gaussian();
    for (double& v : xb.data()) v = rng.next_gaussian();
    Graph fresh;
    model::ParamNodes pn = model::bind_params(fresh, params);
    model::EmbeddingSet e1 =
        model::project(fresh, pn, params, model::encode(fresh, pn, params, fresh.constant(xa)),
                       cfg.loss.epsilon);
    model::EmbeddingSet e2 =
        model::project(fresh, pn, params, model::encode(fresh, pn, params, fresh.constant(xb)),
                       cfg.loss.epsilon);
    try {
      bd = losses::total_loss(fresh, e1, e2, cfg.loss);
    } catch (const contract_error&) {
      continue;
    }
    g = std::move(fresh);
    built = true;
  }
  if (!built) throw contract_error("gradcheck: could not draw a non-degenerate instance");

  const double step = 1e-5, tol = 1e-4;
  GradcheckReport rep = gradcheck(g, bd.total_node, step, tol);

  // closed-form diversity gradient against reverse mode and finite differences
  Tensor z({batch, m, q});
  RngStream zrng(cfg.seed, 32);
  for (double& v : z.data()) v = 0.2 * zrng.next_gaussian();
  Tensor oracle = losses::diversity_grad_oracle(z, cfg.loss.alpha, cfg.loss.epsilon);

  Graph hg;
  NodeId zn = hg.leaf(z, "z");
  NodeId var = hg.reduce(zn, 1, ReduceKind::VarUnbiased);
  NodeId sd = hg.map(hg.map(var, MapKind::AddScalar, cfg.loss.epsilon), MapKind::Sqrt);
  NodeId hinge_sum = hg.sum_all(hg.map(sd, MapKind::HingeBelow, cfg.loss.alpha));
  hg.forward(hinge_sum);
  Tensor back = hg.backward(hinge_sum).at(zn);

  const Tensor& sigma = hg.value(sd);
  double max_vs_autodiff = 0.0, max_vs_fd = 0.0, max_head_sum = 0.0;
  for (std::size_t k = 0; k < batch; ++k) {
    for (std::size_t o = 0; o < q; ++o) {
      double head_sum = 0.0;
      bool near_kink = std::abs(sigma.at(k, o) - cfg.loss.alpha) < 2.0 * step;
      for (std::size_t j = 0; j < m; ++j) {
        head_sum += oracle.at(k, j, o);
        if (near_kink) continue;
        double a = oracle.at(k, j, o), b = back.at(k, j, o);
        max_vs_autodiff =
            std::max(max_vs_autodiff, std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}));
      }
      max_head_sum = std::max(max_head_sum, std::abs(head_sum));
    }
  }
  GradcheckReport fd_rep = gradcheck(hg, hinge_sum, step, tol);
  max_vs_fd = fd_rep.max_rel_err;

  bool pass = rep.pass && fd_rep.pass && max_vs_autodiff < 1e-8 && max_head_sum < 1e-10;

  std::string text;
  text += "gradcheck: step=" + fmt_double(step) + " tol=" + fmt_double(tol) + "\n";
  for (const LeafCheck& lc : rep.leaves)
    text += "  " + lc.name + ": max_rel_err=" + fmt_double(lc.max_rel_err) + " checked=" +
            std::to_string(lc.checked) + " skipped=" + std::to_string(lc.skipped) +
            (lc.pass ? " ok" : " FAIL") + "\n";
  text += "objective graph: max_rel_err=" + fmt_double(rep.max_rel_err) + " checked=" +
          std::to_string(rep.checked) + " skipped=" + std::to_string(rep.skipped) +
          (rep.pass ? " ok" : " FAIL") + "\n";
  text += "diversity gradient closed form -(z - mean)/((M-1)*std):\n";
  text += "  vs reverse mode: max_rel_err=" + fmt_double(max_vs_autodiff) + "\n";
  text += "  vs finite differences: max_rel_err=" + fmt_double(max_vs_fd) + "\n";
  text += "  per-coordinate sum over heads: max_abs=" + fmt_double(max_head_sum) + "\n";
  text += std::string("result: ") + (pass ? "PASS" : "FAIL") + "\n";
  std::cout << text;

  json jr;
  jr["step"] = step;
  jr["tol"] = tol;
  jr["max_rel_err"] = rep.max_rel_err;
  jr["checked"] = rep.checked;
  jr["skipped"] = rep.skipped;
  jr["oracle_vs_autodiff"] = max_vs_autodiff;
  jr["oracle_vs_fd"] = max_vs_fd;
  jr["head_gradient_sum"] = max_head_sum;
  jr["pass"] = pass;
  write_text(run_dir(cfg) / "gradcheck_report.json", jr.dump(2) + "\n");
  write_run_manifest(cfg, "gradcheck");
  return pass ? 0 : 1;
}

int cmd_report(const ExperimentConfig& cfg) {
  // Summary CSV regenerated purely from stored reports; nothing is recomputed.
  std::vector<fs::path> files;
  fs::path root = run_dir(cfg);
  if (!fs::exists(root)) throw contract_error("report: no artifacts under " + root.string());
  for (const auto& entry : fs::recursive_directory_iterator(root))
    if (entry.is_regular_file() && entry.path().filename() == "reports.jsonl")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  std::string csv = eval::EvalReport::csv_header() + "\n";
  std::size_t rows = 0;
  for (const fs::path& f : files) {
    std::ifstream in(f);
    std::string line;
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      eval::EvalReport r;
      try {
        json j = json::parse(line);
        r.acc = j.at("acc").get<double>();
        r.nll = j.at("nll").get<double>();
        r.ece = j.at("ece").get<double>();
        r.tace = j.at("tace").get<double>();
        if (!j.at("auroc").is_null()) r.auroc = j.at("auroc").get<double>();
        if (!j.at("disagreement").is_null()) r.disagreement = j.at("disagreement").get<double>();
        r.ece_bins = j.value("ece_bins", 15);
        r.tace_bins = j.value("tace_bins", 15);
        r.tace_threshold = j.value("tace_threshold", 0.01);
        r.dataset = j.at("dataset").get<std::string>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.config_hash = j.at("config_hash").get<std::string>();
        r.note = j.at("note").get<std::string>();
      } catch (const std::exception& e) {
        throw contract_error("report: malformed line in " + f.string() + ": " + e.what());
      }
      csv += r.csv_row() + "\n";
      ++rows;
    }
  }
  write_text(root / "summary.csv", csv);
  write_run_manifest(cfg, "report");
  std::cout << "report: " << rows << " rows from " << files.size() << " artifact files\n";
  return 0;
}

}  // namespace

std::string usage_text() {
  return "usage: subens <command> [flags]\n"
         "commands:\n"
         "  pretrain      self-supervised pretraining; writes checkpoint and trace.jsonl\n"
         "  probe         linear probe on the frozen representation; writes metrics\n"
         "  eval-ood      uncertainty scores on clean vs corrupted test data (AUROC)\n"
         "  corrupt-eval  probe metrics across corruption severities 1..5\n"
         "  ablate        sweep one config key end to end (--sweep key=v1,v2,...)\n"
         "  gradcheck     finite-difference check of the training gradients\n"
         "  report        regenerate summary.csv from stored reports\n"
         "flags:\n"
         "  --config PATH        experiment file ([section] key=value, '#' comments)\n"
         "  --seed N             override experiment.seed\n"
         "  --out DIR            override experiment.out\n"
         "  --override K=V       override any config key (section.key or M/lambda/alpha)\n"
         "  --sweep K=V1,V2,...  ablate sweep spec\n"
         "environment:\n"
         "  SUBNET_ENSEMBLE_THREADS  caps ablate worker threads\n";
}

int run(const std::vector<std::string>& args) {
  try {
    if (args.empty()) throw usage_error("missing command");
    const std::string& command = args[0];
    Invocation inv = parse_flags(args, 1);
    if (command == "pretrain") return cmd_pretrain(inv.cfg);
    if (command == "probe") return cmd_probe(inv.cfg);
    if (command == "eval-ood") return cmd_eval_ood(inv.cfg);
    if (command == "corrupt-eval") return cmd_corrupt_eval(inv.cfg);
    if (command == "ablate") return cmd_ablate(inv);
    if (command == "gradcheck") return cmd_gradcheck(inv.cfg);
    if (command == "report") return cmd_report(inv.cfg);
    throw usage_error("unknown command: " + command);
  } catch (const usage_error& e) {
    std::cerr << "error: " << e.what() << "\n" << usage_text();
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace subens::cli
