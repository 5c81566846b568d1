// Runs every headline acceptance check and prints one PASS/FAIL line each.
#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "../support/oracles.hpp"
#include "../support/random_program.hpp"
#include "demux/clustering.hpp"
#include "demux/dataset.hpp"
#include "demux/explainer.hpp"
#include "demux/metrics.hpp"
#include "demux/training.hpp"

using namespace demux;
using ad::Graph;
using ad::Tensor;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  bool skipped = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double pop_std(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / v.size());
}

// ---------------------------------------------------------------- gradients

using Fn = std::function<Tensor(Graph&, const Tensor&)>;

// Normwise relative error between the reverse-mode gradient and central
// differences computed here, one coordinate at a time.
double gradient_error(const Fn& f, const Tensor& x, double h = 1e-5) {
  Graph g;
  const auto leaf = g.parameter(x);
  const auto analytic = g.backward(f(g, leaf)).of(leaf).to_vector();
  auto values = x.to_vector();
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double keep = values[i];
    values[i] = keep + h;
    Graph gp;
    const double up = f(gp, gp.constant(Tensor(x.shape(), values))).item();
    values[i] = keep - h;
    Graph gm;
    const double down = f(gm, gm.constant(Tensor(x.shape(), values))).item();
    values[i] = keep;
    const double numeric = (up - down) / (2 * h);
    diff = std::max(diff, std::fabs(numeric - analytic[i]));
    scale = std::max({scale, std::fabs(numeric), std::fabs(analytic[i])});
  }
  return scale == 0.0 ? diff : diff / scale;
}

Outcome gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(11);
  double worst = 0.0;
  std::size_t configs = 0, worst_op = 0;
  std::size_t per_op_min = SIZE_MAX;

  auto checked_program = [&](const oracle::RandomProgram& prog) -> std::optional<double> {
    const Tensor x({prog.rows, prog.cols}, oracle::uniform(prog.rows * prog.cols, -1.5, 1.5, rng));
    Graph probe;
    prog.kink_distance = 1e9;
    prog(probe, x);
    if (prog.kink_distance < 1e-3) return std::nullopt;
    return gradient_error(std::cref(prog), x);
  };

  // every op on its own
  for (int op = 0; op < oracle::RandomProgram::kOps; ++op) {
    std::size_t done = 0;
    for (int attempt = 0; attempt < 300 && done < 30; ++attempt) {
      const auto prog = oracle::RandomProgram::make_with({op}, rng);
      if (const auto e = checked_program(prog)) {
        if (*e > worst) worst_op = static_cast<std::size_t>(op);
        worst = std::max(worst, *e);
        ++done;
      }
    }
    per_op_min = std::min(per_op_min, done);
    configs += done;
  }
  // random compositions
  std::size_t composed = 0;
  for (int attempt = 0; attempt < 300 && composed < 30; ++attempt) {
    if (const auto e = checked_program(oracle::RandomProgram::make(rng))) {
      worst = std::max(worst, *e);
      ++composed;
    }
  }
  configs += composed;

  // the full explainer objective over theta
  std::size_t losses = 0;
  double worst_loss = 0.0;
  for (int attempt = 0; attempt < 200 && losses < 30; ++attempt) {
    const std::size_t classes = 2 + attempt % 3;
    const std::size_t t_len = 4 + attempt % 9;
    models::GruClassifier f(t_len, classes, 5, 100 + attempt);
    data::Dataset bg;
    for (std::size_t c = 0; c < classes; ++c) bg.label_names.push_back(std::to_string(c));
    for (std::size_t n = 0; n < 12; ++n) {
      bg.series.push_back(oracle::uniform(t_len, -2, 2, rng));
      bg.labels.push_back(n % classes);
    }
    const auto x = oracle::uniform(t_len, -2, 2, rng);
    const auto clusters = attempt % 2 ? explain::fit_clusters(bg, 3, attempt) : explain::single_cluster(bg);
    const auto repl = explain::select_replacements(x, clusters, bg, classes, nullptr, 0.3, std::uint64_t(attempt));
    explain::LossContext ctx;
    ctx.model = &f;
    ctx.x = x;
    ctx.y_hat = f.predict_proba(x);
    ctx.target = f.predict(x);
    ctx.replacements = &repl;
    if (attempt % 3 == 0) ctx.noise = oracle::uniform(classes * t_len, -0.02, 0.02, rng);
    explain::ExplainerConfig cfg;
    std::uniform_real_distribution<double> lam(0.05, 1.0);
    cfg.lambda_prev = lam(rng);
    cfg.lambda_max = lam(rng);
    cfg.lambda_budget = lam(rng);
    cfg.lambda_treg = lam(rng);
    cfg.lambda_ssd = lam(rng);
    cfg.no_ssd = attempt % 7 == 3;
    cfg.no_kl = attempt % 5 == 4;

    // keep theta away from sign changes and from kinks of |w . theta|
    std::vector<double> theta(classes * t_len);
    std::uniform_real_distribution<double> mag(0.05, 0.95);
    for (auto& v : theta) v = (rng() & 1 ? 1.0 : -1.0) * mag(rng);
    double closest = 1e9;
    for (std::size_t t = 0; t < t_len; ++t) {
      double s = 0.0;
      for (std::size_t i = 0; i < classes; ++i) {
        const double w = i == ctx.target ? static_cast<double>(classes - 1) : -ctx.y_hat[i];
        s += w * theta[i * t_len + t];
      }
      closest = std::min(closest, std::fabs(s));
    }
    if (closest < 1e-3) continue;
    const Fn total = [&](Graph& g, const Tensor& th) { return explain::build_loss(g, th, ctx, cfg).total; };
    const double e = gradient_error(total, Tensor({classes, t_len}, theta));
    worst_loss = std::max(worst_loss, e);
    ++losses;
  }
  configs += losses;
  worst = std::max(worst, worst_loss);

  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = worst < 1e-3 && per_op_min >= 30 && composed >= 30 && losses >= 30 && secs < 60.0;
  o.detail = std::to_string(configs) + " configurations (>= " + std::to_string(per_op_min) + " per op, " +
             std::to_string(composed) + " compositions, " + std::to_string(losses) +
             " total-loss), worst rel err " + fmt("%.2e", worst) + " (op " + std::to_string(worst_op) +
             "), total-loss worst " + fmt("%.2e", worst_loss) + ", " + fmt("%.1f", secs) + " s";
  return o;
}

// -------------------------------------------------------------- perturbation

Outcome perturbation_identities() {
  std::mt19937_64 rng(12);
  std::size_t bad = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t t_len = 1 + trial % 64;
    const auto x = oracle::uniform(t_len, -5, 5, rng);
    const auto rn = oracle::uniform(t_len, -5, 5, rng);
    const auto rf = oracle::uniform(t_len, -5, 5, rng);
    for (double fill : {1.0, 0.0, -1.0}) {
      const std::vector<double> theta(t_len, fill);
      std::vector<double> expect(t_len);
      for (std::size_t t = 0; t < t_len; ++t) expect[t] = fill == 1.0 ? x[t] : fill == 0.0 ? rf[t] : -x[t] + 2 * rn[t];
      if (explain::perturb(x, theta, rn, rf) != expect) ++bad;
      Graph g;
      const auto out = explain::perturb(g, Tensor::vector(x), Tensor({1, t_len}, theta), Tensor({1, t_len}, rn),
                                        Tensor({1, t_len}, rf), Tensor());
      if (out.to_vector() != expect) ++bad;
    }
  }
  Outcome o;
  o.pass = bad == 0;
  o.detail = "100 vectors x 3 identities x 2 code paths, " + std::to_string(bad) + " mismatches (exact comparison)";
  return o;
}

// ------------------------------------------------------------------ metrics

Outcome metric_oracles() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(13);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t t_len = 1 + trial % 8;
    const std::size_t c = 2 + trial % 2;
    const std::size_t z = trial % c;
    std::unique_ptr<models::Classifier> f;
    if (c == 2) f = std::make_unique<oracle::SingleFeatureModel>(t_len, trial % t_len, 3.0, 0.2);
    else f = std::make_unique<models::FcnClassifier>(t_len, c, 5, 4, trial);
    const auto x = oracle::uniform(t_len, -2, 2, rng), ref = oracle::uniform(t_len, -2, 2, rng);
    auto theta = oracle::uniform(c * t_len, -1, 1, rng);
    if (trial % 4 == 0) theta[z * t_len] = theta[z * t_len + t_len - 1];
    const std::vector<double> row(theta.begin() + z * t_len, theta.begin() + (z + 1) * t_len);
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < c; ++i) rows.emplace_back(theta.begin() + i * t_len, theta.begin() + (i + 1) * t_len);
    worst = std::max({worst,
                      std::fabs(eval::deletion_curve(*f, x, row, ref, z).area() -
                                oracle::sweep_area(*f, x, row, ref, z, false)),
                      std::fabs(eval::insertion_curve(*f, x, row, ref, z).area() -
                                oracle::sweep_area(*f, x, row, ref, z, true)),
                      std::fabs(eval::iou_metric(theta, c, z).area - oracle::iou_area(rows, z))});
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = worst <= 1e-9 && secs < 60.0;
  o.detail = "200 maps, T<=8, C<=3, worst |library - brute force| " + fmt("%.2e", worst) + ", " + fmt("%.2f", secs) + " s";
  return o;
}

// ------------------------------------------------------------ planted setup

struct Planted {
  data::Dataset train, test;
  data::PlantedLayout layout;
  std::unique_ptr<models::FcnClassifier> model;
  double train_accuracy = 0.0;
  explain::ClusterModel clusters;
  double setup_seconds = 0.0;
};

const Planted& planted() {
  static const Planted p = [] {
    const auto t0 = std::chrono::steady_clock::now();
    Planted s;
    const auto ds = data::znormalize(data::make_planted_dataset(3, 48, 40, 7));
    std::tie(s.train, s.test) = data::split(ds, 0.5, 7);
    s.layout = data::planted_layout(3, 48);
    s.model = std::make_unique<models::FcnClassifier>(48, 3, 128, 64, 7);
    models::TrainConfig cfg;
    cfg.epochs = 200;
    cfg.seed = 7;
    s.train_accuracy = models::train(*s.model, s.train, cfg).train_accuracy;
    s.clusters = explain::fit_clusters(s.train, 10, 7);
    s.setup_seconds = seconds_since(t0);
    return s;
  }();
  return p;
}

std::size_t g_instances = 20;

// Explanations of the first g_instances test series under one config, cached
// per (variant, seed).
struct Variant {
  std::string name;
  std::function<void(explain::ExplainerConfig&)> tweak;
};

struct RunSet {
  std::vector<explain::Explanation> results;
  double seconds = 0.0;
};

const RunSet& runs(const Variant& v, std::size_t seed) {
  static std::map<std::pair<std::string, std::size_t>, RunSet> cache;
  const auto key = std::make_pair(v.name, seed);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  const auto& p = planted();
  RunSet rs;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < g_instances; ++i) {
    explain::ExplainerConfig cfg;
    cfg.seed = 1000 * seed + i;
    if (v.tweak) v.tweak(cfg);
    rs.results.push_back(explain::explain(*p.model, p.test.row(i), p.train, p.clusters, cfg));
  }
  rs.seconds = seconds_since(t0);
  return cache.emplace(key, std::move(rs)).first->second;
}

const Variant kDemux{"demux", nullptr};
const Variant kNoSsd{"no-ssd", [](explain::ExplainerConfig& c) { c.no_ssd = true; }};
const Variant kNoMemory{"no-mask-memory", [](explain::ExplainerConfig& c) { c.no_mask_memory = true; }};

std::vector<double> reference(std::size_t i) {
  const auto& p = planted();
  return p.clusters.centroids[p.clusters.farthest(p.test.row(i))];
}

double auc_diff(const explain::SaliencyMap& m, std::size_t i) {
  const auto& p = planted();
  return eval::evaluate(*p.model, p.test.row(i), m, reference(i)).auc_difference;
}

Outcome end_to_end() {
  const auto& p = planted();
  const auto& demux = runs(kDemux, 0);
  std::vector<double> ours, rise, rnd;
  for (std::size_t i = 0; i < g_instances; ++i) {
    const auto x = p.test.row(i);
    ours.push_back(auc_diff(demux.results[i].map, i));
    rise.push_back(auc_diff(explain::baseline_rise(*p.model, x, 2000, 0.5, 500 + i), i));
    rnd.push_back(auc_diff(explain::baseline_random(*p.model, x, 900 + i), i));
  }
  const double secs = p.setup_seconds + demux.seconds;
  Outcome o;
  o.pass = p.train_accuracy >= 0.95 && mean(ours) - mean(rise) >= 0.1 && mean(ours) - mean(rnd) >= 0.1 && secs < 600;
  o.detail = "train acc " + fmt("%.3f", p.train_accuracy) + "; mean AUC-difference demux " + fmt("%.3f", mean(ours)) +
             ", RISE " + fmt("%.3f", mean(rise)) + ", random " + fmt("%.3f", mean(rnd)) + " (margins " +
             fmt("%.3f", mean(ours) - mean(rise)) + ", " + fmt("%.3f", mean(ours) - mean(rnd)) + "), " +
             std::to_string(g_instances) + " instances, " + fmt("%.0f", secs) + " s";
  return o;
}

Outcome class_specificity() {
  std::size_t wins = 0;
  std::string pairs;
  for (std::size_t seed = 0; seed < 5; ++seed) {
    std::vector<double> on, off;
    for (std::size_t i = 0; i < g_instances; ++i) {
      on.push_back(eval::iou_metric(runs(kDemux, seed).results[i].map).area);
      off.push_back(eval::iou_metric(runs(kNoSsd, seed).results[i].map).area);
    }
    wins += mean(on) < mean(off);
    pairs += (seed ? ", " : "") + fmt("%.4f", mean(on)) + " vs " + fmt("%.4f", mean(off));
  }
  Outcome o;
  o.pass = wins >= 4;
  o.detail = std::to_string(wins) + "/5 seeds strictly lower with SSD (mean iou_area on vs off: " + pairs + ")";
  return o;
}

Outcome localization() {
  const auto& p = planted();
  const auto& r = runs(kDemux, 0);
  std::size_t good = 0;
  std::vector<double> shares;
  for (std::size_t i = 0; i < g_instances; ++i) {
    const auto& m = r.results[i].map;
    const auto& win = p.layout.class_windows[m.target];
    const auto& shared = p.layout.shared_window;
    double inside = 0.0, total = 0.0, in_z = 0.0, in_shared = 0.0;
    for (std::size_t t = 0; t < m.length; ++t) {
      const double v = m.at(m.target, t);
      if (v > 0) {
        total += v;
        if (win.contains(t) || shared.contains(t)) inside += v;
      }
      if (win.contains(t)) in_z += std::fabs(v) / win.width();
      if (shared.contains(t)) in_shared += std::fabs(v) / shared.width();
    }
    const double share = total > 0 ? inside / total : 0.0;
    shares.push_back(share);
    good += share >= 0.6 && in_shared < in_z;
  }
  Outcome o;
  o.pass = 2 * good > g_instances;
  o.detail = std::to_string(good) + "/" + std::to_string(g_instances) +
             " instances meet both conditions; median positive-mass share in own+shared windows " +
             fmt("%.3f", median(shares));
  return o;
}

Outcome consistency() {
  std::size_t ok = 0;
  std::vector<double> with, without;
  for (std::size_t i = 0; i < g_instances; ++i) {
    std::vector<double> on, off;
    for (std::size_t seed = 0; seed < 5; ++seed) {
      on.push_back(auc_diff(runs(kDemux, seed).results[i].map, i));
      off.push_back(auc_diff(runs(kNoMemory, seed).results[i].map, i));
    }
    with.push_back(pop_std(on));
    without.push_back(pop_std(off));
    ok += with.back() <= without.back();
  }
  Outcome o;
  o.pass = 5 * ok >= 4 * g_instances;
  o.detail = std::to_string(ok) + "/" + std::to_string(g_instances) + " instances with std(memory) <= std(final map); "
             "mean std " + fmt("%.4f", mean(with)) + " vs " + fmt("%.4f", mean(without));
  return o;
}

double kl(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += p[i] * std::log((p[i] + 1e-12) / (q[i] + 1e-12));
  return s;
}

Outcome local_fidelity() {
  const auto& p = planted();
  const auto& r = runs(kDemux, 0);
  std::size_t accepted = 0, kept = 0;
  std::vector<double> kls;
  for (std::size_t i = 0; i < g_instances; ++i) {
    const auto& e = r.results[i];
    if (e.diagnostics.used_fallback) continue;
    ++accepted;
    const auto x = p.test.row(i);
    const std::size_t z = e.map.target;
    const auto& repl = e.diagnostics.last_replacements;
    const auto row = e.map.row(z);
    const auto xt = explain::perturb(x, std::vector<double>(row.begin(), row.end()), repl.near_row(z), repl.far_row(z));
    kept += p.model->predict(xt) == z;
    kls.push_back(kl(p.model->predict_proba(x), p.model->predict_proba(xt)));
  }
  Outcome o;
  const double med = kls.empty() ? INFINITY : median(kls);
  o.pass = accepted > 0 && 10 * kept >= 9 * accepted && med < 0.1;
  o.detail = std::to_string(kept) + "/" + std::to_string(accepted) + " accepted maps keep the class (" +
             std::to_string(g_instances - accepted) + " fell back); median KL " + fmt("%.4f", med) + " nats";
  return o;
}

// ------------------------------------------------------------- replacement

Outcome epsilon_statistics() {
  const auto& p = planted();
  const auto x = p.test.row(0);
  std::string detail;
  bool pass = true;
  for (double eps : {0.0, 0.3, 1.0}) {
    std::mt19937_64 rng(14);
    auto prev = explain::select_replacements(x, p.clusters, p.train, 3, nullptr, eps, rng);
    std::size_t resampled = 0, flags = 0;
    for (int trial = 0; trial < 10000; ++trial) {
      auto cur = explain::select_replacements(x, p.clusters, p.train, 3, &prev, eps, rng);
      for (const auto* choices : {&cur.near_choice, &cur.far_choice}) {
        for (const auto& c : *choices) {
          resampled += c.resampled;
          ++flags;
        }
      }
      prev = std::move(cur);
    }
    const double freq = static_cast<double>(resampled) / flags;
    const double sigma = std::sqrt(eps * (1 - eps) / flags);
    const bool ok = std::fabs(freq - eps) <= 3 * sigma;
    pass = pass && ok;
    detail += (detail.empty() ? "" : "; ") + std::string("eps ") + fmt("%.1f", eps) + ": resample " +
              fmt("%.4f", freq) + ", keep " + fmt("%.4f", 1 - freq) + " (3 sigma " + fmt("%.4f", 3 * sigma) + ")";
  }
  return {pass, false, detail + " over 10^4 trials"};
}

// ---------------------------------------------------------------- real data

Outcome ecg5000(const fs::path& dir) {
  const auto train_file = dir / "ECG5000" / "ECG5000_TRAIN.tsv";
  const auto test_file = dir / "ECG5000" / "ECG5000_TEST.tsv";
  if (dir.empty() || !fs::exists(train_file) || !fs::exists(test_file)) {
    return {false, true, "ECG5000 not found (pass --ucr-dir or set DEMUX_UCR_DIR)"};
  }
  const auto train = data::znormalize(data::load_ucr(train_file));
  const auto test = data::znormalize(data::load_ucr(test_file));
  models::FcnClassifier f(train.length(), train.num_classes(), 128, 64, 3);
  models::TrainConfig tc;
  tc.epochs = 200;
  tc.seed = 3;
  models::train(f, train, tc);
  const auto clusters = explain::fit_clusters(train, 10, 3);
  std::vector<double> on, off;
  for (std::size_t i = 0; i < std::min<std::size_t>(50, test.size()); ++i) {
    explain::ExplainerConfig cfg;
    cfg.seed = i;
    on.push_back(eval::iou_metric(explain::explain(f, test.row(i), train, clusters, cfg).map).area);
    cfg.no_ssd = true;
    off.push_back(eval::iou_metric(explain::explain(f, test.row(i), train, clusters, cfg).map).area);
  }
  return {mean(on) < mean(off), false,
          "mean iou_area " + fmt("%.4f", mean(on)) + " with SSD vs " + fmt("%.4f", mean(off)) + " without, " +
              std::to_string(on.size()) + " test instances"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  bool strict = false;
  std::vector<std::string> only;
  std::string ucr_dir;
  if (const char* env = std::getenv("DEMUX_UCR_DIR")) ucr_dir = env;
  app.add_flag("--strict", strict, "Exit nonzero when any check fails");
  app.add_option("--only", only, "Run just these checks (by name)");
  app.add_option("--instances", g_instances, "Planted test instances per check")->capture_default_str();
  app.add_option("--ucr-dir", ucr_dir, "Directory holding ECG5000/ECG5000_{TRAIN,TEST}.tsv");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> checks = {
      {"gradient-suite", gradient_suite},
      {"perturbation-identities", perturbation_identities},
      {"metric-oracles", metric_oracles},
      {"epsilon-statistics", epsilon_statistics},
      {"end-to-end-faithfulness", end_to_end},
      {"class-specificity", class_specificity},
      {"ground-truth-localization", localization},
      {"consistency", consistency},
      {"local-fidelity", local_fidelity},
      {"ecg5000-directional", [&] { return ecg5000(ucr_dir); }},
  };
  std::size_t passed = 0, failed = 0, skipped = 0;
  for (const auto& [name, check] : checks) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, false, std::string("error: ") + e.what()};
    }
    const char* tag = o.skipped ? "SKIP" : o.pass ? "PASS" : "FAIL";
    (o.skipped ? skipped : o.pass ? passed : failed)++;
    std::cout << tag << ' ' << name << ": " << o.detail << std::endl;
  }
  std::cout << passed << " passed, " << failed << " failed, " << skipped << " skipped" << std::endl;
  return strict && failed > 0 ? 1 : 0;
}
