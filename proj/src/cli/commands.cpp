#include <algorithm>
#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>

#include "demux/errors.hpp"
#include "internal.hpp"

namespace demux::cli {

using detail::json;

namespace {

std::unique_ptr<models::Classifier> make_model(const TrainOptions& opt, std::size_t length, std::size_t classes) {
  const auto seed = opt.train.seed;
  if (opt.arch == "fcn") return std::make_unique<models::FcnClassifier>(length, classes, opt.hidden1, opt.hidden2, seed);
  if (opt.arch == "gru") return std::make_unique<models::GruClassifier>(length, classes, opt.gru_hidden, seed);
  throw DomainError("unknown architecture '" + opt.arch + "' (expected fcn or gru)");
}

std::unique_ptr<models::Classifier> load_model(const fs::path& path, const LoadedData& d) {
  return models::load_weights(path, {std::nullopt, d.train.length(), d.train.num_classes()});
}

std::string format_accuracy(double a) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", a);
  return buf;
}

std::string loss_csv(const std::vector<explain::LossBreakdown>& history) {
  std::ostringstream os;
  os << "epoch,prev,max,budget,treg,ssd,total\n";
  for (std::size_t e = 0; e < history.size(); ++e) {
    const auto& l = history[e];
    os << e << ',' << detail::exact(l.prev) << ',' << detail::exact(l.max) << ',' << detail::exact(l.budget) << ','
       << detail::exact(l.treg) << ',' << detail::exact(l.ssd) << ',' << detail::exact(l.total()) << '\n';
  }
  return os.str();
}

json choices_json(const std::vector<explain::ReplacementChoice>& choices) {
  json arr = json::array();
  for (const auto& c : choices) arr.push_back({{"cluster", c.cluster}, {"member", c.member}, {"resampled", c.resampled}});
  return arr;
}

json diagnostics_json(const explain::Explanation& e, std::size_t instance) {
  const auto& d = e.diagnostics;
  return json{{"instance", instance},
              {"target", e.map.target},
              {"seed", e.map.seed},
              {"epochs", d.loss_history.size()},
              {"accepted", d.accepted},
              {"acceptance_rate", d.acceptance_rate},
              {"cluster_count", d.cluster_count},
              {"near_cluster", d.near_cluster},
              {"far_cluster", d.far_cluster},
              {"near_resamples", d.near_resamples},
              {"far_resamples", d.far_resamples},
              {"near_choice", choices_json(d.last_replacements.near_choice)},
              {"far_choice", choices_json(d.last_replacements.far_choice)},
              {"used_fallback", d.used_fallback},
              {"warnings", d.warnings}};
}

std::string report_file_stem(const std::string& method, std::size_t instance, std::size_t run) {
  return method + "_" + detail::instance_dir_name(instance) + "_run" + std::to_string(run);
}

}  // namespace

void cmd_train(const TrainOptions& opt) {
  opt.train.validate();
  const auto d = load_data(opt.source);
  auto model = make_model(opt, d.train.length(), d.train.num_classes());
  const auto result = models::train(*model, d.train, opt.train);
  const double test_acc = models::accuracy(*model, d.test);

  fs::create_directories(opt.out / "data");
  models::save_weights(*model, opt.out / "model.dmxw");
  std::ostringstream loss;
  loss << "epoch,loss\n";
  for (std::size_t e = 0; e < result.loss_history.size(); ++e) loss << e << ',' << detail::exact(result.loss_history[e]) << '\n';
  detail::write_text(opt.out / "train_loss.csv", loss.str());
  data::write_ucr(d.train, opt.out / "data" / "train.tsv");
  data::write_ucr(d.test, opt.out / "data" / "test.tsv");
  if (d.train.ground_truth) data::write_ground_truth(*d.train.ground_truth, opt.out / "data" / "ground_truth.txt");

  const json run{{"kind", "train"},
                 {"dataset", d.name},
                 {"arch", opt.arch},
                 {"seed", opt.train.seed},
                 {"train_accuracy", result.train_accuracy},
                 {"test_accuracy", test_acc}};
  detail::write_text(opt.out / "run.json", run.dump(2) + "\n");
  const std::string summary = "dataset=" + d.name + " arch=" + opt.arch +
                              " train_accuracy=" + format_accuracy(result.train_accuracy) +
                              " test_accuracy=" + format_accuracy(test_acc);
  detail::write_text(opt.out / "summary.txt", summary + "\n");
  std::cout << summary << '\n';
}

namespace {

// Resolves model and data for explain: a training run directory supplies both.
std::pair<fs::path, DataSource> explain_inputs(const ExplainOptions& opt) {
  if (opt.train_run.empty()) {
    if (opt.model.empty()) throw DomainError("explain needs --run TRAIN_DIR or --model FILE");
    DataSource src = opt.source;
    for (auto* p : {&src.data, &src.test_data, &src.ground_truth}) {
      if (!p->empty()) *p = fs::absolute(*p);
    }
    return {fs::absolute(opt.model), src};
  }
  const auto dir = fs::absolute(opt.train_run);
  const auto run_file = dir / "run.json";
  if (!fs::exists(run_file)) {
    throw DataError(DataError::Kind::Io, "no training run in " + dir.string() + "; expected run.json, model.dmxw, "
                                         "data/train.tsv and data/test.tsv (written by `demux train`)");
  }
  json run;
  try {
    run = json::parse(detail::read_text(run_file));
  } catch (const json::exception& e) {
    throw DataError(DataError::Kind::Invalid, run_file.string() + ": " + e.what());
  }
  DataSource src;
  src.data = dir / "data" / "train.tsv";
  src.test_data = dir / "data" / "test.tsv";
  if (fs::exists(dir / "data" / "ground_truth.txt")) src.ground_truth = dir / "data" / "ground_truth.txt";
  src.name = run.value("dataset", "");
  src.znormalize = false;
  src.seed = opt.source.seed;
  return {dir / "model.dmxw", src};
}

}  // namespace

void cmd_explain(const ExplainOptions& opt) {
  opt.explainer.validate();
  if (opt.runs == 0) throw DomainError("--runs must be at least 1");
  const auto [model_path, source] = explain_inputs(opt);
  const auto d = load_data(source);
  const auto model = load_model(model_path, d);
  const auto instances = opt.selection.resolve(d.test.size());
  const auto clusters = opt.explainer.no_cluster ? explain::single_cluster(d.train)
                                                 : explain::fit_clusters(d.train, opt.explainer.k_max, opt.explainer.seed);
  for (const auto& w : clusters.warnings) detail::log("warning: " + w);

  fs::create_directories(opt.out);
  const std::size_t tasks = instances.size() * opt.runs;
  detail::parallel_for(tasks, opt.jobs, [&](std::size_t task) {
    const std::size_t instance = instances[task / opt.runs];
    const std::size_t r = task % opt.runs;
    auto cfg = opt.explainer;
    cfg.seed = instance_seed(opt.explainer.seed, instance, r);
    const auto e = explain::explain(*model, d.test.row(instance), d.train, clusters, cfg);
    const auto dir = opt.out / detail::instance_dir_name(instance);
    fs::create_directories(dir);
    explain::write_saliency(e.map, dir / detail::saliency_file_name(r));
    detail::write_text(dir / ("loss_run" + std::to_string(r) + ".csv"), loss_csv(e.diagnostics.loss_history));
    detail::write_text(dir / ("diagnostics_run" + std::to_string(r) + ".json"),
                       diagnostics_json(e, instance).dump(2) + "\n");
    for (const auto& w : e.diagnostics.warnings) detail::log(detail::instance_dir_name(instance) + ": " + w);
  });

  detail::ExplainRun run;
  run.dataset = d.name;
  run.method = method_name(opt.explainer);
  run.model = model_path;
  run.source = source;
  run.k_max = opt.explainer.k_max;
  run.seed = opt.explainer.seed;
  run.instances = instances;
  run.runs = opt.runs;
  detail::write_text(opt.out / "run.json", detail::to_json(run).dump(2) + "\n");
  std::cout << "explained " << instances.size() << " instance(s) x " << opt.runs << " run(s) of " << d.name << " -> "
            << opt.out.string() << '\n';
}

namespace {

// Everything eval and report need to score maps of an explain run.
struct RunContext {
  detail::ExplainRun run;
  LoadedData data;
  std::unique_ptr<models::Classifier> model;
  explain::ClusterModel clusters;
};

RunContext open_run(const fs::path& dir) {
  RunContext c;
  c.run = detail::read_explain_run(dir);
  c.data = load_data(c.run.source);
  c.model = load_model(c.run.model, c.data);
  c.clusters = explain::fit_clusters(c.data.train, c.run.k_max, c.run.seed);
  for (auto i : c.run.instances) {
    if (i >= c.data.test.size()) throw DataError(DataError::Kind::Invalid, "run lists instance " + std::to_string(i) +
                                                                               " beyond the test set");
  }
  return c;
}

}  // namespace

void cmd_eval(const EvalOptions& opt) {
  const auto ctx = open_run(opt.run);
  const auto& instances = ctx.run.instances;
  fs::create_directories(opt.out / "reports");
  if (opt.with_baseline) fs::create_directories(opt.out / "baselines");

  // one slot per instance, filled in parallel then flattened in order
  std::vector<std::vector<eval::EvalReport>> per_instance(instances.size());
  detail::parallel_for(instances.size(), opt.jobs, [&](std::size_t k) {
    const std::size_t i = instances[k];
    const auto x = ctx.data.test.row(i);
    const auto reference = detail::reference_for(ctx.clusters, x);
    std::vector<explain::SaliencyMap> maps;
    for (std::size_t r = 0; r < ctx.run.runs; ++r) {
      maps.push_back(explain::read_saliency(opt.run / detail::instance_dir_name(i) / detail::saliency_file_name(r)));
      if (maps.back().length != x.size() || maps.back().num_classes != ctx.model->num_classes()) {
        throw DataError(DataError::Kind::Invalid, "saliency map for instance " + std::to_string(i) +
                                                      " does not match the model shape");
      }
    }
    std::optional<double> spread;
    if (maps.size() > 1) spread = eval::consistency_std(maps, *ctx.model, x, reference);
    auto& out = per_instance[k];
    for (std::size_t r = 0; r < maps.size(); ++r) {
      auto rep = eval::evaluate(*ctx.model, x, maps[r], reference);
      rep.method = ctx.run.method;
      rep.dataset = ctx.run.dataset;
      rep.instance = i;
      rep.consistency_std = spread;
      out.push_back(rep);
    }
    if (opt.with_baseline) {
      const auto seed = instance_seed(ctx.run.seed, i, 0);
      const std::pair<std::string, explain::SaliencyMap> baselines[] = {
          {"rise", explain::baseline_rise(*ctx.model, x, opt.rise_masks, opt.rise_keep, seed)},
          {"random", explain::baseline_random(*ctx.model, x, seed)}};
      for (const auto& [name, map] : baselines) {
        explain::write_saliency(map, opt.out / "baselines" / (name + "_" + detail::instance_dir_name(i) + ".csv"));
        auto rep = eval::evaluate(*ctx.model, x, map, reference);
        rep.method = name;
        rep.dataset = ctx.run.dataset;
        rep.instance = i;
        out.push_back(rep);
      }
    }
  });

  std::vector<eval::EvalReport> reports;
  std::map<std::string, std::size_t> run_index;
  for (const auto& group : per_instance) {
    run_index.clear();
    for (const auto& rep : group) {
      const auto stem = report_file_stem(rep.method, rep.instance, run_index[rep.method]++);
      detail::write_text(opt.out / "reports" / (stem + ".json"), eval::to_json(rep) + "\n");
      detail::write_text(opt.out / "reports" / (stem + ".txt"), eval::to_key_value(rep));
      reports.push_back(rep);
    }
  }
  const auto table = eval::aggregate_table(eval::aggregate(reports));
  detail::write_text(opt.out / "aggregate.csv", table);
  std::cout << table;
}

void cmd_report(const ReportOptions& opt) {
  const auto ctx = open_run(opt.run);
  fs::create_directories(opt.out);
  for (auto i : ctx.run.instances) {
    const auto x = ctx.data.test.row(i);
    const auto map = explain::read_saliency(opt.run / detail::instance_dir_name(i) / detail::saliency_file_name(0));
    if (map.length != x.size()) {
      throw DataError(DataError::Kind::Invalid, "saliency map for instance " + std::to_string(i) +
                                                    " does not match the series length");
    }
    const auto reference = detail::reference_for(ctx.clusters, x);
    const auto row = map.row(map.target);
    const auto del = eval::deletion_curve(*ctx.model, x, row, reference, map.target);
    const auto ins = eval::insertion_curve(*ctx.model, x, row, reference, map.target);
    const auto stem = detail::instance_dir_name(i);
    detail::write_text(opt.out / (stem + "_saliency.svg"), detail::saliency_svg(x, map, i));
    detail::write_text(opt.out / (stem + "_curves.svg"), detail::curves_svg(del, ins, map.target, i));
  }
  std::cout << "wrote " << 2 * ctx.run.instances.size() << " plot(s) to " << opt.out.string() << '\n';
}

}  // namespace demux::cli
