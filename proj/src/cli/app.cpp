#include <CLI11.hpp>

#include <iostream>

#include "demux/errors.hpp"
#include "internal.hpp"

namespace demux::cli {

namespace {

constexpr int kUsage = 1;
constexpr int kData = 2;
constexpr int kNumerical = 3;

void add_common(CLI::App& sub, std::uint64_t& seed, fs::path& out) {
  sub.add_option("--seed", seed, "Seed for every random choice")->envname("DEMUX_SEED")->capture_default_str();
  sub.add_option("--out", out, "Output directory")->required();
}

void add_data(CLI::App& sub, DataSource& src, bool& no_znorm) {
  sub.add_option("--synthetic", src.synthetic, "Planted-pattern data, e.g. C=3,T=48 or C=3,T=48,N=40")
      ->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::Join);
  sub.add_option("--data", src.data, "Training series (tab/comma separated, label first)");
  sub.add_option("--test-data", src.test_data, "Test series; without it the training file is split");
  sub.add_option("--ground-truth", src.ground_truth, "Planted-window masks for the data");
  sub.add_option("--train-fraction", src.train_fraction, "Training share when splitting")->capture_default_str();
  sub.add_flag("--no-znorm", no_znorm, "Keep the series as loaded");
}

// Echoes the config file verbatim and the resolved options of `sub`.
void echo_config(const CLI::App& app, const CLI::App& sub, const fs::path& out) {
  fs::create_directories(out);
  const auto* config = app.get_config_ptr();
  if (config && config->count() > 0) {
    const fs::path file = config->as<std::string>();
    detail::write_text(out / "config.ini", detail::read_text(file));
  }
  detail::write_text(out / "effective_config.ini", "[" + sub.get_name() + "]\n" + sub.config_to_str(true, false));
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Class-specific saliency maps for time series classifiers"};
  app.set_config("--config", "", "INI file with [train], [explain], [eval] and [report] sections");
  app.fallthrough();
  app.require_subcommand(1, 1);

  TrainOptions topt;
  ExplainOptions eopt;
  EvalOptions vopt;
  ReportOptions ropt;
  std::uint64_t train_seed = 0, explain_seed = 0, eval_seed = 0, report_seed = 0;
  bool train_raw = false, explain_raw = false;

  auto* train = app.add_subcommand("train", "Train a classifier and write its weights");
  add_common(*train, train_seed, topt.out);
  add_data(*train, topt.source, train_raw);
  train->add_option("--arch", topt.arch, "fcn or gru")->check(CLI::IsMember({"fcn", "gru"}))->capture_default_str();
  train->add_option("--epochs", topt.train.epochs)->capture_default_str();
  train->add_option("--lr", topt.train.learning_rate)->capture_default_str();
  train->add_option("--batch-size", topt.train.batch_size)->capture_default_str();
  train->add_option("--hidden1", topt.hidden1, "FCN first hidden width")->capture_default_str();
  train->add_option("--hidden2", topt.hidden2, "FCN second hidden width")->capture_default_str();
  train->add_option("--gru-hidden", topt.gru_hidden, "GRU state size")->capture_default_str();

  auto* expl = app.add_subcommand("explain", "Learn saliency maps for selected test instances");
  add_common(*expl, explain_seed, eopt.out);
  add_data(*expl, eopt.source, explain_raw);
  auto& cfg = eopt.explainer;
  expl->add_option("--run", eopt.train_run, "Training output directory (supplies model and data)");
  expl->add_option("--model", eopt.model, "Weight file, used with --synthetic or --data");
  expl->add_option("--instances", eopt.selection.indices, "Test indices, comma separated")->delimiter(',');
  expl->add_flag("--all-test", eopt.selection.all_test, "Explain every test instance");
  expl->add_option("--first", eopt.selection.first, "Explain the first N test instances")->capture_default_str();
  expl->add_option("--runs", eopt.runs, "Re-initializations per instance")->capture_default_str();
  expl->add_option("--jobs", eopt.jobs, "Instances explained in parallel")->capture_default_str();
  expl->add_option("--lambda-prev", cfg.lambda_prev)->capture_default_str();
  expl->add_option("--lambda-max", cfg.lambda_max)->capture_default_str();
  expl->add_option("--lambda-budget", cfg.lambda_budget)->capture_default_str();
  expl->add_option("--lambda-treg", cfg.lambda_treg)->capture_default_str();
  expl->add_option("--lambda-ssd", cfg.lambda_ssd)->capture_default_str();
  expl->add_option("--epsilon", cfg.epsilon, "Chance of redrawing a replacement each epoch")->capture_default_str();
  expl->add_option("--noise-std", cfg.noise_std)->capture_default_str();
  expl->add_option("--epochs", cfg.epochs)->capture_default_str();
  expl->add_option("--lr", cfg.learning_rate)->capture_default_str();
  expl->add_option("--memory-window", cfg.memory_window, "Snapshots averaged into the final map")->capture_default_str();
  expl->add_option("--k-max", cfg.k_max, "Largest cluster count tried")->capture_default_str();
  expl->add_flag("--no-cluster", cfg.no_cluster, "Draw replacements uniformly from the background");
  expl->add_flag("--no-mask-memory", cfg.no_mask_memory, "Return the final map instead of the memory mean");
  expl->add_flag("--no-kl", cfg.no_kl);
  expl->add_flag("--no-tvnorm", cfg.no_tvnorm);
  expl->add_flag("--no-budget", cfg.no_budget);
  expl->add_flag("--no-ssd", cfg.no_ssd);

  auto* ev = app.add_subcommand("eval", "Score the maps of an explain run");
  add_common(*ev, eval_seed, vopt.out);
  ev->add_option("--run", vopt.run, "Explain output directory")->required();
  ev->add_flag("--with-baseline", vopt.with_baseline, "Also score RISE and random maps");
  ev->add_option("--rise-masks", vopt.rise_masks)->capture_default_str();
  ev->add_option("--rise-keep", vopt.rise_keep, "Keep probability of a RISE mask")->capture_default_str();
  ev->add_option("--jobs", vopt.jobs)->capture_default_str();

  auto* rep = app.add_subcommand("report", "Plot the maps and curves of an explain run");
  add_common(*rep, report_seed, ropt.out);
  rep->add_option("--run", ropt.run, "Explain output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::FileError& e) {
    std::cerr << "demux: " << e.what() << '\n';
    return kData;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (train->parsed()) {
      topt.source.seed = train_seed;
      topt.train.seed = train_seed;
      topt.source.znormalize = !train_raw;
      echo_config(app, *train, topt.out);
      cmd_train(topt);
    } else if (expl->parsed()) {
      eopt.source.seed = explain_seed;
      cfg.seed = explain_seed;
      eopt.source.znormalize = !explain_raw;
      echo_config(app, *expl, eopt.out);
      cmd_explain(eopt);
    } else if (ev->parsed()) {
      echo_config(app, *ev, vopt.out);
      cmd_eval(vopt);
    } else {
      echo_config(app, *rep, ropt.out);
      cmd_report(ropt);
    }
  } catch (const NumericalError& e) {
    std::cerr << "demux: numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const DomainError& e) {
    std::cerr << "demux: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "demux: " << e.what() << '\n';
    return kData;
  }
  return 0;
}

}  // namespace demux::cli
