#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "demux/dataset.hpp"
#include "demux/explainer.hpp"
#include "demux/training.hpp"

namespace demux::cli {

namespace fs = std::filesystem;

/// Where the train/test series come from. Exactly one of `synthetic` and
/// `data` is set; without `test_data` the training file is split.
struct DataSource {
  std::string synthetic;  // "C=3,T=48" or "C=3,T=48,N=40"
  fs::path data;
  fs::path test_data;
  fs::path ground_truth;
  std::string name;  // overrides the name taken from the file
  bool znormalize = true;
  double train_fraction = 0.5;
  std::uint64_t seed = 0;
};

struct SyntheticSpec {
  std::size_t classes = 3;
  std::size_t length = 48;
  std::size_t per_class = 40;
};

SyntheticSpec parse_synthetic(const std::string& spec);

struct LoadedData {
  std::string name;
  data::Dataset train;
  data::Dataset test;
};

LoadedData load_data(const DataSource& src);

/// Which test instances to explain.
struct Selection {
  std::vector<std::size_t> indices;
  bool all_test = false;
  std::size_t first = 5;

  std::vector<std::size_t> resolve(std::size_t test_size) const;
};

struct TrainOptions {
  DataSource source;
  std::string arch = "fcn";
  models::TrainConfig train;
  std::size_t hidden1 = 128;
  std::size_t hidden2 = 64;
  std::size_t gru_hidden = 10;
  fs::path out;
};

struct ExplainOptions {
  fs::path train_run;
  DataSource source;
  fs::path model;
  explain::ExplainerConfig explainer;
  Selection selection;
  std::size_t runs = 1;
  std::size_t jobs = 1;
  fs::path out;
};

struct EvalOptions {
  fs::path run;
  bool with_baseline = false;
  std::size_t rise_masks = 2000;
  double rise_keep = 0.5;
  std::size_t jobs = 1;
  fs::path out;
};

struct ReportOptions {
  fs::path run;
  fs::path out;
};

void cmd_train(const TrainOptions& opt);
void cmd_explain(const ExplainOptions& opt);
void cmd_eval(const EvalOptions& opt);
void cmd_report(const ReportOptions& opt);

/// Seed for run `run` of test instance `instance`.
std::uint64_t instance_seed(std::uint64_t base, std::size_t instance, std::size_t run);

/// Method label recorded in reports, e.g. "demux" or "demux-no-ssd".
std::string method_name(const explain::ExplainerConfig& cfg);

/// Parses arguments, dispatches and maps errors to exit codes:
/// 0 success, 1 usage, 2 data, 3 numerical.
int run(int argc, char** argv);

}  // namespace demux::cli
