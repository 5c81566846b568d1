#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "demux/cli.hpp"
#include "demux/classifier.hpp"
#include "demux/clustering.hpp"
#include "demux/metrics.hpp"
#include "demux/saliency.hpp"

namespace demux::cli::detail {

using nlohmann::json;

/// Contents of run.json in an explain output directory.
struct ExplainRun {
  std::string dataset;
  std::string method;
  fs::path model;
  DataSource source;
  std::size_t k_max = 10;
  std::uint64_t seed = 0;
  std::vector<std::size_t> instances;
  std::size_t runs = 1;
};

json to_json(const DataSource& src);
DataSource source_from_json(const json& j);
json to_json(const ExplainRun& run);
ExplainRun explain_run_from_json(const json& j);

/// Reads run.json from an explain directory; errors list the files expected there.
ExplainRun read_explain_run(const fs::path& dir);

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);
/// printf-style "%.17g".
std::string exact(double v);

std::string instance_dir_name(std::size_t instance);
std::string saliency_file_name(std::size_t run);

/// Farthest centroid of the background clustering: the deletion/insertion reference.
std::vector<double> reference_for(const explain::ClusterModel& clusters, std::span<const double> x);

/// Runs body(i) for i in [0, n) on up to `jobs` threads. The first exception is rethrown.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& body);

void log(const std::string& message);

std::string saliency_svg(std::span<const double> x, const explain::SaliencyMap& map, std::size_t instance);
std::string curves_svg(const eval::Curve& deletion, const eval::Curve& insertion, std::size_t target,
                       std::size_t instance);

}  // namespace demux::cli::detail
