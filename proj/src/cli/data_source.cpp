#include <algorithm>
#include <charconv>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include "demux/errors.hpp"
#include "internal.hpp"

namespace demux::cli {

SyntheticSpec parse_synthetic(const std::string& spec) {
  SyntheticSpec out;
  bool have_c = false, have_t = false;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw DomainError("synthetic spec item '" + item + "' is not KEY=VALUE");
    const std::string key = item.substr(0, eq), value = item.substr(eq + 1);
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
      throw DomainError("synthetic spec value '" + value + "' is not a non-negative integer");
    }
    if (key == "C") {
      out.classes = v;
      have_c = true;
    } else if (key == "T") {
      out.length = v;
      have_t = true;
    } else if (key == "N") {
      out.per_class = v;
    } else {
      throw DomainError("unknown synthetic spec key '" + key + "' (expected C, T, N)");
    }
  }
  if (!have_c || !have_t) throw DomainError("synthetic spec needs C and T, e.g. C=3,T=48");
  return out;
}

namespace {

// Re-expresses test labels in the training label order.
data::Dataset align_labels(const data::Dataset& train, data::Dataset test) {
  std::map<std::string, std::size_t> index;
  for (std::size_t k = 0; k < train.label_names.size(); ++k) index[train.label_names[k]] = k;
  for (auto& y : test.labels) {
    const auto& name = test.label_names.at(y);
    const auto it = index.find(name);
    if (it == index.end()) {
      throw DataError(DataError::Kind::InvalidLabels, "test label '" + name + "' does not occur in the training data");
    }
    y = it->second;
  }
  test.label_names = train.label_names;
  return test;
}

std::string strip_split(std::string name) {
  for (const std::string suffix : {"_TRAIN", "_TEST"}) {
    if (name.size() > suffix.size() && name.ends_with(suffix)) return name.substr(0, name.size() - suffix.size());
  }
  return name;
}

}  // namespace

LoadedData load_data(const DataSource& src) {
  const bool synthetic = !src.synthetic.empty();
  if (synthetic && !src.data.empty()) throw DomainError("pass either --synthetic or --data, not both");
  if (!synthetic && src.data.empty()) throw DomainError("no dataset: pass --synthetic, --data or --run");

  LoadedData out;
  if (synthetic) {
    const auto spec = parse_synthetic(src.synthetic);
    auto ds = data::make_planted_dataset(spec.classes, spec.length, spec.per_class, src.seed);
    if (src.znormalize) ds = data::znormalize(ds);
    std::tie(out.train, out.test) = data::split(ds, src.train_fraction, src.seed);
    out.name = src.name.empty() ? ds.name : src.name;
    return out;
  }

  auto train = data::load_ucr(src.data);
  const std::string file_name = strip_split(train.name);
  data::Dataset test;
  if (!src.test_data.empty()) {
    test = align_labels(train, data::load_ucr(src.test_data));
  } else {
    std::tie(train, test) = data::split(train, src.train_fraction, src.seed);
  }
  if (test.length() != train.length()) {
    throw DataError(DataError::Kind::RaggedRows, "test series have length " + std::to_string(test.length()) +
                                                     ", training series " + std::to_string(train.length()));
  }
  if (!src.ground_truth.empty()) {
    const auto gt = data::read_ground_truth(src.ground_truth);
    train.ground_truth = gt;
    test.ground_truth = gt;
    train.validate();
  }
  if (src.znormalize) {
    train = data::znormalize(train);
    test = data::znormalize(test);
  }
  out.name = src.name.empty() ? file_name : src.name;
  out.train = std::move(train);
  out.test = std::move(test);
  return out;
}

std::vector<std::size_t> Selection::resolve(std::size_t test_size) const {
  if (test_size == 0) throw DataError(DataError::Kind::EmptyFile, "test set is empty");
  std::vector<std::size_t> out;
  if (!indices.empty()) {
    for (auto i : indices) {
      if (i >= test_size) {
        throw DomainError("instance " + std::to_string(i) + " out of range (test set has " +
                          std::to_string(test_size) + ")");
      }
      if (std::find(out.begin(), out.end(), i) == out.end()) out.push_back(i);
    }
    return out;
  }
  out.resize(all_test ? test_size : std::min(first, test_size));
  std::iota(out.begin(), out.end(), 0);
  return out;
}

std::uint64_t instance_seed(std::uint64_t base, std::size_t instance, std::size_t run) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(instance), static_cast<std::uint32_t>(run)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

std::string method_name(const explain::ExplainerConfig& cfg) {
  std::string name = "demux";
  if (cfg.no_cluster) name += "-no-cluster";
  if (cfg.no_mask_memory) name += "-no-mask-memory";
  if (cfg.no_kl) name += "-no-kl";
  if (cfg.no_tvnorm) name += "-no-tvnorm";
  if (cfg.no_budget) name += "-no-budget";
  if (cfg.no_ssd) name += "-no-ssd";
  return name;
}

namespace detail {

json to_json(const DataSource& src) {
  return json{{"synthetic", src.synthetic},       {"data", src.data.string()},
              {"test_data", src.test_data.string()}, {"ground_truth", src.ground_truth.string()},
              {"name", src.name},                 {"znormalize", src.znormalize},
              {"train_fraction", src.train_fraction}, {"seed", src.seed}};
}

DataSource source_from_json(const json& j) {
  DataSource s;
  s.synthetic = j.at("synthetic").get<std::string>();
  s.data = j.at("data").get<std::string>();
  s.test_data = j.at("test_data").get<std::string>();
  s.ground_truth = j.at("ground_truth").get<std::string>();
  s.name = j.at("name").get<std::string>();
  s.znormalize = j.at("znormalize").get<bool>();
  s.train_fraction = j.at("train_fraction").get<double>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

json to_json(const ExplainRun& run) {
  return json{{"kind", "explain"},           {"dataset", run.dataset}, {"method", run.method},
              {"model", run.model.string()}, {"source", to_json(run.source)}, {"k_max", run.k_max},
              {"seed", run.seed},            {"instances", run.instances}, {"runs", run.runs}};
}

ExplainRun explain_run_from_json(const json& j) {
  if (j.value("kind", "") != "explain") throw DataError(DataError::Kind::Invalid, "run.json is not an explain run");
  ExplainRun r;
  r.dataset = j.at("dataset").get<std::string>();
  r.method = j.at("method").get<std::string>();
  r.model = j.at("model").get<std::string>();
  r.source = source_from_json(j.at("source"));
  r.k_max = j.at("k_max").get<std::size_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.instances = j.at("instances").get<std::vector<std::size_t>>();
  r.runs = j.at("runs").get<std::size_t>();
  return r;
}

ExplainRun read_explain_run(const fs::path& dir) {
  const auto path = dir / "run.json";
  if (!fs::exists(path)) {
    throw DataError(DataError::Kind::Io, "no explain run in " + dir.string() +
                                             "; expected run.json and instance_NNNN/" + saliency_file_name(0) +
                                             " (written by `demux explain --out " + dir.string() + "`)");
  }
  ExplainRun run;
  try {
    run = explain_run_from_json(json::parse(read_text(path)));
  } catch (const json::exception& e) {
    throw DataError(DataError::Kind::Invalid, path.string() + ": " + e.what());
  }
  for (auto i : run.instances) {
    for (std::size_t r = 0; r < run.runs; ++r) {
      const auto f = dir / instance_dir_name(i) / saliency_file_name(r);
      if (!fs::exists(f)) throw DataError(DataError::Kind::Io, "expected saliency file " + f.string() + " is missing");
    }
  }
  return run;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataError::Kind::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(DataError::Kind::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw DataError(DataError::Kind::Io, "write failed for " + path.string());
}

std::string exact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string instance_dir_name(std::size_t instance) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "instance_%04zu", instance);
  return buf;
}

std::string saliency_file_name(std::size_t run) { return "saliency_run" + std::to_string(run) + ".csv"; }

std::vector<double> reference_for(const explain::ClusterModel& clusters, std::span<const double> x) {
  return clusters.centroids.at(clusters.farthest(x));
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& body) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < jobs; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

void log(const std::string& message) {
  static std::mutex m;
  std::lock_guard lock(m);
  std::cerr << "demux: " << message << '\n';
}

}  // namespace detail
}  // namespace demux::cli
