#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <unistd.h>

#include "demux/cli.hpp"
#include "demux/saliency.hpp"
#include "demux/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / ("demux_cli_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run_demux(std::vector<std::string> args) {
  args.insert(args.begin(), "demux");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return demux::cli::run(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// One trained planted-pattern model shared by the explain/eval/report cases.
const fs::path& trained() {
  static const fs::path dir = [] {
    const auto d = scratch() / "train";
    REQUIRE(run_demux({"train", "--synthetic", "C=3,T=48", "--arch", "fcn", "--seed", "1", "--out", d.string()}) == 0);
    return d;
  }();
  return dir;
}

const fs::path& explained() {
  static const fs::path dir = [] {
    const auto d = scratch() / "explain";
    REQUIRE(run_demux({"explain", "--run", trained().string(), "--first", "5", "--epochs", "300", "--seed", "2", "--out",
                   d.string()}) == 0);
    return d;
  }();
  return dir;
}

std::vector<fs::path> saliency_files(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.path().filename().string().starts_with("saliency_run")) out.push_back(e.path());
  }
  return out;
}

}  // namespace

TEST_CASE("train on planted data reaches high accuracy") {
  const auto run = json::parse(slurp(trained() / "run.json"));
  CHECK(run["train_accuracy"].get<double>() >= 0.95);
  CHECK(run["test_accuracy"].get<double>() >= 0.95);
  CHECK(fs::exists(trained() / "model.dmxw"));
  CHECK(fs::exists(trained() / "train_loss.csv"));
  CHECK(fs::exists(trained() / "data" / "ground_truth.txt"));
}

TEST_CASE("errors map to exit codes") {
  const auto out = (scratch() / "bad").string();
  CHECK(run_demux({"train", "--data", "/nonexistent/Toy_TRAIN.tsv", "--out", out}) == 2);
  CHECK(run_demux({"train", "--synthetic", "C=3,T=48", "--bogus", "--out", out}) == 1);
  CHECK(run_demux({"train", "--synthetic", "C=3", "--out", out}) == 1);
  CHECK(run_demux({"train", "--synthetic", "C=3,T=48", "--arch", "lstm", "--out", out}) == 1);
  CHECK(run_demux({"train", "--config", "/nonexistent.ini", "--out", out}) == 2);
  CHECK(run_demux({"explain", "--run", (scratch() / "nothing").string(), "--out", out}) == 2);
  CHECK(run_demux({"explain", "--run", trained().string(), "--instances", "9999", "--out", out}) == 1);
}

TEST_CASE("same config and seed give byte-identical weights") {
  const auto a = scratch() / "wa", b = scratch() / "wb";
  for (const auto& d : {a, b}) {
    REQUIRE(run_demux({"train", "--synthetic", "C=3,T=24,N=10", "--epochs", "20", "--seed", "5", "--out", d.string()}) == 0);
  }
  CHECK(slurp(a / "model.dmxw") == slurp(b / "model.dmxw"));
  CHECK(slurp(a / "train_loss.csv") == slurp(b / "train_loss.csv"));
}

TEST_CASE("explain writes one map per instance for the predicted class") {
  const auto files = saliency_files(explained());
  CHECK(files.size() == 5);
  const auto model = demux::models::load_weights(trained() / "model.dmxw");
  const auto test = demux::data::load_ucr(trained() / "data" / "test.tsv");
  for (std::size_t i = 0; i < 5; ++i) {
    const auto dir = explained() / ("instance_000" + std::to_string(i));
    const auto map = demux::explain::read_saliency(dir / "saliency_run0.csv");
    CHECK(map.target == model->predict(test.series[i]));
    CHECK(fs::exists(dir / "loss_run0.csv"));
    const auto diag = json::parse(slurp(dir / "diagnostics_run0.json"));
    CHECK(diag.contains("acceptance_rate"));
    CHECK(diag["near_choice"].size() == 3);
  }
}

TEST_CASE("reruns reproduce the saliency files, also in parallel") {
  const auto again = scratch() / "explain_again";
  REQUIRE(run_demux({"explain", "--run", trained().string(), "--first", "5", "--epochs", "300", "--seed", "2", "--jobs", "3",
                 "--out", again.string()}) == 0);
  for (const auto& f : saliency_files(explained())) {
    CHECK(slurp(f) == slurp(again / fs::relative(f, explained())));
  }
}

TEST_CASE("ablation flags are echoed into the output config") {
  const auto d = scratch() / "nossd";
  REQUIRE(run_demux({"explain", "--run", trained().string(), "--instances", "0", "--epochs", "50", "--no-ssd", "--out",
                 d.string()}) == 0);
  CHECK(slurp(d / "effective_config.ini").find("no-ssd=true") != std::string::npos);
  CHECK(json::parse(slurp(d / "run.json"))["method"] == "demux-no-ssd");
}

TEST_CASE("config file sections with flag overrides") {
  const auto ini = scratch() / "demux.ini";
  std::ofstream(ini) << "[train]\nsynthetic=C=3,T=24,N=10\nepochs=7\nseed=3\n";
  const auto d = scratch() / "from_config";
  REQUIRE(run_demux({"train", "--config", ini.string(), "--seed", "4", "--out", d.string()}) == 0);
  CHECK(slurp(d / "config.ini") == slurp(ini));
  const auto echo = slurp(d / "effective_config.ini");
  CHECK(echo.find("epochs=7") != std::string::npos);
  CHECK(echo.find("seed=4") != std::string::npos);
  // 7 epochs of history plus the header
  const auto loss = slurp(d / "train_loss.csv");
  CHECK(std::count(loss.begin(), loss.end(), '\n') == 8);
}

TEST_CASE("seed defaults to the environment") {
  ::setenv("DEMUX_SEED", "77", 1);
  const auto d = scratch() / "env_seed";
  REQUIRE(run_demux({"train", "--synthetic", "C=2,T=16,N=5", "--epochs", "1", "--out", d.string()}) == 0);
  ::unsetenv("DEMUX_SEED");
  CHECK(slurp(d / "effective_config.ini").find("seed=77") != std::string::npos);
  CHECK(json::parse(slurp(d / "run.json"))["seed"] == 77);
}

TEST_CASE("eval of one instance has zero spread") {
  const auto one = scratch() / "one";
  REQUIRE(run_demux({"explain", "--run", trained().string(), "--instances", "3", "--epochs", "100", "--out",
                 one.string()}) == 0);
  const auto ev = scratch() / "eval_one";
  REQUIRE(run_demux({"eval", "--run", one.string(), "--out", ev.string()}) == 0);
  const auto rep = json::parse(slurp(ev / "reports" / "demux_instance_0003_run0.json"));
  std::istringstream table(slurp(ev / "aggregate.csv"));
  std::string head, row;
  std::getline(table, head);
  std::getline(table, row);
  CHECK(head == "method,dataset,auc_difference_mean,auc_difference_std,iou_area_mean");
  std::vector<std::string> cells;
  std::stringstream rs(row);
  for (std::string c; std::getline(rs, c, ',');) cells.push_back(c);
  REQUIRE(cells.size() == 5);
  CHECK(std::stod(cells[2]) == rep["auc_difference"].get<double>());
  CHECK(std::stod(cells[3]) == 0.0);
}

TEST_CASE("eval with baselines adds RISE and random rows") {
  const auto ev = scratch() / "eval_base";
  REQUIRE(run_demux({"eval", "--run", explained().string(), "--with-baseline", "--rise-masks", "500", "--out",
                 ev.string()}) == 0);
  const auto table = slurp(ev / "aggregate.csv");
  CHECK(table.find("\ndemux,") != std::string::npos);
  CHECK(table.find("\nrise,") != std::string::npos);
  CHECK(table.find("\nrandom,") != std::string::npos);
  CHECK(fs::exists(ev / "reports" / "rise_instance_0004_run0.txt"));
}

TEST_CASE("repeated runs record a consistency spread") {
  const auto d = scratch() / "runs";
  REQUIRE(run_demux({"explain", "--run", trained().string(), "--instances", "1", "--runs", "3", "--epochs", "100", "--out",
                 d.string()}) == 0);
  CHECK(saliency_files(d).size() == 3);
  const auto ev = scratch() / "eval_runs";
  REQUIRE(run_demux({"eval", "--run", d.string(), "--out", ev.string()}) == 0);
  const auto rep = json::parse(slurp(ev / "reports" / "demux_instance_0001_run2.json"));
  CHECK(rep.contains("consistency_std"));
}

TEST_CASE("report writes a deterministic plot pair per instance") {
  const auto a = scratch() / "plots_a", b = scratch() / "plots_b";
  REQUIRE(run_demux({"report", "--run", explained().string(), "--out", a.string()}) == 0);
  REQUIRE(run_demux({"report", "--run", explained().string(), "--out", b.string()}) == 0);
  std::size_t svgs = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    if (e.path().extension() != ".svg") continue;
    ++svgs;
    const auto text = slurp(e.path());
    CHECK(text.rfind("<?xml", 0) == 0);
    CHECK(text.find("</svg>") != std::string::npos);
    CHECK(text == slurp(b / e.path().filename()));
  }
  CHECK(svgs == 10);
}

TEST_CASE("report on an empty directory lists what it expected") {
  const auto empty = scratch() / "empty";
  fs::create_directories(empty);
  std::ostringstream err;
  auto* old = std::cerr.rdbuf(err.rdbuf());
  const int code = run_demux({"report", "--run", empty.string(), "--out", (scratch() / "plots_none").string()});
  std::cerr.rdbuf(old);
  CHECK(code == 2);
  CHECK(err.str().find("run.json") != std::string::npos);
  CHECK(err.str().find("saliency_run0.csv") != std::string::npos);
}
