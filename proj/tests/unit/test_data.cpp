#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "demux/dataset.hpp"
#include "demux/errors.hpp"

using namespace demux;
using data::Dataset;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& content) {
  auto dir = std::filesystem::temp_directory_path() / "demux_unit";
  std::filesystem::create_directories(dir);
  const auto p = dir / name;
  std::ofstream(p) << content;
  return p;
}

DataError::Kind load_error(const std::string& content) {
  try {
    data::load_ucr(write_temp("bad.tsv", content));
  } catch (const DataError& e) {
    return e.kind();
  }
  FAIL("expected a data error");
  return DataError::Kind::Invalid;
}

std::vector<std::vector<double>> class_centroids(const Dataset& ds) {
  std::vector<std::vector<double>> c(ds.num_classes(), std::vector<double>(ds.length(), 0.0));
  std::vector<double> n(ds.num_classes(), 0.0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t t = 0; t < ds.length(); ++t) c[ds.labels[i]][t] += ds.series[i][t];
    n[ds.labels[i]] += 1.0;
  }
  for (std::size_t k = 0; k < c.size(); ++k) {
    for (auto& v : c[k]) v /= n[k];
  }
  return c;
}

std::size_t nearest_centroid(const std::vector<std::vector<double>>& cents, const std::vector<double>& x) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < cents.size(); ++k) {
    double d = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) d += (x[t] - cents[k][t]) * (x[t] - cents[k][t]);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("load a two-line tab file") {
  const auto ds = data::load_ucr(write_temp("two.tsv", "1\t0.0\t1.0\n2\t1.0\t0.0"));
  CHECK(ds.size() == 2);
  CHECK(ds.length() == 2);
  CHECK(ds.labels == std::vector<std::size_t>{0, 1});
  CHECK(ds.label_names == std::vector<std::string>{"1", "2"});
}

TEST_CASE("comma files and numeric label ordering") {
  const auto ds = data::load_ucr(write_temp("c.csv", "10,1,2,3\n-1,4,5,6\n2,7,8,9\n"));
  CHECK(ds.labels == std::vector<std::size_t>{2, 0, 1});
  CHECK(ds.series[1] == std::vector<double>{4, 5, 6});
}

TEST_CASE("split tag comes from the file name") {
  auto dir = std::filesystem::temp_directory_path() / "demux_unit";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "Toy_TRAIN.tsv") << "0\t1\t2\n1\t2\t3\n";
  const auto ds = data::load_ucr(dir / "Toy_TRAIN.tsv");
  CHECK(ds.split == data::SplitTag::Train);
  CHECK(ds.name == "Toy_TRAIN");
}

TEST_CASE("malformed files raise distinct errors naming the line") {
  CHECK(load_error("") == DataError::Kind::EmptyFile);
  CHECK(load_error("1\t0\t1\n2\t0\n") == DataError::Kind::RaggedRows);
  CHECK(load_error("1\t0\t1\n2\t0\tx\n") == DataError::Kind::NonNumeric);
  try {
    data::load_ucr(write_temp("ragged.tsv", "1\t0\t1\n2\t0\t1\n1\t5\n"));
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("3") != std::string::npos);
  }
  CHECK_THROWS_AS(data::load_ucr("/nonexistent/dir/file.tsv"), DataError);
}

TEST_CASE("write then load round-trips exactly") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> d(0.0, 1e3);
  Dataset ds;
  ds.label_names = {"0", "1", "2"};
  for (int i = 0; i < 15; ++i) {
    std::vector<double> x(11);
    for (auto& v : x) v = d(rng);
    ds.series.push_back(x);
    ds.labels.push_back(i % 3);
  }
  const auto p = write_temp("round.tsv", "");
  data::write_ucr(ds, p);
  const auto back = data::load_ucr(p);
  CHECK(back.labels == ds.labels);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t t = 0; t < 11; ++t) CHECK(std::fabs(back.series[i][t] - ds.series[i][t]) <= 1e-12 * std::fabs(ds.series[i][t]));
  }
}

TEST_CASE("z-normalization") {
  const auto z = data::znormalize_series(std::vector<double>{1, 2, 3});
  CHECK(z.values[0] == doctest::Approx(-1.2247).epsilon(1e-4));
  CHECK(z.values[1] == doctest::Approx(0.0));
  CHECK(z.values[2] == doctest::Approx(1.2247).epsilon(1e-4));
  const auto c = data::znormalize_series(std::vector<double>{5, 5, 5});
  CHECK(c.constant);
  CHECK(c.values == std::vector<double>{0, 0, 0});

  Dataset ds;
  ds.label_names = {"0"};
  ds.series = {{1, 4, 2, 8}, {3, 3, 3, 3}};
  ds.labels = {0, 0};
  std::vector<std::size_t> constant;
  const auto once = data::znormalize(ds, &constant);
  CHECK(constant == std::vector<std::size_t>{1});
  const auto twice = data::znormalize(once);
  for (std::size_t t = 0; t < 4; ++t) CHECK(std::fabs(once.series[0][t] - twice.series[0][t]) < 1e-12);
}

TEST_CASE("planted layout for three classes") {
  const auto lay = data::planted_layout(3, 48);
  CHECK(lay.width == 6);
  REQUIRE(lay.class_windows.size() == 3);
  for (std::size_t a = 0; a < 3; ++a) {
    CHECK(lay.class_windows[a].width() == 6);
    CHECK_FALSE(lay.class_windows[a].overlaps(lay.shared_window));
    for (std::size_t b = a + 1; b < 3; ++b) CHECK_FALSE(lay.class_windows[a].overlaps(lay.class_windows[b]));
  }
  CHECK_THROWS_AS(data::planted_layout(1, 48), DataError);
  CHECK_THROWS_AS(data::planted_layout(3, 11), DataError);
}

TEST_CASE("planted windows are disjoint for random shapes") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t c = std::uniform_int_distribution<std::size_t>(2, 8)(rng);
    const std::size_t t = std::uniform_int_distribution<std::size_t>(4 * c, 200)(rng);
    const auto ds = data::make_planted_dataset(c, t, 2, rng());
    REQUIRE(ds.ground_truth.has_value());
    const auto& gt = *ds.ground_truth;
    for (std::size_t s = 0; s < t; ++s) {
      int hits = gt.shared_mask[s];
      for (const auto& m : gt.class_masks) hits += m[s];
      CHECK(hits <= 1);
    }
    const auto width = (t + 2 * (c + 1) - 1) / (2 * (c + 1));
    for (const auto& m : gt.class_masks) CHECK(static_cast<std::size_t>(std::count(m.begin(), m.end(), true)) == width);
  }
}

TEST_CASE("nearest-centroid oracle separates the planted classes") {
  const auto ds = data::make_planted_dataset(3, 48, 30, 5);
  const auto cents = class_centroids(ds);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) hits += nearest_centroid(cents, ds.series[i]) == ds.labels[i];
  CHECK(hits == ds.size());

  // Removing the own-class window leaves an instance no closer to its own
  // class than to any other, so the own-class rate falls to about chance.
  const auto lay = data::planted_layout(3, 48);
  std::size_t still_own = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto x = ds.series[i];
    const auto w = lay.class_windows[ds.labels[i]];
    for (std::size_t t = w.begin; t < w.end; ++t) x[t] -= 1.0;
    still_own += nearest_centroid(cents, x) == ds.labels[i];
  }
  CHECK(static_cast<double>(still_own) / static_cast<double>(ds.size()) <= 0.5);
}

TEST_CASE("ground truth sidecar round-trips") {
  const auto ds = data::make_planted_dataset(3, 24, 1, 1);
  const auto p = write_temp("gt.txt", "");
  data::write_ground_truth(*ds.ground_truth, p);
  const auto back = data::read_ground_truth(p);
  CHECK(back.class_masks == ds.ground_truth->class_masks);
  CHECK(back.shared_mask == ds.ground_truth->shared_mask);
}

TEST_CASE("stratified split") {
  Dataset ds;
  ds.label_names = {"a", "b"};
  for (int i = 0; i < 100; ++i) {
    ds.series.push_back({static_cast<double>(i)});
    ds.labels.push_back(i % 2);
  }
  const auto [a, b] = data::split(ds, 0.5, 4);
  CHECK(a.size() == 50);
  CHECK(b.size() == 50);
  CHECK(a.indices_of(0).size() == 25);
  const auto [a2, b2] = data::split(ds, 0.5, 4);
  CHECK(a2.series == a.series);

  Dataset ten;
  ten.label_names = {"a", "b"};
  for (int i = 0; i < 20; ++i) {
    ten.series.push_back({static_cast<double>(i)});
    ten.labels.push_back(i % 2);
  }
  const auto [n9, n1] = data::split(ten, 0.9, 1);
  CHECK(n9.indices_of(0).size() == 9);
  CHECK(n1.indices_of(1).size() == 1);

  Dataset tiny;
  tiny.label_names = {"a", "b"};
  tiny.series = {{1}, {2}, {3}};
  tiny.labels = {0, 1, 1};
  CHECK_THROWS_AS(data::split(tiny, 0.5, 0), DataError);
}
