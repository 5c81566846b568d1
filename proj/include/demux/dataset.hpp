#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace demux::data {

enum class SplitTag { Unspecified, Train, Test };

std::string to_string(SplitTag tag);

/// Half-open index range [begin, end) of time steps.
struct Window {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t width() const noexcept { return end - begin; }
  bool contains(std::size_t t) const noexcept { return t >= begin && t < end; }
  bool overlaps(const Window& o) const noexcept { return begin < o.end && o.begin < end; }
};

/// Planted discriminative regions: one mask per class plus the region every
/// class shares.
struct GroundTruth {
  std::vector<std::vector<bool>> class_masks;
  std::vector<bool> shared_mask;
};

/// Univariate labelled time series of equal length.
struct Dataset {
  std::string name;
  SplitTag split = SplitTag::Unspecified;
  std::vector<std::vector<double>> series;
  std::vector<std::size_t> labels;
  /// label_names[k] is the label as it appeared in the source file for class k.
  std::vector<std::string> label_names;
  std::optional<GroundTruth> ground_truth;

  std::size_t size() const noexcept { return series.size(); }
  std::size_t length() const noexcept { return series.empty() ? 0 : series.front().size(); }
  std::size_t num_classes() const noexcept { return label_names.size(); }
  std::span<const double> row(std::size_t i) const { return series.at(i); }

  /// Throws DataError if the invariants (no NaN, uniform length, contiguous
  /// 0-based labels) do not hold.
  void validate() const;
  /// Instances with the given label.
  std::vector<std::size_t> indices_of(std::size_t label) const;
};

/// Reads a UCR-style file: one instance per line, label first, tab / comma /
/// whitespace separated (detected from the first data line).
Dataset load_ucr(const std::filesystem::path& path);
/// Writes `ds` in tab-separated UCR form with 17 significant digits.
void write_ucr(const Dataset& ds, const std::filesystem::path& path);

/// Ground-truth sidecar: one comma-separated 0/1 line per class, then one
/// line for the shared window.
void write_ground_truth(const GroundTruth& gt, const std::filesystem::path& path);
GroundTruth read_ground_truth(const std::filesystem::path& path);

struct NormalizedSeries {
  std::vector<double> values;
  bool constant = false;
};

NormalizedSeries znormalize_series(std::span<const double> x);

/// Per-instance z-normalization (population std). Constant rows become zeros
/// and their indices are reported through `constant_rows`.
Dataset znormalize(const Dataset& ds, std::vector<std::size_t>* constant_rows = nullptr);

/// Where make_planted_dataset puts its bumps for a (classes, length) pair.
struct PlantedLayout {
  std::size_t width = 0;
  std::vector<Window> class_windows;
  Window shared_window;
};

PlantedLayout planted_layout(std::size_t classes, std::size_t length);

/// Synthetic series: N(0, 0.05^2) noise everywhere, a unit box bump in the
/// class's own window, and an identical unit bump in one shared window.
/// Values are raw (not normalized).
Dataset make_planted_dataset(std::size_t classes, std::size_t length, std::size_t per_class,
                             std::uint64_t seed);

/// Stratified split; `fraction` of every class goes to the first set.
std::pair<Dataset, Dataset> split(const Dataset& ds, double fraction, std::uint64_t seed);

}  // namespace demux::data
