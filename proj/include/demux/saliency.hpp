#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace demux::explain {

/// C x T saliency matrix, row-major, entries in [-1, 1]. Row `target` is the
/// explanation of the predicted class.
struct SaliencyMap {
  std::size_t num_classes = 0;
  std::size_t length = 0;
  std::size_t target = 0;
  std::uint64_t seed = 0;
  std::vector<double> values;

  SaliencyMap() = default;
  SaliencyMap(std::size_t classes, std::size_t len, std::size_t z, std::uint64_t s = 0);

  double at(std::size_t cls, std::size_t t) const { return values[cls * length + t]; }
  double& at(std::size_t cls, std::size_t t) { return values[cls * length + t]; }
  std::span<const double> row(std::size_t cls) const { return {values.data() + cls * length, length}; }
  std::span<double> row(std::size_t cls) { return {values.data() + cls * length, length}; }
};

/// Text form: `# z=<int> T=<int> C=<int> seed=<int>` then C comma-separated rows.
void write_saliency(const SaliencyMap& map, const std::filesystem::path& path);
SaliencyMap read_saliency(const std::filesystem::path& path);

}  // namespace demux::explain
