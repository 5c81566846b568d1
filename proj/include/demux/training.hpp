#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include "demux/classifier.hpp"
#include "demux/dataset.hpp"

namespace demux::models {

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;

  /// Rejects lr <= 0, epochs == 0 and batch_size == 0.
  void validate() const;
};

struct TrainResult {
  /// Mean cross-entropy over each epoch's mini-batches.
  std::vector<double> loss_history;
  double train_accuracy = 0.0;
};

/// Minimizes cross-entropy with Adam on mini-batches shuffled by cfg.seed.
/// epochs == 0 is accepted here and leaves the model untouched.
TrainResult train(Classifier& model, const data::Dataset& ds, const TrainConfig& cfg);

double accuracy(const Classifier& model, const data::Dataset& ds);

inline constexpr std::uint32_t kWeightFormatVersion = 1;

void save_weights(const Classifier& model, const std::filesystem::path& path);

/// What a caller expects to find in a weight file. Unset fields are not checked.
struct WeightExpectation {
  std::optional<Architecture> architecture;
  std::optional<std::size_t> series_length;
  std::optional<std::size_t> num_classes;
};

std::unique_ptr<Classifier> load_weights(const std::filesystem::path& path, const WeightExpectation& expect = {});

}  // namespace demux::models
