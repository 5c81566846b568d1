#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "demux/graph.hpp"

namespace demux::models {

enum class Architecture : std::uint32_t { Fcn = 1, Gru = 2 };

std::string to_string(Architecture arch);

/// One named weight array of a classifier.
struct ParameterBlock {
  std::string name;
  ad::Tensor value;
};

/// A differentiable map from a length-T series to a distribution over C
/// classes. Implementations are immutable during inference, so the const
/// methods are safe to call from several threads.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual Architecture architecture() const = 0;
  virtual std::size_t series_length() const = 0;
  virtual std::size_t num_classes() const = 0;
  /// Architecture-specific sizes, in the order they are serialized
  /// (T, C, then hidden sizes).
  virtual std::vector<std::uint64_t> dims() const = 0;
  virtual std::unique_ptr<Classifier> clone() const = 0;

  /// Records the forward pass for a [B, T] batch and returns [B, C]
  /// probabilities. `weights` must hold one graph tensor per parameter block,
  /// as produced by insert_parameters().
  virtual ad::Tensor forward(ad::Graph& g, const ad::Tensor& batch, std::span<const ad::Tensor> weights) const = 0;

  /// Puts every parameter block into `g`, as trainable leaves or constants.
  std::vector<ad::Tensor> insert_parameters(ad::Graph& g, bool trainable) const;
  /// forward() with the weights as constants.
  ad::Tensor forward(ad::Graph& g, const ad::Tensor& batch) const;

  std::vector<double> predict_proba(std::span<const double> x) const;
  /// Row-wise probabilities for several series at once.
  std::vector<std::vector<double>> predict_batch(std::span<const std::vector<double>> xs) const;
  std::size_t predict(std::span<const double> x) const;
  /// d p_cls / d x.
  std::vector<double> input_gradient(std::span<const double> x, std::size_t cls) const;

  const std::vector<ParameterBlock>& parameters() const noexcept { return params_; }
  std::vector<ParameterBlock>& parameters() noexcept { return params_; }
  std::size_t parameter_count() const;
  std::uint64_t seed() const noexcept { return seed_; }

 protected:
  Classifier(std::uint64_t seed) : seed_(seed) {}
  void add_block(std::string name, ad::Shape shape, double init_bound, std::mt19937_64& rng);
  void check_input(std::size_t length) const;

  std::vector<ParameterBlock> params_;
  std::uint64_t seed_;
};

/// T -> h1 -> h2 -> C with relu hidden units and softmax output.
class FcnClassifier final : public Classifier {
 public:
  FcnClassifier(std::size_t length, std::size_t classes, std::size_t hidden1 = 128, std::size_t hidden2 = 64,
                std::uint64_t seed = 0);

  Architecture architecture() const override { return Architecture::Fcn; }
  std::size_t series_length() const override { return length_; }
  std::size_t num_classes() const override { return classes_; }
  std::vector<std::uint64_t> dims() const override;
  std::unique_ptr<Classifier> clone() const override { return std::make_unique<FcnClassifier>(*this); }
  using Classifier::forward;
  ad::Tensor forward(ad::Graph& g, const ad::Tensor& batch, std::span<const ad::Tensor> weights) const override;

 private:
  std::size_t length_, classes_, hidden1_, hidden2_;
};

/// Single-layer GRU over the scalar sequence; the final hidden state feeds a
/// softmax readout.
class GruClassifier final : public Classifier {
 public:
  GruClassifier(std::size_t length, std::size_t classes, std::size_t hidden = 10, std::uint64_t seed = 0);

  Architecture architecture() const override { return Architecture::Gru; }
  std::size_t series_length() const override { return length_; }
  std::size_t num_classes() const override { return classes_; }
  std::vector<std::uint64_t> dims() const override;
  std::unique_ptr<Classifier> clone() const override { return std::make_unique<GruClassifier>(*this); }
  using Classifier::forward;
  ad::Tensor forward(ad::Graph& g, const ad::Tensor& batch, std::span<const ad::Tensor> weights) const override;

  std::size_t hidden_size() const noexcept { return hidden_; }

 private:
  std::size_t length_, classes_, hidden_;
};

/// Creates an untrained classifier from serialized dims.
std::unique_ptr<Classifier> make_classifier(Architecture arch, std::span<const std::uint64_t> dims, std::uint64_t seed);

}  // namespace demux::models
