#include "demux/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include "demux/adam.hpp"
#include "demux/errors.hpp"

namespace demux::models {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw DomainError("learning rate must be positive");
  if (epochs < 1) throw DomainError("epochs must be at least 1");
  if (batch_size < 1) throw DomainError("batch size must be at least 1");
}

TrainResult train(Classifier& model, const data::Dataset& ds, const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0.0)) throw DomainError("learning rate must be positive");
  if (cfg.batch_size < 1) throw DomainError("batch size must be at least 1");
  ds.validate();
  if (ds.length() != model.series_length()) {
    throw ShapeError("dataset series length " + std::to_string(ds.length()) + " differs from model input length " +
                     std::to_string(model.series_length()));
  }
  if (ds.num_classes() > model.num_classes()) {
    throw ShapeError("dataset has " + std::to_string(ds.num_classes()) + " classes, model outputs " +
                     std::to_string(model.num_classes()));
  }

  ad::Adam adam({cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon});
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0);

  const std::size_t t_len = ds.length();
  const std::size_t classes = model.num_classes();
  TrainResult result;
  auto& blocks = model.parameters();

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const std::size_t b = stop - start;
      std::vector<double> inputs;
      inputs.reserve(b * t_len);
      std::vector<double> onehot(b * classes, 0.0);
      for (std::size_t i = start; i < stop; ++i) {
        const auto& x = ds.series[order[i]];
        inputs.insert(inputs.end(), x.begin(), x.end());
        onehot[(i - start) * classes + ds.labels[order[i]]] = 1.0;
      }

      ad::Graph g;
      const auto weights = model.insert_parameters(g, true);
      auto diverged = [&](const std::string& what) {
        std::ostringstream os;
        os << "training " << what << " at epoch " << epoch << "; try a smaller learning rate (current "
           << cfg.learning_rate << ")";
        return NumericalError(os.str());
      };
      std::optional<ad::Tensor> loss;
      try {
        const auto probs = model.forward(g, ad::Tensor({b, t_len}, std::move(inputs)), weights);
        const auto logp = g.log(g.add(probs, ad::Tensor::scalar(1e-12)));
        loss = g.scalar_mul(g.sum(g.hadamard(logp, ad::Tensor({b, classes}, std::move(onehot)))),
                            -1.0 / static_cast<double>(b));
      } catch (const DomainError& e) {
        throw diverged(std::string("overflowed (") + e.what() + ")");
      }
      const double value = loss->item();
      if (!std::isfinite(value)) throw diverged("loss became " + std::to_string(value));
      const auto grads = g.backward(*loss);

      std::vector<std::vector<double>> values;
      std::vector<std::vector<double>> grad_values;
      values.reserve(blocks.size());
      grad_values.reserve(blocks.size());
      for (std::size_t k = 0; k < blocks.size(); ++k) {
        values.push_back(blocks[k].value.to_vector());
        grad_values.push_back(grads.of(weights[k]).to_vector());
      }
      adam.step(values, grad_values);
      for (std::size_t k = 0; k < blocks.size(); ++k) {
        blocks[k].value = ad::Tensor(blocks[k].value.shape(), std::move(values[k]));
      }
      epoch_loss += value;
      ++batches;
    }
    result.loss_history.push_back(epoch_loss / static_cast<double>(batches));
  }
  result.train_accuracy = accuracy(model, ds);
  return result;
}

double accuracy(const Classifier& model, const data::Dataset& ds) {
  if (ds.size() == 0) return 0.0;
  const auto probs = model.predict_batch(ds.series);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& p = probs[i];
    const auto pred = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
    hits += pred == ds.labels[i];
  }
  return static_cast<double>(hits) / static_cast<double>(ds.size());
}

}  // namespace demux::models
