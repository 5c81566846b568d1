#include "demux/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "demux/errors.hpp"

namespace demux::models {
namespace {

double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

}  // namespace

std::string to_string(Architecture arch) {
  switch (arch) {
    case Architecture::Fcn: return "fcn";
    case Architecture::Gru: return "gru";
  }
  return "unknown";
}

void Classifier::add_block(std::string name, ad::Shape shape, double init_bound, std::mt19937_64& rng) {
  std::vector<double> values(ad::numel(shape), 0.0);
  if (init_bound > 0.0) {
    std::uniform_real_distribution<double> dist(-init_bound, init_bound);
    for (auto& v : values) v = dist(rng);
  }
  params_.push_back({std::move(name), ad::Tensor(std::move(shape), std::move(values))});
}

void Classifier::check_input(std::size_t length) const {
  if (length != series_length()) {
    throw ShapeError("classifier expects series of length " + std::to_string(series_length()) + ", got " +
                     std::to_string(length));
  }
}

std::size_t Classifier::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

std::vector<ad::Tensor> Classifier::insert_parameters(ad::Graph& g, bool trainable) const {
  std::vector<ad::Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(trainable ? g.parameter(p.value) : g.constant(p.value));
  return out;
}

ad::Tensor Classifier::forward(ad::Graph& g, const ad::Tensor& batch) const {
  const auto w = insert_parameters(g, false);
  return forward(g, batch, w);
}

std::vector<double> Classifier::predict_proba(std::span<const double> x) const {
  check_input(x.size());
  ad::Graph g;
  const ad::Tensor batch({1, x.size()}, std::vector<double>(x.begin(), x.end()));
  return forward(g, batch).to_vector();
}

std::vector<std::vector<double>> Classifier::predict_batch(std::span<const std::vector<double>> xs) const {
  if (xs.empty()) return {};
  const std::size_t t = series_length();
  std::vector<double> flat;
  flat.reserve(xs.size() * t);
  for (const auto& x : xs) {
    check_input(x.size());
    flat.insert(flat.end(), x.begin(), x.end());
  }
  ad::Graph g;
  const auto probs = forward(g, ad::Tensor({xs.size(), t}, std::move(flat)));
  const std::size_t c = num_classes();
  std::vector<std::vector<double>> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    out[i].assign(probs.values().begin() + static_cast<std::ptrdiff_t>(i * c),
                  probs.values().begin() + static_cast<std::ptrdiff_t>((i + 1) * c));
  }
  return out;
}

std::size_t Classifier::predict(std::span<const double> x) const {
  const auto p = predict_proba(x);
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

std::vector<double> Classifier::input_gradient(std::span<const double> x, std::size_t cls) const {
  check_input(x.size());
  if (cls >= num_classes()) {
    throw ShapeError("class index " + std::to_string(cls) + " out of range for " + std::to_string(num_classes()) +
                     " classes");
  }
  ad::Graph g;
  const auto input = g.parameter(ad::Tensor({1, x.size()}, std::vector<double>(x.begin(), x.end())));
  const auto probs = forward(g, input);
  const auto root = g.sum(g.slice(probs, 1, cls, cls + 1));
  return g.backward(root).of(input).to_vector();
}

FcnClassifier::FcnClassifier(std::size_t length, std::size_t classes, std::size_t hidden1, std::size_t hidden2,
                             std::uint64_t seed)
    : Classifier(seed), length_(length), classes_(classes), hidden1_(hidden1), hidden2_(hidden2) {
  if (length == 0 || classes < 2 || hidden1 == 0 || hidden2 == 0) {
    throw ShapeError("FCN needs positive dimensions and at least two classes");
  }
  std::mt19937_64 rng(seed);
  add_block("w1", {length, hidden1}, glorot_bound(length, hidden1), rng);
  add_block("b1", {hidden1}, 0.0, rng);
  add_block("w2", {hidden1, hidden2}, glorot_bound(hidden1, hidden2), rng);
  add_block("b2", {hidden2}, 0.0, rng);
  add_block("w3", {hidden2, classes}, glorot_bound(hidden2, classes), rng);
  add_block("b3", {classes}, 0.0, rng);
}

std::vector<std::uint64_t> FcnClassifier::dims() const { return {length_, classes_, hidden1_, hidden2_}; }

ad::Tensor FcnClassifier::forward(ad::Graph& g, const ad::Tensor& batch, std::span<const ad::Tensor> w) const {
  if (batch.rank() != 2) throw ShapeError("classifier input must be [batch, length], got " + ad::to_string(batch.shape()));
  check_input(batch.shape()[1]);
  auto h = g.relu(g.add(g.matmul(batch, w[0]), w[1]));
  h = g.relu(g.add(g.matmul(h, w[2]), w[3]));
  return g.softmax(g.add(g.matmul(h, w[4]), w[5]), 1);
}

GruClassifier::GruClassifier(std::size_t length, std::size_t classes, std::size_t hidden, std::uint64_t seed)
    : Classifier(seed), length_(length), classes_(classes), hidden_(hidden) {
  if (length == 0 || classes < 2 || hidden == 0) {
    throw ShapeError("GRU needs positive dimensions and at least two classes");
  }
  std::mt19937_64 rng(seed);
  const double in_bound = glorot_bound(1, hidden);
  const double rec_bound = glorot_bound(hidden, hidden);
  add_block("w_xz", {1, hidden}, in_bound, rng);
  add_block("w_xr", {1, hidden}, in_bound, rng);
  add_block("w_xn", {1, hidden}, in_bound, rng);
  add_block("w_hz", {hidden, hidden}, rec_bound, rng);
  add_block("w_hr", {hidden, hidden}, rec_bound, rng);
  add_block("w_hn", {hidden, hidden}, rec_bound, rng);
  add_block("b_z", {hidden}, 0.0, rng);
  add_block("b_r", {hidden}, 0.0, rng);
  add_block("b_xn", {hidden}, 0.0, rng);
  add_block("b_hn", {hidden}, 0.0, rng);
  add_block("w_out", {hidden, classes}, glorot_bound(hidden, classes), rng);
  add_block("b_out", {classes}, 0.0, rng);
}

std::vector<std::uint64_t> GruClassifier::dims() const { return {length_, classes_, hidden_}; }

ad::Tensor GruClassifier::forward(ad::Graph& g, const ad::Tensor& batch, std::span<const ad::Tensor> w) const {
  if (batch.rank() != 2) throw ShapeError("classifier input must be [batch, length], got " + ad::to_string(batch.shape()));
  check_input(batch.shape()[1]);
  const std::size_t b = batch.shape()[0];
  const auto input = batch.node() ? batch : g.constant(batch);
  const auto& [w_xz, w_xr, w_xn, w_hz, w_hr, w_hn, b_z, b_r, b_xn, b_hn, w_out, b_out] =
      std::tie(w[0], w[1], w[2], w[3], w[4], w[5], w[6], w[7], w[8], w[9], w[10], w[11]);

  ad::Tensor h = g.constant(ad::Tensor::zeros({b, hidden_}));
  for (std::size_t t = 0; t < length_; ++t) {
    const auto xt = g.slice(input, 1, t, t + 1);
    const auto z = g.sigmoid(g.add(g.add(g.matmul(xt, w_xz), g.matmul(h, w_hz)), b_z));
    const auto r = g.sigmoid(g.add(g.add(g.matmul(xt, w_xr), g.matmul(h, w_hr)), b_r));
    const auto cand = g.tanh(g.add(g.add(g.matmul(xt, w_xn), b_xn), g.hadamard(r, g.add(g.matmul(h, w_hn), b_hn))));
    h = g.add(cand, g.hadamard(z, g.sub(h, cand)));
  }
  return g.softmax(g.add(g.matmul(h, w_out), b_out), 1);
}

std::unique_ptr<Classifier> make_classifier(Architecture arch, std::span<const std::uint64_t> dims, std::uint64_t seed) {
  switch (arch) {
    case Architecture::Fcn:
      if (dims.size() != 4) throw ShapeError("FCN needs 4 dims (T, C, h1, h2)");
      return std::make_unique<FcnClassifier>(dims[0], dims[1], dims[2], dims[3], seed);
    case Architecture::Gru:
      if (dims.size() != 3) throw ShapeError("GRU needs 3 dims (T, C, hidden)");
      return std::make_unique<GruClassifier>(dims[0], dims[1], dims[2], seed);
  }
  throw ShapeError("unknown architecture");
}

}  // namespace demux::models
