#include <algorithm>
#include <cmath>

#include "demux/errors.hpp"
#include "demux/explainer.hpp"

namespace demux::explain {
namespace {

constexpr double kFloor = 1e-12;

void check_target(std::size_t target, std::size_t classes) {
  if (target >= classes) {
    throw DomainError("target class " + std::to_string(target) + " out of range for " + std::to_string(classes) +
                      " classes");
  }
}

std::size_t rows_of(std::span<const double> theta, std::size_t classes) {
  if (classes == 0 || theta.size() % classes != 0) throw ShapeError("theta size is not a multiple of the class count");
  return theta.size() / classes;
}

}  // namespace

void ExplainerConfig::validate() const {
  for (double l : {lambda_prev, lambda_max, lambda_budget, lambda_treg, lambda_ssd}) {
    if (!(l >= 0.0)) throw DomainError("loss weights must be non-negative");
  }
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw DomainError("epsilon must lie in [0, 1]");
  if (memory_window < 1) throw DomainError("memory window must be at least 1");
  if (!(learning_rate > 0.0)) throw DomainError("learning rate must be positive");
  if (!(noise_std >= 0.0)) throw DomainError("noise std must be non-negative");
  if (k_max < 1) throw DomainError("k_max must be at least 1");
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ShapeError("kl_divergence: distributions differ in size");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) kl += p[i] * (std::log(p[i] + kFloor) - std::log(q[i] + kFloor));
  return kl;
}

ad::Tensor loss_ssd(ad::Graph& g, const ad::Tensor& theta, std::size_t target, std::span<const double> y_hat,
                    double lambda) {
  const std::size_t classes = theta.shape()[0];
  check_target(target, classes);
  if (y_hat.size() != classes) throw ShapeError("loss_ssd: y_hat must have one entry per class");
  // sum_{i != z} (theta_z - y_i theta_i) as one weighted row combination.
  std::vector<double> w(classes);
  for (std::size_t i = 0; i < classes; ++i) w[i] = i == target ? static_cast<double>(classes - 1) : -y_hat[i];
  const auto inner = g.matmul(ad::Tensor({1, classes}, std::move(w)), theta);
  const auto theta_z = g.slice(theta, 0, target, target + 1);
  const auto gap = g.sub(theta_z, g.abs(inner));
  return g.scalar_mul(g.mean(g.square(gap)), lambda / static_cast<double>(classes));
}

ad::Tensor loss_budget(ad::Graph& g, const ad::Tensor& theta, double lambda) {
  return g.scalar_mul(g.mean(g.abs(theta)), lambda);
}

ad::Tensor loss_treg(ad::Graph& g, const ad::Tensor& theta, double lambda) {
  const std::size_t classes = theta.shape()[0];
  const std::size_t t_len = theta.shape()[1];
  if (t_len < 2) return g.scalar_mul(g.sum(theta), 0.0);
  const auto d = g.sub(g.slice(theta, 1, 0, t_len - 1), g.slice(theta, 1, 1, t_len));
  return g.scalar_mul(g.sum(g.square(d)), lambda / static_cast<double>(classes * t_len));
}

LossGraph build_loss(ad::Graph& g, const ad::Tensor& theta, const LossContext& ctx, const ExplainerConfig& cfg) {
  if (ctx.model == nullptr || ctx.replacements == nullptr) throw Error("build_loss: incomplete loss context");
  const auto& f = *ctx.model;
  const std::size_t classes = f.num_classes();
  const std::size_t t_len = f.series_length();
  check_target(ctx.target, classes);
  if (theta.shape() != ad::Shape{classes, t_len}) {
    throw ShapeError("theta must be " + ad::to_string({classes, t_len}) + ", got " + ad::to_string(theta.shape()));
  }
  if (ctx.x.size() != t_len || ctx.y_hat.size() != classes) throw ShapeError("build_loss: x or y_hat has wrong size");
  const auto& repl = *ctx.replacements;
  if (repl.num_classes != classes || repl.length != t_len) throw ShapeError("replacement set has wrong shape");

  const ad::Shape ct{classes, t_len};
  const ad::Tensor noise = ctx.noise.empty() ? ad::Tensor() : ad::Tensor(ct, ctx.noise);
  const auto perturbed = perturb(g, ad::Tensor({t_len}, ctx.x), theta, ad::Tensor(ct, repl.near),
                                 ad::Tensor(ct, repl.far), noise);
  // Row i of probs is f evaluated on the class-i perturbation.
  const auto probs = f.forward(g, perturbed);
  const std::size_t z = ctx.target;

  LossGraph out;
  std::vector<ad::Tensor> terms;

  if (!cfg.no_kl) {
    std::vector<double> pick(classes * classes, 0.0);
    double entropy_part = 0.0;
    for (std::size_t j = 0; j < classes; ++j) {
      pick[z * classes + j] = ctx.y_hat[j];
      entropy_part += ctx.y_hat[j] * std::log(ctx.y_hat[j] + kFloor);
    }
    const auto cross = g.sum(g.hadamard(g.log(g.add(probs, ad::Tensor::scalar(kFloor))),
                                        ad::Tensor({classes, classes}, std::move(pick))));
    const auto kl = g.sub(ad::Tensor::scalar(entropy_part), cross);
    terms.push_back(g.scalar_mul(kl, cfg.lambda_prev));
    out.parts.prev = terms.back().item();
  }

  {
    std::vector<double> diag(classes * classes, 0.0);
    for (std::size_t i = 0; i < classes; ++i) {
      if (i != z) diag[i * classes + i] = 1.0;
    }
    const auto own = g.sum(g.hadamard(probs, ad::Tensor({classes, classes}, std::move(diag))));
    const auto miss = g.sub(ad::Tensor::scalar(static_cast<double>(classes - 1)), own);
    terms.push_back(g.scalar_mul(miss, cfg.lambda_max / static_cast<double>(classes)));
    out.parts.max = terms.back().item();
  }

  if (!cfg.no_budget) {
    terms.push_back(loss_budget(g, theta, cfg.lambda_budget));
    out.parts.budget = terms.back().item();
  }
  if (!cfg.no_tvnorm) {
    terms.push_back(loss_treg(g, theta, cfg.lambda_treg));
    out.parts.treg = terms.back().item();
  }
  if (!cfg.no_ssd) {
    terms.push_back(loss_ssd(g, theta, z, ctx.y_hat, cfg.lambda_ssd));
    out.parts.ssd = terms.back().item();
  }

  out.total = terms.front();
  for (std::size_t k = 1; k < terms.size(); ++k) out.total = g.add(out.total, terms[k]);
  return out;
}

double loss_ssd(std::span<const double> theta, std::size_t classes, std::size_t target,
                std::span<const double> y_hat, double lambda) {
  const std::size_t t_len = rows_of(theta, classes);
  check_target(target, classes);
  if (y_hat.size() != classes) throw ShapeError("loss_ssd: y_hat must have one entry per class");
  double acc = 0.0;
  for (std::size_t t = 0; t < t_len; ++t) {
    const double tz = theta[target * t_len + t];
    double inner = 0.0;
    for (std::size_t i = 0; i < classes; ++i) {
      if (i != target) inner += tz - y_hat[i] * theta[i * t_len + t];
    }
    const double gap = tz - std::fabs(inner);
    acc += gap * gap;
  }
  return lambda / static_cast<double>(classes) * acc / static_cast<double>(t_len);
}

double loss_budget(std::span<const double> theta, std::size_t classes, double lambda) {
  rows_of(theta, classes);
  double acc = 0.0;
  for (double v : theta) acc += std::fabs(v);
  return lambda * acc / static_cast<double>(theta.size());
}

double loss_treg(std::span<const double> theta, std::size_t classes, double lambda) {
  const std::size_t t_len = rows_of(theta, classes);
  double acc = 0.0;
  for (std::size_t i = 0; i < classes; ++i) {
    for (std::size_t t = 0; t + 1 < t_len; ++t) {
      const double d = theta[i * t_len + t] - theta[i * t_len + t + 1];
      acc += d * d;
    }
  }
  return lambda * acc / static_cast<double>(classes * t_len);
}

double loss_prev(const models::Classifier& f, std::span<const double> x, std::span<const double> theta_z,
                 std::span<const double> r_near, std::span<const double> r_far, double lambda) {
  const auto p = f.predict_proba(x);
  const auto q = f.predict_proba(perturb(x, theta_z, r_near, r_far));
  return lambda * kl_divergence(p, q);
}

double loss_max(const models::Classifier& f, std::span<const double> x, std::span<const double> theta,
                std::size_t target, const ReplacementSet& replacements, double lambda) {
  const std::size_t classes = f.num_classes();
  const std::size_t t_len = rows_of(theta, classes);
  check_target(target, classes);
  double acc = 0.0;
  for (std::size_t i = 0; i < classes; ++i) {
    if (i == target) continue;
    const auto q = f.predict_proba(perturb(x, theta.subspan(i * t_len, t_len), replacements.near_row(i),
                                           replacements.far_row(i)));
    acc += 1.0 - q[i];
  }
  return lambda * acc / static_cast<double>(classes);
}

}  // namespace demux::explain
