#include "irtlink/model.hpp"

#include <cmath>

namespace irtlink {

namespace {

void check_shapes(const ResponseMatrix& data,
                  const std::vector<ItemParameters>& items,
                  const std::vector<AbilityVector>& abilities) {
  require(static_cast<int>(items.size()) == data.n_items(),
          "item parameter count " + std::to_string(items.size()) +
              " does not match matrix item count " +
              std::to_string(data.n_items()));
  require(static_cast<int>(abilities.size()) == data.n_models(),
          "ability count " + std::to_string(abilities.size()) +
              " does not match matrix model count " +
              std::to_string(data.n_models()));
  if (items.empty() || abilities.empty()) return;
  const Eigen::Index dim = abilities.front().theta.size();
  for (const auto& ab : abilities) {
    require(ab.theta.size() == dim,
            "ability vector for model '" + ab.model_id +
                "' has dimension " + std::to_string(ab.theta.size()) +
                "; expected " + std::to_string(dim));
  }
  for (const auto& it : items) {
    require(it.a.size() == dim,
            "discrimination vector for item '" + it.item_id +
                "' has dimension " + std::to_string(it.a.size()) +
                "; expected " + std::to_string(dim));
  }
}

}  // namespace

double log_posterior(const ResponseMatrix& data,
                     const std::vector<ItemParameters>& items,
                     const std::vector<AbilityVector>& abilities,
                     const PriorConfig& prior) {
  validate(prior);
  check_shapes(data, items, abilities);

  double lp = 0.0;
  // Fixed summation order (cells are sorted by model, then item) keeps the
  // result bit-identical across runs.
  for (const auto& c : data.cells()) {
    const auto& item = items[static_cast<std::size_t>(c.item)];
    const auto& ab = abilities[static_cast<std::size_t>(c.model)];
    const double z = item.a.dot(ab.theta) + item.d;
    lp += bernoulli_loglik(c.correct, z);
  }
  const double inv2_t = 1.0 / (2.0 * prior.sigma_theta * prior.sigma_theta);
  const double inv2_a = 1.0 / (2.0 * prior.sigma_a * prior.sigma_a);
  const double inv2_d = 1.0 / (2.0 * prior.sigma_d * prior.sigma_d);
  for (const auto& ab : abilities) lp -= ab.theta.squaredNorm() * inv2_t;
  for (const auto& it : items) {
    if (it.frozen) continue;
    lp -= it.a.squaredNorm() * inv2_a;
    lp -= it.d * it.d * inv2_d;
  }
  return lp;
}

Gradients log_posterior_gradients(const ResponseMatrix& data,
                                  const std::vector<ItemParameters>& items,
                                  const std::vector<AbilityVector>& abilities,
                                  const PriorConfig& prior) {
  validate(prior);
  check_shapes(data, items, abilities);

  const Eigen::Index dim =
      abilities.empty() ? 0 : abilities.front().theta.size();

  Gradients g;
  g.grad_theta.assign(abilities.size(), Vector::Zero(dim));
  g.grad_a.assign(items.size(), Vector::Zero(dim));
  g.grad_d.assign(items.size(), 0.0);

  // d/dz of [y z - softplus(z)] is y - sigmoid(z); chain rule gives
  // theta-gradient (y - p) a and a-gradient (y - p) theta.
  for (const auto& c : data.cells()) {
    const auto& item = items[static_cast<std::size_t>(c.item)];
    const auto& ab = abilities[static_cast<std::size_t>(c.model)];
    const double z = item.a.dot(ab.theta) + item.d;
    const double resid = static_cast<double>(c.correct) - sigmoid(z);
    g.grad_theta[static_cast<std::size_t>(c.model)] += resid * item.a;
    if (!item.frozen) {
      g.grad_a[static_cast<std::size_t>(c.item)] += resid * ab.theta;
      g.grad_d[static_cast<std::size_t>(c.item)] += resid;
    }
  }
  const double inv_t2 = 1.0 / (prior.sigma_theta * prior.sigma_theta);
  const double inv_a2 = 1.0 / (prior.sigma_a * prior.sigma_a);
  const double inv_d2 = 1.0 / (prior.sigma_d * prior.sigma_d);
  for (std::size_t k = 0; k < abilities.size(); ++k) {
    g.grad_theta[k] -= abilities[k].theta * inv_t2;
  }
  for (std::size_t j = 0; j < items.size(); ++j) {
    if (items[j].frozen) {
      // Frozen blocks stay exactly zero: anchors are not free parameters.
      g.grad_a[j].setZero();
      g.grad_d[j] = 0.0;
      continue;
    }
    g.grad_a[j] -= items[j].a * inv_a2;
    g.grad_d[j] -= items[j].d * inv_d2;
  }
  return g;
}

}  // namespace irtlink
