#ifndef IRTLINK_MODEL_HPP
#define IRTLINK_MODEL_HPP

#include "irtlink/types.hpp"

#include <vector>

namespace irtlink {

// Numerically stable logistic function. The tanh form is branch-free and
// never overflows: sigmoid(-800) == 0 and sigmoid(800) == 1 exactly.
inline double sigmoid(double z) { return 0.5 * (1.0 + std::tanh(0.5 * z)); }

// log(1 + exp(z)) without overflow for large |z|.
inline double softplus(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

// Bernoulli log-likelihood of one response under logit z = a.theta + d:
//   y log p + (1-y) log(1-p) = y z - softplus(z),
// finite for any double z.
inline double bernoulli_loglik(int y, double z) {
  return static_cast<double>(y) * z - softplus(z);
}

// P(correct | theta, item) for the 2PL model.
inline double response_probability(const Vector& theta,
                                   const ItemParameters& item) {
  return sigmoid(item.a.dot(theta) + item.d);
}

// Joint MAP objective over all observed cells:
//   sum_cells [y z - softplus(z)]
//   - sum_models |theta|^2 / (2 sigma_theta^2)
//   - sum_free_items (|a|^2 / (2 sigma_a^2) + d^2 / (2 sigma_d^2)).
// Frozen items contribute likelihood terms but no prior penalty: their
// parameters are constants of the optimization, not variables.
//
// `items` is ordered like data.item_ids(); `abilities` like data.model_ids().
double log_posterior(const ResponseMatrix& data,
                     const std::vector<ItemParameters>& items,
                     const std::vector<AbilityVector>& abilities,
                     const PriorConfig& prior);

// Analytic gradients of log_posterior. Layout matches the inputs:
// grad_theta(k) is d/d theta_k for model k (length D), grad_a(j)/grad_d(j)
// for item j. Frozen items get exactly zero gradient blocks.
struct Gradients {
  std::vector<Vector> grad_theta;
  std::vector<Vector> grad_a;
  std::vector<double> grad_d;
};

Gradients log_posterior_gradients(const ResponseMatrix& data,
                                  const std::vector<ItemParameters>& items,
                                  const std::vector<AbilityVector>& abilities,
                                  const PriorConfig& prior);

}  // namespace irtlink

#endif  // IRTLINK_MODEL_HPP
