#ifndef IRTLINK_PREDICTION_HPP
#define IRTLINK_PREDICTION_HPP

#include "irtlink/anchors.hpp"
#include "irtlink/model.hpp"
#include "irtlink/types.hpp"

#include <map>
#include <set>
#include <string>
#include <vector>

namespace irtlink {

// Predicted full-dataset accuracy of one model, with its blend components:
// estimate = lambda * anchor_mean + (1 - lambda) * p_irt.
struct AccuracyEstimate {
  std::string model_id;
  std::string dataset_id;
  double estimate = 0.0;
  double anchor_mean = 0.0;
  double p_irt = 0.0;
  double lambda = 0.0;
  int anchors_used = 0;
};

// Mean over the whole dataset of observed correctness on anchor items and
// model-implied probabilities on everything else:
//   (sum_{anchors} y_i + sum_{non-anchors} sigmoid(a_i . theta + d_i)) / |items|.
// Every anchor_responses key must name one of dataset_items.
double p_irt_estimate(const Vector& theta_hat,
                      const std::vector<ItemParameters>& dataset_items,
                      const std::map<std::string, int>& anchor_responses);

// Blends the cluster-weighted anchor mean with p_irt. The response keys must
// match the anchor set's items exactly.
AccuracyEstimate gp_irt_estimate(const AnchorSet& anchor_set,
                                 const std::map<std::string, int>& anchor_responses,
                                 double p_irt, double lambda);

// Default blend weight: n_anchors / (n_anchors + n0). Larger anchor samples
// shift weight from the model-based estimate to the unbiased anchor mean.
inline double default_lambda(int n_anchors, double n0) {
  return static_cast<double>(n_anchors) / (static_cast<double>(n_anchors) + n0);
}

// Unweighted mean correctness over a drawn subset of items; the baseline
// that spends the same evaluation budget without any calibration.
double random_subset_estimate(const std::map<std::string, int>& responses,
                              const std::set<std::string>& subset);

}  // namespace irtlink

#endif  // IRTLINK_PREDICTION_HPP
