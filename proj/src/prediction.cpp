#include "irtlink/prediction.hpp"

#include <cmath>
#include <sstream>

namespace irtlink {

double p_irt_estimate(const Vector& theta_hat,
                      const std::vector<ItemParameters>& dataset_items,
                      const std::map<std::string, int>& anchor_responses) {
  require(!dataset_items.empty(), "p_irt estimate over an empty dataset");
  std::set<std::string> ids;
  for (const auto& item : dataset_items) ids.insert(item.item_id);
  for (const auto& [id, y] : anchor_responses) {
    require(ids.count(id),
            "anchor response for item '" + id + "' which is not in the dataset");
    require(y == 0 || y == 1,
            "anchor response for item '" + id + "' must be 0 or 1");
  }

  double total = 0.0;
  for (const auto& item : dataset_items) {
    auto it = anchor_responses.find(item.item_id);
    if (it != anchor_responses.end()) {
      total += static_cast<double>(it->second);
    } else {
      require(item.a.size() == theta_hat.size(),
              "item '" + item.item_id + "' has dimension " +
                  std::to_string(item.a.size()) + "; ability has " +
                  std::to_string(theta_hat.size()));
      total += response_probability(theta_hat, item);
    }
  }
  return total / static_cast<double>(dataset_items.size());
}

AccuracyEstimate gp_irt_estimate(const AnchorSet& anchor_set,
                                 const std::map<std::string, int>& anchor_responses,
                                 double p_irt, double lambda) {
  require(lambda >= 0.0 && lambda <= 1.0,
          "lambda must lie in [0,1], got " + std::to_string(lambda));

  // Exact key match both ways, reported as the symmetric difference.
  std::vector<std::string> missing;
  std::set<std::string> entry_ids;
  for (const auto& e : anchor_set.entries) {
    entry_ids.insert(e.item_id);
    if (!anchor_responses.count(e.item_id)) missing.push_back(e.item_id);
  }
  std::vector<std::string> extra;
  for (const auto& [id, y] : anchor_responses) {
    if (!entry_ids.count(id)) extra.push_back(id);
  }
  if (!missing.empty() || !extra.empty()) {
    std::ostringstream os;
    os << "anchor weight/response key mismatch for dataset '"
       << anchor_set.dataset_id << "':";
    if (!missing.empty()) {
      os << " missing responses for";
      for (const auto& id : missing) os << " '" << id << "'";
      os << ";";
    }
    if (!extra.empty()) {
      os << " responses for non-anchor items";
      for (const auto& id : extra) os << " '" << id << "'";
    }
    throw Error(os.str());
  }

  AccuracyEstimate out;
  out.dataset_id = anchor_set.dataset_id;
  out.lambda = lambda;
  out.p_irt = p_irt;
  out.anchors_used = static_cast<int>(anchor_set.entries.size());
  double mean = 0.0;
  for (const auto& e : anchor_set.entries) {
    const int y = anchor_responses.at(e.item_id);
    require(y == 0 || y == 1,
            "anchor response for item '" + e.item_id + "' must be 0 or 1");
    mean += e.weight * static_cast<double>(y);
  }
  out.anchor_mean = mean;
  out.estimate = lambda * mean + (1.0 - lambda) * p_irt;
  return out;
}

double random_subset_estimate(const std::map<std::string, int>& responses,
                              const std::set<std::string>& subset) {
  require(!subset.empty(), "random-subset estimate over an empty subset");
  double total = 0.0;
  for (const auto& id : subset) {
    auto it = responses.find(id);
    require(it != responses.end(),
            "subset item '" + id + "' has no response for this model");
    total += static_cast<double>(it->second);
  }
  return total / static_cast<double>(subset.size());
}

}  // namespace irtlink
