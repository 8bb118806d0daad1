#ifndef IRTLINK_METRICS_HPP
#define IRTLINK_METRICS_HPP

#include "irtlink/types.hpp"

#include <map>
#include <string>
#include <vector>

namespace irtlink {

// How a new dataset is integrated and evaluated at each chain step.
enum class Strategy { kFpc, kConcurrent, kRandom, kTopk };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& name);

// One row of a chain report: prediction quality and evaluation cost of one
// strategy at one step.
struct StepMetrics {
  std::string chain_id;
  int step = 0;
  Strategy strategy = Strategy::kFpc;
  int n_anchors = 0;
  double mae = 0.0;
  double spearman = 0.0;
  long long cost_per_model = 0;
};

// Mean absolute error between two model->value maps with identical keys.
double mae(const std::map<std::string, double>& estimates,
           const std::map<std::string, double>& truths);

// Spearman rank correlation: Pearson correlation of average ranks (ties get
// the mean of the rank positions they span). Needs at least two models and
// nonzero rank variance on both sides.
double spearman(const std::map<std::string, double>& estimates,
                const std::map<std::string, double>& truths);

// New item evaluations required per model at step t (0-based) with anchor
// budget n. Sequential integration and the sampling baselines touch only the
// new dataset's n items; a full joint refit moves every item parameter, so
// anchors are re-selected for all t+1 datasets and all must be re-evaluated.
long long step_cost(Strategy s, int t, int n);

struct CiSummary {
  double mean = 0.0;
  double half_width = 0.0;  // 1.96 * sd / sqrt(n); 0 when n == 1
};

// Mean and normal-approximation 95% interval half-width across chains.
CiSummary aggregate_ci(const std::vector<double>& values);

}  // namespace irtlink

#endif  // IRTLINK_METRICS_HPP
