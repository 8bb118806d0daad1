#ifndef IRTLINK_CHAINLAB_HPP
#define IRTLINK_CHAINLAB_HPP

#include "irtlink/calibration.hpp"
#include "irtlink/metrics.hpp"
#include "irtlink/types.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace irtlink {

// One ordered experiment: the first initial_suite_size datasets form the
// starting suite (step 0); each later dataset is integrated one at a time
// and predictions are scored on it, so the last element is the final
// predicted dataset.
struct ChainSpec {
  std::string chain_id;
  std::vector<std::string> dataset_ids;
  int initial_suite_size = 1;
  std::uint64_t seed = 0;
};

void validate(const ChainSpec& chain);

enum class ChainMode { kLeaderboard, kLongChain };

struct ChainBuildParams {
  ChainMode mode = ChainMode::kLeaderboard;
  int orderings = 2;           // leaderboard: chains per final dataset
  int n_chains = 20;           // long-chain: number of chains
  int initial_suite_size = 0;  // 0 = mode default (leaderboard 2, long 1)
};

// Leaderboard mode: every dataset serves as the final predicted dataset, with
// `orderings` shuffled arrangements of the rest, giving count*orderings
// chains. Long-chain mode: n_chains chains over all datasets, each ending at
// a distinct randomly drawn final dataset.
std::vector<ChainSpec> build_chains(const std::vector<std::string>& dataset_ids,
                                    const ChainBuildParams& params,
                                    std::uint64_t seed);

// Seeded partition into reference models (first floor(n * ref_fraction)
// after a uniform shuffle) and held-out test models.
void split_models(const std::vector<std::string>& model_ids,
                  double ref_fraction, std::uint64_t seed,
                  std::vector<std::string>& reference,
                  std::vector<std::string>& test);

struct SyntheticSuiteConfig {
  int n_models = 100;
  int n_datasets = 6;
  int items_per_dataset = 500;
  int dimension = 2;
  std::uint64_t seed = 0;
  // Scales of the normal generator distributions. 1.0 gives the
  // standard-normal default; 0 pins a quantity to zero for focused tests.
  double theta_scale = 1.0;
  double a_scale = 1.0;
  double d_scale = 1.0;
  // Component-wise mean of the discrimination draws. The zero default makes
  // expected accuracy exactly 0.5 for every ability (sign symmetry), i.e. a
  // world with no meaningful ranking; a positive mean yields the
  // leaderboard-like regime where stronger models really score higher.
  double a_mean = 0.0;
};

struct SyntheticSuite {
  ResponseMatrix responses;  // dense: every model answers every item
  std::vector<ItemParameters> true_items;
  std::vector<AbilityVector> true_abilities;
};

// Ground-truth world: abilities, item parameters, and Bernoulli responses
// drawn from the model itself, so recovery can be scored exactly.
SyntheticSuite generate_synthetic_suite(const SyntheticSuiteConfig& config);

struct ChainRunConfig {
  double ref_fraction = 0.75;
  double lambda_n0 = 100.0;  // blend weight n/(n + lambda_n0)
  FitConfig fit;             // dimension, priors, tolerances, threads
};

// Everything one strategy produced for one (step, budget) evaluation;
// surfaced to observers so tests can audit exactly which responses were
// consumed.
struct StepObservation {
  std::string chain_id;
  int step = 0;
  Strategy strategy = Strategy::kFpc;
  int n_anchors = 0;
  std::string dataset_id;  // the newly added dataset being predicted
  std::map<std::string, double> estimates;  // test model -> estimate
  std::map<std::string, double> truths;     // test model -> exact accuracy
  // Item ids whose test-model responses the estimates may depend on
  // (cumulative anchors, or the drawn random subset).
  std::vector<std::string> consumed_items;
};

using StepObserver = std::function<void(const StepObservation&)>;

struct ChainReport {
  std::string chain_id;
  std::vector<StepMetrics> steps;  // one per (step, strategy, budget)
  int n_reference_models = 0;
  int n_test_models = 0;
  int dimension = 0;
  std::uint64_t seed = 0;
};

// Runs one chain end to end: split models, fit the initial suite on
// reference models, then per (strategy, budget) lineage integrate each
// subsequent dataset, predict every test model's accuracy on it from anchor
// responses alone, and score against exact accuracies from the full matrix.
// Step 0 scores the last initial-suite dataset, so a chain of length one
// still yields metrics (identical across fpc and concurrent by
// construction).
ChainReport run_chain(const ChainSpec& chain, const ResponseMatrix& responses,
                      const std::vector<Strategy>& strategies,
                      const std::vector<int>& n_values,
                      const ChainRunConfig& config,
                      const StepObserver& observer = nullptr);

// Runs many chains (parallel across chains when config.fit.threads > 1) and
// returns reports in chain order.
std::vector<ChainReport> run_chains(const std::vector<ChainSpec>& chains,
                                    const ResponseMatrix& responses,
                                    const std::vector<Strategy>& strategies,
                                    const std::vector<int>& n_values,
                                    const ChainRunConfig& config);

}  // namespace irtlink

#endif  // IRTLINK_CHAINLAB_HPP
