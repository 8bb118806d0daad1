#ifndef IRTLINK_CALIBRATION_HPP
#define IRTLINK_CALIBRATION_HPP

#include "irtlink/anchors.hpp"
#include "irtlink/model.hpp"
#include "irtlink/types.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace irtlink {

struct FitConfig {
  int dimension = 5;
  int max_outer_iterations = 500;
  double rel_tolerance = 1e-6;
  std::uint64_t seed = 0;
  int threads = 1;
  PriorConfig priors;
};

void validate(const FitConfig& c);

struct FitResult {
  std::vector<ItemParameters> items;     // ordered like data.item_ids()
  std::vector<AbilityVector> abilities;  // ordered like data.model_ids()
  std::vector<double> lp_trace;          // non-decreasing, one per iteration
  double final_log_posterior = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Joint MAP calibration by block-coordinate Newton ascent: alternate
// per-model theta updates (items fixed) and per-item (a, d) updates
// (abilities fixed), each safeguarded by step-halving so the joint
// log-posterior never decreases. Free parameters initialize from
// N(0, 0.1^2) draws keyed by (seed, id), making the result independent of
// record order and thread count. Items named in `frozen` keep the supplied
// parameters bit-for-bit and are skipped by the item phase.
FitResult fit_concurrent(
    const ResponseMatrix& data, const FitConfig& config,
    const std::map<std::string, ItemParameters>& frozen = {});

struct HistoryEntry {
  int step = 0;
  std::string dataset_id;
  int anchor_count = 0;
};

// Versioned store of calibrated item parameters, per-dataset anchor sets,
// and the integration history. Treated as an immutable value: each
// integration step consumes one state and returns a new one.
struct CalibrationState {
  std::string format_version = "1.0";
  int dimension = 0;
  int step = 0;
  std::map<std::string, ItemParameters> items;  // keyed by item_id
  std::map<std::string, AnchorSet> anchors;     // keyed by dataset_id
  std::vector<HistoryEntry> history;
};

inline constexpr const char* kStateFormatVersion = "1.0";

// Structural checks: anchors reference frozen items, history steps strictly
// increase, dimensions match. Throws Error on violation.
void validate(const CalibrationState& state);

// Sorted ids of every anchor item across all datasets (the accumulated pool).
std::vector<std::string> anchor_pool(const CalibrationState& state);

// Initial state from a joint fit: step 0, nothing frozen, no anchors yet.
CalibrationState make_initial_state(const FitResult& fit,
                                    const ResponseMatrix& data,
                                    int dimension);

// Selects anchors for one already-calibrated dataset and freezes them.
// The first selection keeps step 0; each later selection (or integration)
// advances the step, and the dataset's items are stamped with that step so
// the accumulated anchor pool up to any step is well defined.
CalibrationState select_anchors_into_state(const CalibrationState& state,
                                           const std::string& dataset_id,
                                           int budget, std::uint64_t seed,
                                           AnchorMethod method = AnchorMethod::kClustered);

// One sequential integration step: fit the new dataset's items (reference
// abilities re-estimated jointly, then discarded) with every existing anchor
// frozen, then select and freeze anchors of the new dataset. ref_responses
// must give every reference model a response on every existing anchor; it is
// filtered internally to new-dataset items plus existing anchors.
CalibrationState fpc_step(const CalibrationState& state,
                          const std::string& new_dataset,
                          const ResponseMatrix& ref_responses,
                          int anchor_budget, const FitConfig& config,
                          AnchorMethod method = AnchorMethod::kClustered);

// Per-model MAP ability estimates with all item parameters fixed (models are
// independent; Newton ascent from theta = 0 on a strictly concave
// objective, so no seed is involved). Every item in anchor_responses must be
// a frozen anchor in the state.
std::vector<AbilityVector> estimate_ability(const ResponseMatrix& anchor_responses,
                                            const CalibrationState& state,
                                            const FitConfig& config);

// Same, but errors if any of expected_models has no anchor responses.
std::vector<AbilityVector> estimate_ability(
    const ResponseMatrix& anchor_responses, const CalibrationState& state,
    const FitConfig& config, const std::vector<std::string>& expected_models);

}  // namespace irtlink

#endif  // IRTLINK_CALIBRATION_HPP
