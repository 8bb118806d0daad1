#ifndef IRTLINK_IO_HPP
#define IRTLINK_IO_HPP

#include "irtlink/anchors.hpp"
#include "irtlink/calibration.hpp"
#include "irtlink/chainlab.hpp"
#include "irtlink/metrics.hpp"
#include "irtlink/prediction.hpp"
#include "irtlink/types.hpp"

#include <string>
#include <vector>

namespace irtlink {

inline constexpr const char* kEngineVersion = "1.0.0";

// Strict CSV with exact header `model_id,item_id,dataset_id,correct`.
// Errors cite the offending line number.
ResponseMatrix load_responses(const std::string& path);
void save_responses(const ResponseMatrix& m, const std::string& path);

// Calibration state as a versioned JSON document. Floats are written with 17
// significant digits, so load(save(s)) reproduces every value bit-exactly.
void save_state(const CalibrationState& state, const std::string& path);
CalibrationState load_state(const std::string& path);

// Ground truth of a synthetic suite (true item parameters and abilities).
void save_truth(const std::vector<ItemParameters>& items,
                const std::vector<AbilityVector>& abilities, int dimension,
                const std::string& path);

// Item map rows as CSV `item_id,dataset_id,b,mdisc,is_anchor`; degenerate
// items (no finite difficulty) leave the b field empty.
void save_item_map(const std::vector<ItemMapRow>& rows,
                   const std::string& path);

// Cross-chain aggregation of step rows, grouped by (step, strategy, budget).
struct AggregateRow {
  int step = 0;
  Strategy strategy = Strategy::kFpc;
  int n_anchors = 0;
  CiSummary mae;
  CiSummary spearman;
};
std::vector<AggregateRow> aggregate_steps(const std::vector<StepMetrics>& rows);

// Everything one experiment run reports.
struct ReportBundle {
  std::vector<ChainReport> chains;
  std::string engine_version = kEngineVersion;
  std::string config_hash;  // hex digest of the canonical config string
  std::uint64_t master_seed = 0;
};

// Writes steps.csv, aggregate.csv, and summary.json into dir. Identical
// bundles produce byte-identical files.
void emit_report(const ReportBundle& bundle, const std::string& dir);

// Reads a steps.csv produced by emit_report (for re-aggregation).
std::vector<StepMetrics> load_steps(const std::string& path);

// Re-aggregates loaded step rows into aggregate.csv and a small
// summary.json in dir.
void emit_aggregate(const std::vector<StepMetrics>& rows,
                    const std::string& dir);

// Accuracy predictions as CSV
// `model_id,dataset_id,estimate,anchor_mean,p_irt,lambda,anchors_used`.
void save_estimates(const std::vector<AccuracyEstimate>& rows,
                    const std::string& path);

// Ability estimates as CSV `model_id,theta_0,...,theta_{D-1}`.
void save_abilities(const std::vector<AbilityVector>& abilities,
                    const std::string& path);

}  // namespace irtlink

#endif  // IRTLINK_IO_HPP
