#ifndef IRTLINK_TYPES_HPP
#define IRTLINK_TYPES_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace irtlink {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Single error type; messages carry the context (file, line, id).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

// Per-item MIRT 2PL parameters: discrimination vector a and intercept d.
// Frozen items are anchors; no fit may modify them.
struct ItemParameters {
  std::string item_id;
  Vector a;
  double d = 0.0;
  bool frozen = false;
  std::string dataset_id;
  int calibrated_at_step = 0;
};

// Scalar discrimination summary ||a||.
inline double mdisc(const ItemParameters& item) { return item.a.norm(); }

// Difficulty -d/||a||; empty for items with a vanishing discrimination.
inline std::optional<double> mdiff(const ItemParameters& item) {
  const double m = mdisc(item);
  if (m < 1e-12) return std::nullopt;
  return -item.d / m;
}

// Latent ability vector of one model.
struct AbilityVector {
  std::string model_id;
  Vector theta;
};

// Gaussian prior scales for the MAP objective. Keeps parameters finite under
// perfect separation (all-correct or all-wrong items/models).
struct PriorConfig {
  double sigma_theta = 1.0;
  double sigma_a = 1.0;
  double sigma_d = 1.0;
};

inline void validate(const PriorConfig& p) {
  require(p.sigma_theta > 0.0 && p.sigma_a > 0.0 && p.sigma_d > 0.0,
          "PriorConfig: all sigma values must be strictly positive");
}

// One observed correctness record.
struct Response {
  std::string model_id;
  std::string item_id;
  std::string dataset_id;
  int correct = 0;  // 0 or 1
};

// Sparse binary response data. Ids are kept in lexicographic order and cells
// in (model, item) order, so identical record multisets produce identical
// matrices regardless of insertion order. Missing pairs are simply absent and
// excluded from every likelihood sum.
class ResponseMatrix {
 public:
  struct Cell {
    int model = 0;
    int item = 0;
    std::uint8_t correct = 0;
  };

  // Builds a canonical matrix. Throws on duplicate (model, item) pairs,
  // non-binary correctness, or an item missing from item_dataset.
  static ResponseMatrix from_records(
      const std::vector<Response>& records,
      const std::map<std::string, std::string>& item_dataset);

  // Same, with dataset assignments taken from the records themselves. Throws
  // if an item carries two different dataset ids or an empty one.
  static ResponseMatrix from_records(const std::vector<Response>& records);

  const std::vector<std::string>& model_ids() const { return model_ids_; }
  const std::vector<std::string>& item_ids() const { return item_ids_; }
  const std::vector<Cell>& cells() const { return cells_; }

  int n_models() const { return static_cast<int>(model_ids_.size()); }
  int n_items() const { return static_cast<int>(item_ids_.size()); }

  const std::string& dataset_of(int item_index) const {
    return item_dataset_[static_cast<std::size_t>(item_index)];
  }
  const std::string& dataset_of(const std::string& item_id) const;

  int model_index(const std::string& model_id) const;  // -1 if absent
  int item_index(const std::string& item_id) const;    // -1 if absent

  // Cells of one model, contiguous and ordered by item index.
  const Cell* model_begin(int model_index) const;
  const Cell* model_end(int model_index) const;

  // Observed correctness for (model, item); empty if the pair is missing.
  std::optional<int> observed(int model_index, int item_index) const;
  std::optional<int> observed(const std::string& model_id,
                              const std::string& item_id) const;

  std::size_t n_responses() const { return cells_.size(); }

  // Sorted, deduplicated dataset ids present in the matrix.
  std::vector<std::string> dataset_ids() const;

  // Item ids belonging to one dataset, in id order.
  std::vector<std::string> items_of_dataset(const std::string& dataset_id) const;

  // Sub-matrix restricted to the given models and items (ids absent from the
  // matrix are ignored; records outside the selection are dropped).
  ResponseMatrix restricted(const std::vector<std::string>& keep_models,
                            const std::vector<std::string>& keep_items) const;

  bool empty() const { return cells_.empty(); }

 private:
  std::vector<std::string> model_ids_;
  std::vector<std::string> item_ids_;
  std::vector<std::string> item_dataset_;  // parallel to item_ids_
  std::vector<Cell> cells_;                // sorted by (model, item)
  std::vector<std::size_t> model_offsets_;  // size n_models + 1
};

}  // namespace irtlink

#endif  // IRTLINK_TYPES_HPP
