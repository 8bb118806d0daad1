#include "irtlink/types.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace irtlink {

namespace {

// Index of id in a sorted vector, or -1.
int sorted_index(const std::vector<std::string>& ids, const std::string& id) {
  auto it = std::lower_bound(ids.begin(), ids.end(), id);
  if (it == ids.end() || *it != id) return -1;
  return static_cast<int>(it - ids.begin());
}

}  // namespace

ResponseMatrix ResponseMatrix::from_records(
    const std::vector<Response>& records) {
  std::map<std::string, std::string> item_dataset;
  for (const auto& r : records) {
    require(!r.dataset_id.empty(),
            "record for item '" + r.item_id + "' has an empty dataset id");
    auto [it, inserted] = item_dataset.emplace(r.item_id, r.dataset_id);
    require(inserted || it->second == r.dataset_id,
            "item '" + r.item_id + "' assigned to both dataset '" +
                it->second + "' and '" + r.dataset_id + "'");
  }
  return from_records(records, item_dataset);
}

ResponseMatrix ResponseMatrix::from_records(
    const std::vector<Response>& records,
    const std::map<std::string, std::string>& item_dataset) {
  ResponseMatrix m;

  std::set<std::string> models;
  std::set<std::string> items;
  for (const auto& r : records) {
    require(r.correct == 0 || r.correct == 1,
            "response for model '" + r.model_id + "', item '" + r.item_id +
                "' has correctness " + std::to_string(r.correct) +
                "; expected 0 or 1");
    models.insert(r.model_id);
    items.insert(r.item_id);
  }
  m.model_ids_.assign(models.begin(), models.end());
  m.item_ids_.assign(items.begin(), items.end());

  m.item_dataset_.reserve(m.item_ids_.size());
  for (const auto& id : m.item_ids_) {
    auto it = item_dataset.find(id);
    require(it != item_dataset.end(),
            "item '" + id + "' has no dataset assignment");
    m.item_dataset_.push_back(it->second);
  }

  m.cells_.reserve(records.size());
  for (const auto& r : records) {
    Cell c;
    c.model = sorted_index(m.model_ids_, r.model_id);
    c.item = sorted_index(m.item_ids_, r.item_id);
    c.correct = static_cast<std::uint8_t>(r.correct);
    m.cells_.push_back(c);
  }
  std::sort(m.cells_.begin(), m.cells_.end(), [](const Cell& x, const Cell& y) {
    return x.model != y.model ? x.model < y.model : x.item < y.item;
  });
  for (std::size_t i = 1; i < m.cells_.size(); ++i) {
    const Cell& a = m.cells_[i - 1];
    const Cell& b = m.cells_[i];
    if (a.model == b.model && a.item == b.item) {
      throw Error("duplicate response for model '" +
                  m.model_ids_[static_cast<std::size_t>(a.model)] +
                  "', item '" +
                  m.item_ids_[static_cast<std::size_t>(a.item)] + "'");
    }
  }

  m.model_offsets_.assign(m.model_ids_.size() + 1, 0);
  for (const auto& c : m.cells_) {
    ++m.model_offsets_[static_cast<std::size_t>(c.model) + 1];
  }
  for (std::size_t i = 1; i < m.model_offsets_.size(); ++i) {
    m.model_offsets_[i] += m.model_offsets_[i - 1];
  }
  return m;
}

const std::string& ResponseMatrix::dataset_of(const std::string& item_id) const {
  const int idx = item_index(item_id);
  require(idx >= 0, "item '" + item_id + "' not present in response matrix");
  return item_dataset_[static_cast<std::size_t>(idx)];
}

int ResponseMatrix::model_index(const std::string& model_id) const {
  return sorted_index(model_ids_, model_id);
}

int ResponseMatrix::item_index(const std::string& item_id) const {
  return sorted_index(item_ids_, item_id);
}

const ResponseMatrix::Cell* ResponseMatrix::model_begin(int model_index) const {
  return cells_.data() + model_offsets_[static_cast<std::size_t>(model_index)];
}

const ResponseMatrix::Cell* ResponseMatrix::model_end(int model_index) const {
  return cells_.data() +
         model_offsets_[static_cast<std::size_t>(model_index) + 1];
}

std::optional<int> ResponseMatrix::observed(int model_index,
                                            int item_index) const {
  const Cell* lo = model_begin(model_index);
  const Cell* hi = model_end(model_index);
  auto it = std::lower_bound(lo, hi, item_index,
                             [](const Cell& c, int idx) { return c.item < idx; });
  if (it == hi || it->item != item_index) return std::nullopt;
  return static_cast<int>(it->correct);
}

std::optional<int> ResponseMatrix::observed(const std::string& model_id,
                                            const std::string& item_id) const {
  const int m = model_index(model_id);
  const int i = item_index(item_id);
  if (m < 0 || i < 0) return std::nullopt;
  return observed(m, i);
}

std::vector<std::string> ResponseMatrix::dataset_ids() const {
  std::set<std::string> ds(item_dataset_.begin(), item_dataset_.end());
  return {ds.begin(), ds.end()};
}

std::vector<std::string> ResponseMatrix::items_of_dataset(
    const std::string& dataset_id) const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < item_ids_.size(); ++i) {
    if (item_dataset_[i] == dataset_id) out.push_back(item_ids_[i]);
  }
  return out;
}

ResponseMatrix ResponseMatrix::restricted(
    const std::vector<std::string>& keep_models,
    const std::vector<std::string>& keep_items) const {
  std::set<std::string> ms(keep_models.begin(), keep_models.end());
  std::set<std::string> is(keep_items.begin(), keep_items.end());
  std::vector<Response> recs;
  std::map<std::string, std::string> ds;
  for (const auto& c : cells_) {
    const std::string& mid = model_ids_[static_cast<std::size_t>(c.model)];
    const std::string& iid = item_ids_[static_cast<std::size_t>(c.item)];
    if (!ms.count(mid) || !is.count(iid)) continue;
    const std::string& dsid = item_dataset_[static_cast<std::size_t>(c.item)];
    recs.push_back(Response{mid, iid, dsid, static_cast<int>(c.correct)});
    ds[iid] = dsid;
  }
  return from_records(recs, ds);
}

}  // namespace irtlink
