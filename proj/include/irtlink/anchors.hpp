#ifndef IRTLINK_ANCHORS_HPP
#define IRTLINK_ANCHORS_HPP

#include "irtlink/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace irtlink {

// A fixed set of representative items for one dataset. Weights are
// cluster-proportional and sum to 1.
struct AnchorEntry {
  std::string item_id;
  double weight = 0.0;
};

struct AnchorSet {
  std::string dataset_id;
  int budget = 0;
  std::vector<AnchorEntry> entries;  // sorted by item_id
};

// Which selection rule an integration step uses.
enum class AnchorMethod { kClustered, kTopK };

// Clusters items in standardized (a, d) feature space with k-means
// (k = min(N, item count), k-means++ seeding, 10 restarts; best inertia wins,
// ties by restart index) and picks the item closest to each centroid (ties by
// ascending item_id). Weight of an anchor = its cluster's share of the
// dataset. Deterministic for a given seed.
AnchorSet select_anchors_clustered(const std::vector<ItemParameters>& items,
                                   int n, std::uint64_t seed,
                                   int restarts = 10);

// Takes the K items with the largest ||a|| (ties by ascending item_id),
// uniform weights 1/K. K = 0 gives an empty set; K > count truncates.
AnchorSet select_anchors_topk(const std::vector<ItemParameters>& items, int k);

// One row of the difficulty/discrimination map. Items with a vanishing
// discrimination vector have no finite difficulty: b is empty and the row is
// flagged degenerate.
struct ItemMapRow {
  std::string item_id;
  std::string dataset_id;
  std::optional<double> b;
  double mdisc = 0.0;
  bool is_anchor = false;
};

std::vector<ItemMapRow> export_item_map(
    const std::vector<ItemParameters>& items, const AnchorSet& anchors);

}  // namespace irtlink

#endif  // IRTLINK_ANCHORS_HPP
