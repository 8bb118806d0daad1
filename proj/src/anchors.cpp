#include "irtlink/anchors.hpp"

#include "irtlink/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace irtlink {

namespace {

// Rows: one standardized feature vector (a_1..a_D, d) per item. Coordinates
// that are constant across the dataset carry no information and are zeroed.
Matrix standardized_features(const std::vector<ItemParameters>& items) {
  const Eigen::Index n = static_cast<Eigen::Index>(items.size());
  const Eigen::Index dim = items.front().a.size();
  Matrix f(n, dim + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    f.row(i).head(dim) = items[static_cast<std::size_t>(i)].a.transpose();
    f(i, dim) = items[static_cast<std::size_t>(i)].d;
  }
  for (Eigen::Index c = 0; c < f.cols(); ++c) {
    const double mean = f.col(c).mean();
    f.col(c).array() -= mean;
    const double var = f.col(c).squaredNorm() / static_cast<double>(n);
    const double sd = std::sqrt(var);
    if (sd > 1e-12) {
      f.col(c) /= sd;
    } else {
      f.col(c).setZero();
    }
  }
  return f;
}

struct KmeansRun {
  std::vector<int> assignment;  // point -> cluster
  Matrix centroids;             // k x features
  double inertia = std::numeric_limits<double>::infinity();
};

// Squared distance from every point to its nearest chosen centroid.
void update_min_dist(const Matrix& f, const Vector& centroid, Vector& min_d2) {
  for (Eigen::Index i = 0; i < f.rows(); ++i) {
    const double d2 = (f.row(i).transpose() - centroid).squaredNorm();
    if (d2 < min_d2(i)) min_d2(i) = d2;
  }
}

KmeansRun lloyd(const Matrix& f, int k, Rng& rng) {
  const Eigen::Index n = f.rows();
  KmeansRun run;
  run.centroids.resize(k, f.cols());

  // k-means++ seeding. Points coincident with a chosen centroid have zero
  // weight; if every remaining point does, fall back to the first unchosen
  // indices so we always end up with k centroids.
  std::vector<int> chosen;
  chosen.push_back(static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(n))));
  run.centroids.row(0) = f.row(chosen[0]);
  Vector min_d2 = Vector::Constant(n, std::numeric_limits<double>::infinity());
  update_min_dist(f, run.centroids.row(0).transpose(), min_d2);
  for (int c = 1; c < k; ++c) {
    const double total = min_d2.sum();
    int pick = -1;
    if (total > 0.0) {
      const double u = rng.uniform01() * total;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += min_d2(i);
        if (acc > u) {
          pick = static_cast<int>(i);
          break;
        }
      }
      if (pick < 0) pick = static_cast<int>(n) - 1;  // u landed on total
    } else {
      std::set<int> used(chosen.begin(), chosen.end());
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!used.count(static_cast<int>(i))) {
          pick = static_cast<int>(i);
          break;
        }
      }
      if (pick < 0) pick = 0;  // duplicates exhausted; reuse is harmless
    }
    chosen.push_back(pick);
    run.centroids.row(c) = f.row(pick);
    update_min_dist(f, run.centroids.row(c).transpose(), min_d2);
  }

  run.assignment.assign(static_cast<std::size_t>(n), 0);
  for (int iter = 0; iter < 100; ++iter) {
    // Assign: nearest centroid, ties to the lowest cluster index.
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d2 = (f.row(i) - run.centroids.row(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double d2 = (f.row(i) - run.centroids.row(c)).squaredNorm();
        if (d2 < best_d2) {
          best_d2 = d2;
          best = c;
        }
      }
      if (run.assignment[static_cast<std::size_t>(i)] != best) {
        run.assignment[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }

    // Repair empty clusters deterministically: move the point farthest from
    // its current centroid (ties to the lowest point index).
    std::vector<int> sizes(static_cast<std::size_t>(k), 0);
    for (int a : run.assignment) ++sizes[static_cast<std::size_t>(a)];
    for (int c = 0; c < k; ++c) {
      if (sizes[static_cast<std::size_t>(c)] > 0) continue;
      int worst = -1;
      double worst_d2 = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const int a = run.assignment[static_cast<std::size_t>(i)];
        if (sizes[static_cast<std::size_t>(a)] <= 1) continue;
        const double d2 = (f.row(i) - run.centroids.row(a)).squaredNorm();
        if (d2 > worst_d2) {
          worst_d2 = d2;
          worst = static_cast<int>(i);
        }
      }
      if (worst < 0) continue;  // fewer distinct points than clusters
      --sizes[static_cast<std::size_t>(run.assignment[static_cast<std::size_t>(worst)])];
      run.assignment[static_cast<std::size_t>(worst)] = c;
      ++sizes[static_cast<std::size_t>(c)];
      changed = true;
    }

    // Update centroids as cluster means.
    Matrix sums = Matrix::Zero(k, f.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(run.assignment[static_cast<std::size_t>(i)]) += f.row(i);
    }
    for (int c = 0; c < k; ++c) {
      if (sizes[static_cast<std::size_t>(c)] > 0) {
        run.centroids.row(c) =
            sums.row(c) / static_cast<double>(sizes[static_cast<std::size_t>(c)]);
      }
    }
    if (!changed && iter > 0) break;
  }

  run.inertia = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    run.inertia +=
        (f.row(i) - run.centroids.row(run.assignment[static_cast<std::size_t>(i)]))
            .squaredNorm();
  }
  return run;
}

}  // namespace

AnchorSet select_anchors_clustered(const std::vector<ItemParameters>& items,
                                   int n, std::uint64_t seed, int restarts) {
  require(!items.empty(), "anchor selection requires a nonempty item list");
  require(n >= 1, "anchor budget must be at least 1, got " + std::to_string(n));
  require(restarts >= 1, "k-means needs at least one restart");
  const std::string& dataset = items.front().dataset_id;
  for (const auto& it : items) {
    require(it.dataset_id == dataset,
            "anchor selection mixes datasets: '" + dataset + "' and '" +
                it.dataset_id + "'");
  }

  // Canonical order: the result must not depend on caller ordering, and the
  // closest-representative tie-break below scans in ascending item_id.
  std::vector<ItemParameters> sorted = items;
  std::sort(sorted.begin(), sorted.end(),
            [](const ItemParameters& a, const ItemParameters& b) {
              return a.item_id < b.item_id;
            });

  const int count = static_cast<int>(sorted.size());
  const int k = std::min(n, count);
  const Matrix f = standardized_features(sorted);

  KmeansRun best;
  for (int r = 0; r < restarts; ++r) {
    Rng rng(derive_seed(seed, "kmeans-restart", static_cast<std::uint64_t>(r)));
    KmeansRun run = lloyd(f, k, rng);
    if (run.inertia < best.inertia) best = std::move(run);
  }

  // Representative of each cluster: member closest to the centroid, ties by
  // ascending item_id. Scanning the sorted items in order and keeping strict
  // improvements realizes the tie-break.
  std::vector<int> rep(static_cast<std::size_t>(k), -1);
  std::vector<double> rep_d2(static_cast<std::size_t>(k),
                             std::numeric_limits<double>::infinity());
  std::vector<int> sizes(static_cast<std::size_t>(k), 0);
  for (int i = 0; i < count; ++i) {
    const int c = best.assignment[static_cast<std::size_t>(i)];
    ++sizes[static_cast<std::size_t>(c)];
    const double d2 = (f.row(i) - best.centroids.row(c)).squaredNorm();
    if (d2 < rep_d2[static_cast<std::size_t>(c)]) {
      rep_d2[static_cast<std::size_t>(c)] = d2;
      rep[static_cast<std::size_t>(c)] = i;
    }
  }

  AnchorSet out;
  out.dataset_id = dataset;
  out.budget = n;
  for (int c = 0; c < k; ++c) {
    if (rep[static_cast<std::size_t>(c)] < 0) continue;
    AnchorEntry e;
    e.item_id = sorted[static_cast<std::size_t>(rep[static_cast<std::size_t>(c)])].item_id;
    e.weight = static_cast<double>(sizes[static_cast<std::size_t>(c)]) /
               static_cast<double>(count);
    out.entries.push_back(std::move(e));
  }
  std::sort(out.entries.begin(), out.entries.end(),
            [](const AnchorEntry& a, const AnchorEntry& b) {
              return a.item_id < b.item_id;
            });
  return out;
}

AnchorSet select_anchors_topk(const std::vector<ItemParameters>& items, int k) {
  require(k >= 0, "top-k budget must be nonnegative, got " + std::to_string(k));
  AnchorSet out;
  out.dataset_id = items.empty() ? std::string() : items.front().dataset_id;
  out.budget = k;
  if (k == 0 || items.empty()) return out;

  std::vector<const ItemParameters*> order;
  order.reserve(items.size());
  for (const auto& it : items) order.push_back(&it);
  std::sort(order.begin(), order.end(),
            [](const ItemParameters* a, const ItemParameters* b) {
              const double ma = mdisc(*a);
              const double mb = mdisc(*b);
              if (ma != mb) return ma > mb;
              return a->item_id < b->item_id;
            });
  const int take = std::min<int>(k, static_cast<int>(order.size()));
  for (int i = 0; i < take; ++i) {
    out.entries.push_back(
        AnchorEntry{order[static_cast<std::size_t>(i)]->item_id,
                    1.0 / static_cast<double>(take)});
  }
  std::sort(out.entries.begin(), out.entries.end(),
            [](const AnchorEntry& a, const AnchorEntry& b) {
              return a.item_id < b.item_id;
            });
  return out;
}

std::vector<ItemMapRow> export_item_map(
    const std::vector<ItemParameters>& items, const AnchorSet& anchors) {
  std::set<std::string> anchor_ids;
  for (const auto& e : anchors.entries) anchor_ids.insert(e.item_id);
  std::vector<ItemMapRow> rows;
  rows.reserve(items.size());
  for (const auto& it : items) {
    ItemMapRow r;
    r.item_id = it.item_id;
    r.dataset_id = it.dataset_id;
    r.b = mdiff(it);
    r.mdisc = mdisc(it);
    r.is_anchor = anchor_ids.count(it.item_id) > 0;
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace irtlink
