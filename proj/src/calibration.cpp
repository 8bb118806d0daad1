#include "irtlink/calibration.hpp"

#include "irtlink/parallel.hpp"
#include "irtlink/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace irtlink {

namespace {

constexpr int kMaxHalvings = 30;

std::string join_ids(const std::vector<std::string>& ids) {
  std::ostringstream os;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) os << ", ";
    os << ids[i];
  }
  return os.str();
}

// Local objective of one model's theta block: its likelihood terms plus its
// own prior. Maximizing it in isolation also raises the joint posterior,
// because no other term depends on this theta.
double theta_objective(const ResponseMatrix& data, int model,
                       const std::vector<ItemParameters>& items,
                       const Vector& theta, double inv2_t) {
  double f = 0.0;
  for (const auto* c = data.model_begin(model); c != data.model_end(model); ++c) {
    const auto& item = items[static_cast<std::size_t>(c->item)];
    f += bernoulli_loglik(c->correct, item.a.dot(theta) + item.d);
  }
  return f - theta.squaredNorm() * inv2_t;
}

// One safeguarded Newton step on theta. Returns the new objective value.
double newton_theta(const ResponseMatrix& data, int model,
                    const std::vector<ItemParameters>& items, Vector& theta,
                    const PriorConfig& prior) {
  const Eigen::Index dim = theta.size();
  const double inv_t2 = 1.0 / (prior.sigma_theta * prior.sigma_theta);
  const double inv2_t = 0.5 * inv_t2;

  Vector g = -theta * inv_t2;
  Matrix h = Matrix::Identity(dim, dim) * inv_t2;  // negated Hessian
  for (const auto* c = data.model_begin(model); c != data.model_end(model); ++c) {
    const auto& item = items[static_cast<std::size_t>(c->item)];
    const double p = sigmoid(item.a.dot(theta) + item.d);
    g += (static_cast<double>(c->correct) - p) * item.a;
    h.noalias() += (p * (1.0 - p)) * item.a * item.a.transpose();
  }
  const double f0 = theta_objective(data, model, items, theta, inv2_t);
  if (g.lpNorm<Eigen::Infinity>() < 1e-12) return f0;

  const Vector delta = h.llt().solve(g);
  double t = 1.0;
  for (int halving = 0; halving <= kMaxHalvings; ++halving) {
    const Vector cand = theta + t * delta;
    const double f = theta_objective(data, model, items, cand, inv2_t);
    if (std::isfinite(f) && f >= f0) {
      theta = cand;
      return f;
    }
    t *= 0.5;
  }
  return f0;  // no acceptable step: keep the current point
}

// Cells of one item as (model, correct), ordered by model index.
using ItemCells = std::vector<std::pair<int, std::uint8_t>>;

double item_objective(const ItemCells& cells,
                      const std::vector<AbilityVector>& abilities,
                      const Vector& a, double d, double inv2_a, double inv2_d) {
  double f = 0.0;
  for (const auto& [m, y] : cells) {
    const auto& theta = abilities[static_cast<std::size_t>(m)].theta;
    f += bernoulli_loglik(y, a.dot(theta) + d);
  }
  return f - a.squaredNorm() * inv2_a - d * d * inv2_d;
}

// One safeguarded Newton step on an item's (a, d) block.
void newton_item(const ItemCells& cells,
                 const std::vector<AbilityVector>& abilities,
                 ItemParameters& item, const PriorConfig& prior) {
  const Eigen::Index dim = item.a.size();
  const double inv_a2 = 1.0 / (prior.sigma_a * prior.sigma_a);
  const double inv_d2 = 1.0 / (prior.sigma_d * prior.sigma_d);
  const double inv2_a = 0.5 * inv_a2;
  const double inv2_d = 0.5 * inv_d2;

  Vector g = Vector::Zero(dim + 1);
  g.head(dim) = -item.a * inv_a2;
  g(dim) = -item.d * inv_d2;
  Matrix h = Matrix::Zero(dim + 1, dim + 1);
  h.topLeftCorner(dim, dim).diagonal().array() += inv_a2;
  h(dim, dim) += inv_d2;
  Vector u(dim + 1);
  for (const auto& [m, y] : cells) {
    const auto& theta = abilities[static_cast<std::size_t>(m)].theta;
    const double p = sigmoid(item.a.dot(theta) + item.d);
    const double resid = static_cast<double>(y) - p;
    g.head(dim) += resid * theta;
    g(dim) += resid;
    u.head(dim) = theta;
    u(dim) = 1.0;
    h.noalias() += (p * (1.0 - p)) * u * u.transpose();
  }
  if (g.lpNorm<Eigen::Infinity>() < 1e-12) return;

  const double f0 = item_objective(cells, abilities, item.a, item.d, inv2_a, inv2_d);
  const Vector delta = h.llt().solve(g);
  double t = 1.0;
  for (int halving = 0; halving <= kMaxHalvings; ++halving) {
    const Vector ca = item.a + t * delta.head(dim);
    const double cd = item.d + t * delta(dim);
    const double f = item_objective(cells, abilities, ca, cd, inv2_a, inv2_d);
    if (std::isfinite(f) && f >= f0) {
      item.a = ca;
      item.d = cd;
      return;
    }
    t *= 0.5;
  }
}

}  // namespace

void validate(const FitConfig& c) {
  require(c.dimension >= 1, "fit dimension must be >= 1, got " +
                                std::to_string(c.dimension));
  require(c.max_outer_iterations >= 1, "max_outer_iterations must be >= 1");
  require(c.rel_tolerance > 0.0, "rel_tolerance must be > 0");
  require(c.threads >= 1, "thread count must be >= 1, got " +
                              std::to_string(c.threads));
  validate(c.priors);
}

FitResult fit_concurrent(const ResponseMatrix& data, const FitConfig& config,
                         const std::map<std::string, ItemParameters>& frozen) {
  validate(config);
  require(!data.empty(), "fit requires a nonempty response matrix");
  const Eigen::Index dim = config.dimension;

  FitResult r;
  r.items.reserve(static_cast<std::size_t>(data.n_items()));
  for (int j = 0; j < data.n_items(); ++j) {
    const std::string& id = data.item_ids()[static_cast<std::size_t>(j)];
    auto it = frozen.find(id);
    if (it != frozen.end()) {
      require(it->second.a.size() == dim,
              "frozen item '" + id + "' has dimension " +
                  std::to_string(it->second.a.size()) + "; fit uses " +
                  std::to_string(dim));
      ItemParameters p = it->second;
      p.item_id = id;
      p.frozen = true;
      r.items.push_back(std::move(p));
    } else {
      // Seeded by the item's own id, so initialization does not depend on
      // how records were ordered or which other items are present.
      Rng rng(derive_seed(config.seed, "init-item:" + id));
      ItemParameters p;
      p.item_id = id;
      p.dataset_id = data.dataset_of(j);
      p.a.resize(dim);
      for (Eigen::Index k = 0; k < dim; ++k) p.a(k) = 0.1 * rng.normal();
      p.d = 0.1 * rng.normal();
      p.frozen = false;
      r.items.push_back(std::move(p));
    }
  }
  r.abilities.reserve(static_cast<std::size_t>(data.n_models()));
  for (const auto& id : data.model_ids()) {
    Rng rng(derive_seed(config.seed, "init-model:" + id));
    AbilityVector ab;
    ab.model_id = id;
    ab.theta.resize(dim);
    for (Eigen::Index k = 0; k < dim; ++k) ab.theta(k) = 0.1 * rng.normal();
    r.abilities.push_back(std::move(ab));
  }

  std::vector<ItemCells> by_item(static_cast<std::size_t>(data.n_items()));
  for (const auto& c : data.cells()) {
    by_item[static_cast<std::size_t>(c.item)].emplace_back(c.model, c.correct);
  }

  double prev = -std::numeric_limits<double>::infinity();
  for (int iter = 1; iter <= config.max_outer_iterations; ++iter) {
    parallel_for(data.n_models(), config.threads, [&](int m) {
      newton_theta(data, m, r.items, r.abilities[static_cast<std::size_t>(m)].theta,
                   config.priors);
    });
    parallel_for(data.n_items(), config.threads, [&](int j) {
      auto& item = r.items[static_cast<std::size_t>(j)];
      if (item.frozen) return;
      newton_item(by_item[static_cast<std::size_t>(j)], r.abilities, item,
                  config.priors);
    });

    const double lp = log_posterior(data, r.items, r.abilities, config.priors);
    require(std::isfinite(lp),
            "non-finite log-posterior at iteration " + std::to_string(iter));
    if (!r.lp_trace.empty() && lp < prev) {
      // Every block step was accepted only on local improvement, so a drop
      // here can only be summation rounding; progress has flattened out.
      r.converged = true;
      break;
    }
    r.lp_trace.push_back(lp);
    r.iterations = iter;
    const double rel = std::abs(lp - prev) / std::max(1.0, std::abs(prev));
    prev = lp;
    if (rel < config.rel_tolerance) {
      r.converged = true;
      break;
    }
  }
  r.final_log_posterior = prev;
  return r;
}

void validate(const CalibrationState& state) {
  require(state.dimension >= 1, "calibration state dimension must be >= 1");
  std::map<std::string, int> dataset_sizes;
  for (const auto& [id, item] : state.items) {
    require(item.item_id == id,
            "state item keyed '" + id + "' carries item_id '" + item.item_id + "'");
    require(item.a.size() == state.dimension,
            "item '" + id + "' has dimension " + std::to_string(item.a.size()) +
                "; state uses " + std::to_string(state.dimension));
    require(item.a.allFinite() && std::isfinite(item.d),
            "item '" + id + "' has non-finite parameters");
    require(item.calibrated_at_step >= 0 && item.calibrated_at_step <= state.step,
            "item '" + id + "' calibrated at step " +
                std::to_string(item.calibrated_at_step) +
                ", outside [0, " + std::to_string(state.step) + "]");
    ++dataset_sizes[item.dataset_id];
  }
  for (const auto& [ds, set] : state.anchors) {
    require(set.dataset_id == ds, "anchor set keyed '" + ds +
                                      "' carries dataset_id '" +
                                      set.dataset_id + "'");
    require(dataset_sizes.count(ds),
            "anchor set for dataset '" + ds + "' but no items of that dataset");
    const int expected =
        std::min(set.budget, dataset_sizes[ds]);
    require(static_cast<int>(set.entries.size()) == expected,
            "anchor set for dataset '" + ds + "' has " +
                std::to_string(set.entries.size()) + " entries; expected " +
                std::to_string(expected));
    double wsum = 0.0;
    std::set<std::string> seen;
    for (const auto& e : set.entries) {
      auto it = state.items.find(e.item_id);
      require(it != state.items.end(),
              "anchor entry references unknown item '" + e.item_id + "'");
      require(it->second.frozen,
              "anchor item '" + e.item_id + "' is not frozen");
      require(it->second.dataset_id == ds,
              "anchor item '" + e.item_id + "' belongs to dataset '" +
                  it->second.dataset_id + "', not '" + ds + "'");
      require(e.weight > 0.0 && e.weight <= 1.0,
              "anchor weight for item '" + e.item_id + "' is out of (0,1]");
      require(seen.insert(e.item_id).second,
              "duplicate anchor entry for item '" + e.item_id + "'");
      wsum += e.weight;
    }
    require(std::abs(wsum - 1.0) <= 1e-9,
            "anchor weights for dataset '" + ds + "' sum to " +
                std::to_string(wsum) + ", expected 1");
  }
  int prev_step = -1;
  for (const auto& h : state.history) {
    require(h.step > prev_step, "history steps do not strictly increase");
    prev_step = h.step;
    auto it = state.anchors.find(h.dataset_id);
    require(it != state.anchors.end(),
            "history references dataset '" + h.dataset_id +
                "' with no anchor set");
    require(static_cast<int>(it->second.entries.size()) == h.anchor_count,
            "history anchor count for dataset '" + h.dataset_id +
                "' is " + std::to_string(h.anchor_count) + "; anchor set has " +
                std::to_string(it->second.entries.size()));
  }
  if (!state.history.empty()) {
    require(state.step == state.history.back().step,
            "state step " + std::to_string(state.step) +
                " does not match last history step " +
                std::to_string(state.history.back().step));
  }
}

std::vector<std::string> anchor_pool(const CalibrationState& state) {
  std::vector<std::string> ids;
  for (const auto& [ds, set] : state.anchors) {
    for (const auto& e : set.entries) ids.push_back(e.item_id);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

CalibrationState make_initial_state(const FitResult& fit,
                                    const ResponseMatrix& data,
                                    int dimension) {
  CalibrationState s;
  s.format_version = kStateFormatVersion;
  s.dimension = dimension;
  s.step = 0;
  for (const auto& item : fit.items) {
    ItemParameters p = item;
    p.frozen = false;
    p.calibrated_at_step = 0;
    if (p.dataset_id.empty()) p.dataset_id = data.dataset_of(p.item_id);
    s.items.emplace(p.item_id, std::move(p));
  }
  validate(s);
  return s;
}

CalibrationState select_anchors_into_state(const CalibrationState& state,
                                           const std::string& dataset_id,
                                           int budget, std::uint64_t seed,
                                           AnchorMethod method) {
  validate(state);
  require(!state.anchors.count(dataset_id),
          "anchors already selected for dataset '" + dataset_id + "'");
  std::vector<ItemParameters> ds_items;
  for (const auto& [id, item] : state.items) {
    if (item.dataset_id == dataset_id) ds_items.push_back(item);
  }
  require(!ds_items.empty(),
          "no calibrated items for dataset '" + dataset_id + "'");
  require(budget >= 1, "anchor budget must be >= 1");
  require(budget <= static_cast<int>(ds_items.size()),
          "anchor budget " + std::to_string(budget) + " exceeds the " +
              std::to_string(ds_items.size()) + " items of dataset '" +
              dataset_id + "'");

  AnchorSet set = method == AnchorMethod::kClustered
                      ? select_anchors_clustered(ds_items, budget, seed)
                      : select_anchors_topk(ds_items, budget);

  CalibrationState out = state;
  const int event_step = out.history.empty() ? 0 : out.step + 1;
  for (const auto& item : ds_items) {
    out.items.at(item.item_id).calibrated_at_step = event_step;
  }
  for (const auto& e : set.entries) {
    out.items.at(e.item_id).frozen = true;
  }
  out.anchors.emplace(dataset_id, std::move(set));
  out.step = event_step;
  out.history.push_back(HistoryEntry{
      event_step, dataset_id,
      static_cast<int>(out.anchors.at(dataset_id).entries.size())});
  validate(out);
  return out;
}

CalibrationState fpc_step(const CalibrationState& state,
                          const std::string& new_dataset,
                          const ResponseMatrix& ref_responses,
                          int anchor_budget, const FitConfig& config,
                          AnchorMethod method) {
  validate(state);
  validate(config);
  require(config.dimension == state.dimension,
          "fit dimension " + std::to_string(config.dimension) +
              " does not match state dimension " +
              std::to_string(state.dimension));
  require(!state.anchors.empty(),
          "integration requires at least one existing anchor set; select "
          "anchors for the initial suite first");
  require(!state.anchors.count(new_dataset),
          "dataset '" + new_dataset + "' is already calibrated");
  for (const auto& [id, item] : state.items) {
    require(item.dataset_id != new_dataset,
            "dataset '" + new_dataset + "' is already calibrated");
  }

  const std::vector<std::string> pool = anchor_pool(state);
  std::vector<std::string> new_items;
  for (const auto& id : ref_responses.item_ids()) {
    if (ref_responses.dataset_of(id) == new_dataset) new_items.push_back(id);
  }
  require(!new_items.empty(),
          "reference responses contain no items for dataset '" + new_dataset +
              "'");
  require(anchor_budget >= 1, "anchor budget must be >= 1");
  require(anchor_budget <= static_cast<int>(new_items.size()),
          "anchor budget " + std::to_string(anchor_budget) + " exceeds the " +
              std::to_string(new_items.size()) + " items of dataset '" +
              new_dataset + "'");
  for (const auto& id : pool) {
    const int idx = ref_responses.item_index(id);
    if (idx < 0) continue;
    require(ref_responses.dataset_of(idx) == state.items.at(id).dataset_id,
            "anchor item '" + id + "' is assigned to dataset '" +
                ref_responses.dataset_of(idx) + "' in the responses but '" +
                state.items.at(id).dataset_id + "' in the state");
  }

  std::vector<std::string> keep = new_items;
  keep.insert(keep.end(), pool.begin(), pool.end());
  const ResponseMatrix fit_data =
      ref_responses.restricted(ref_responses.model_ids(), keep);

  // Every reference model must cover the whole accumulated anchor pool;
  // otherwise its ability is not identified in the shared latent frame.
  for (const auto& mid : ref_responses.model_ids()) {
    const int m = fit_data.model_index(mid);
    std::vector<std::string> missing;
    for (const auto& aid : pool) {
      const int j = m < 0 ? -1 : fit_data.item_index(aid);
      if (m < 0 || j < 0 || !fit_data.observed(m, j)) missing.push_back(aid);
    }
    if (!missing.empty()) {
      throw Error("reference model '" + mid +
                  "' is missing responses on anchors: " + join_ids(missing));
    }
  }

  std::map<std::string, ItemParameters> frozen;
  for (const auto& id : pool) frozen.emplace(id, state.items.at(id));

  const FitResult fit = fit_concurrent(fit_data, config, frozen);

  CalibrationState out = state;
  const int event_step = out.step + 1;
  std::vector<ItemParameters> fitted_new;
  for (const auto& item : fit.items) {
    if (item.dataset_id != new_dataset) continue;
    ItemParameters p = item;
    p.frozen = false;
    p.calibrated_at_step = event_step;
    fitted_new.push_back(p);
    out.items.emplace(p.item_id, std::move(p));
  }

  AnchorSet set =
      method == AnchorMethod::kClustered
          ? select_anchors_clustered(
                fitted_new, anchor_budget,
                derive_seed(config.seed, "anchor-select:" + new_dataset))
          : select_anchors_topk(fitted_new, anchor_budget);
  for (const auto& e : set.entries) {
    out.items.at(e.item_id).frozen = true;
  }
  out.anchors.emplace(new_dataset, std::move(set));
  out.step = event_step;
  out.history.push_back(HistoryEntry{
      event_step, new_dataset,
      static_cast<int>(out.anchors.at(new_dataset).entries.size())});
  validate(out);
  return out;
}

std::vector<AbilityVector> estimate_ability(const ResponseMatrix& anchor_responses,
                                            const CalibrationState& state,
                                            const FitConfig& config) {
  validate(config);
  require(config.dimension == state.dimension,
          "fit dimension " + std::to_string(config.dimension) +
              " does not match state dimension " +
              std::to_string(state.dimension));
  const Eigen::Index dim = state.dimension;

  // Item parameters in matrix item order, all taken frozen from the state.
  std::vector<ItemParameters> items;
  items.reserve(static_cast<std::size_t>(anchor_responses.n_items()));
  for (const auto& id : anchor_responses.item_ids()) {
    auto it = state.items.find(id);
    require(it != state.items.end() && it->second.frozen,
            "item '" + id + "' is not a frozen anchor in the calibration state");
    items.push_back(it->second);
  }

  std::vector<AbilityVector> out(
      static_cast<std::size_t>(anchor_responses.n_models()));
  parallel_for(anchor_responses.n_models(), config.threads, [&](int m) {
    AbilityVector ab;
    ab.model_id = anchor_responses.model_ids()[static_cast<std::size_t>(m)];
    ab.theta = Vector::Zero(dim);
    const double inv2_t =
        0.5 / (config.priors.sigma_theta * config.priors.sigma_theta);
    double f = theta_objective(anchor_responses, m, items, ab.theta, inv2_t);
    for (int iter = 0; iter < 100; ++iter) {
      const double f_new =
          newton_theta(anchor_responses, m, items, ab.theta, config.priors);
      if (std::abs(f_new - f) <= 1e-13 * std::max(1.0, std::abs(f))) break;
      f = f_new;
    }
    out[static_cast<std::size_t>(m)] = std::move(ab);
  });
  return out;
}

std::vector<AbilityVector> estimate_ability(
    const ResponseMatrix& anchor_responses, const CalibrationState& state,
    const FitConfig& config, const std::vector<std::string>& expected_models) {
  for (const auto& mid : expected_models) {
    require(anchor_responses.model_index(mid) >= 0,
            "model '" + mid + "' has no anchor responses");
  }
  std::vector<AbilityVector> all = estimate_ability(anchor_responses, state, config);
  std::vector<AbilityVector> out;
  out.reserve(expected_models.size());
  for (const auto& mid : expected_models) {
    const int m = anchor_responses.model_index(mid);
    out.push_back(all[static_cast<std::size_t>(m)]);
  }
  return out;
}

}  // namespace irtlink
