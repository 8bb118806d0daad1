#include "irtlink/chainlab.hpp"

#include "irtlink/parallel.hpp"
#include "irtlink/prediction.hpp"
#include "irtlink/rng.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace irtlink {

namespace {

std::string pad_number(int value, int width) {
  std::string s = std::to_string(value);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

int digits(int n) {
  int w = 1;
  while (n >= 10) {
    n /= 10;
    ++w;
  }
  return w;
}

// Exact mean correctness of each listed model over one dataset's observed
// responses in the full matrix.
std::map<std::string, double> dataset_truths(
    const ResponseMatrix& responses, const std::string& dataset_id,
    const std::vector<std::string>& models) {
  std::map<std::string, double> out;
  for (const auto& mid : models) {
    const int m = responses.model_index(mid);
    require(m >= 0, "model '" + mid + "' not present in responses");
    double total = 0.0;
    int count = 0;
    for (const auto* c = responses.model_begin(m); c != responses.model_end(m);
         ++c) {
      if (responses.dataset_of(c->item) != dataset_id) continue;
      total += static_cast<double>(c->correct);
      ++count;
    }
    require(count > 0, "model '" + mid + "' has no responses on dataset '" +
                           dataset_id + "'");
    out[mid] = total / static_cast<double>(count);
  }
  return out;
}

// gp-IRT predictions for every test model on one dataset, using the given
// calibration state: theta from the accumulated anchor pool, then the
// blended anchor-mean / model-probability estimate.
std::map<std::string, double> predict_on_dataset(
    const CalibrationState& state, const std::string& dataset_id,
    const ResponseMatrix& responses,
    const std::vector<std::string>& test_models, const ChainRunConfig& config,
    std::vector<std::string>& consumed_items) {
  const std::vector<std::string> pool = anchor_pool(state);
  consumed_items = pool;

  const ResponseMatrix anchor_matrix =
      responses.restricted(test_models, pool);
  const std::vector<AbilityVector> abilities =
      estimate_ability(anchor_matrix, state, config.fit, test_models);

  std::vector<ItemParameters> ds_items;
  for (const auto& [id, item] : state.items) {
    if (item.dataset_id == dataset_id) ds_items.push_back(item);
  }
  require(!ds_items.empty(),
          "state has no calibrated items for dataset '" + dataset_id + "'");
  const AnchorSet& set = state.anchors.at(dataset_id);
  const double lambda =
      default_lambda(static_cast<int>(set.entries.size()), config.lambda_n0);

  std::map<std::string, double> estimates;
  for (std::size_t i = 0; i < test_models.size(); ++i) {
    const std::string& mid = test_models[i];
    const int m = responses.model_index(mid);
    std::map<std::string, int> anchor_resp;
    for (const auto& e : set.entries) {
      const int j = responses.item_index(e.item_id);
      const auto y = j < 0 ? std::nullopt : responses.observed(m, j);
      require(y.has_value(), "test model '" + mid +
                                 "' has no response on anchor item '" +
                                 e.item_id + "'");
      anchor_resp[e.item_id] = *y;
    }
    const double p =
        p_irt_estimate(abilities[i].theta, ds_items, anchor_resp);
    estimates[mid] =
        gp_irt_estimate(set, anchor_resp, p, lambda).estimate;
  }
  return estimates;
}

}  // namespace

void validate(const ChainSpec& chain) {
  require(!chain.dataset_ids.empty(), "chain '" + chain.chain_id +
                                          "' has no datasets");
  std::set<std::string> seen;
  for (const auto& ds : chain.dataset_ids) {
    require(seen.insert(ds).second, "chain '" + chain.chain_id +
                                        "' repeats dataset '" + ds + "'");
  }
  require(chain.initial_suite_size >= 1 &&
              chain.initial_suite_size <=
                  static_cast<int>(chain.dataset_ids.size()),
          "chain '" + chain.chain_id + "' initial suite size " +
              std::to_string(chain.initial_suite_size) +
              " is outside [1, " + std::to_string(chain.dataset_ids.size()) +
              "]");
}

std::vector<ChainSpec> build_chains(const std::vector<std::string>& dataset_ids,
                                    const ChainBuildParams& params,
                                    std::uint64_t seed) {
  require(dataset_ids.size() >= 2, "chain building needs at least 2 datasets");
  std::vector<std::string> all = dataset_ids;
  std::sort(all.begin(), all.end());
  require(std::adjacent_find(all.begin(), all.end()) == all.end(),
          "duplicate dataset ids in chain building");

  std::vector<ChainSpec> chains;
  if (params.mode == ChainMode::kLeaderboard) {
    const int initial =
        params.initial_suite_size > 0 ? params.initial_suite_size : 2;
    require(params.orderings >= 1, "orderings must be >= 1");
    require(initial <= static_cast<int>(all.size()) - 1,
            "initial suite size " + std::to_string(initial) +
                " leaves no dataset to integrate (have " +
                std::to_string(all.size()) + ")");
    for (const auto& final_ds : all) {
      for (int r = 0; r < params.orderings; ++r) {
        std::vector<std::string> rest;
        for (const auto& ds : all) {
          if (ds != final_ds) rest.push_back(ds);
        }
        Rng rng(derive_seed(seed, "order:" + final_ds,
                            static_cast<std::uint64_t>(r)));
        shuffle(rest, rng);
        ChainSpec c;
        c.chain_id = "c_" + final_ds + "_" + std::to_string(r + 1);
        c.dataset_ids = rest;
        c.dataset_ids.push_back(final_ds);
        c.initial_suite_size = initial;
        c.seed = derive_seed(seed, "chain:" + c.chain_id);
        validate(c);
        chains.push_back(std::move(c));
      }
    }
  } else {
    const int initial =
        params.initial_suite_size > 0 ? params.initial_suite_size : 1;
    require(params.n_chains >= 1, "n_chains must be >= 1");
    require(params.n_chains <= static_cast<int>(all.size()),
            "n_chains " + std::to_string(params.n_chains) + " exceeds the " +
                std::to_string(all.size()) + " datasets");
    require(initial <= static_cast<int>(all.size()) - 1,
            "initial suite size " + std::to_string(initial) +
                " leaves no dataset to integrate (have " +
                std::to_string(all.size()) + ")");
    std::vector<std::string> finals = all;
    Rng fr(derive_seed(seed, "finals"));
    shuffle(finals, fr);
    finals.resize(static_cast<std::size_t>(params.n_chains));
    for (const auto& final_ds : finals) {
      std::vector<std::string> rest;
      for (const auto& ds : all) {
        if (ds != final_ds) rest.push_back(ds);
      }
      Rng rng(derive_seed(seed, "order:" + final_ds));
      shuffle(rest, rng);
      ChainSpec c;
      c.chain_id = "c_" + final_ds;
      c.dataset_ids = rest;
      c.dataset_ids.push_back(final_ds);
      c.initial_suite_size = initial;
      c.seed = derive_seed(seed, "chain:" + c.chain_id);
      validate(c);
      chains.push_back(std::move(c));
    }
  }
  return chains;
}

void split_models(const std::vector<std::string>& model_ids,
                  double ref_fraction, std::uint64_t seed,
                  std::vector<std::string>& reference,
                  std::vector<std::string>& test) {
  require(model_ids.size() >= 2, "model split needs at least 2 models");
  require(ref_fraction > 0.0 && ref_fraction < 1.0,
          "reference fraction must lie strictly between 0 and 1");
  std::vector<std::string> ids = model_ids;
  std::sort(ids.begin(), ids.end());
  Rng rng(seed);
  shuffle(ids, rng);
  const int n_ref = static_cast<int>(
      std::floor(static_cast<double>(ids.size()) * ref_fraction));
  require(n_ref >= 1 && n_ref < static_cast<int>(ids.size()),
          "reference fraction " + std::to_string(ref_fraction) +
              " leaves an empty reference or test split for " +
              std::to_string(ids.size()) + " models");
  reference.assign(ids.begin(), ids.begin() + n_ref);
  test.assign(ids.begin() + n_ref, ids.end());
  std::sort(reference.begin(), reference.end());
  std::sort(test.begin(), test.end());
}

SyntheticSuite generate_synthetic_suite(const SyntheticSuiteConfig& config) {
  require(config.n_models >= 1 && config.n_datasets >= 1 &&
              config.items_per_dataset >= 1,
          "synthetic suite counts must all be >= 1");
  require(config.dimension >= 1, "synthetic suite dimension must be >= 1");
  require(config.theta_scale >= 0.0 && config.a_scale >= 0.0 &&
              config.d_scale >= 0.0,
          "synthetic suite scales must be >= 0");

  const int mw = digits(config.n_models);
  const int dw = digits(config.n_datasets);
  const int iw = digits(config.items_per_dataset);

  SyntheticSuite suite;
  std::vector<std::string> model_ids;
  for (int m = 1; m <= config.n_models; ++m) {
    model_ids.push_back("m" + pad_number(m, mw));
  }
  for (const auto& mid : model_ids) {
    Rng rng(derive_seed(config.seed, "true-theta:" + mid));
    AbilityVector ab;
    ab.model_id = mid;
    ab.theta.resize(config.dimension);
    for (int k = 0; k < config.dimension; ++k) {
      ab.theta(k) = config.theta_scale * rng.normal();
    }
    suite.true_abilities.push_back(std::move(ab));
  }

  std::map<std::string, std::string> item_dataset;
  for (int t = 1; t <= config.n_datasets; ++t) {
    const std::string ds = "ds" + pad_number(t, dw);
    for (int j = 1; j <= config.items_per_dataset; ++j) {
      const std::string iid = ds + "_q" + pad_number(j, iw);
      Rng rng(derive_seed(config.seed, "true-item:" + iid));
      ItemParameters p;
      p.item_id = iid;
      p.dataset_id = ds;
      p.a.resize(config.dimension);
      for (int k = 0; k < config.dimension; ++k) {
        p.a(k) = config.a_mean + config.a_scale * rng.normal();
      }
      p.d = config.d_scale * rng.normal();
      p.frozen = false;
      p.calibrated_at_step = 0;
      suite.true_items.push_back(std::move(p));
      item_dataset.emplace(iid, ds);
    }
  }
  std::sort(suite.true_items.begin(), suite.true_items.end(),
            [](const ItemParameters& a, const ItemParameters& b) {
              return a.item_id < b.item_id;
            });

  // One response stream per model, walked over items in id order, so the
  // drawn matrix is independent of any construction details elsewhere.
  std::vector<Response> records;
  records.reserve(static_cast<std::size_t>(config.n_models) *
                  suite.true_items.size());
  for (std::size_t m = 0; m < model_ids.size(); ++m) {
    Rng rng(derive_seed(config.seed, "responses:" + model_ids[m]));
    const Vector& theta = suite.true_abilities[m].theta;
    for (const auto& item : suite.true_items) {
      const double p = response_probability(theta, item);
      const int y = rng.uniform01() < p ? 1 : 0;
      records.push_back(
          Response{model_ids[m], item.item_id, item.dataset_id, y});
    }
  }
  suite.responses = ResponseMatrix::from_records(records, item_dataset);
  return suite;
}

ChainReport run_chain(const ChainSpec& chain, const ResponseMatrix& responses,
                      const std::vector<Strategy>& strategies,
                      const std::vector<int>& n_values,
                      const ChainRunConfig& config,
                      const StepObserver& observer) {
  validate(chain);
  validate(config.fit);
  require(!strategies.empty(), "run_chain needs at least one strategy");
  require(!n_values.empty(), "run_chain needs at least one anchor budget");
  for (int n : n_values) {
    require(n >= 1, "anchor budget must be >= 1, got " + std::to_string(n));
  }
  require(config.lambda_n0 >= 0.0, "lambda_n0 must be >= 0");

  // Coverage check before any fitting: every model must have responses on
  // every chain dataset.
  {
    const std::vector<std::string> present = responses.dataset_ids();
    const std::set<std::string> have(present.begin(), present.end());
    for (const auto& ds : chain.dataset_ids) {
      require(have.count(ds),
              "chain dataset '" + ds + "' absent from responses");
    }
    const std::set<std::string> wanted(chain.dataset_ids.begin(),
                                       chain.dataset_ids.end());
    for (int m = 0; m < responses.n_models(); ++m) {
      std::set<std::string> seen;
      for (const auto* c = responses.model_begin(m);
           c != responses.model_end(m); ++c) {
        const std::string& ds = responses.dataset_of(c->item);
        if (wanted.count(ds)) seen.insert(ds);
      }
      for (const auto& ds : chain.dataset_ids) {
        require(seen.count(ds),
                "model '" + responses.model_ids()[static_cast<std::size_t>(m)] +
                    "' has no responses on dataset '" + ds + "'");
      }
    }
  }

  std::vector<std::string> ref_models, test_models;
  split_models(responses.model_ids(), config.ref_fraction,
               derive_seed(chain.seed, "split"), ref_models, test_models);

  const int initial = chain.initial_suite_size;
  const int n_steps =
      static_cast<int>(chain.dataset_ids.size()) - initial;  // beyond step 0

  // Step t >= 0 evaluates dataset_at(t): the last initial dataset at step 0,
  // then each newly integrated dataset.
  auto dataset_at = [&](int t) -> const std::string& {
    return chain.dataset_ids[static_cast<std::size_t>(initial - 1 + t)];
  };

  std::map<std::string, std::map<std::string, double>> truths;
  for (int t = 0; t <= n_steps; ++t) {
    const std::string& ds = dataset_at(t);
    if (!truths.count(ds)) {
      truths.emplace(ds, dataset_truths(responses, ds, test_models));
    }
  }

  // Shared initial joint fit over the initial suite (reference models only).
  std::vector<std::string> initial_items;
  for (int i = 0; i < initial; ++i) {
    const auto ids =
        responses.items_of_dataset(chain.dataset_ids[static_cast<std::size_t>(i)]);
    initial_items.insert(initial_items.end(), ids.begin(), ids.end());
  }
  const ResponseMatrix initial_data =
      responses.restricted(ref_models, initial_items);
  FitConfig fit0 = config.fit;
  fit0.seed = derive_seed(chain.seed, "fit:init");
  const CalibrationState base_state = make_initial_state(
      fit_concurrent(initial_data, fit0), initial_data, config.fit.dimension);

  // Anchor selection for the initial suite, one state per (method, budget).
  // Seeds are keyed by dataset and budget only, so the clustered state is
  // shared verbatim by the fpc and concurrent lineages.
  auto initial_state_for = [&](AnchorMethod method, int n) {
    CalibrationState s = base_state;
    for (int i = 0; i < initial; ++i) {
      const std::string& ds = chain.dataset_ids[static_cast<std::size_t>(i)];
      s = select_anchors_into_state(
          s, ds, n, derive_seed(chain.seed, "anchor:" + ds, static_cast<std::uint64_t>(n)),
          method);
    }
    return s;
  };
  std::map<int, CalibrationState> clustered0, topk0;
  const bool wants_clustered =
      std::any_of(strategies.begin(), strategies.end(), [](Strategy s) {
        return s == Strategy::kFpc || s == Strategy::kConcurrent;
      });
  const bool wants_topk =
      std::any_of(strategies.begin(), strategies.end(),
                  [](Strategy s) { return s == Strategy::kTopk; });
  for (int n : n_values) {
    if (wants_clustered && !clustered0.count(n)) {
      clustered0.emplace(n, initial_state_for(AnchorMethod::kClustered, n));
    }
    if (wants_topk && !topk0.count(n)) {
      topk0.emplace(n, initial_state_for(AnchorMethod::kTopK, n));
    }
  }

  ChainReport report;
  report.chain_id = chain.chain_id;
  report.n_reference_models = static_cast<int>(ref_models.size());
  report.n_test_models = static_cast<int>(test_models.size());
  report.dimension = config.fit.dimension;
  report.seed = chain.seed;

  const ResponseMatrix ref_data =
      responses.restricted(ref_models, responses.item_ids());

  auto record = [&](int t, Strategy strategy, int n,
                    const std::map<std::string, double>& estimates,
                    const std::vector<std::string>& consumed) {
    const std::string& ds = dataset_at(t);
    const auto& truth = truths.at(ds);
    StepMetrics sm;
    sm.chain_id = chain.chain_id;
    sm.step = t;
    sm.strategy = strategy;
    sm.n_anchors = n;
    sm.mae = mae(estimates, truth);
    sm.spearman = spearman(estimates, truth);
    sm.cost_per_model = step_cost(strategy, t, n);
    report.steps.push_back(sm);
    if (observer) {
      StepObservation obs;
      obs.chain_id = chain.chain_id;
      obs.step = t;
      obs.strategy = strategy;
      obs.n_anchors = n;
      obs.dataset_id = ds;
      obs.estimates = estimates;
      obs.truths = truth;
      obs.consumed_items = consumed;
      observer(obs);
    }
  };

  for (Strategy strategy : strategies) {
    for (int n : n_values) {
      if (strategy == Strategy::kRandom) {
        for (int t = 0; t <= n_steps; ++t) {
          const std::string& ds = dataset_at(t);
          std::vector<std::string> items = responses.items_of_dataset(ds);
          require(n <= static_cast<int>(items.size()),
                  "anchor budget " + std::to_string(n) + " exceeds the " +
                      std::to_string(items.size()) + " items of dataset '" +
                      ds + "'");
          // One subset per (chain, step, budget), shared across models so
          // their estimates are comparable.
          Rng rng(derive_seed(chain.seed, "random-subset:step=" +
                                              std::to_string(t),
                              static_cast<std::uint64_t>(n)));
          shuffle(items, rng);
          items.resize(static_cast<std::size_t>(n));
          const std::set<std::string> subset(items.begin(), items.end());

          std::map<std::string, double> estimates;
          for (const auto& mid : test_models) {
            const int m = responses.model_index(mid);
            std::map<std::string, int> resp;
            for (const auto& iid : subset) {
              const int j = responses.item_index(iid);
              const auto y = responses.observed(m, j);
              require(y.has_value(), "test model '" + mid +
                                         "' has no response on item '" + iid +
                                         "'");
              resp[iid] = *y;
            }
            estimates[mid] = random_subset_estimate(resp, subset);
          }
          record(t, strategy, n,
                 estimates,
                 std::vector<std::string>(subset.begin(), subset.end()));
        }
        continue;
      }

      const AnchorMethod method = strategy == Strategy::kTopk
                                      ? AnchorMethod::kTopK
                                      : AnchorMethod::kClustered;
      CalibrationState state = strategy == Strategy::kTopk
                                   ? topk0.at(n)
                                   : clustered0.at(n);
      {
        std::vector<std::string> consumed;
        const auto estimates = predict_on_dataset(
            state, dataset_at(0), responses, test_models, config, consumed);
        record(0, strategy, n, estimates, consumed);
      }

      for (int t = 1; t <= n_steps; ++t) {
        const std::string& ds = dataset_at(t);
        if (strategy == Strategy::kConcurrent) {
          // Full joint refit over everything integrated so far, then anchors
          // re-selected for every dataset.
          std::vector<std::string> items_so_far;
          for (int i = 0; i < initial + t; ++i) {
            const auto ids = responses.items_of_dataset(
                chain.dataset_ids[static_cast<std::size_t>(i)]);
            items_so_far.insert(items_so_far.end(), ids.begin(), ids.end());
          }
          const ResponseMatrix data =
              responses.restricted(ref_models, items_so_far);
          FitConfig fc = config.fit;
          fc.seed = derive_seed(chain.seed,
                                "concurrent-fit:step=" + std::to_string(t),
                                static_cast<std::uint64_t>(n));
          CalibrationState fresh = make_initial_state(
              fit_concurrent(data, fc), data, config.fit.dimension);
          for (int i = 0; i < initial + t; ++i) {
            const std::string& d =
                chain.dataset_ids[static_cast<std::size_t>(i)];
            fresh = select_anchors_into_state(
                fresh, d, n,
                derive_seed(chain.seed,
                            "concurrent-anchor:step=" + std::to_string(t) +
                                ":" + d,
                            static_cast<std::uint64_t>(n)),
                AnchorMethod::kClustered);
          }
          state = std::move(fresh);
        } else {
          FitConfig fc = config.fit;
          fc.seed = derive_seed(chain.seed, "step:" + std::to_string(t),
                                static_cast<std::uint64_t>(n));
          state = fpc_step(state, ds, ref_data, n, fc, method);
        }
        std::vector<std::string> consumed;
        const auto estimates = predict_on_dataset(state, ds, responses,
                                                  test_models, config, consumed);
        record(t, strategy, n, estimates, consumed);
      }
    }
  }
  return report;
}

std::vector<ChainReport> run_chains(const std::vector<ChainSpec>& chains,
                                    const ResponseMatrix& responses,
                                    const std::vector<Strategy>& strategies,
                                    const std::vector<int>& n_values,
                                    const ChainRunConfig& config) {
  std::vector<ChainReport> out(chains.size());
  // Parallelism is spent across chains; each chain runs single-threaded.
  // Results are bit-identical either way, this is only a scheduling choice.
  ChainRunConfig inner = config;
  inner.fit.threads = 1;
  parallel_for(static_cast<int>(chains.size()), config.fit.threads, [&](int i) {
    out[static_cast<std::size_t>(i)] =
        run_chain(chains[static_cast<std::size_t>(i)], responses, strategies,
                  n_values, inner);
  });
  return out;
}

}  // namespace irtlink
