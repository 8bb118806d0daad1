// Command-line front end: every subcommand is a thin composition of library
// operations; all diagnostics go to stderr, data to files or stdout.
// Exit codes: 0 success, 1 runtime error, 2 usage error.

#include "irtlink/chainlab.hpp"
#include "irtlink/io.hpp"
#include "irtlink/rng.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace irtlink;

// Flag-value problems discovered after CLI11 parsing are still usage errors.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(',', start);
    if (pos == std::string::npos) {
      parts.push_back(s.substr(start));
      break;
    }
    parts.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return parts;
}

std::vector<int> parse_n_values(const std::string& s) {
  std::vector<int> out;
  for (const auto& part : split_list(s)) {
    try {
      std::size_t pos = 0;
      const int v = std::stoi(part, &pos);
      if (pos != part.size() || v < 1) throw std::invalid_argument(part);
      out.push_back(v);
    } catch (const std::exception&) {
      throw UsageError("--n-values: '" + part +
                       "' is not a positive integer");
    }
  }
  if (out.empty()) throw UsageError("--n-values: empty list");
  return out;
}

std::vector<Strategy> parse_strategies(const std::string& s) {
  std::vector<Strategy> out;
  for (const auto& part : split_list(s)) {
    try {
      out.push_back(strategy_from_string(part));
    } catch (const Error& e) {
      throw UsageError(std::string("--strategies: ") + e.what());
    }
  }
  if (out.empty()) throw UsageError("--strategies: empty list");
  return out;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

std::string join_ids(const std::vector<std::string>& ids) {
  std::ostringstream os;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) os << ", ";
    os << ids[i];
  }
  return os.str();
}

struct FitArgs {
  std::string responses;
  std::string state_out;
  int dim = 5;
  std::uint64_t seed = 0;
  int threads = 1;
  double tol = 1e-6;
  int max_iters = 500;
};

int run_fit(const FitArgs& a) {
  const ResponseMatrix m = load_responses(a.responses);
  FitConfig cfg;
  cfg.dimension = a.dim;
  cfg.seed = a.seed;
  cfg.threads = a.threads;
  cfg.rel_tolerance = a.tol;
  cfg.max_outer_iterations = a.max_iters;
  const FitResult fit = fit_concurrent(m, cfg);
  const CalibrationState state = make_initial_state(fit, m, a.dim);
  save_state(state, a.state_out);
  std::cerr << "fit: " << m.n_models() << " models, " << m.n_items()
            << " items, dimension " << a.dim << ", " << fit.iterations
            << " iterations, log-posterior " << fit.final_log_posterior
            << (fit.converged ? "" : " (iteration cap reached)") << "\n";
  return 0;
}

struct SelectArgs {
  std::string state;
  std::string state_out;
  std::string dataset;
  std::string item_map;
  std::string method = "clustered";
  int n = 0;
  std::uint64_t seed = 0;
};

int run_select(const SelectArgs& a) {
  const CalibrationState state = load_state(a.state);
  const AnchorMethod method = a.method == "topk" ? AnchorMethod::kTopK
                                                 : AnchorMethod::kClustered;
  const CalibrationState out =
      select_anchors_into_state(state, a.dataset, a.n, a.seed, method);
  save_state(out, a.state_out.empty() ? a.state : a.state_out);
  if (!a.item_map.empty()) {
    std::vector<ItemParameters> ds_items;
    for (const auto& [id, item] : out.items) {
      if (item.dataset_id == a.dataset) ds_items.push_back(item);
    }
    save_item_map(export_item_map(ds_items, out.anchors.at(a.dataset)),
                  a.item_map);
  }
  std::cerr << "select-anchors: " << out.anchors.at(a.dataset).entries.size()
            << " anchors for dataset '" << a.dataset << "' at step "
            << out.step << "\n";
  return 0;
}

struct CalibrateArgs {
  std::string state;
  std::string state_out;
  std::string responses;
  std::string dataset;
  std::string method = "clustered";
  int n = 0;
  std::uint64_t seed = 0;
  int threads = 1;
  double tol = 1e-6;
  int max_iters = 500;
};

int run_calibrate(const CalibrateArgs& a) {
  const CalibrationState state = load_state(a.state);
  const ResponseMatrix m = load_responses(a.responses);
  FitConfig cfg;
  cfg.dimension = state.dimension;
  cfg.seed = a.seed;
  cfg.threads = a.threads;
  cfg.rel_tolerance = a.tol;
  cfg.max_outer_iterations = a.max_iters;
  const AnchorMethod method = a.method == "topk" ? AnchorMethod::kTopK
                                                 : AnchorMethod::kClustered;
  const CalibrationState out = fpc_step(state, a.dataset, m, a.n, cfg, method);
  save_state(out, a.state_out);
  std::cerr << "calibrate: dataset '" << a.dataset << "' integrated at step "
            << out.step << " with "
            << out.anchors.at(a.dataset).entries.size() << " anchors\n";
  return 0;
}

struct EstimateArgs {
  std::string state;
  std::string responses;
  std::string out;
  std::string theta_out;
  double lambda0 = 100.0;
  int threads = 1;
};

int run_estimate(const EstimateArgs& a) {
  const CalibrationState state = load_state(a.state);
  const ResponseMatrix m = load_responses(a.responses);
  FitConfig cfg;
  cfg.dimension = state.dimension;
  cfg.threads = a.threads;
  const std::vector<AbilityVector> abilities = estimate_ability(m, state, cfg);

  std::vector<AccuracyEstimate> rows;
  for (int i = 0; i < m.n_models(); ++i) {
    const std::string& mid = m.model_ids()[static_cast<std::size_t>(i)];
    for (const auto& [ds, set] : state.anchors) {
      std::map<std::string, int> resp;
      std::vector<std::string> missing;
      for (const auto& e : set.entries) {
        const int j = m.item_index(e.item_id);
        const auto y = j < 0 ? std::nullopt : m.observed(i, j);
        if (y.has_value()) {
          resp[e.item_id] = *y;
        } else {
          missing.push_back(e.item_id);
        }
      }
      if (resp.empty()) continue;  // model never touched this dataset
      if (!missing.empty()) {
        throw Error("model '" + mid + "' covers only part of dataset '" + ds +
                    "' anchors; missing: " + join_ids(missing));
      }
      std::vector<ItemParameters> ds_items;
      for (const auto& [id, item] : state.items) {
        if (item.dataset_id == ds) ds_items.push_back(item);
      }
      const double p = p_irt_estimate(
          abilities[static_cast<std::size_t>(i)].theta, ds_items, resp);
      const double lambda =
          default_lambda(static_cast<int>(set.entries.size()), a.lambda0);
      AccuracyEstimate est = gp_irt_estimate(set, resp, p, lambda);
      est.model_id = mid;
      rows.push_back(std::move(est));
    }
  }
  save_estimates(rows, a.out);
  if (!a.theta_out.empty()) save_abilities(abilities, a.theta_out);
  std::cerr << "estimate: " << abilities.size() << " models, " << rows.size()
            << " (model, dataset) predictions\n";
  return 0;
}

struct SimulateArgs {
  std::string responses;
  std::string out_dir;
  std::string mode = "leaderboard";
  std::string n_values = "10,25,50,100";
  std::string strategies = "fpc,concurrent,random,topk";
  int chains = 0;  // 0 = mode default
  int initial_suite = 0;
  int dim = 5;
  std::uint64_t seed = 0;
  int threads = 1;
  double ref_fraction = 0.75;
  double lambda0 = 100.0;
  double tol = 1e-6;
  int max_iters = 500;
};

int run_simulate(const SimulateArgs& a) {
  const std::vector<int> n_values = parse_n_values(a.n_values);
  const std::vector<Strategy> strategies = parse_strategies(a.strategies);

  const ResponseMatrix m = load_responses(a.responses);
  ChainBuildParams bp;
  bp.mode = a.mode == "long" ? ChainMode::kLongChain : ChainMode::kLeaderboard;
  if (a.chains > 0) {
    if (bp.mode == ChainMode::kLeaderboard) {
      bp.orderings = a.chains;
    } else {
      bp.n_chains = a.chains;
    }
  }
  bp.initial_suite_size = a.initial_suite;
  const std::vector<ChainSpec> specs =
      build_chains(m.dataset_ids(), bp, a.seed);

  ChainRunConfig rc;
  rc.ref_fraction = a.ref_fraction;
  rc.lambda_n0 = a.lambda0;
  rc.fit.dimension = a.dim;
  rc.fit.seed = a.seed;
  rc.fit.threads = a.threads;
  rc.fit.rel_tolerance = a.tol;
  rc.fit.max_outer_iterations = a.max_iters;

  ReportBundle bundle;
  bundle.chains = run_chains(specs, m, strategies, n_values, rc);
  bundle.master_seed = a.seed;
  std::ostringstream cfg;
  cfg << "mode=" << a.mode << ";n=" << a.n_values << ";s=" << a.strategies
      << ";chains=" << a.chains << ";init=" << a.initial_suite
      << ";dim=" << a.dim << ";seed=" << a.seed << ";ref=" << a.ref_fraction
      << ";l0=" << a.lambda0 << ";tol=" << a.tol << ";it=" << a.max_iters;
  bundle.config_hash = hex64(fnv1a64(cfg.str()));
  emit_report(bundle, a.out_dir);
  std::cerr << "simulate-chain: " << bundle.chains.size()
            << " chains written to " << a.out_dir << "\n";
  return 0;
}

struct GenArgs {
  int models = 0;
  int datasets = 0;
  int items = 0;
  int dim = 5;
  std::uint64_t seed = 0;
  std::string out;
  std::string truth_out;
  double theta_scale = 1.0;
  double a_scale = 1.0;
  double d_scale = 1.0;
  double a_mean = 0.0;
};

int run_gen(const GenArgs& a) {
  SyntheticSuiteConfig cfg;
  cfg.n_models = a.models;
  cfg.n_datasets = a.datasets;
  cfg.items_per_dataset = a.items;
  cfg.dimension = a.dim;
  cfg.seed = a.seed;
  cfg.theta_scale = a.theta_scale;
  cfg.a_scale = a.a_scale;
  cfg.d_scale = a.d_scale;
  cfg.a_mean = a.a_mean;
  const SyntheticSuite suite = generate_synthetic_suite(cfg);
  save_responses(suite.responses, a.out);
  if (!a.truth_out.empty()) {
    save_truth(suite.true_items, suite.true_abilities, a.dim, a.truth_out);
  }
  std::cerr << "gen-synthetic: " << suite.responses.n_models() << " models x "
            << suite.responses.n_items() << " items written to " << a.out
            << "\n";
  return 0;
}

int run_report(const std::string& in_dir, const std::string& out_dir) {
  const std::vector<StepMetrics> rows = load_steps(in_dir + "/steps.csv");
  emit_aggregate(rows, out_dir.empty() ? in_dir : out_dir);
  std::cerr << "report: aggregated " << rows.size() << " step rows\n";
  return 0;
}

int run_coverage(int items, int n) {
  require(items >= 1, "--items must be >= 1");
  require(n >= 0, "--n must be >= 0");
  const double pct =
      100.0 * static_cast<double>(std::min(n, items)) / static_cast<double>(items);
  std::printf("%.1f%%\n", pct);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"IRT-based benchmark calibration and accuracy prediction"};
  app.require_subcommand(1);

  FitArgs fit_args;
  auto* fit_cmd = app.add_subcommand(
      "fit", "Joint calibration of items and abilities from responses");
  fit_cmd->add_option("--responses", fit_args.responses, "Response CSV")
      ->required();
  fit_cmd->add_option("--dim", fit_args.dim, "Latent dimension");
  fit_cmd->add_option("--seed", fit_args.seed, "RNG seed")->required();
  fit_cmd->add_option("--state-out", fit_args.state_out, "Output state JSON")
      ->required();
  fit_cmd->add_option("--threads", fit_args.threads, "Worker threads");
  fit_cmd->add_option("--tol", fit_args.tol, "Relative convergence tolerance");
  fit_cmd->add_option("--max-iters", fit_args.max_iters,
                      "Outer iteration cap");

  SelectArgs sel_args;
  auto* sel_cmd = app.add_subcommand(
      "select-anchors", "Select and freeze anchor items for a dataset");
  sel_cmd->add_option("--state", sel_args.state, "State JSON")->required();
  sel_cmd->add_option("--dataset", sel_args.dataset, "Dataset id")->required();
  sel_cmd->add_option("--n", sel_args.n, "Anchor budget")->required();
  sel_cmd->add_option("--seed", sel_args.seed, "RNG seed")->required();
  sel_cmd->add_option("--state-out", sel_args.state_out,
                      "Output state JSON (default: overwrite --state)");
  sel_cmd->add_option("--item-map", sel_args.item_map,
                      "Optional item map CSV output");
  sel_cmd->add_option("--method", sel_args.method, "clustered or topk")
      ->check(CLI::IsMember({"clustered", "topk"}));

  CalibrateArgs cal_args;
  auto* cal_cmd = app.add_subcommand(
      "calibrate", "Integrate one new dataset with anchors held fixed");
  cal_cmd->add_option("--state", cal_args.state, "State JSON")->required();
  cal_cmd->add_option("--responses", cal_args.responses,
                      "Reference responses CSV (new items + anchors)")
      ->required();
  cal_cmd->add_option("--dataset", cal_args.dataset, "New dataset id")
      ->required();
  cal_cmd->add_option("--n", cal_args.n, "Anchor budget")->required();
  cal_cmd->add_option("--seed", cal_args.seed, "RNG seed")->required();
  cal_cmd->add_option("--state-out", cal_args.state_out, "Output state JSON")
      ->required();
  cal_cmd->add_option("--threads", cal_args.threads, "Worker threads");
  cal_cmd->add_option("--tol", cal_args.tol, "Relative convergence tolerance");
  cal_cmd->add_option("--max-iters", cal_args.max_iters,
                      "Outer iteration cap");
  cal_cmd->add_option("--method", cal_args.method, "clustered or topk")
      ->check(CLI::IsMember({"clustered", "topk"}));

  EstimateArgs est_args;
  auto* est_cmd = app.add_subcommand(
      "estimate", "Predict accuracies for new models from anchor responses");
  est_cmd->add_option("--state", est_args.state, "State JSON")->required();
  est_cmd->add_option("--anchor-responses", est_args.responses,
                      "Anchor response CSV")
      ->required();
  est_cmd->add_option("--lambda0", est_args.lambda0,
                      "Blend constant: lambda = n/(n+lambda0)");
  est_cmd->add_option("--out", est_args.out, "Output estimates CSV")
      ->required();
  est_cmd->add_option("--theta-out", est_args.theta_out,
                      "Optional ability CSV output");
  est_cmd->add_option("--threads", est_args.threads, "Worker threads");

  SimulateArgs sim_args;
  auto* sim_cmd = app.add_subcommand(
      "simulate-chain", "Run chain experiments across strategies and budgets");
  sim_cmd->add_option("--responses", sim_args.responses, "Response CSV")
      ->required();
  sim_cmd->add_option("--mode", sim_args.mode, "leaderboard or long")
      ->check(CLI::IsMember({"leaderboard", "long"}));
  sim_cmd->add_option("--n-values", sim_args.n_values,
                      "Comma-separated anchor budgets");
  sim_cmd->add_option("--strategies", sim_args.strategies,
                      "Comma-separated strategies "
                      "(fpc,concurrent,random,topk)");
  sim_cmd->add_option("--chains", sim_args.chains,
                      "Leaderboard: orderings per final dataset (default 2); "
                      "long: number of chains (default 20)");
  sim_cmd->add_option("--initial-suite", sim_args.initial_suite,
                      "Initial suite size (default: leaderboard 2, long 1)");
  sim_cmd->add_option("--dim", sim_args.dim, "Latent dimension");
  sim_cmd->add_option("--seed", sim_args.seed, "RNG seed")->required();
  sim_cmd->add_option("--out", sim_args.out_dir, "Output directory")
      ->required();
  sim_cmd->add_option("--threads", sim_args.threads, "Worker threads");
  sim_cmd->add_option("--ref-fraction", sim_args.ref_fraction,
                      "Reference model fraction");
  sim_cmd->add_option("--lambda0", sim_args.lambda0,
                      "Blend constant: lambda = n/(n+lambda0)");
  sim_cmd->add_option("--tol", sim_args.tol, "Relative convergence tolerance");
  sim_cmd->add_option("--max-iters", sim_args.max_iters,
                      "Outer iteration cap");

  GenArgs gen_args;
  auto* gen_cmd = app.add_subcommand(
      "gen-synthetic", "Generate a synthetic suite with known ground truth");
  gen_cmd->add_option("--models", gen_args.models, "Number of models")
      ->required();
  gen_cmd->add_option("--datasets", gen_args.datasets, "Number of datasets")
      ->required();
  gen_cmd->add_option("--items", gen_args.items, "Items per dataset")
      ->required();
  gen_cmd->add_option("--dim", gen_args.dim, "Latent dimension");
  gen_cmd->add_option("--seed", gen_args.seed, "RNG seed")->required();
  gen_cmd->add_option("--out", gen_args.out, "Output response CSV")
      ->required();
  gen_cmd->add_option("--truth-out", gen_args.truth_out,
                      "Optional ground-truth JSON output");
  gen_cmd->add_option("--theta-scale", gen_args.theta_scale,
                      "Ability scale (0 pins abilities to zero)");
  gen_cmd->add_option("--a-scale", gen_args.a_scale, "Discrimination scale");
  gen_cmd->add_option("--a-mean", gen_args.a_mean,
                      "Discrimination mean (leaderboard-like worlds need > 0)");
  gen_cmd->add_option("--d-scale", gen_args.d_scale, "Intercept scale");

  std::string report_in, report_out;
  auto* rep_cmd = app.add_subcommand(
      "report", "Aggregate a steps.csv into aggregate.csv and summary.json");
  rep_cmd->add_option("--in", report_in, "Directory containing steps.csv")
      ->required();
  rep_cmd->add_option("--out", report_out,
                      "Output directory (default: same as --in)");

  int cov_items = 0, cov_n = 0;
  auto* cov_cmd = app.add_subcommand(
      "coverage", "Anchor coverage as a percentage of dataset items");
  cov_cmd->add_option("--items", cov_items, "Total items in the dataset")
      ->required();
  cov_cmd->add_option("--n", cov_n, "Anchor budget")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*fit_cmd) return run_fit(fit_args);
    if (*sel_cmd) return run_select(sel_args);
    if (*cal_cmd) return run_calibrate(cal_args);
    if (*est_cmd) return run_estimate(est_args);
    if (*sim_cmd) return run_simulate(sim_args);
    if (*gen_cmd) return run_gen(gen_args);
    if (*rep_cmd) return run_report(report_in, report_out);
    if (*cov_cmd) return run_coverage(cov_items, cov_n);
    std::cerr << "no subcommand selected\n";
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
