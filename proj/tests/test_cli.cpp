// End-to-end tests for the command-line front end. Every test shells out to
// the real binary (path injected via IRTLINK_CLI_BIN) and checks exit codes,
// stdout/stderr, and the files it writes.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "irtlink/calibration.hpp"
#include "irtlink/io.hpp"
#include "irtlink/types.hpp"
#include "testutil.hpp"

#include <algorithm>
#include <set>
#include <string>
#include <vector>

using namespace irtlink;
using testutil::TempDir;
using testutil::run_process;
using testutil::slurp;

namespace {

const std::string kCli = IRTLINK_CLI_BIN;
const std::string kFixtures = IRTLINK_FIXTURE_DIR;

}  // namespace

TEST_CASE("fit subcommand produces a loadable state") {
  TempDir tmp;
  const std::string state_path = tmp.file("state.json");
  std::string out, err;
  const int rc = run_process(
      kCli,
      {"fit", "--responses", kFixtures + "/tiny_responses.csv", "--dim", "2",
       "--seed", "42", "--state-out", state_path},
      &out, &err);
  CHECK(rc == 0);
  INFO("stderr: " << err);
  const CalibrationState state = load_state(state_path);
  CHECK(state.dimension == 2);
  CHECK(state.step == 0);
  CHECK(state.items.size() == 10);
  CHECK(state.anchors.empty());
  CHECK_NOTHROW(validate(state));
}

TEST_CASE("missing required flag is a usage error naming the flag") {
  TempDir tmp;
  std::string out, err;
  const int rc = run_process(
      kCli,
      {"fit", "--responses", kFixtures + "/tiny_responses.csv", "--state-out",
       tmp.file("state.json")},
      &out, &err);
  CHECK(rc == 2);
  CHECK(err.find("--seed") != std::string::npos);
}

TEST_CASE("coverage prints one rounded percentage") {
  std::string out;
  CHECK(run_process(kCli, {"coverage", "--items", "1212", "--n", "100"},
                    &out) == 0);
  CHECK(out == "8.3%\n");
  CHECK(run_process(kCli, {"coverage", "--items", "857", "--n", "100"},
                    &out) == 0);
  CHECK(out == "11.7%\n");
  CHECK(run_process(kCli, {"coverage", "--items", "14042", "--n", "50"},
                    &out) == 0);
  CHECK(out == "0.4%\n");
}

TEST_CASE("unknown subcommand is a usage error") {
  std::string out, err;
  const int rc = run_process(kCli, {"frobnicate"}, &out, &err);
  CHECK(rc == 2);
}

TEST_CASE("--help exits zero") {
  std::string out;
  const int rc = run_process(kCli, {"--help"}, &out);
  CHECK(rc == 0);
  CHECK(out.find("fit") != std::string::npos);
}

TEST_CASE("full pipeline: generate, fit, anchor, calibrate, estimate, simulate, report") {
  TempDir tmp;
  const std::string all_csv = tmp.file("all.csv");
  std::string out, err;

  // Generate a small two-dataset suite. Sizes keep the held-out split large
  // enough that rank correlations stay non-degenerate.
  REQUIRE(run_process(kCli,
                      {"gen-synthetic", "--models", "12", "--datasets", "2",
                       "--items", "30", "--dim", "2", "--seed", "7", "--out",
                       all_csv},
                      &out, &err) == 0);
  const ResponseMatrix all = load_responses(all_csv);
  REQUIRE(all.n_models() == 12);
  REQUIRE(all.n_items() == 60);

  // Restrict to the first dataset and fit the initial suite.
  const std::string ds1_csv = tmp.file("ds1.csv");
  save_responses(all.restricted(all.model_ids(), all.items_of_dataset("ds1")),
                 ds1_csv);
  const std::string state1 = tmp.file("state1.json");
  REQUIRE(run_process(kCli,
                      {"fit", "--responses", ds1_csv, "--dim", "2", "--seed",
                       "11", "--state-out", state1},
                      &out, &err) == 0);

  // Select anchors on ds1 and write the per-item map.
  const std::string state2 = tmp.file("state2.json");
  const std::string map_csv = tmp.file("map.csv");
  REQUIRE(run_process(kCli,
                      {"select-anchors", "--state", state1, "--dataset", "ds1",
                       "--n", "5", "--seed", "13", "--state-out", state2,
                       "--item-map", map_csv},
                      &out, &err) == 0);
  {
    const CalibrationState s2 = load_state(state2);
    REQUIRE(s2.anchors.count("ds1") == 1);
    CHECK(s2.anchors.at("ds1").entries.size() == 5);
    const std::string map_text = slurp(map_csv);
    // Header plus one row per ds1 item.
    CHECK(std::count(map_text.begin(), map_text.end(), '\n') == 31);
    CHECK(map_text.rfind("item_id,dataset_id,b,mdisc,is_anchor\n", 0) == 0);
  }

  // Integrate ds2 by fixed-parameter calibration. The full CSV is fine: the
  // engine keeps only the new dataset plus already-anchored items.
  const std::string state3 = tmp.file("state3.json");
  REQUIRE(run_process(kCli,
                      {"calibrate", "--state", state2, "--responses", all_csv,
                       "--dataset", "ds2", "--n", "4", "--seed", "17",
                       "--state-out", state3},
                      &out, &err) == 0);
  const CalibrationState s3 = load_state(state3);
  CHECK(s3.step == 1);  // the very first anchor selection keeps step 0
  CHECK(s3.items.size() == 60);
  REQUIRE(s3.anchors.count("ds2") == 1);
  CHECK(s3.anchors.at("ds2").entries.size() == 4);
  CHECK_NOTHROW(validate(s3));

  // Build an anchor-only response file covering both datasets' anchors.
  std::vector<std::string> anchor_ids;
  for (const auto& [ds, set] : s3.anchors) {
    for (const auto& e : set.entries) anchor_ids.push_back(e.item_id);
  }
  const std::string anchors_csv = tmp.file("anchors.csv");
  save_responses(all.restricted(all.model_ids(), anchor_ids), anchors_csv);

  // Estimate accuracies from anchor responses only.
  const std::string est_csv = tmp.file("est.csv");
  const std::string theta_csv = tmp.file("theta.csv");
  REQUIRE(run_process(kCli,
                      {"estimate", "--state", state3, "--anchor-responses",
                       anchors_csv, "--out", est_csv, "--theta-out",
                       theta_csv},
                      &out, &err) == 0);
  const std::string est_text = slurp(est_csv);
  // Header plus 12 models x 2 datasets.
  CHECK(std::count(est_text.begin(), est_text.end(), '\n') == 25);
  const std::string theta_text = slurp(theta_csv);
  CHECK(std::count(theta_text.begin(), theta_text.end(), '\n') == 13);

  // Simulate a one-chain experiment and re-aggregate with `report`.
  const std::string run_dir = tmp.file("run");
  REQUIRE(run_process(kCli,
                      {"simulate-chain", "--responses", all_csv, "--mode",
                       "leaderboard", "--chains", "1", "--n-values", "5",
                       "--strategies", "fpc", "--initial-suite", "1", "--dim",
                       "2", "--seed", "23", "--out", run_dir},
                      &out, &err) == 0);
  const std::string steps_text = slurp(run_dir + "/steps.csv");
  CHECK(steps_text.rfind(
            "chain_id,step,strategy,n_anchors,mae,spearman,cost_per_model\n",
            0) == 0);
  const std::string agg_first = slurp(run_dir + "/aggregate.csv");
  const std::string summary = slurp(run_dir + "/summary.json");
  CHECK(summary.find("engine_version") != std::string::npos);

  const std::string rep_dir = tmp.file("rep");
  REQUIRE(run_process(kCli, {"report", "--in", run_dir, "--out", rep_dir},
                      &out, &err) == 0);
  CHECK(slurp(rep_dir + "/aggregate.csv") == agg_first);
}
