#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "irtlink/calibration.hpp"
#include "irtlink/io.hpp"
#include "irtlink/rng.hpp"
#include "testutil.hpp"

#include <cstring>
#include <fstream>
#include <regex>

using namespace irtlink;

namespace {

bool same_bits(double x, double y) {
  return std::memcmp(&x, &y, sizeof(double)) == 0;
}

void spit(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

CalibrationState fitted_state(std::uint64_t seed, int budget = 4) {
  auto inst = testutil::random_instance(10, 12, 2, seed, 1.0);
  FitConfig cfg;
  cfg.dimension = 2;
  cfg.seed = 3;
  auto state = make_initial_state(fit_concurrent(inst.data, cfg), inst.data, 2);
  return select_anchors_into_state(state, "ds1", budget,
                                   derive_seed(seed, "a"),
                                   AnchorMethod::kClustered);
}

std::vector<StepMetrics> sample_steps() {
  std::vector<StepMetrics> rows;
  for (const auto& chain : {"c_a", "c_b"})
    for (int step = 0; step < 2; ++step)
      for (auto strat : {Strategy::kFpc, Strategy::kRandom}) {
        StepMetrics m;
        m.chain_id = chain;
        m.step = step;
        m.strategy = strat;
        m.n_anchors = 10;
        m.mae = 0.02 + 0.01 * step + (strat == Strategy::kRandom ? 0.05 : 0.0) +
                (std::string(chain) == "c_b" ? 0.003 : 0.0);
        m.spearman = 0.9 - 0.1 * step;
        m.cost_per_model = 10;
        rows.push_back(m);
      }
  return rows;
}

}  // namespace

TEST_CASE("response CSV round-trips exactly") {
  testutil::TempDir dir;
  auto path = dir.file("responses.csv");
  spit(path,
       "model_id,item_id,dataset_id,correct\n"
       "m2,q1,dsA,1\n"
       "m1,q2,dsB,0\n"
       "m1,q1,dsA,1\n");
  auto m = load_responses(path);
  CHECK(m.model_ids() == std::vector<std::string>{"m1", "m2"});
  CHECK(m.item_ids() == std::vector<std::string>{"q1", "q2"});
  CHECK(m.n_responses() == 3);
  CHECK(m.observed("m1", "q2").value() == 0);
  CHECK(!m.observed("m2", "q2").has_value());

  auto out = dir.file("roundtrip.csv");
  save_responses(m, out);
  auto again = load_responses(out);
  CHECK(again.n_responses() == 3);
  CHECK(again.observed("m2", "q1").value() == 1);

  // Saving is canonical: a second save of the reloaded matrix is
  // byte-identical.
  auto out2 = dir.file("roundtrip2.csv");
  save_responses(again, out2);
  CHECK(testutil::slurp(out) == testutil::slurp(out2));
}

TEST_CASE("response CSV errors cite the line number") {
  testutil::TempDir dir;

  auto bad_header = dir.file("h.csv");
  spit(bad_header, "model,item\nm1,q1\n");
  CHECK_THROWS_WITH_AS(load_responses(bad_header), doctest::Contains(":1"),
                       Error);

  auto bad_value = dir.file("v.csv");
  spit(bad_value,
       "model_id,item_id,dataset_id,correct\n"
       "m1,q1,dsA,1\n"
       "m1,q2,dsA,0\n"
       "m1,q3,dsA,1\n"
       "m1,q4,dsA,0\n"
       "m1,q5,dsA,1\n"
       "m1,q6,dsA,2\n");
  try {
    load_responses(bad_value);
    FAIL("expected error");
  } catch (const Error& e) {
    std::string msg = e.what();
    CHECK(msg.find(":7") != std::string::npos);
    CHECK(msg.find("correct") != std::string::npos);
  }

  auto dup = dir.file("d.csv");
  spit(dup,
       "model_id,item_id,dataset_id,correct\n"
       "m1,q1,dsA,1\n"
       "m1,q1,dsA,0\n");
  CHECK_THROWS_WITH_AS(load_responses(dup), doctest::Contains(":3"), Error);

  auto conflict = dir.file("c.csv");
  spit(conflict,
       "model_id,item_id,dataset_id,correct\n"
       "m1,q1,dsA,1\n"
       "m2,q1,dsB,0\n");
  CHECK_THROWS_WITH_AS(load_responses(conflict), doctest::Contains("q1"),
                       Error);

  auto short_row = dir.file("s.csv");
  spit(short_row,
       "model_id,item_id,dataset_id,correct\n"
       "m1,q1,dsA\n");
  CHECK_THROWS_WITH_AS(load_responses(short_row), doctest::Contains(":2"),
                       Error);

  CHECK_THROWS_AS(load_responses(dir.file("missing.csv")), Error);
}

TEST_CASE("state JSON round-trips bit-exactly") {
  testutil::TempDir dir;
  auto state = fitted_state(404);
  auto path = dir.file("state.json");
  save_state(state, path);
  auto loaded = load_state(path);

  CHECK(loaded.format_version == state.format_version);
  CHECK(loaded.dimension == state.dimension);
  CHECK(loaded.step == state.step);
  REQUIRE(loaded.items.size() == state.items.size());
  for (const auto& [id, it] : state.items) {
    const auto& l = loaded.items.at(id);
    CHECK(l.dataset_id == it.dataset_id);
    CHECK(l.frozen == it.frozen);
    CHECK(l.calibrated_at_step == it.calibrated_at_step);
    CHECK(same_bits(l.d, it.d));
    REQUIRE(l.a.size() == it.a.size());
    for (int k = 0; k < it.a.size(); ++k) CHECK(same_bits(l.a[k], it.a[k]));
  }
  REQUIRE(loaded.anchors.size() == state.anchors.size());
  const auto& la = loaded.anchors.at("ds1");
  const auto& sa = state.anchors.at("ds1");
  CHECK(la.budget == sa.budget);
  REQUIRE(la.entries.size() == sa.entries.size());
  for (std::size_t i = 0; i < sa.entries.size(); ++i) {
    CHECK(la.entries[i].item_id == sa.entries[i].item_id);
    CHECK(same_bits(la.entries[i].weight, sa.entries[i].weight));
  }
  REQUIRE(loaded.history.size() == state.history.size());
  CHECK(loaded.history[0].step == state.history[0].step);
  CHECK(loaded.history[0].dataset_id == state.history[0].dataset_id);
  CHECK(loaded.history[0].anchor_count == state.history[0].anchor_count);

  // save(load(save(x))) is byte-identical to save(x).
  auto path2 = dir.file("state2.json");
  save_state(loaded, path2);
  CHECK(testutil::slurp(path) == testutil::slurp(path2));
}

TEST_CASE("state version and schema violations are rejected with their path") {
  testutil::TempDir dir;
  auto state = fitted_state(505);
  auto path = dir.file("state.json");
  save_state(state, path);
  auto text = testutil::slurp(path);

  SUBCASE("foreign version names both versions") {
    auto mutated = std::regex_replace(
        text, std::regex("\"format_version\": \"1\\.0\""),
        "\"format_version\": \"9.7\"");
    auto p = dir.file("bad_version.json");
    spit(p, mutated);
    try {
      load_state(p);
      FAIL("expected error");
    } catch (const Error& e) {
      std::string msg = e.what();
      CHECK(msg.find("9.7") != std::string::npos);
      CHECK(msg.find("1.0") != std::string::npos);
    }
  }

  SUBCASE("anchor entry pointing at an absent item") {
    auto victim = state.anchors.at("ds1").entries[0].item_id;
    // Rename the item in the items block only, leaving the anchor entry
    // dangling.
    auto mutated = std::regex_replace(
        text, std::regex("\"item_id\": \"" + victim + "\""),
        "\"item_id\": \"zz_ghost\"", std::regex_constants::format_first_only);
    auto p = dir.file("dangling.json");
    spit(p, mutated);
    CHECK_THROWS_AS(load_state(p), Error);
  }

  SUBCASE("malformed JSON is rejected") {
    auto p = dir.file("trunc.json");
    spit(p, text.substr(0, text.size() / 2));
    CHECK_THROWS_AS(load_state(p), Error);
  }

  SUBCASE("type violations cite a JSON path") {
    auto mutated = std::regex_replace(text, std::regex("\"step\": 0"),
                                      "\"step\": \"zero\"");
    auto p = dir.file("typed.json");
    spit(p, mutated);
    try {
      load_state(p);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("/step") != std::string::npos);
    }
  }
}

TEST_CASE("item map CSV leaves the difficulty empty for degenerate items") {
  testutil::TempDir dir;
  std::vector<ItemMapRow> rows;
  ItemMapRow good;
  good.item_id = "q1";
  good.dataset_id = "dsA";
  good.b = 0.5;
  good.mdisc = 2.0;
  good.is_anchor = true;
  ItemMapRow degenerate;
  degenerate.item_id = "q2";
  degenerate.dataset_id = "dsA";
  degenerate.b = std::nullopt;
  degenerate.mdisc = 0.0;
  degenerate.is_anchor = false;
  rows = {good, degenerate};
  auto path = dir.file("map.csv");
  save_item_map(rows, path);
  auto text = testutil::slurp(path);
  CHECK(text == "item_id,dataset_id,b,mdisc,is_anchor\n"
                "q1,dsA,0.5,2,1\n"
                "q2,dsA,,0,0\n");
}

TEST_CASE("aggregate rows group by step, strategy, and budget") {
  auto rows = sample_steps();
  auto agg = aggregate_steps(rows);
  // 2 steps x 2 strategies at one budget.
  CHECK(agg.size() == 4);
  for (const auto& row : agg) {
    // Two chains per group.
    std::vector<double> maes;
    for (const auto& r : rows)
      if (r.step == row.step && r.strategy == row.strategy &&
          r.n_anchors == row.n_anchors)
        maes.push_back(r.mae);
    REQUIRE(maes.size() == 2);
    auto ci = aggregate_ci(maes);
    CHECK(row.mae.mean == doctest::Approx(ci.mean).epsilon(1e-15));
    CHECK(row.mae.half_width ==
          doctest::Approx(ci.half_width).epsilon(1e-15));
  }

  auto single = aggregate_steps({rows[0]});
  REQUIRE(single.size() == 1);
  CHECK(single[0].mae.half_width == 0.0);
  CHECK(single[0].spearman.half_width == 0.0);
}

TEST_CASE("report emission is deterministic and reloadable") {
  testutil::TempDir dir;
  ReportBundle bundle;
  ChainReport a;
  a.chain_id = "c_a";
  ChainReport b;
  b.chain_id = "c_b";
  for (const auto& m : sample_steps()) {
    if (m.chain_id == "c_a")
      a.steps.push_back(m);
    else
      b.steps.push_back(m);
  }
  a.n_reference_models = b.n_reference_models = 30;
  a.n_test_models = b.n_test_models = 10;
  a.dimension = b.dimension = 2;
  bundle.chains = {a, b};
  bundle.config_hash = "cafef00d";
  bundle.master_seed = 42;

  auto out1 = dir.file("run1");
  emit_report(bundle, out1);
  auto out2 = dir.file("run2");
  emit_report(bundle, out2);
  for (const auto& name : {"steps.csv", "aggregate.csv", "summary.json"}) {
    CAPTURE(name);
    CHECK(testutil::slurp(out1 + "/" + name) ==
          testutil::slurp(out2 + "/" + name));
  }

  auto steps_text = testutil::slurp(out1 + "/steps.csv");
  CHECK(steps_text.rfind("chain_id,step,strategy,n_anchors,mae,spearman,"
                         "cost_per_model\n",
                         0) == 0);

  auto loaded = load_steps(out1 + "/steps.csv");
  CHECK(loaded.size() == sample_steps().size());
  auto agg_direct = aggregate_steps(loaded);
  CHECK(agg_direct.size() == 4);

  auto redo = dir.file("redo");
  emit_aggregate(loaded, redo);
  CHECK(testutil::slurp(redo + "/aggregate.csv") ==
        testutil::slurp(out1 + "/aggregate.csv"));

  auto summary = testutil::slurp(out1 + "/summary.json");
  CHECK(summary.find("\"engine_version\"") != std::string::npos);
  CHECK(summary.find("cafef00d") != std::string::npos);
}

TEST_CASE("estimate and ability writers produce stable CSV") {
  testutil::TempDir dir;
  AccuracyEstimate e;
  e.model_id = "m1";
  e.dataset_id = "dsA";
  e.estimate = 0.75;
  e.anchor_mean = 0.8;
  e.p_irt = 0.7;
  e.lambda = 0.5;
  e.anchors_used = 10;
  auto epath = dir.file("est.csv");
  save_estimates({e}, epath);
  CHECK(testutil::slurp(epath) ==
        "model_id,dataset_id,estimate,anchor_mean,p_irt,lambda,anchors_used\n"
        "m1,dsA,0.75,0.8,0.7,0.5,10\n");

  AbilityVector ab;
  ab.model_id = "m1";
  ab.theta = Vector(2);
  ab.theta << -0.25, 1.5;
  auto apath = dir.file("theta.csv");
  save_abilities({ab}, apath);
  CHECK(testutil::slurp(apath) ==
        "model_id,theta_0,theta_1\n"
        "m1,-0.25,1.5\n");
}

TEST_CASE("truth files capture parameters and abilities") {
  testutil::TempDir dir;
  auto inst = testutil::random_instance(3, 4, 2, 99, 1.0);
  auto path = dir.file("truth.json");
  save_truth(inst.items, inst.abilities, 2, path);
  auto text = testutil::slurp(path);
  CHECK(text.find("\"dimension\": 2") != std::string::npos);
  CHECK(text.find(inst.items[0].item_id) != std::string::npos);
  CHECK(text.find(inst.abilities[0].model_id) != std::string::npos);
}
