#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "irtlink/metrics.hpp"
#include "irtlink/rng.hpp"
#include "irtlink/types.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <vector>

using namespace irtlink;

namespace {

// Rank-based correlation oracle: average ranks for ties, then the plain
// product-moment correlation of the rank vectors.
double spearman_oracle(std::vector<double> x, std::vector<double> y) {
  auto ranks = [](const std::vector<double>& v) {
    std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
      double avg = 0.5 * double(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  auto rx = ranks(x);
  auto ry = ranks(y);
  double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / double(rx.size());
  double my = std::accumulate(ry.begin(), ry.end(), 0.0) / double(ry.size());
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

std::map<std::string, double> as_map(const std::vector<double>& v) {
  std::map<std::string, double> m;
  for (std::size_t i = 0; i < v.size(); ++i)
    m["m" + std::to_string(10 + i)] = v[i];
  return m;
}

}  // namespace

TEST_CASE("mean absolute error at hand-computed points") {
  auto a = as_map({0.5, 0.7});
  CHECK(mae(a, a) == 0.0);
  auto b = as_map({0.52, 0.66});
  CHECK(mae(a, b) == doctest::Approx(0.03).epsilon(1e-12));
  CHECK(mae(b, a) == mae(a, b));
}

TEST_CASE("mean absolute error requires identical key sets") {
  std::map<std::string, double> a = {{"m1", 0.5}, {"m2", 0.6}};
  std::map<std::string, double> b = {{"m1", 0.5}, {"m3", 0.6}};
  CHECK_THROWS_WITH_AS(mae(a, b), doctest::Contains("m2"), Error);
  CHECK_THROWS_WITH_AS(mae(a, b), doctest::Contains("m3"), Error);
}

TEST_CASE("rank correlation is one for any strictly monotone transform") {
  Rng rng(5150);
  std::vector<double> base;
  for (int i = 0; i < 25; ++i) base.push_back(rng.normal());
  auto x = as_map(base);
  std::vector<double> up, down;
  for (double v : base) {
    up.push_back(std::exp(0.5 * v) + 2.0);
    down.push_back(-3.0 * v + 1.0);
  }
  CHECK(spearman(x, as_map(up)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(spearman(x, as_map(down)) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("rank correlation with ties matches the averaged-rank oracle") {
  std::vector<double> t = {1.0, 2.0, 3.0, 4.0};
  std::vector<double> e = {1.0, 2.0, 2.0, 4.0};
  double got = spearman(as_map(t), as_map(e));
  CHECK(got == doctest::Approx(0.9487).epsilon(1e-3));
  CHECK(got == doctest::Approx(3.0 / std::sqrt(10.0)).epsilon(1e-12));
  CHECK(got == doctest::Approx(spearman_oracle(t, e)).epsilon(1e-12));

  Rng rng(808);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x, y;
    int n = 5 + int(rng.uniform_below(20));
    for (int i = 0; i < n; ++i) {
      // Coarse rounding forces frequent ties.
      x.push_back(std::round(rng.normal() * 2.0) / 2.0);
      y.push_back(std::round(rng.normal() * 2.0) / 2.0);
    }
    // Skip degenerate draws where one side is constant.
    if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; }))
      continue;
    if (std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; }))
      continue;
    CHECK(spearman(as_map(x), as_map(y)) ==
          doctest::Approx(spearman_oracle(x, y)).epsilon(1e-10));
  }
}

TEST_CASE("rank correlation rejects degenerate inputs") {
  CHECK_THROWS_AS(spearman(as_map({1.0}), as_map({2.0})), Error);
  CHECK_THROWS_AS(spearman(as_map({1.0, 1.0, 1.0}), as_map({1.0, 2.0, 3.0})),
                  Error);
  std::map<std::string, double> a = {{"m1", 0.5}, {"m2", 0.6}};
  std::map<std::string, double> b = {{"m1", 0.5}, {"mX", 0.6}};
  CHECK_THROWS_AS(spearman(a, b), Error);
}

TEST_CASE("per-model step cost follows the published accounting") {
  // Arguments are (strategy, step index, anchor budget).
  CHECK(step_cost(Strategy::kFpc, 0, 100) == 100);
  CHECK(step_cost(Strategy::kFpc, 7, 100) == 100);
  CHECK(step_cost(Strategy::kRandom, 3, 25) == 25);
  CHECK(step_cost(Strategy::kTopk, 9, 10) == 10);
  CHECK(step_cost(Strategy::kConcurrent, 0, 100) == 100);
  CHECK(step_cost(Strategy::kConcurrent, 4, 100) == 500);
  CHECK(step_cost(Strategy::kConcurrent, 2, 25) == 75);
  CHECK_THROWS_AS(step_cost(Strategy::kFpc, -1, 0), Error);
  CHECK_THROWS_AS(step_cost(Strategy::kFpc, 1, -1), Error);
}

TEST_CASE("strategy names round-trip") {
  for (auto s : {Strategy::kFpc, Strategy::kConcurrent, Strategy::kRandom,
                 Strategy::kTopk})
    CHECK(strategy_from_string(to_string(s)) == s);
  CHECK(to_string(Strategy::kFpc) == "fpc");
  CHECK(to_string(Strategy::kConcurrent) == "concurrent");
  CHECK(to_string(Strategy::kRandom) == "random");
  CHECK(to_string(Strategy::kTopk) == "topk");
  CHECK_THROWS_WITH_AS(strategy_from_string("bogus"),
                       doctest::Contains("bogus"), Error);
}

TEST_CASE("confidence interval of a sample") {
  auto one = aggregate_ci({0.42});
  CHECK(one.mean == doctest::Approx(0.42).epsilon(1e-15));
  CHECK(one.half_width == 0.0);

  auto pair = aggregate_ci({0.0, 1.0});
  CHECK(pair.mean == doctest::Approx(0.5).epsilon(1e-12));
  // sd = sqrt(((0.5)^2 + (0.5)^2) / (2 - 1)) = 1/sqrt(2);
  // half width = 1.96 * sd / sqrt(2) = 0.98.
  CHECK(pair.half_width == doctest::Approx(0.98).epsilon(1e-12));

  auto again = aggregate_ci({1.0, 0.0});
  CHECK(again.mean == pair.mean);
  CHECK(again.half_width == pair.half_width);

  CHECK_THROWS_AS(aggregate_ci({}), Error);
}
