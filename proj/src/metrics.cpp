#include "irtlink/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace irtlink {

namespace {

void check_same_keys(const std::map<std::string, double>& a,
                     const std::map<std::string, double>& b,
                     const char* what) {
  if (a.size() == b.size() &&
      std::equal(a.begin(), a.end(), b.begin(),
                 [](const auto& x, const auto& y) { return x.first == y.first; })) {
    return;
  }
  std::ostringstream os;
  os << what << ": model key mismatch;";
  for (const auto& [k, v] : a) {
    if (!b.count(k)) os << " only in estimates: '" << k << "'";
  }
  for (const auto& [k, v] : b) {
    if (!a.count(k)) os << " only in truths: '" << k << "'";
  }
  throw Error(os.str());
}

// Average ranks (1-based); tied values share the mean of their positions.
std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return values[i] < values[j];
  });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::kFpc: return "fpc";
    case Strategy::kConcurrent: return "concurrent";
    case Strategy::kRandom: return "random";
    case Strategy::kTopk: return "topk";
  }
  throw Error("unknown strategy value");
}

Strategy strategy_from_string(const std::string& name) {
  if (name == "fpc") return Strategy::kFpc;
  if (name == "concurrent") return Strategy::kConcurrent;
  if (name == "random") return Strategy::kRandom;
  if (name == "topk") return Strategy::kTopk;
  throw Error("unknown strategy '" + name +
              "'; expected fpc, concurrent, random, or topk");
}

double mae(const std::map<std::string, double>& estimates,
           const std::map<std::string, double>& truths) {
  require(!estimates.empty(), "mae over empty maps");
  check_same_keys(estimates, truths, "mae");
  double total = 0.0;
  for (const auto& [k, e] : estimates) {
    total += std::abs(e - truths.at(k));
  }
  return total / static_cast<double>(estimates.size());
}

double spearman(const std::map<std::string, double>& estimates,
                const std::map<std::string, double>& truths) {
  require(estimates.size() >= 2, "spearman needs at least 2 models");
  check_same_keys(estimates, truths, "spearman");

  std::vector<double> xs, ys;
  xs.reserve(estimates.size());
  ys.reserve(estimates.size());
  for (const auto& [k, e] : estimates) {
    xs.push_back(e);
    ys.push_back(truths.at(k));
  }
  const std::vector<double> rx = average_ranks(xs);
  const std::vector<double> ry = average_ranks(ys);

  const double n = static_cast<double>(rx.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double dx = rx[i] - mx;
    const double dy = ry[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  require(sxx > 0.0 && syy > 0.0,
          "spearman degenerate: zero rank variance (all values tied)");
  return sxy / std::sqrt(sxx * syy);
}

long long step_cost(Strategy s, int t, int n) {
  require(t >= 0, "step index must be >= 0, got " + std::to_string(t));
  require(n >= 0, "anchor budget must be >= 0, got " + std::to_string(n));
  switch (s) {
    case Strategy::kFpc:
    case Strategy::kRandom:
    case Strategy::kTopk:
      return n;
    case Strategy::kConcurrent:
      return static_cast<long long>(n) * (static_cast<long long>(t) + 1);
  }
  throw Error("unknown strategy value");
}

CiSummary aggregate_ci(const std::vector<double>& values) {
  require(!values.empty(), "confidence interval over empty values");
  CiSummary s;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() == 1) return s;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  s.half_width = 1.96 * sd / std::sqrt(n);
  return s;
}

}  // namespace irtlink
