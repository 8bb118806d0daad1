#ifndef IRTLINK_TESTUTIL_HPP
#define IRTLINK_TESTUTIL_HPP

#include "irtlink/model.hpp"
#include "irtlink/types.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace testutil {

// A small randomized problem: matrix plus aligned parameter/ability vectors.
struct Instance {
  irtlink::ResponseMatrix data;
  std::vector<irtlink::ItemParameters> items;
  std::vector<irtlink::AbilityVector> abilities;
};

// Random instance with N(0,1) parameters and Bernoulli responses; `density`
// is the probability a (model, item) pair is observed; `frozen_every` > 0
// freezes every k-th item.
Instance random_instance(int n_models, int n_items, int dim,
                         std::uint64_t seed, double density = 1.0,
                         int frozen_every = 0);

// Largest per-component relative disagreement between the analytic gradient
// and a central finite difference of log_posterior over every free
// parameter. Components are guarded by max(1, |fd|).
double gradient_max_rel_error(const Instance& inst,
                              const irtlink::PriorConfig& prior,
                              double step);

// Scalar root of f on [lo, hi] by bisection; f(lo) and f(hi) must bracket.
double bisect(const std::function<double(double)>& f, double lo, double hi,
              double tol = 1e-12);

// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  std::string file(const std::string& name) const;
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

std::string slurp(const std::string& path);

// Runs an executable with arguments, capturing stdout/stderr. Returns the
// process exit code (or -1 if it did not exit normally).
int run_process(const std::string& exe, const std::vector<std::string>& args,
                std::string* out = nullptr, std::string* err = nullptr);

}  // namespace testutil

#endif  // IRTLINK_TESTUTIL_HPP
