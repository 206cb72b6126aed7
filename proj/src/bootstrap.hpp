#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace elicit {

struct BootstrapConfig {
  enum class Stratify { None, Group, Cell };
  enum class FailurePolicy { DropAndFlag, Error };

  int n_reps = 1000;
  std::uint64_t seed = 0;
  Stratify stratify_by = Stratify::None;
  FailurePolicy failure_policy = FailurePolicy::DropAndFlag;
};

struct BootstrapResult {
  std::vector<std::vector<double>> estimates;  // one row per successful replicate
  std::vector<double> se;
  std::vector<std::pair<double, double>> ci95;  // percentile method
  int n_failed = 0;
  bool few_replicates = false;  // fewer than 100 replicates
};

/// Estimator over a resample given as record indices into the caller's data.
/// Throwing elicit::Error marks the replicate as failed.
using ResampleEstimator = std::function<std::vector<double>(std::span<const std::size_t>)>;

/// Nonparametric bootstrap over n records. `strata` holds one label per
/// record and is used unless stratify_by is None; each stratum keeps its size.
BootstrapResult bootstrap(std::size_t n, std::span<const int> strata,
                          const ResampleEstimator& estimator, const BootstrapConfig& config);

enum class Direction { Greater, Less };

/// (k + 1) / (B + 1) with k the number of estimates on the null side.
double one_sided_pvalue(std::span<const double> estimates, double null_value, Direction direction);

}  // namespace elicit
