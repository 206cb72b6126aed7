#include "bootstrap.hpp"

#include <map>
#include <optional>

#include "error.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "stats.hpp"

namespace elicit {

BootstrapResult bootstrap(std::size_t n, std::span<const int> strata,
                          const ResampleEstimator& estimator, const BootstrapConfig& config) {
  if (n == 0) fail(ErrorKind::Domain, "bootstrap needs at least one record");
  if (config.n_reps < 2) fail(ErrorKind::Config, "bootstrap needs at least two replicates");
  const bool stratified = config.stratify_by != BootstrapConfig::Stratify::None;
  if (stratified && strata.size() != n)
    fail(ErrorKind::Domain, "stratified bootstrap needs one stratum label per record");

  std::vector<std::vector<std::size_t>> groups;
  if (stratified) {
    std::map<int, std::vector<std::size_t>> by_label;
    for (std::size_t i = 0; i < n; ++i) by_label[strata[i]].push_back(i);
    for (auto& [label, members] : by_label) groups.push_back(std::move(members));
  } else {
    groups.emplace_back(n);
    for (std::size_t i = 0; i < n; ++i) groups[0][i] = i;
  }

  const auto reps = static_cast<std::size_t>(config.n_reps);
  std::vector<std::optional<std::vector<double>>> out(reps);
  parallel_for(reps, [&](std::size_t b) {
    Rng rng = Rng::stream(config.seed, b);
    std::vector<std::size_t> idx;
    idx.reserve(n);
    for (const auto& g : groups)
      for (std::size_t i = 0; i < g.size(); ++i) idx.push_back(g[rng.below(g.size())]);
    try {
      out[b] = estimator(idx);
    } catch (const Error&) {
      out[b].reset();
    }
  });

  BootstrapResult res;
  res.few_replicates = config.n_reps < 100;
  for (auto& o : out) {
    if (o) res.estimates.push_back(std::move(*o));
    else ++res.n_failed;
  }
  if (res.n_failed > 0 && config.failure_policy == BootstrapConfig::FailurePolicy::Error)
    fail(ErrorKind::Inference, std::to_string(res.n_failed) + " bootstrap replicates failed");
  if (res.n_failed * 5 > config.n_reps)
    fail(ErrorKind::Inference, "more than 20% of bootstrap replicates failed (" +
                                   std::to_string(res.n_failed) + " of " +
                                   std::to_string(config.n_reps) + ")");

  const std::size_t k = res.estimates.empty() ? 0 : res.estimates.front().size();
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> col;
    col.reserve(res.estimates.size());
    for (const auto& row : res.estimates) col.push_back(row.at(c));
    res.se.push_back(stats::sd(col));
    res.ci95.emplace_back(stats::quantile(col, 0.025), stats::quantile(col, 0.975));
  }
  return res;
}

double one_sided_pvalue(std::span<const double> estimates, double null_value, Direction direction) {
  if (estimates.empty()) fail(ErrorKind::Domain, "no bootstrap estimates");
  std::size_t k = 0;
  for (double e : estimates)
    k += direction == Direction::Greater ? e <= null_value : e >= null_value;
  return (static_cast<double>(k) + 1.0) / (static_cast<double>(estimates.size()) + 1.0);
}

}  // namespace elicit
