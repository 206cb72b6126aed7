#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mrt_core.hpp"
#include "mrt_mle.hpp"

namespace elicit {

/// How correlated answers are generated: a Gaussian copula whose latent
/// pairwise correlation is sigma (Latent), or whose latent correlations are
/// solved so the binary answers have Pearson correlation sigma (Binary).
enum class CopulaMode { Latent, Binary };

const char* to_string(CopulaMode mode) noexcept;
CopulaMode parse_copula_mode(const std::string& text);

/// Latent correlations for the pairs (1,2), (1,3), (2,3) given the three
/// marginal probabilities. Binary mode throws a design error when sigma is
/// outside the Frechet bounds of a pair.
std::array<double, 3> copula_correlations(const std::array<double, 3>& margins, double sigma,
                                          CopulaMode mode);

/// Binary Pearson correlation implied by a latent correlation r.
double binary_correlation(double pa, double pb, double r);

struct DiscreteTruth {
  std::vector<double> z_probs;
  std::vector<MrtLatent> cells;
};

struct McDesign {
  enum class Kind { DiscreteZ, ContinuousZ, DiscreteZCorrelated, ContinuousZCorrelated };

  Kind kind = Kind::DiscreteZ;
  double sigma = 0.0;
  CopulaMode copula = CopulaMode::Latent;
  DiscreteTruth discrete;
  MleParams continuous;
  std::size_t z_dim = 1;
  std::size_t n = 2000;
  int n_reps = 1000;
  std::uint64_t seed = 1;
  OrderingRule ordering;
  int x2_fix = 1;
  int rank_boot = 199;
};

const char* to_string(McDesign::Kind kind) noexcept;
McDesign::Kind parse_design_kind(const std::string& text);
bool is_discrete(McDesign::Kind kind);

/// Two-cell discrete design with Pr(Z=0) = 0.4 used for the golden tables.
McDesign reference_discrete_design();
/// Slope-only logistic design, z ~ U[0,1], coefficients (1, 1, -1, 2, -2, 2, -2).
McDesign reference_continuous_design();

void validate(const McDesign& design);

struct MrtDiscreteRecord {
  int x1 = 0, x2 = 0, x3 = 0;
  int z = 0;
  int xstar = 0;  // simulated truth, not used by estimators
};

/// Data set `rep` of a discrete design (record i uses stream (seed, rep, i)).
std::vector<MrtDiscreteRecord> simulate_mrt_discrete(const McDesign& design, std::size_t n,
                                                     std::uint64_t seed, std::uint64_t rep = 0);
MrtContinuousSample simulate_mrt_continuous(const McDesign& design, std::size_t n,
                                            std::uint64_t seed, std::uint64_t rep = 0);

/// Per-cell joint counts; cells are ordered by z code.
std::vector<MrtJoint> joints_by_cell(const std::vector<MrtDiscreteRecord>& records);

enum class McEstimator { ClosedForm, Extreme, Mle, RankTest };
const char* to_string(McEstimator e) noexcept;
McEstimator parse_estimator(const std::string& text);

struct McRow {
  std::string estimator;
  std::string parameter;
  double truth = 0.0;
  double mean = 0.0;
  double sd = 0.0;
  double median = 0.0;
  int n_ok = 0;
  int n_failed = 0;
};

struct McResult {
  std::vector<McRow> rows;
  std::string mechanism;
  // Raw per-replication values keyed by "estimator/parameter"; failed
  // replications are omitted.
  std::map<std::string, std::vector<double>> draws;

  const McRow& row(const std::string& estimator, const std::string& parameter) const;
};

McResult run_monte_carlo(const McDesign& design, const std::set<McEstimator>& estimators);

}  // namespace elicit
