#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "le_core.hpp"

namespace elicit {

struct MomentSpec {
  int j_count = 0;
  MisreportSpec spec = MisreportSpec::Unrestricted;
  int dropped_index = 0;  // 0..J+1
};

int free_parameters(MisreportSpec spec);

struct GmmResult {
  LeParams theta_hat;
  std::vector<double> se;  // per free parameter; NaN when unavailable
  double t_stat = 0.0;
  int dof = 0;
  double p_value = 1.0;
  Eigen::MatrixXd weight_matrix;
  bool converged = false;
  bool ridge_regularized = false;
  int dropped_index = 0;
  std::size_t n = 0;
};

/// All J+2 sample moments at theta, before any moment is dropped.
std::vector<double> moment_values(const EmpiricalDistributions& data, const LeParams& theta);
std::vector<double> moment_values(const LeSample& sample, const LeParams& theta);

/// Two-step GMM. `n` scales the J-statistic; for a sample it is the record count.
GmmResult gmm_estimate(const EmpiricalDistributions& data, std::size_t n, const MomentSpec& spec);
GmmResult gmm_estimate(const LeSample& sample, const MomentSpec& spec);

struct DropPolicy {
  enum class Kind { Fixed, MinPValueOverDrops } kind = Kind::MinPValueOverDrops;
  int index = 0;

  static DropPolicy fixed(int i) { return {Kind::Fixed, i}; }
  static DropPolicy min_p_value() { return {Kind::MinPValueOverDrops, 0}; }
};

GmmResult j_test(const EmpiricalDistributions& data, std::size_t n, MisreportSpec spec,
                 DropPolicy policy);
GmmResult j_test(const LeSample& sample, MisreportSpec spec, DropPolicy policy);

/// z-test of E(Y0) = J/2 on the control mean.
struct ControlMeanTest {
  double mean = 0.0;
  double se = 0.0;
  double z = 0.0;
  double p_value = 1.0;
};

ControlMeanTest control_mean_test(const LeSample& sample);

struct ModifiedLeCheck {
  double mean_diff = 0.0;
  double direct_rate = 0.0;
  double gap = 0.0;  // direct_rate - mean_diff
  double gap_se = 0.0;
  // A zero gap is consistent with misreporting: it only says
  // (1 - q1) delta + q0 (1 - delta) equals the mean difference.
  bool zero_gap_not_sufficient = true;
};

/// `direct` holds one 0/1 answer per control record, in sample order.
ModifiedLeCheck modified_le_check(const LeSample& sample, const std::vector<int>& direct,
                                  int n_boot, std::uint64_t seed);

}  // namespace elicit
