#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace elicit {

/// Joint counts of three binary answers in one covariate cell, indexed
/// x1 * 4 + x2 * 2 + x3. Counts may be fractional (expected counts).
struct MrtJoint {
  int z_cell = 0;
  std::array<double, 8> counts{};
  double n_cell = 0.0;

  double& at(int x1, int x2, int x3) { return counts[x1 * 4 + x2 * 2 + x3]; }
  double at(int x1, int x2, int x3) const { return counts[x1 * 4 + x2 * 2 + x3]; }
};

/// Latent-class parameters: Pr(X*=1) and Pr(X_j=1 | X*=k) as pr_x[j][k].
struct MrtLatent {
  double pr_xstar = 0.5;
  std::array<std::array<double, 2>, 3> pr_x{};
};

struct OrderingRule {
  enum class Direction { ClassOneHigher, ClassOneLower };
  int question = 1;  // 1..3
  Direction direction = Direction::ClassOneHigher;

  bool satisfied(const std::array<std::array<double, 2>, 3>& pr_x) const;
};

OrderingRule parse_ordering(const std::string& text);
std::string to_string(const OrderingRule& rule);

enum class MrtMethod { ClosedForm, Extreme };
const char* to_string(MrtMethod method) noexcept;

struct MrtEstimate {
  double pr_xstar = 0.0;
  std::array<std::array<double, 2>, 3> pr_x_given_xstar{};
  MrtMethod method = MrtMethod::ClosedForm;
  bool clipped = false;
  double eigen_gap = 0.0;
  double objective = 0.0;  // Frobenius misfit (extreme estimator)
};

struct MrtMatrices {
  Eigen::Matrix2d m_x1x2x3;
  Eigen::Matrix2d m_x1x3;
  Eigen::Vector2d m_x1;
};

struct RankTestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  bool reject_rank1 = false;
  bool underpowered = false;
};

/// Cell probabilities implied by the latent model under conditional independence.
std::array<double, 8> mrt_joint_probs(const MrtLatent& latent);
MrtJoint mrt_expected_joint(const MrtLatent& latent, double n, int z_cell = 0);

void validate(const MrtJoint& joint);

MrtMatrices build_matrices(const MrtJoint& joint, int x2_fix);

RankTestResult rank_test(const MrtJoint& joint, int n_boot, std::uint64_t seed);

MrtEstimate decompose_closed_form(const MrtJoint& joint, int x2_fix, const OrderingRule& ordering);
MrtEstimate decompose_extreme(const MrtJoint& joint, int x2_fix, const OrderingRule& ordering);

double aggregate_unconditional(const std::vector<std::pair<MrtEstimate, double>>& cells);

struct MisreportRates {
  double q1 = 0.0;
  double q0 = 0.0;
};

/// affirmative_is_truth_for names the latent class for which answering 1 to
/// the direct question is truthful.
MisreportRates misreport_rates(const MrtEstimate& estimate, int direct_question_index,
                               int affirmative_is_truth_for);

}  // namespace elicit
