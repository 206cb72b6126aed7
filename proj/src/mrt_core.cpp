#include "mrt_core.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"
#include "optim.hpp"
#include "rng.hpp"

namespace elicit {

namespace {

constexpr double kDiscTol = 1e-10;
constexpr double kGapTol = 1e-8;
constexpr double kClipSlack = 0.02;
constexpr double kMinClass = 1e-4;
constexpr double kDistinct = 1e-6;

using Conditionals = std::array<std::array<double, 2>, 3>;

struct Recovered {
  double pr_xstar;
  Conditionals pr_x;
};

// Pr(X*) and Pr(X3 | X*) from the response matrix M = M_{X1|X*} (columns are
// classes) and the class-specific Pr(X2 = x2_fix | X*).
Recovered recover(const MrtMatrices& mats, const Eigen::Matrix2d& M, const Eigen::Vector2d& d2,
                  int x2_fix) {
  const double det = M.determinant();
  if (std::abs(det) < 1e-12)
    fail(ErrorKind::Decomposition, "recovered response matrix is singular");
  const Eigen::Matrix2d Minv = M.inverse();
  const Eigen::Vector2d pi = Minv * mats.m_x1;
  if (pi[0] < kMinClass || pi[1] < kMinClass)
    fail(ErrorKind::Estimation, "a latent class probability is below 1e-4");
  const Eigen::Matrix2d B = Minv * mats.m_x1x3;  // B(k, j) = Pr(X* = k, X3 = j)
  Recovered r{};
  r.pr_xstar = pi[1];
  for (int k = 0; k < 2; ++k) {
    r.pr_x[0][k] = M(1, k);
    r.pr_x[1][k] = x2_fix == 1 ? d2[k] : 1.0 - d2[k];
    r.pr_x[2][k] = B(k, 1) / pi[k];
  }
  return r;
}

void swap_classes(Eigen::Matrix2d& M, Eigen::Vector2d& d) {
  M.col(0).swap(M.col(1));
  std::swap(d[0], d[1]);
}

Recovered recover_ordered(const MrtMatrices& mats, Eigen::Matrix2d M, Eigen::Vector2d d,
                          int x2_fix, const OrderingRule& ordering) {
  Recovered r = recover(mats, M, d, x2_fix);
  if (ordering.satisfied(r.pr_x)) return r;
  swap_classes(M, d);
  Recovered s = recover(mats, M, d, x2_fix);
  return ordering.satisfied(s.pr_x) ? s : r;
}

void check_x2_fix(int x2_fix) {
  if (x2_fix != 0 && x2_fix != 1) fail(ErrorKind::Domain, "x2_fix must be 0 or 1");
}

std::vector<double*> all_values(MrtEstimate& e) {
  std::vector<double*> v{&e.pr_xstar};
  for (auto& row : e.pr_x_given_xstar)
    for (double& x : row) v.push_back(&x);
  return v;
}

}  // namespace

bool OrderingRule::satisfied(const Conditionals& pr_x) const {
  const auto& row = pr_x.at(static_cast<std::size_t>(question - 1));
  return direction == Direction::ClassOneHigher ? row[1] > row[0] : row[1] < row[0];
}

OrderingRule parse_ordering(const std::string& text) {
  // Forms: "x1-higher", "x2-lower", ...
  OrderingRule rule;
  if (text.size() >= 2 && text[0] == 'x' && text[1] >= '1' && text[1] <= '3') {
    rule.question = text[1] - '0';
    const std::string rest = text.substr(2);
    if (rest == "-higher" || rest == ":higher") return rule;
    if (rest == "-lower" || rest == ":lower") {
      rule.direction = OrderingRule::Direction::ClassOneLower;
      return rule;
    }
  }
  fail(ErrorKind::Config, "ordering must look like x1-higher or x2-lower, got '" + text + "'");
}

std::string to_string(const OrderingRule& rule) {
  return "x" + std::to_string(rule.question) +
         (rule.direction == OrderingRule::Direction::ClassOneHigher ? "-higher" : "-lower");
}

const char* to_string(MrtMethod method) noexcept {
  return method == MrtMethod::ClosedForm ? "closed-form" : "extreme";
}

std::array<double, 8> mrt_joint_probs(const MrtLatent& latent) {
  std::array<double, 8> p{};
  const double weight[2] = {1.0 - latent.pr_xstar, latent.pr_xstar};
  for (int x1 = 0; x1 < 2; ++x1)
    for (int x2 = 0; x2 < 2; ++x2)
      for (int x3 = 0; x3 < 2; ++x3) {
        double total = 0.0;
        for (int k = 0; k < 2; ++k) {
          double term = weight[k];
          const int xs[3] = {x1, x2, x3};
          for (int j = 0; j < 3; ++j)
            term *= xs[j] == 1 ? latent.pr_x[j][k] : 1.0 - latent.pr_x[j][k];
          total += term;
        }
        p[x1 * 4 + x2 * 2 + x3] = total;
      }
  return p;
}

MrtJoint mrt_expected_joint(const MrtLatent& latent, double n, int z_cell) {
  MrtJoint j;
  j.z_cell = z_cell;
  const auto p = mrt_joint_probs(latent);
  for (int c = 0; c < 8; ++c) j.counts[c] = n * p[c];
  j.n_cell = n;
  return j;
}

void validate(const MrtJoint& joint) {
  double total = 0.0;
  for (double c : joint.counts) {
    if (!(c >= 0.0) || !std::isfinite(c)) fail(ErrorKind::Domain, "joint counts must be nonnegative");
    total += c;
  }
  if (joint.n_cell <= 0.0) fail(ErrorKind::Domain, "covariate cell has no observations");
  if (std::abs(total - joint.n_cell) > 1e-9 * std::max(1.0, joint.n_cell))
    fail(ErrorKind::Domain, "joint counts do not sum to n_cell");
}

MrtMatrices build_matrices(const MrtJoint& joint, int x2_fix) {
  validate(joint);
  check_x2_fix(x2_fix);
  MrtMatrices m;
  const double n = joint.n_cell;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      m.m_x1x2x3(i, j) = joint.at(i, x2_fix, j) / n;
      m.m_x1x3(i, j) = (joint.at(i, 0, j) + joint.at(i, 1, j)) / n;
    }
  m.m_x1 = m.m_x1x3.rowwise().sum();
  return m;
}

RankTestResult rank_test(const MrtJoint& joint, int n_boot, std::uint64_t seed) {
  const MrtMatrices m = build_matrices(joint, 1);
  RankTestResult out;
  const auto n = static_cast<std::size_t>(std::llround(joint.n_cell));
  out.underpowered = n < 30;
  const double p1 = m.m_x1[1];
  const double p3 = m.m_x1x3.col(1).sum();
  out.statistic = static_cast<double>(n) * std::pow(m.m_x1x3.determinant(), 2);
  if (p1 <= 0.0 || p1 >= 1.0 || p3 <= 0.0 || p3 >= 1.0) {
    out.underpowered = true;
    out.p_value = 1.0;
    out.reject_rank1 = false;
    return out;
  }
  // Null model: X1 and X3 independent with the observed margins.
  const double c00 = (1 - p1) * (1 - p3);
  const double c01 = c00 + (1 - p1) * p3;
  const double c10 = c01 + p1 * (1 - p3);
  int exceed = 0;
  for (int b = 0; b < n_boot; ++b) {
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(b));
    double n00 = 0, n01 = 0, n10 = 0, n11 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double u = rng.uniform();
      if (u < c00) ++n00;
      else if (u < c01) ++n01;
      else if (u < c10) ++n10;
      else ++n11;
    }
    const double det = (n00 * n11 - n01 * n10) / (static_cast<double>(n) * static_cast<double>(n));
    if (static_cast<double>(n) * det * det >= out.statistic) ++exceed;
  }
  out.p_value = (1.0 + exceed) / (n_boot + 1.0);
  out.reject_rank1 = out.p_value < 0.05;
  return out;
}

MrtEstimate decompose_closed_form(const MrtJoint& joint, int x2_fix, const OrderingRule& ordering) {
  const MrtMatrices mats = build_matrices(joint, x2_fix);
  const double det13 = mats.m_x1x3.determinant();
  if (std::abs(det13) < 1e-14) fail(ErrorKind::Decomposition, "M_{X1,X3} is singular");
  const Eigen::Matrix2d A = mats.m_x1x2x3 * mats.m_x1x3.inverse();

  const double half_tr = A.trace() / 2.0;
  double disc = half_tr * half_tr - A.determinant();
  if (disc < -kDiscTol) fail(ErrorKind::Decomposition, "eigenvalues are complex");
  if (disc < 0.0) disc = 0.0;
  const double root = std::sqrt(disc);
  const Eigen::Vector2d lambda(half_tr - root, half_tr + root);
  const double gap = 2.0 * root;
  if (gap < kGapTol)
    fail(ErrorKind::NearDegenerate, "eigenvalues are (nearly) repeated; X2 does not separate the classes");

  Eigen::Matrix2d M;
  for (int k = 0; k < 2; ++k) {
    const Eigen::Vector2d v(A(0, 1), lambda[k] - A(0, 0));
    const Eigen::Vector2d w(lambda[k] - A(1, 1), A(1, 0));
    const Eigen::Vector2d e = v.norm() >= w.norm() ? v : w;
    const double s = e.sum();
    if (std::abs(s) < 1e-12 * std::max(e.norm(), 1e-300))
      fail(ErrorKind::Decomposition, "eigenvector cannot be normalized to a distribution");
    M.col(k) = e / s;
  }

  const Recovered r = recover_ordered(mats, M, lambda, x2_fix, ordering);
  MrtEstimate out;
  out.method = MrtMethod::ClosedForm;
  out.eigen_gap = gap;
  out.pr_xstar = r.pr_xstar;
  out.pr_x_given_xstar = r.pr_x;
  for (double* v : all_values(out)) {
    if (*v < -kClipSlack || *v > 1.0 + kClipSlack)
      fail(ErrorKind::Estimation,
           "closed-form probability outside [0,1] beyond slack; use the extreme estimator");
    if (*v < 0.0 || *v > 1.0) {
      *v = std::clamp(*v, 0.0, 1.0);
      out.clipped = true;
    }
  }
  return out;
}

MrtEstimate decompose_extreme(const MrtJoint& joint, int x2_fix, const OrderingRule& ordering) {
  const MrtMatrices mats = build_matrices(joint, x2_fix);
  if (std::abs(mats.m_x1x3.determinant()) < 1e-14)
    fail(ErrorKind::Decomposition, "M_{X1,X3} is singular");
  const Eigen::Matrix2d A = mats.m_x1x2x3 * mats.m_x1x3.inverse();

  // x = (p10, p11, p20, p21): Pr(X1=1 | k) and Pr(X2=x2_fix | k).
  auto misfit = [&](std::span<const double> x) {
    Eigen::Matrix2d M;
    M << 1.0 - x[0], 1.0 - x[1], x[0], x[1];
    const double det = M.determinant();
    if (std::abs(det) < 1e-12) return 1e6;
    const Eigen::Matrix2d D = Eigen::Vector2d(x[2], x[3]).asDiagonal();
    return (A - M * D * M.inverse()).squaredNorm();
  };
  auto objective = [&](std::span<const double> x) {
    const double gap = std::abs(x[2] - x[3]);
    const double pen = gap < kDistinct ? 1e2 * (kDistinct - gap) * (kDistinct - gap) : 0.0;
    return misfit(x) + pen;
  };

  std::vector<std::vector<double>> starts;
  for (double p10 : {0.1, 0.35})
    for (double p11 : {0.65, 0.9})
      for (auto [a, b] : {std::pair{0.25, 0.75}, {0.75, 0.25}, {0.1, 0.6}, {0.6, 0.1}})
        starts.push_back({p10, p11, a, b});
  try {
    const MrtEstimate cf = decompose_closed_form(joint, x2_fix, ordering);
    std::vector<double> x(4);
    for (int k = 0; k < 2; ++k) {
      x[k] = cf.pr_x_given_xstar[0][k];
      const double p2 = cf.pr_x_given_xstar[1][k];
      x[2 + k] = x2_fix == 1 ? p2 : 1.0 - p2;
    }
    starts.push_back(std::move(x));
  } catch (const Error&) {
  }

  const optim::Box box{{0, 0, 0, 0}, {1, 1, 1, 1}};
  optim::NelderMeadOptions opt;
  opt.f_abs_tol = 1e-20;
  opt.f_rel_tol = 1e-12;
  opt.x_tol = 1e-10;
  opt.initial_step = 0.05;
  const auto best = optim::multi_start_in_box(objective, box, starts, opt);
  if (!std::isfinite(best.value) || std::abs(best.x[2] - best.x[3]) < kDistinct ||
      std::abs(best.x[1] - best.x[0]) < kDistinct)
    fail(ErrorKind::Estimation, "extreme estimator did not reach a valid solution (objective " +
                                    std::to_string(best.value) + ")");

  Eigen::Matrix2d M;
  M << 1.0 - best.x[0], 1.0 - best.x[1], best.x[0], best.x[1];
  const Recovered r =
      recover_ordered(mats, M, Eigen::Vector2d(best.x[2], best.x[3]), x2_fix, ordering);
  MrtEstimate out;
  out.method = MrtMethod::Extreme;
  out.eigen_gap = std::abs(best.x[2] - best.x[3]);
  out.objective = misfit(best.x);
  out.pr_xstar = r.pr_xstar;
  out.pr_x_given_xstar = r.pr_x;
  for (double* v : all_values(out)) {
    if (*v < 0.0 || *v > 1.0) {
      *v = std::clamp(*v, 0.0, 1.0);
      out.clipped = true;
    }
  }
  return out;
}

double aggregate_unconditional(const std::vector<std::pair<MrtEstimate, double>>& cells) {
  if (cells.empty()) fail(ErrorKind::Domain, "no cells to aggregate");
  double total_w = 0.0, value = 0.0;
  for (const auto& [est, w] : cells) {
    if (!(w >= 0.0)) fail(ErrorKind::Domain, "cell weights must be nonnegative");
    total_w += w;
    value += w * est.pr_xstar;
  }
  if (std::abs(total_w - 1.0) > 1e-12) fail(ErrorKind::Domain, "cell weights do not sum to 1");
  return value;
}

MisreportRates misreport_rates(const MrtEstimate& estimate, int direct_question_index,
                               int affirmative_is_truth_for) {
  if (direct_question_index < 1 || direct_question_index > 3)
    fail(ErrorKind::Domain, "direct question index must be 1, 2 or 3");
  if (affirmative_is_truth_for != 0 && affirmative_is_truth_for != 1)
    fail(ErrorKind::Domain, "affirmative_is_truth_for must be 0 or 1");
  const auto& row = estimate.pr_x_given_xstar[static_cast<std::size_t>(direct_question_index - 1)];
  if (affirmative_is_truth_for == 0) return {row[1], 1.0 - row[0]};
  return {1.0 - row[1], row[0]};
}

}  // namespace elicit
