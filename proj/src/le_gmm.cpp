#include "le_gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "error.hpp"
#include "optim.hpp"
#include "rng.hpp"
#include "stats.hpp"

namespace elicit {

namespace {

constexpr double kMaxRate = 0.999;

LeParams params_from(MisreportSpec spec, std::span<const double> x) {
  LeParams p;
  p.spec = spec;
  p.delta = x[0];
  switch (spec) {
    case MisreportSpec::Unrestricted:
      p.p0 = x[1];
      p.p1 = x[2];
      break;
    case MisreportSpec::EqualP:
      p.p0 = p.p1 = x[1];
      break;
    case MisreportSpec::NoMisreport:
      break;
    case MisreportSpec::Strategic:
      p.p_strategic = x[1];
      break;
  }
  return p;
}

// The relaxed box lets rates go negative so the J statistic keeps its
// chi-square limit when a true rate sits on zero.
constexpr double kRelaxedRateFloor = -0.5;

optim::Box box_for(MisreportSpec spec, bool relaxed = false) {
  const int d = free_parameters(spec);
  optim::Box box{std::vector<double>(d, relaxed ? kRelaxedRateFloor : 0.0),
                 std::vector<double>(d, kMaxRate)};
  box.lower[0] = 0.0;
  box.upper[0] = 1.0;
  return box;
}

void forward_into(const LeParams& p, std::span<const double> control, std::span<double> out) {
  if (p.spec == MisreportSpec::Strategic)
    le_forward_strategic_unchecked(p.delta, p.p_strategic, control, out);
  else
    le_forward_unchecked(p.delta, p.p0, p.p1, control, out);
}

std::vector<double> all_moments(const EmpiricalDistributions& data, const LeParams& theta) {
  std::vector<double> m(data.treatment.probs.size());
  forward_into(theta, data.control.probs, m);
  for (std::size_t j = 0; j < m.size(); ++j) m[j] -= data.treatment.probs[j];
  return m;
}

Eigen::VectorXd kept_moments(const std::vector<double>& all, int dropped) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(all.size()) - 1);
  Eigen::Index k = 0;
  for (std::size_t j = 0; j < all.size(); ++j)
    if (static_cast<int>(j) != dropped) v[k++] = all[j];
  return v;
}

// Asymptotic covariance of sqrt(n) * psi-bar at theta:
// F Sigma0 F' / c0 + Sigma1 / c1, F the derivative of the forward map in P0.
Eigen::MatrixXd moment_covariance(const EmpiricalDistributions& data, const LeParams& theta) {
  const auto J0 = static_cast<Eigen::Index>(data.control.probs.size());
  const Eigen::Index J1 = J0 + 1;
  std::vector<double> zero(J0, 0.0), base(J1), col(J1);
  forward_into(theta, zero, base);
  Eigen::MatrixXd F(J1, J0);
  for (Eigen::Index i = 0; i < J0; ++i) {
    std::vector<double> e(J0, 0.0);
    e[i] = 1.0;
    forward_into(theta, e, col);
    for (Eigen::Index r = 0; r < J1; ++r) F(r, i) = col[r] - base[r];
  }
  auto multinomial = [](const std::vector<double>& p) {
    const auto k = static_cast<Eigen::Index>(p.size());
    Eigen::Map<const Eigen::VectorXd> v(p.data(), k);
    Eigen::MatrixXd s = -v * v.transpose();
    s.diagonal() += v;
    return s;
  };
  return F * multinomial(data.control.probs) * F.transpose() / data.c0 +
         multinomial(data.treatment.probs) / data.c1;
}

Eigen::MatrixXd drop_row_col(const Eigen::MatrixXd& s, int dropped) {
  const Eigen::Index k = s.rows() - 1;
  Eigen::MatrixXd out(k, k);
  for (Eigen::Index i = 0, r = 0; i < s.rows(); ++i) {
    if (i == dropped) continue;
    for (Eigen::Index j = 0, c = 0; j < s.cols(); ++j) {
      if (j == dropped) continue;
      out(r, c++) = s(i, j);
    }
    ++r;
  }
  return out;
}

Eigen::MatrixXd optimal_weight(Eigen::MatrixXd s, bool& ridged) {
  const Eigen::Index k = s.rows();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(s);
  const auto& sv = svd.singularValues();
  const double cond = sv[k - 1] > 0.0 ? sv[0] / sv[k - 1] : std::numeric_limits<double>::infinity();
  ridged = false;
  if (!(cond <= 1e12)) {
    ridged = true;
    const double trace = s.trace();
    const double ridge = trace > 0.0 ? 1e-10 * trace / static_cast<double>(k) : 1e-10;
    s.diagonal().array() += ridge;
  }
  return s.ldlt().solve(Eigen::MatrixXd::Identity(k, k));
}

struct Fit {
  std::vector<double> x;
  double value = 0.0;
  bool converged = false;
};

Fit minimize(const EmpiricalDistributions& data, const MomentSpec& spec, const Eigen::MatrixXd& W,
             bool relaxed = false) {
  const optim::Box box = box_for(spec.spec, relaxed);
  auto objective = [&](std::span<const double> x) {
    const Eigen::VectorXd m = kept_moments(all_moments(data, params_from(spec.spec, x)),
                                           spec.dropped_index);
    return m.dot(W * m);
  };
  optim::NelderMeadOptions opt;
  opt.f_abs_tol = 1e-20;
  opt.f_rel_tol = 1e-12;
  opt.x_tol = 1e-10;
  auto r = optim::multi_start_in_box(objective, box, optim::corner_lattice(box), opt);
  return {r.x, r.value, r.converged};
}

std::vector<double> asymptotic_se(const EmpiricalDistributions& data, const MomentSpec& spec,
                                  const std::vector<double>& x, const Eigen::MatrixXd& W,
                                  std::size_t n) {
  const auto d = static_cast<Eigen::Index>(x.size());
  const Eigen::Index k = W.rows();
  Eigen::MatrixXd G(k, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    auto up = x, down = x;
    const double h = 1e-6;
    up[i] += h;
    down[i] -= h;
    const Eigen::VectorXd mu =
        kept_moments(all_moments(data, params_from(spec.spec, up)), spec.dropped_index);
    const Eigen::VectorXd md =
        kept_moments(all_moments(data, params_from(spec.spec, down)), spec.dropped_index);
    G.col(i) = (mu - md) / (2.0 * h);
  }
  const Eigen::MatrixXd info = G.transpose() * W * G;
  std::vector<double> se(x.size(), std::nan(""));
  Eigen::FullPivLU<Eigen::MatrixXd> lu(info);
  if (!lu.isInvertible()) return se;
  const Eigen::MatrixXd cov = lu.inverse() / static_cast<double>(n);
  for (Eigen::Index i = 0; i < d; ++i)
    if (cov(i, i) >= 0.0) se[i] = std::sqrt(cov(i, i));
  return se;
}

}  // namespace

int free_parameters(MisreportSpec spec) {
  switch (spec) {
    case MisreportSpec::Unrestricted: return 3;
    case MisreportSpec::EqualP: return 2;
    case MisreportSpec::NoMisreport: return 1;
    case MisreportSpec::Strategic: return 2;
  }
  return 0;
}

std::vector<double> moment_values(const EmpiricalDistributions& data, const LeParams& theta) {
  if (theta.spec != MisreportSpec::Strategic && !(theta.p0 < 1.0))
    fail(ErrorKind::Domain, "moments need p0 < 1");
  if (data.n0 == 0 || data.n1 == 0) fail(ErrorKind::Domain, "both groups must be nonempty");
  return all_moments(data, theta);
}

std::vector<double> moment_values(const LeSample& sample, const LeParams& theta) {
  return moment_values(empirical_distributions(sample), theta);
}

GmmResult gmm_estimate(const EmpiricalDistributions& data, std::size_t n, const MomentSpec& spec) {
  const int J = data.control.j_count;
  if (J < 3) fail(ErrorKind::Identification, "GMM needs at least three nonsensitive items");
  if (spec.j_count != J) fail(ErrorKind::Domain, "moment spec J does not match the data");
  if (spec.dropped_index < 0 || spec.dropped_index > J + 1)
    fail(ErrorKind::Domain, "dropped moment index out of range");
  if (data.n0 == 0 || data.n1 == 0) fail(ErrorKind::Domain, "both groups must be nonempty");

  const Eigen::Index k = J + 1;
  const Fit first = minimize(data, spec, Eigen::MatrixXd::Identity(k, k));
  const LeParams theta1 = params_from(spec.spec, first.x);

  GmmResult res;
  res.weight_matrix = optimal_weight(
      drop_row_col(moment_covariance(data, theta1), spec.dropped_index), res.ridge_regularized);
  const Fit second = minimize(data, spec, res.weight_matrix);

  res.theta_hat = params_from(spec.spec, second.x);
  res.n = n;
  res.dropped_index = spec.dropped_index;
  res.converged = second.converged;
  double value = second.value;
  bool on_floor = false;
  for (std::size_t i = 1; i < second.x.size(); ++i) on_floor = on_floor || second.x[i] < 1e-8;
  if (on_floor) {
    const Fit relaxed = minimize(data, spec, res.weight_matrix, true);
    value = std::min(value, relaxed.value);
  }
  res.t_stat = std::max(0.0, static_cast<double>(n) * value);
  res.dof = static_cast<int>(k) - free_parameters(spec.spec);
  res.p_value = stats::chi2_sf(res.t_stat, res.dof);
  res.se = asymptotic_se(data, spec, second.x, res.weight_matrix, n);
  return res;
}

GmmResult gmm_estimate(const LeSample& sample, const MomentSpec& spec) {
  validate(sample);
  return gmm_estimate(empirical_distributions(sample), sample.records.size(), spec);
}

GmmResult j_test(const EmpiricalDistributions& data, std::size_t n, MisreportSpec spec,
                 DropPolicy policy) {
  const int J = data.control.j_count;
  if (policy.kind == DropPolicy::Kind::Fixed)
    return gmm_estimate(data, n, MomentSpec{J, spec, policy.index});
  GmmResult best;
  for (int drop = 0; drop <= J + 1; ++drop) {
    GmmResult r = gmm_estimate(data, n, MomentSpec{J, spec, drop});
    if (drop == 0 || r.p_value < best.p_value) best = std::move(r);
  }
  return best;
}

GmmResult j_test(const LeSample& sample, MisreportSpec spec, DropPolicy policy) {
  validate(sample);
  return j_test(empirical_distributions(sample), sample.records.size(), spec, policy);
}

ControlMeanTest control_mean_test(const LeSample& sample) {
  validate(sample);
  std::vector<double> y0;
  for (const auto& r : sample.records)
    if (r.t == 0) y0.push_back(r.y);
  ControlMeanTest out;
  out.mean = stats::mean(y0);
  out.se = stats::sd(y0) / std::sqrt(static_cast<double>(y0.size()));
  const double diff = out.mean - sample.j_count / 2.0;
  if (out.se > 0.0) {
    out.z = diff / out.se;
    out.p_value = 2.0 * stats::normal_cdf(-std::abs(out.z));
  } else {
    out.z = diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
    out.p_value = diff == 0.0 ? 1.0 : 0.0;
  }
  return out;
}

ModifiedLeCheck modified_le_check(const LeSample& sample, const std::vector<int>& direct,
                                  int n_boot, std::uint64_t seed) {
  validate(sample);
  std::vector<double> y0, y1;
  for (const auto& r : sample.records) (r.t == 0 ? y0 : y1).push_back(r.y);
  if (direct.size() != y0.size())
    fail(ErrorKind::Domain, "direct responses must align with the control records");
  for (int d : direct)
    if (d != 0 && d != 1) fail(ErrorKind::Domain, "direct responses must be 0 or 1");

  auto gap_of = [&](auto&& idx0, auto&& idx1, double& md, double& rate) {
    double s0 = 0.0, sd = 0.0, s1 = 0.0;
    for (std::size_t i = 0; i < y0.size(); ++i) {
      const std::size_t j = idx0(i);
      s0 += y0[j];
      sd += direct[j];
    }
    for (std::size_t i = 0; i < y1.size(); ++i) s1 += y1[idx1(i)];
    md = s1 / static_cast<double>(y1.size()) - s0 / static_cast<double>(y0.size());
    rate = sd / static_cast<double>(y0.size());
    return rate - md;
  };

  ModifiedLeCheck out;
  auto identity = [](std::size_t i) { return i; };
  out.gap = gap_of(identity, identity, out.mean_diff, out.direct_rate);

  std::vector<double> gaps;
  gaps.reserve(static_cast<std::size_t>(std::max(n_boot, 0)));
  for (int b = 0; b < n_boot; ++b) {
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(b));
    double md = 0.0, rate = 0.0;
    gaps.push_back(gap_of([&](std::size_t) { return rng.below(y0.size()); },
                          [&](std::size_t) { return rng.below(y1.size()); }, md, rate));
  }
  out.gap_se = n_boot >= 2 ? stats::sd(gaps) : std::nan("");
  return out;
}

}  // namespace elicit
