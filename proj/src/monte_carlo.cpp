#include "monte_carlo.hpp"

#include <cmath>
#include <optional>
#include <sstream>

#include <Eigen/Dense>

#include "error.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "stats.hpp"

namespace elicit {

namespace {

constexpr std::array<std::pair<int, int>, 3> kPairs{{{0, 1}, {0, 2}, {1, 2}}};

double threshold(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  return stats::normal_quantile(p);
}

Eigen::Matrix3d cholesky_of(const std::array<double, 3>& r) {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  for (std::size_t k = 0; k < 3; ++k) {
    const auto [a, b] = kPairs[k];
    R(a, b) = R(b, a) = r[k];
  }
  Eigen::LLT<Eigen::Matrix3d> llt(R);
  if (llt.info() != Eigen::Success)
    fail(ErrorKind::Design, "copula correlation matrix is not positive definite");
  return llt.matrixL();
}

struct ClassGen {
  std::array<double, 3> p{};
  std::array<double, 3> h{};
  Eigen::Matrix3d L = Eigen::Matrix3d::Identity();
};

struct CellGen {
  double pi = 0.0;
  ClassGen cls[2];
};

std::vector<CellGen> discrete_generators(const McDesign& d) {
  std::vector<CellGen> out;
  const double sigma = d.kind == McDesign::Kind::DiscreteZCorrelated ? d.sigma : 0.0;
  for (const auto& cell : d.discrete.cells) {
    CellGen g;
    g.pi = cell.pr_xstar;
    for (int k = 0; k < 2; ++k) {
      for (int j = 0; j < 3; ++j) {
        g.cls[k].p[j] = cell.pr_x[j][k];
        g.cls[k].h[j] = threshold(cell.pr_x[j][k]);
      }
      if (sigma != 0.0) g.cls[k].L = cholesky_of(copula_correlations(g.cls[k].p, sigma, d.copula));
    }
    out.push_back(g);
  }
  return out;
}

std::array<double, 3> correlated_normals(Rng& rng, const Eigen::Matrix3d& L) {
  const Eigen::Vector3d e(rng.normal(), rng.normal(), rng.normal());
  const Eigen::Vector3d z = L * e;
  return {z[0], z[1], z[2]};
}

double link(const std::vector<double>& coef, bool intercept, std::span<const double> z) {
  double t = 0.0;
  std::size_t c = 0;
  if (intercept) t += coef[c++];
  for (double v : z) t += coef[c++] * v;
  return 1.0 / (1.0 + std::exp(-t));
}

std::string cell_suffix(int z) { return ",z=" + std::to_string(z) + ")"; }

std::vector<std::string> discrete_parameters(std::size_t cells) {
  std::vector<std::string> names;
  for (std::size_t z = 0; z < cells; ++z) {
    names.push_back("Pr(X*=1|z=" + std::to_string(z) + ")");
    for (int j = 1; j <= 3; ++j)
      for (int k = 0; k < 2; ++k)
        names.push_back("Pr(X" + std::to_string(j) + "=1|X*=" + std::to_string(k) +
                        cell_suffix(static_cast<int>(z)));
  }
  names.push_back("Pr(X*=1)");
  return names;
}

std::vector<double> discrete_truth(const DiscreteTruth& t) {
  std::vector<double> v;
  double agg = 0.0;
  for (std::size_t z = 0; z < t.cells.size(); ++z) {
    const auto& c = t.cells[z];
    v.push_back(c.pr_xstar);
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 2; ++k) v.push_back(c.pr_x[j][k]);
    agg += t.z_probs[z] * c.pr_xstar;
  }
  v.push_back(agg);
  return v;
}

std::vector<std::string> mle_parameters(const MleParams& p) {
  static const char* blocks[7] = {"rho", "alpha1", "alpha0", "beta1", "beta0", "gamma1", "gamma0"};
  std::vector<std::string> names;
  const std::size_t q = p.block_size();
  for (const char* b : blocks)
    for (std::size_t a = 0; a < q; ++a)
      names.push_back(q == 1 ? std::string(b) : std::string(b) + "[" + std::to_string(a) + "]");
  return names;
}

using RepValues = std::optional<std::vector<double>>;

}  // namespace

const char* to_string(CopulaMode mode) noexcept {
  return mode == CopulaMode::Latent ? "gaussian-copula/latent-correlation"
                                    : "gaussian-copula/binary-correlation";
}

CopulaMode parse_copula_mode(const std::string& text) {
  if (text == "latent") return CopulaMode::Latent;
  if (text == "binary") return CopulaMode::Binary;
  fail(ErrorKind::Config, "copula must be 'latent' or 'binary', got '" + text + "'");
}

double binary_correlation(double pa, double pb, double r) {
  const double p11 = stats::bivariate_normal_cdf(threshold(pa), threshold(pb), r);
  return (p11 - pa * pb) / std::sqrt(pa * (1 - pa) * pb * (1 - pb));
}

std::array<double, 3> copula_correlations(const std::array<double, 3>& m, double sigma,
                                          CopulaMode mode) {
  if (mode == CopulaMode::Latent) return {sigma, sigma, sigma};
  std::array<double, 3> r{};
  for (std::size_t k = 0; k < 3; ++k) {
    const auto [a, b] = kPairs[k];
    const double pa = m[a], pb = m[b];
    if (pa <= 0 || pa >= 1 || pb <= 0 || pb >= 1) {
      if (sigma != 0.0) fail(ErrorKind::Design, "binary correlation undefined for a degenerate margin");
      continue;
    }
    const double s = std::sqrt(pa * (1 - pa) * pb * (1 - pb));
    const double upper = (std::min(pa, pb) - pa * pb) / s;
    const double lower = (std::max(0.0, pa + pb - 1) - pa * pb) / s;
    std::ostringstream pair;
    pair << "pair (X" << a + 1 << ",X" << b + 1 << ") with margins " << pa << ", " << pb;
    if (sigma > upper)
      fail(ErrorKind::Design, "sigma exceeds the upper Frechet bound " + std::to_string(upper) +
                                  " for " + pair.str());
    if (sigma < lower)
      fail(ErrorKind::Design, "sigma is below the lower Frechet bound " + std::to_string(lower) +
                                  " for " + pair.str());
    double lo = -0.999999, hi = 0.999999;
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      (binary_correlation(pa, pb, mid) < sigma ? lo : hi) = mid;
    }
    r[k] = 0.5 * (lo + hi);
  }
  return r;
}

const char* to_string(McDesign::Kind kind) noexcept {
  switch (kind) {
    case McDesign::Kind::DiscreteZ: return "discrete";
    case McDesign::Kind::ContinuousZ: return "continuous";
    case McDesign::Kind::DiscreteZCorrelated: return "discrete-correlated";
    case McDesign::Kind::ContinuousZCorrelated: return "continuous-correlated";
  }
  return "unknown";
}

McDesign::Kind parse_design_kind(const std::string& text) {
  for (auto k : {McDesign::Kind::DiscreteZ, McDesign::Kind::ContinuousZ,
                 McDesign::Kind::DiscreteZCorrelated, McDesign::Kind::ContinuousZCorrelated})
    if (text == to_string(k)) return k;
  fail(ErrorKind::Config, "unknown design '" + text + "'");
}

bool is_discrete(McDesign::Kind kind) {
  return kind == McDesign::Kind::DiscreteZ || kind == McDesign::Kind::DiscreteZCorrelated;
}

McDesign reference_discrete_design() {
  McDesign d;
  d.kind = McDesign::Kind::DiscreteZ;
  MrtLatent z0, z1;
  z0.pr_xstar = 0.378;
  z0.pr_x = {{{0.269, 0.881}, {0.269, 0.731}, {0.269, 0.881}}};
  z1.pr_xstar = 0.818;
  z1.pr_x = {{{0.310, 0.900}, {0.289, 0.750}, {0.289, 0.891}}};
  d.discrete = {{0.4, 0.6}, {z0, z1}};
  return d;
}

McDesign reference_continuous_design() {
  McDesign d;
  d.kind = McDesign::Kind::ContinuousZ;
  MleParams p = MleParams::zeros(1, false);
  p.rho = {1};
  p.alpha1 = {1};
  p.alpha0 = {-1};
  p.beta1 = {2};
  p.beta0 = {-2};
  p.gamma1 = {2};
  p.gamma0 = {-2};
  d.continuous = p;
  d.z_dim = 1;
  return d;
}

void validate(const McDesign& d) {
  if (!(d.sigma >= 0.0 && d.sigma <= 0.5)) fail(ErrorKind::Design, "sigma must lie in [0, 0.5]");
  if (d.n_reps < 1) fail(ErrorKind::Design, "need at least one replication");
  if (d.n < 2) fail(ErrorKind::Design, "sample size must be at least 2");
  if (d.x2_fix != 0 && d.x2_fix != 1) fail(ErrorKind::Design, "x2_fix must be 0 or 1");
  if (is_discrete(d.kind)) {
    const auto& t = d.discrete;
    if (t.cells.empty() || t.cells.size() != t.z_probs.size())
      fail(ErrorKind::Design, "discrete design needs one latent cell per z value");
    double s = 0.0;
    for (double w : t.z_probs) {
      if (!(w >= 0.0)) fail(ErrorKind::Design, "z probabilities must be nonnegative");
      s += w;
    }
    if (std::abs(s - 1.0) > 1e-12) fail(ErrorKind::Design, "z probabilities must sum to 1");
    for (const auto& c : t.cells) {
      if (!(c.pr_xstar >= 0 && c.pr_xstar <= 1)) fail(ErrorKind::Design, "Pr(X*) outside [0,1]");
      for (const auto& row : c.pr_x)
        for (double v : row)
          if (!(v >= 0 && v <= 1)) fail(ErrorKind::Design, "response probability outside [0,1]");
    }
  } else {
    if (d.continuous.block_size() != d.z_dim + (d.continuous.intercept ? 1 : 0))
      fail(ErrorKind::Design, "coefficient blocks do not match z_dim");
    if (d.kind == McDesign::Kind::ContinuousZCorrelated && d.copula == CopulaMode::Binary &&
        d.sigma != 0.0)
      fail(ErrorKind::Design, "binary-correlation targeting is only available for discrete designs");
  }
}

std::vector<MrtDiscreteRecord> simulate_mrt_discrete(const McDesign& design, std::size_t n,
                                                     std::uint64_t seed, std::uint64_t rep) {
  validate(design);
  if (!is_discrete(design.kind)) fail(ErrorKind::Design, "not a discrete design");
  const auto gens = discrete_generators(design);
  std::vector<MrtDiscreteRecord> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = Rng::stream(seed, rep, i);
    auto& r = out[i];
    r.z = static_cast<int>(rng.categorical(design.discrete.z_probs));
    const CellGen& g = gens[static_cast<std::size_t>(r.z)];
    r.xstar = rng.bernoulli(g.pi) ? 1 : 0;
    const ClassGen& c = g.cls[r.xstar];
    const auto z = correlated_normals(rng, c.L);
    r.x1 = z[0] < c.h[0];
    r.x2 = z[1] < c.h[1];
    r.x3 = z[2] < c.h[2];
  }
  return out;
}

MrtContinuousSample simulate_mrt_continuous(const McDesign& design, std::size_t n,
                                            std::uint64_t seed, std::uint64_t rep) {
  validate(design);
  if (is_discrete(design.kind)) fail(ErrorKind::Design, "not a continuous design");
  const auto& p = design.continuous;
  const double sigma = design.kind == McDesign::Kind::ContinuousZCorrelated ? design.sigma : 0.0;
  const Eigen::Matrix3d L = sigma == 0.0 ? Eigen::Matrix3d::Identity()
                                         : cholesky_of({sigma, sigma, sigma});
  const std::vector<double>* blocks[2][3] = {{&p.alpha0, &p.beta0, &p.gamma0},
                                             {&p.alpha1, &p.beta1, &p.gamma1}};
  MrtContinuousSample s;
  s.records.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = Rng::stream(seed, rep, i);
    auto& r = s.records[i];
    r.z.resize(design.z_dim);
    for (double& v : r.z) v = rng.uniform();
    const int k = rng.bernoulli(link(p.rho, p.intercept, r.z)) ? 1 : 0;
    const auto z = correlated_normals(rng, L);
    int* xs[3] = {&r.x1, &r.x2, &r.x3};
    for (int j = 0; j < 3; ++j)
      *xs[j] = stats::normal_cdf(z[j]) < link(*blocks[k][j], p.intercept, r.z);
  }
  return s;
}

std::vector<MrtJoint> joints_by_cell(const std::vector<MrtDiscreteRecord>& records) {
  std::map<int, MrtJoint> cells;
  for (const auto& r : records) {
    auto& j = cells[r.z];
    j.z_cell = r.z;
    j.at(r.x1, r.x2, r.x3) += 1.0;
    j.n_cell += 1.0;
  }
  std::vector<MrtJoint> out;
  for (auto& [z, j] : cells) out.push_back(j);
  return out;
}

const char* to_string(McEstimator e) noexcept {
  switch (e) {
    case McEstimator::ClosedForm: return "closed-form";
    case McEstimator::Extreme: return "extreme";
    case McEstimator::Mle: return "mle";
    case McEstimator::RankTest: return "rank-test";
  }
  return "unknown";
}

McEstimator parse_estimator(const std::string& text) {
  for (auto e : {McEstimator::ClosedForm, McEstimator::Extreme, McEstimator::Mle,
                 McEstimator::RankTest})
    if (text == to_string(e)) return e;
  fail(ErrorKind::Config, "unknown estimator '" + text + "'");
}

const McRow& McResult::row(const std::string& estimator, const std::string& parameter) const {
  for (const auto& r : rows)
    if (r.estimator == estimator && r.parameter == parameter) return r;
  fail(ErrorKind::Domain, "no Monte Carlo row " + estimator + "/" + parameter);
}

McResult run_monte_carlo(const McDesign& design, const std::set<McEstimator>& estimators) {
  validate(design);
  const bool discrete = is_discrete(design.kind);
  for (auto e : estimators) {
    if (discrete && e == McEstimator::Mle)
      fail(ErrorKind::Design, "the MLE estimator needs a continuous design");
    if (!discrete && e != McEstimator::Mle)
      fail(ErrorKind::Design, std::string(to_string(e)) + " needs a discrete design");
  }

  const std::vector<McEstimator> order(estimators.begin(), estimators.end());
  const std::size_t n_cells = discrete ? design.discrete.cells.size() : 0;

  std::vector<std::vector<std::string>> names(order.size());
  std::vector<std::vector<double>> truths(order.size());
  for (std::size_t e = 0; e < order.size(); ++e) {
    switch (order[e]) {
      case McEstimator::ClosedForm:
      case McEstimator::Extreme:
        names[e] = discrete_parameters(n_cells);
        truths[e] = discrete_truth(design.discrete);
        break;
      case McEstimator::RankTest:
        for (std::size_t z = 0; z < n_cells; ++z) {
          names[e].push_back("reject_rank1|z=" + std::to_string(z));
          truths[e].push_back(1.0);
        }
        break;
      case McEstimator::Mle:
        names[e] = mle_parameters(design.continuous);
        truths[e] = design.continuous.flat();
        break;
    }
  }

  const auto reps = static_cast<std::size_t>(design.n_reps);
  std::vector<std::vector<RepValues>> results(reps, std::vector<RepValues>(order.size()));

  parallel_for(reps, [&](std::size_t rep) {
    if (discrete) {
      const auto records = simulate_mrt_discrete(design, design.n, design.seed, rep);
      const auto joints = joints_by_cell(records);
      const bool all_cells = joints.size() == n_cells;
      for (std::size_t e = 0; e < order.size(); ++e) {
        if (!all_cells) continue;
        try {
          std::vector<double> v;
          if (order[e] == McEstimator::RankTest) {
            for (std::size_t z = 0; z < n_cells; ++z) {
              const auto seed = Rng::stream(design.seed, rep, 1000003 + z).next();
              v.push_back(rank_test(joints[z], design.rank_boot, seed).reject_rank1 ? 1.0 : 0.0);
            }
          } else {
            double agg = 0.0;
            for (std::size_t z = 0; z < n_cells; ++z) {
              const auto est = order[e] == McEstimator::ClosedForm
                                   ? decompose_closed_form(joints[z], design.x2_fix, design.ordering)
                                   : decompose_extreme(joints[z], design.x2_fix, design.ordering);
              v.push_back(est.pr_xstar);
              for (int j = 0; j < 3; ++j)
                for (int k = 0; k < 2; ++k) v.push_back(est.pr_x_given_xstar[j][k]);
              agg += joints[z].n_cell / static_cast<double>(design.n) * est.pr_xstar;
            }
            v.push_back(agg);
          }
          results[rep][e] = std::move(v);
        } catch (const Error&) {
        }
      }
    } else {
      const auto sample = simulate_mrt_continuous(design, design.n, design.seed, rep);
      MleOptions opt;
      opt.intercept = design.continuous.intercept;
      opt.compute_se = false;
      try {
        results[rep][0] = mle_fit(sample, design.ordering, design.seed + rep, opt).params.flat();
      } catch (const Error&) {
      }
    }
  });

  McResult out;
  out.mechanism = discrete ? (design.kind == McDesign::Kind::DiscreteZCorrelated
                                  ? to_string(design.copula)
                                  : "conditionally independent")
                           : (design.kind == McDesign::Kind::ContinuousZCorrelated
                                  ? to_string(design.copula)
                                  : "conditionally independent");
  for (std::size_t e = 0; e < order.size(); ++e) {
    int failed = 0;
    for (std::size_t rep = 0; rep < reps; ++rep) failed += !results[rep][e].has_value();
    for (std::size_t p = 0; p < names[e].size(); ++p) {
      std::vector<double> vals;
      for (std::size_t rep = 0; rep < reps; ++rep)
        if (results[rep][e]) vals.push_back((*results[rep][e])[p]);
      McRow row;
      row.estimator = to_string(order[e]);
      row.parameter = names[e][p];
      row.truth = truths[e][p];
      row.mean = vals.empty() ? std::nan("") : stats::mean(vals);
      row.sd = stats::sd(vals);
      row.median = vals.empty() ? std::nan("") : stats::median(vals);
      row.n_ok = static_cast<int>(vals.size());
      row.n_failed = failed;
      out.draws[row.estimator + "/" + row.parameter] = std::move(vals);
      out.rows.push_back(std::move(row));
    }
  }
  return out;
}

}  // namespace elicit
