#include "mrt_mle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include <Eigen/Dense>

#include "error.hpp"
#include "optim.hpp"
#include "rng.hpp"

namespace elicit {

namespace {

struct LogisticTerms {
  double log_p;  // log g
  double log_q;  // log (1 - g)
  double p;      // g
};

inline LogisticTerms logistic(double t) {
  const double e = std::exp(-std::abs(t));
  const double softplus_abs = std::log1p(e);
  LogisticTerms r;
  if (t >= 0) {
    r.log_p = -softplus_abs;
    r.log_q = -t - softplus_abs;
    r.p = 1.0 / (1.0 + e);
  } else {
    r.log_p = t - softplus_abs;
    r.log_q = -softplus_abs;
    r.p = e / (1.0 + e);
  }
  return r;
}

// Design row for a record: optional leading 1, then z.
struct Design {
  std::size_t q = 0;
  std::vector<double> rows;  // n * q

  Design(const MrtContinuousSample& s, bool intercept) {
    const std::size_t dz = s.z_dim();
    q = dz + (intercept ? 1 : 0);
    rows.reserve(s.records.size() * q);
    for (const auto& r : s.records) {
      if (intercept) rows.push_back(1.0);
      rows.insert(rows.end(), r.z.begin(), r.z.end());
    }
  }
  std::span<const double> row(std::size_t i) const { return {rows.data() + i * q, q}; }
};

inline double dot(std::span<const double> a, const double* b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Sum of per-record log-likelihoods over flat theta; fills the gradient when non-null.
double loglik_flat(std::span<const double> theta, const MrtContinuousSample& s, const Design& d,
                   double* grad) {
  const std::size_t q = d.q;
  if (grad) std::fill(grad, grad + 7 * q, 0.0);
  double total = 0.0;
  // Block offsets: rho, alpha1, alpha0, beta1, beta0, gamma1, gamma0.
  const double* th = theta.data();
  for (std::size_t i = 0; i < s.records.size(); ++i) {
    const auto& rec = s.records[i];
    const auto z = d.row(i);
    const int x[3] = {rec.x1, rec.x2, rec.x3};
    const LogisticTerms w = logistic(dot(z, th));
    LogisticTerms g[2][3];
    double l[2] = {w.log_q, w.log_p};
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 2; ++k) {
        const std::size_t block = 1 + 2 * j + (k == 1 ? 0 : 1);
        g[k][j] = logistic(dot(z, th + block * q));
        l[k] += x[j] ? g[k][j].log_p : g[k][j].log_q;
      }
    const double m = std::max(l[0], l[1]);
    const double lse = m + std::log(std::exp(l[0] - m) + std::exp(l[1] - m));
    total += lse;
    if (grad) {
      const double post1 = std::exp(l[1] - lse);
      const double post[2] = {1.0 - post1, post1};
      const double c_rho = post1 - w.p;
      for (std::size_t a = 0; a < q; ++a) grad[a] += c_rho * z[a];
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 2; ++k) {
          const std::size_t block = 1 + 2 * j + (k == 1 ? 0 : 1);
          const double c = post[k] * (x[j] - g[k][j].p);
          double* gb = grad + block * q;
          for (std::size_t a = 0; a < q; ++a) gb[a] += c * z[a];
        }
    }
  }
  return total;
}

void check_block_sizes(const MleParams& p, std::size_t z_dim) {
  const std::size_t q = z_dim + (p.intercept ? 1 : 0);
  for (const auto* b : {&p.rho, &p.alpha1, &p.alpha0, &p.beta1, &p.beta0, &p.gamma1, &p.gamma0})
    if (b->size() != q)
      fail(ErrorKind::Domain, "coefficient block size does not match the covariate dimension");
}

double mean_link(const std::vector<double>& coef, const Design& d, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += logistic(dot(d.row(i), coef.data())).p;
  return s / static_cast<double>(n);
}

std::vector<MleParams> lattice_starts(std::size_t z_dim, bool intercept, int count) {
  std::vector<MleParams> out;
  for (double rho : {0.0, 1.0, -1.0})
    for (double sep : {1.0, 2.0}) {
      MleParams p = MleParams::zeros(z_dim, intercept);
      p.rho[0] = rho;
      p.alpha1[0] = p.beta1[0] = p.gamma1[0] = sep;
      p.alpha0[0] = p.beta0[0] = p.gamma0[0] = -sep;
      out.push_back(std::move(p));
    }
  out.resize(std::min<std::size_t>(out.size(), static_cast<std::size_t>(std::max(count, 0))));
  return out;
}

double clamp_logit(double p) {
  p = std::clamp(p, 0.01, 0.99);
  return std::log(p / (1.0 - p));
}

// Bins records by terciles of the first covariate, decomposes each bin, and
// fits every link to the per-bin logits by least squares on bin-mean z.
std::optional<MleParams> tercile_warm_start(const MrtContinuousSample& s, bool intercept,
                                            const OrderingRule& ordering) {
  const std::size_t n = s.records.size();
  const std::size_t dz = s.z_dim();
  if (n < 60 || dz == 0) return std::nullopt;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return s.records[a].z[0] < s.records[b].z[0];
  });
  const std::size_t q = dz + (intercept ? 1 : 0);
  Eigen::MatrixXd X(3, q);
  Eigen::MatrixXd Y(3, 7);
  for (int bin = 0; bin < 3; ++bin) {
    const std::size_t lo = n * bin / 3, hi = n * (bin + 1) / 3;
    MrtJoint joint;
    Eigen::VectorXd zbar = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dz));
    for (std::size_t t = lo; t < hi; ++t) {
      const auto& r = s.records[idx[t]];
      joint.at(r.x1, r.x2, r.x3) += 1.0;
      for (std::size_t a = 0; a < dz; ++a) zbar[static_cast<Eigen::Index>(a)] += r.z[a];
    }
    joint.n_cell = static_cast<double>(hi - lo);
    zbar /= joint.n_cell;
    MrtEstimate e;
    try {
      e = decompose_closed_form(joint, 1, ordering);
    } catch (const Error&) {
      return std::nullopt;
    }
    Eigen::Index c = 0;
    if (intercept) X(bin, c++) = 1.0;
    for (std::size_t a = 0; a < dz; ++a) X(bin, c++) = zbar[static_cast<Eigen::Index>(a)];
    Y(bin, 0) = clamp_logit(e.pr_xstar);
    for (int j = 0; j < 3; ++j) {
      Y(bin, 1 + 2 * j) = clamp_logit(e.pr_x_given_xstar[j][1]);
      Y(bin, 2 + 2 * j) = clamp_logit(e.pr_x_given_xstar[j][0]);
    }
  }
  const Eigen::MatrixXd coef = X.completeOrthogonalDecomposition().solve(Y);
  std::vector<double> flat(7 * q);
  for (int b = 0; b < 7; ++b)
    for (std::size_t a = 0; a < q; ++a)
      flat[b * q + a] = std::clamp(coef(static_cast<Eigen::Index>(a), b), -20.0, 20.0);
  return MleParams::from_flat(flat, intercept);
}

}  // namespace

MleParams MleParams::zeros(std::size_t z_dim, bool intercept) {
  const std::size_t q = z_dim + (intercept ? 1 : 0);
  MleParams p;
  p.intercept = intercept;
  for (auto* b : {&p.rho, &p.alpha1, &p.alpha0, &p.beta1, &p.beta0, &p.gamma1, &p.gamma0})
    b->assign(q, 0.0);
  return p;
}

MleParams MleParams::from_flat(std::span<const double> flat, bool intercept) {
  if (flat.size() % kBlocks != 0) fail(ErrorKind::Domain, "flat parameter length not a multiple of 7");
  const std::size_t q = flat.size() / kBlocks;
  MleParams p;
  p.intercept = intercept;
  std::size_t b = 0;
  for (auto* block : {&p.rho, &p.alpha1, &p.alpha0, &p.beta1, &p.beta0, &p.gamma1, &p.gamma0}) {
    block->assign(flat.begin() + static_cast<std::ptrdiff_t>(b * q),
                  flat.begin() + static_cast<std::ptrdiff_t>((b + 1) * q));
    ++b;
  }
  return p;
}

std::vector<double> MleParams::flat() const {
  std::vector<double> out;
  for (const auto* b : {&rho, &alpha1, &alpha0, &beta1, &beta0, &gamma1, &gamma0})
    out.insert(out.end(), b->begin(), b->end());
  return out;
}

MleParams MleParams::label_swapped() const {
  MleParams p = *this;
  std::swap(p.alpha0, p.alpha1);
  std::swap(p.beta0, p.beta1);
  std::swap(p.gamma0, p.gamma1);
  for (double& v : p.rho) v = -v;
  return p;
}

void validate(const MrtContinuousSample& sample) {
  if (sample.records.empty()) fail(ErrorKind::Domain, "continuous sample is empty");
  const std::size_t dz = sample.z_dim();
  for (std::size_t i = 0; i < sample.records.size(); ++i) {
    const auto& r = sample.records[i];
    for (int x : {r.x1, r.x2, r.x3})
      if (x != 0 && x != 1)
        fail(ErrorKind::Domain, "record " + std::to_string(i) + ": responses must be 0 or 1");
    if (r.z.size() != dz)
      fail(ErrorKind::Domain, "record " + std::to_string(i) + ": covariate dimension differs");
    for (double v : r.z)
      if (!std::isfinite(v)) fail(ErrorKind::Domain, "record " + std::to_string(i) + ": z not finite");
  }
}

double log_likelihood(const MleParams& params, const MrtContinuousSample& sample) {
  validate(sample);
  check_block_sizes(params, sample.z_dim());
  const Design d(sample, params.intercept);
  return loglik_flat(params.flat(), sample, d, nullptr);
}

std::vector<double> log_likelihood_gradient(const MleParams& params,
                                            const MrtContinuousSample& sample) {
  validate(sample);
  check_block_sizes(params, sample.z_dim());
  const Design d(sample, params.intercept);
  std::vector<double> g(7 * d.q);
  loglik_flat(params.flat(), sample, d, g.data());
  return g;
}

MleFit mle_fit(const MrtContinuousSample& sample, const OrderingRule& ordering, std::uint64_t seed,
               const MleOptions& options) {
  validate(sample);
  const std::size_t n = sample.records.size();
  const std::size_t dz = sample.z_dim();
  const Design d(sample, options.intercept);
  const std::size_t dim = 7 * d.q;
  const double inv_n = 1.0 / static_cast<double>(n);

  auto objective = [&](std::span<const double> x, std::span<double> g) {
    const double ll = loglik_flat(x, sample, d, g.data());
    for (double& v : g) v = -v * inv_n;
    return -ll * inv_n;
  };

  std::vector<MleParams> starts = lattice_starts(dz, options.intercept, options.lattice_starts);
  if (options.warm_start)
    if (auto w = tercile_warm_start(sample, options.intercept, ordering)) starts.push_back(*w);
  for (int r = 0; r < options.random_starts; ++r) {
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(r));
    std::vector<double> x(dim);
    for (double& v : x) v = rng.normal();
    starts.push_back(MleParams::from_flat(x, options.intercept));
  }
  for (const auto& s : options.extra_starts) {
    check_block_sizes(s, dz);
    if (s.intercept != options.intercept)
      fail(ErrorKind::Domain, "extra start intercept setting differs from the fit");
    starts.push_back(s);
  }

  MleFit fit;
  fit.small_sample = n < 100;
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> best_x;
  bool best_converged = false;
  for (const auto& s : starts) {
    auto r = optim::bfgs(objective, s.flat());
    ++fit.starts_tried;
    fit.starts_converged += r.converged;
    if (std::isfinite(r.value) && r.value < best) {
      best = r.value;
      best_x = r.x;
      best_converged = r.converged;
    }
  }
  if (fit.starts_converged == 0 || best_x.empty())
    fail(ErrorKind::Estimation, "MLE: no start converged");

  MleParams est = MleParams::from_flat(best_x, options.intercept);
  const std::vector<double>* blocks[3] = {&est.alpha1, &est.beta1, &est.gamma1};
  const std::vector<double>* blocks0[3] = {&est.alpha0, &est.beta0, &est.gamma0};
  const int qi = ordering.question - 1;
  const double m1 = mean_link(*blocks[qi], d, n);
  const double m0 = mean_link(*blocks0[qi], d, n);
  const bool ok = ordering.direction == OrderingRule::Direction::ClassOneHigher ? m1 > m0 : m1 < m0;
  if (!ok) est = est.label_swapped();

  fit.params = est;
  fit.converged = best_converged;
  fit.loglik = -best * static_cast<double>(n);

  fit.se = MleParams::from_flat(std::vector<double>(dim, std::nan("")), options.intercept);
  if (options.compute_se) {
    // Observed information by central differences of the analytic score.
    const std::vector<double> x = est.flat();
    Eigen::MatrixXd H(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    std::vector<double> gp(dim), gm(dim);
    for (std::size_t a = 0; a < dim; ++a) {
      auto xp = x, xm = x;
      const double h = 1e-5 * std::max(1.0, std::abs(x[a]));
      xp[a] += h;
      xm[a] -= h;
      loglik_flat(xp, sample, d, gp.data());
      loglik_flat(xm, sample, d, gm.data());
      for (std::size_t b = 0; b < dim; ++b)
        H(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = -(gp[b] - gm[b]) / (2 * h);
    }
    const Eigen::MatrixXd info = 0.5 * (H + H.transpose());
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive() &&
        (ldlt.vectorD().array() > 1e-12 * std::max(1.0, info.diagonal().maxCoeff())).all()) {
      const Eigen::MatrixXd cov =
          ldlt.solve(Eigen::MatrixXd::Identity(info.rows(), info.cols()));
      std::vector<double> se(dim);
      for (std::size_t a = 0; a < dim; ++a)
        se[a] = std::sqrt(std::max(0.0, cov(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a))));
      fit.se = MleParams::from_flat(se, options.intercept);
      fit.se_available = true;
    }
  }
  return fit;
}

MrtContinuousSample simulate_mrt_continuous(const MleParams& truth, std::size_t n,
                                            std::size_t z_dim, std::uint64_t seed) {
  check_block_sizes(truth, z_dim);
  MrtContinuousSample s;
  s.records.resize(n);
  const std::size_t q = truth.block_size();
  std::vector<double> row(q);
  const auto flat = truth.flat();
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = Rng::stream(seed, i);
    auto& rec = s.records[i];
    rec.z.resize(z_dim);
    for (double& v : rec.z) v = rng.uniform();
    std::size_t c = 0;
    if (truth.intercept) row[c++] = 1.0;
    for (double v : rec.z) row[c++] = v;
    const int k = rng.bernoulli(logistic(dot(row, flat.data())).p) ? 1 : 0;
    int* xs[3] = {&rec.x1, &rec.x2, &rec.x3};
    for (int j = 0; j < 3; ++j) {
      const std::size_t block = 1 + 2 * j + (k == 1 ? 0 : 1);
      *xs[j] = rng.bernoulli(logistic(dot(row, flat.data() + block * q)).p) ? 1 : 0;
    }
  }
  return s;
}

}  // namespace elicit
