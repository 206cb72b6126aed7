#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mrt_core.hpp"

namespace elicit {

struct MrtContinuousRecord {
  int x1 = 0, x2 = 0, x3 = 0;
  std::vector<double> z;
};

struct MrtContinuousSample {
  std::vector<MrtContinuousRecord> records;

  std::size_t z_dim() const { return records.empty() ? 0 : records.front().z.size(); }
};

/// Logistic-link coefficients. Every block has length (intercept ? 1 : 0) + dim(z).
/// Index `1` is the X* = 1 class: g(z; alpha1) = Pr(X1 = 1 | X* = 1, z) and
/// g(z; rho) = Pr(X* = 1 | z).
struct MleParams {
  bool intercept = true;
  std::vector<double> rho, alpha1, alpha0, beta1, beta0, gamma1, gamma0;

  static constexpr int kBlocks = 7;
  static MleParams zeros(std::size_t z_dim, bool intercept);
  static MleParams from_flat(std::span<const double> flat, bool intercept);

  std::size_t block_size() const { return rho.size(); }
  /// Blocks in the order rho, alpha1, alpha0, beta1, beta0, gamma1, gamma0.
  std::vector<double> flat() const;
  /// Swaps the class-indexed blocks and negates rho.
  MleParams label_swapped() const;
};

void validate(const MrtContinuousSample& sample);

double log_likelihood(const MleParams& params, const MrtContinuousSample& sample);

/// Gradient of the log-likelihood with respect to flat() coordinates.
std::vector<double> log_likelihood_gradient(const MleParams& params,
                                            const MrtContinuousSample& sample);

struct MleOptions {
  bool intercept = true;
  int lattice_starts = 6;
  int random_starts = 0;               // extra seeded starts
  bool warm_start = true;              // tercile closed-form start
  std::vector<MleParams> extra_starts;  // e.g. a known feasible point
  bool compute_se = true;
};

struct MleFit {
  MleParams params;
  double loglik = 0.0;
  bool converged = false;
  bool se_available = false;
  MleParams se;  // NaN entries when unavailable
  int starts_tried = 0;
  int starts_converged = 0;
  bool small_sample = false;  // n < 100
};

MleFit mle_fit(const MrtContinuousSample& sample, const OrderingRule& ordering, std::uint64_t seed,
               const MleOptions& options = {});

/// Draws records with z ~ U[0,1]^dim and the logistic latent-class model.
MrtContinuousSample simulate_mrt_continuous(const MleParams& truth, std::size_t n,
                                            std::size_t z_dim, std::uint64_t seed);

}  // namespace elicit
