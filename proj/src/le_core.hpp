#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace elicit {

enum class MisreportSpec { Unrestricted, EqualP, NoMisreport, Strategic };

const char* to_string(MisreportSpec spec) noexcept;
MisreportSpec parse_misreport_spec(const std::string& name);

struct LeParams {
  double delta = 0.0;
  double p0 = 0.0;
  double p1 = 0.0;
  MisreportSpec spec = MisreportSpec::Unrestricted;
  double p_strategic = 0.0;  // used only by MisreportSpec::Strategic
};

/// Observed control-group response distribution P0(0..J).
struct ControlDistribution {
  int j_count = 0;
  std::vector<double> probs;
};

/// Observed treatment-group response distribution P1(0..J+1).
struct TreatmentDistribution {
  int j_count = 0;
  std::vector<double> probs;
};

struct LeRecord {
  int y = 0;
  int t = 0;
  std::vector<int> z;
};

struct LeSample {
  int j_count = 0;
  std::vector<LeRecord> records;
};

void validate(const LeParams& params);
void validate(const ControlDistribution& control);
void validate(const TreatmentDistribution& treatment);
void validate(const LeSample& sample);

TreatmentDistribution le_forward(const LeParams& params, const ControlDistribution& control);

/// Treatment distribution implied by (delta, p0, p1) and an arbitrary control
/// vector. No validation; used inside objective functions.
void le_forward_unchecked(double delta, double p0, double p1, std::span<const double> control,
                          std::span<double> out);
void le_forward_strategic_unchecked(double delta, double p, std::span<const double> control,
                                    std::span<double> out);

/// E(Y1) - E(Y0) in closed form. Not defined for the strategic variant.
double mean_difference_analytic(const LeParams& params, const ControlDistribution& control);

struct ClosedFormResult {
  bool identified = false;
  LeParams params;
  std::string reason;  // set when not identified
};

/// Exact identification of (delta, p0, p1) from population distributions.
/// Uses the j = 1, 2, 3 and j = 0, J+1 equations, so any J >= 3 works.
ClosedFormResult solve_le_closed_form(const ControlDistribution& control,
                                      const TreatmentDistribution& treatment);

/// Observed control distribution when the latent truthful one is `latent`:
/// (1 - p0) * latent + p0 / (J + 1). Strategic leaves the control truthful.
ControlDistribution observed_control(const LeParams& params, const ControlDistribution& latent);

/// Draws n records. `latent` is the truthful nonsensitive-count distribution.
/// Record i uses its own RNG stream derived from (seed, i).
LeSample simulate_le(const LeParams& params, const ControlDistribution& latent, std::size_t n,
                     double group_share, std::uint64_t seed);

/// As above, but treatment respondents draw their nonsensitive count from a
/// different latent distribution (violates the no-design-effect assumption).
LeSample simulate_le(const LeParams& params, const ControlDistribution& latent,
                     const ControlDistribution& treatment_latent, std::size_t n,
                     double group_share, std::uint64_t seed);

/// Direct answers to the sensitive question for every control record
/// (aligned with control records in sample order). Truth X* ~ Bernoulli(delta);
/// carriers say yes with prob 1 - q1, non-carriers with prob q0.
std::vector<int> simulate_direct_responses(const LeSample& sample, double delta, double q0,
                                           double q1, std::uint64_t seed);

struct EmpiricalDistributions {
  ControlDistribution control;
  TreatmentDistribution treatment;
  double c0 = 0.0;
  double c1 = 0.0;
  std::size_t n0 = 0;
  std::size_t n1 = 0;
};

EmpiricalDistributions empirical_distributions(const LeSample& sample);

double expected_count(std::span<const double> probs);

}  // namespace elicit
