#include "le_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "error.hpp"
#include "rng.hpp"

namespace elicit {

namespace {

constexpr double kSumTol = 1e-12;
constexpr double kIdentTol = 1e-6;

bool is_probability(double x) { return std::isfinite(x) && x >= 0.0 && x <= 1.0; }

void check_rate(double x, const char* name) {
  if (!std::isfinite(x) || x < 0.0 || x >= 1.0)
    fail(ErrorKind::Domain, std::string(name) + " must lie in [0, 1)");
}

void check_distribution(std::span<const double> probs, std::size_t expected, const char* what) {
  if (probs.size() != expected)
    fail(ErrorKind::Domain, std::string(what) + ": expected " + std::to_string(expected) +
                                " probabilities, got " + std::to_string(probs.size()));
  double total = 0.0;
  for (double p : probs) {
    if (!is_probability(p)) fail(ErrorKind::Domain, std::string(what) + ": entry outside [0, 1]");
    total += p;
  }
  if (std::abs(total - 1.0) > kSumTol)
    fail(ErrorKind::Domain, std::string(what) + ": probabilities do not sum to 1");
}

bool negligible(double x, double scale) { return !(std::abs(x) > kIdentTol * scale); }

int draw_uniform_response(Rng& rng, int upper) {
  return static_cast<int>(rng.below(static_cast<std::uint64_t>(upper) + 1));
}

LeSample simulate_impl(const LeParams& params, const ControlDistribution& latent,
                       const ControlDistribution& treatment_latent, std::size_t n,
                       double group_share, std::uint64_t seed) {
  validate(params);
  validate(latent);
  validate(treatment_latent);
  if (treatment_latent.j_count != latent.j_count)
    fail(ErrorKind::Domain, "treatment latent distribution has a different J");
  if (n < 2) fail(ErrorKind::Domain, "simulate_le needs n >= 2");
  if (!(group_share > 0.0 && group_share < 1.0))
    fail(ErrorKind::Domain, "group_share must lie in (0, 1)");

  const int J = latent.j_count;
  const bool strategic = params.spec == MisreportSpec::Strategic;
  LeSample sample;
  sample.j_count = J;
  sample.records.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = Rng::stream(seed, i);
    LeRecord& rec = sample.records[i];
    rec.t = rng.bernoulli(group_share) ? 1 : 0;
    if (rec.t == 0) {
      rec.y = static_cast<int>(rng.categorical(latent.probs));
      if (!strategic && rng.bernoulli(params.p0)) rec.y = draw_uniform_response(rng, J);
    } else {
      const int r = static_cast<int>(rng.categorical(treatment_latent.probs));
      const int x_star = rng.bernoulli(params.delta) ? 1 : 0;
      rec.y = r + x_star;
      if (strategic) {
        if (rec.y == J + 1 && rng.bernoulli(params.p_strategic)) rec.y = J;
      } else if (rng.bernoulli(params.p1)) {
        rec.y = draw_uniform_response(rng, J + 1);
      }
    }
  }
  return sample;
}

}  // namespace

const char* to_string(MisreportSpec spec) noexcept {
  switch (spec) {
    case MisreportSpec::Unrestricted: return "unrestricted";
    case MisreportSpec::EqualP: return "equal-p";
    case MisreportSpec::NoMisreport: return "no-misreport";
    case MisreportSpec::Strategic: return "strategic";
  }
  return "unknown";
}

MisreportSpec parse_misreport_spec(const std::string& name) {
  if (name == "unrestricted") return MisreportSpec::Unrestricted;
  if (name == "equal-p" || name == "equalp") return MisreportSpec::EqualP;
  if (name == "no-misreport" || name == "nomisreport") return MisreportSpec::NoMisreport;
  if (name == "strategic") return MisreportSpec::Strategic;
  fail(ErrorKind::Config, "unknown misreporting spec '" + name + "'");
}

void validate(const LeParams& params) {
  if (!is_probability(params.delta)) fail(ErrorKind::Domain, "delta must lie in [0, 1]");
  switch (params.spec) {
    case MisreportSpec::Unrestricted:
      check_rate(params.p0, "p0");
      check_rate(params.p1, "p1");
      break;
    case MisreportSpec::EqualP:
      check_rate(params.p0, "p0");
      if (params.p0 != params.p1) fail(ErrorKind::Domain, "equal-p spec requires p0 == p1");
      break;
    case MisreportSpec::NoMisreport:
      if (params.p0 != 0.0 || params.p1 != 0.0)
        fail(ErrorKind::Domain, "no-misreport spec requires p0 == p1 == 0");
      break;
    case MisreportSpec::Strategic:
      check_rate(params.p_strategic, "p");
      break;
  }
}

void validate(const ControlDistribution& control) {
  if (control.j_count < 1) fail(ErrorKind::Domain, "J must be at least 1");
  check_distribution(control.probs, static_cast<std::size_t>(control.j_count) + 1, "control");
}

void validate(const TreatmentDistribution& treatment) {
  if (treatment.j_count < 1) fail(ErrorKind::Domain, "J must be at least 1");
  check_distribution(treatment.probs, static_cast<std::size_t>(treatment.j_count) + 2,
                     "treatment");
}

void validate(const LeSample& sample) {
  if (sample.j_count < 1) fail(ErrorKind::Domain, "J must be at least 1");
  std::size_t n1 = 0;
  for (std::size_t i = 0; i < sample.records.size(); ++i) {
    const auto& r = sample.records[i];
    if (r.t != 0 && r.t != 1)
      fail(ErrorKind::Domain, "record " + std::to_string(i) + ": t must be 0 or 1");
    if (r.y < 0 || r.y > sample.j_count + r.t)
      fail(ErrorKind::Domain, "record " + std::to_string(i) + ": y out of range");
    n1 += static_cast<std::size_t>(r.t);
  }
  if (n1 == 0 || n1 == sample.records.size())
    fail(ErrorKind::Domain, "both groups must be nonempty");
}

void le_forward_unchecked(double delta, double p0, double p1, std::span<const double> control,
                          std::span<double> out) {
  const std::size_t J = control.size() - 1;
  const double k = (1.0 - p1) / (1.0 - p0);
  const double noise0 = p0 / static_cast<double>(J + 1);
  const double noise1 = p1 / static_cast<double>(J + 2);
  out[0] = k * ((1.0 - delta) * control[0] - (1.0 - delta) * noise0) + noise1;
  for (std::size_t j = 1; j <= J; ++j)
    out[j] = k * (delta * control[j - 1] + (1.0 - delta) * control[j] - noise0) + noise1;
  out[J + 1] = k * (delta * control[J] - delta * noise0) + noise1;
}

void le_forward_strategic_unchecked(double delta, double p, std::span<const double> control,
                                    std::span<double> out) {
  const std::size_t J = control.size() - 1;
  out[0] = (1.0 - delta) * control[0];
  for (std::size_t j = 1; j <= J; ++j)
    out[j] = (1.0 - delta) * control[j] + delta * control[j - 1];
  out[J] += delta * p * control[J];
  out[J + 1] = delta * (1.0 - p) * control[J];
}

TreatmentDistribution le_forward(const LeParams& params, const ControlDistribution& control) {
  validate(params);
  validate(control);
  TreatmentDistribution out;
  out.j_count = control.j_count;
  out.probs.assign(control.probs.size() + 1, 0.0);
  if (params.spec == MisreportSpec::Strategic)
    le_forward_strategic_unchecked(params.delta, params.p_strategic, control.probs, out.probs);
  else
    le_forward_unchecked(params.delta, params.p0, params.p1, control.probs, out.probs);
  return out;
}

double expected_count(std::span<const double> probs) {
  double e = 0.0;
  for (std::size_t j = 0; j < probs.size(); ++j) e += static_cast<double>(j) * probs[j];
  return e;
}

double mean_difference_analytic(const LeParams& params, const ControlDistribution& control) {
  if (params.spec == MisreportSpec::Strategic)
    fail(ErrorKind::Domain, "mean difference formula does not cover the strategic variant");
  if (params.p0 == 1.0) fail(ErrorKind::Domain, "p0 = 1 makes the mean difference undefined");
  validate(params);
  validate(control);
  const double d = params.delta, p0 = params.p0, p1 = params.p1;
  const double J = control.j_count;
  if (params.spec == MisreportSpec::EqualP) return d + p0 * (1.0 - 2.0 * d) / 2.0;
  const double ey0 = expected_count(control.probs);
  return d - p1 * d - J * (1.0 - p1) * p0 / (2.0 * (1.0 - p0)) - ((p1 - p0) / (1.0 - p0)) * ey0 +
         (J + 1.0) * p1 / 2.0;
}

ClosedFormResult solve_le_closed_form(const ControlDistribution& control,
                                      const TreatmentDistribution& treatment) {
  if (control.j_count != treatment.j_count ||
      control.probs.size() != static_cast<std::size_t>(control.j_count) + 1 ||
      treatment.probs.size() != static_cast<std::size_t>(treatment.j_count) + 2)
    fail(ErrorKind::Domain, "closed form: dimension mismatch between control and treatment");
  if (control.j_count < 3)
    fail(ErrorKind::Domain, "closed form needs at least three nonsensitive items");

  const auto& P0 = control.probs;
  const auto& P1 = treatment.probs;
  const int J = control.j_count;
  ClosedFormResult res;
  auto unidentified = [&](const char* why) {
    res.identified = false;
    res.reason = why;
    return res;
  };

  const double u = P1[3] - P1[2];
  const double v = P1[2] - P1[1];
  if (negligible(v, std::abs(P1[2]) + std::abs(P1[1])))
    return unidentified("P1(2) - P1(1) vanishes");

  const double a = P0[3] - P0[2];
  const double b = 2.0 * P0[2] - P0[3] - P0[1];
  const double c = P0[2] - P0[1];
  const double d = 2.0 * P0[1] - P0[2] - P0[0];

  const double den_delta = u * d - v * b;
  if (negligible(den_delta, std::abs(u * d) + std::abs(v * b)))
    return unidentified("delta ratio denominator vanishes");
  const double delta = (v * a - u * c) / den_delta;
  if (std::abs(delta - 0.5) < kIdentTol) return unidentified("delta is 1/2");

  const double den_k = c + delta * d;
  if (negligible(den_k, std::abs(c) + std::abs(delta * d)))
    return unidentified("scale denominator vanishes");
  const double k = v / den_k;

  const double tail = (P1[J + 1] - P1[0]) / k - delta * P0[J] + (1.0 - delta) * P0[0];
  const double p0 = (J + 1) * tail / (1.0 - 2.0 * delta);
  const double p1 = 1.0 - k * (1.0 - p0);

  res.identified = true;
  res.params = LeParams{delta, p0, p1, MisreportSpec::Unrestricted, 0.0};
  return res;
}

ControlDistribution observed_control(const LeParams& params, const ControlDistribution& latent) {
  validate(params);
  validate(latent);
  if (params.spec == MisreportSpec::Strategic) return latent;
  ControlDistribution out = latent;
  const double noise = params.p0 / static_cast<double>(latent.j_count + 1);
  for (double& p : out.probs) p = (1.0 - params.p0) * p + noise;
  return out;
}

LeSample simulate_le(const LeParams& params, const ControlDistribution& latent, std::size_t n,
                     double group_share, std::uint64_t seed) {
  return simulate_impl(params, latent, latent, n, group_share, seed);
}

LeSample simulate_le(const LeParams& params, const ControlDistribution& latent,
                     const ControlDistribution& treatment_latent, std::size_t n,
                     double group_share, std::uint64_t seed) {
  return simulate_impl(params, latent, treatment_latent, n, group_share, seed);
}

std::vector<int> simulate_direct_responses(const LeSample& sample, double delta, double q0,
                                           double q1, std::uint64_t seed) {
  for (double x : {delta, q0, q1})
    if (!is_probability(x)) fail(ErrorKind::Domain, "direct-response rates must lie in [0, 1]");
  std::vector<int> out;
  for (std::size_t i = 0; i < sample.records.size(); ++i) {
    if (sample.records[i].t != 0) continue;
    Rng rng = Rng::stream(seed, i, 1);
    const bool carrier = rng.bernoulli(delta);
    const double yes = carrier ? 1.0 - q1 : q0;
    out.push_back(rng.bernoulli(yes) ? 1 : 0);
  }
  return out;
}

EmpiricalDistributions empirical_distributions(const LeSample& sample) {
  if (sample.j_count < 1) fail(ErrorKind::Domain, "J must be at least 1");
  const int J = sample.j_count;
  EmpiricalDistributions out;
  out.control = {J, std::vector<double>(J + 1, 0.0)};
  out.treatment = {J, std::vector<double>(J + 2, 0.0)};
  for (const auto& r : sample.records) {
    if (r.t == 0) {
      ++out.control.probs.at(r.y);
      ++out.n0;
    } else {
      ++out.treatment.probs.at(r.y);
      ++out.n1;
    }
  }
  if (out.n0 == 0 || out.n1 == 0) fail(ErrorKind::Domain, "both groups must be nonempty");
  for (double& p : out.control.probs) p /= static_cast<double>(out.n0);
  for (double& p : out.treatment.probs) p /= static_cast<double>(out.n1);
  const double n = static_cast<double>(out.n0 + out.n1);
  out.c0 = static_cast<double>(out.n0) / n;
  out.c1 = static_cast<double>(out.n1) / n;
  return out;
}

}  // namespace elicit
