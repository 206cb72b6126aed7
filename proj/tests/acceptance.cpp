// Acceptance suite: one PASS/FAIL line per criterion.
//   acceptance --cli <path to elicit> --workdir <dir> [--expect-fail N]... [criterion ...]
// Exit status is 0 only when the failing set equals the declared expected failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "le_core.hpp"
#include "le_gmm.hpp"
#include "monte_carlo.hpp"
#include "mrt_core.hpp"
#include "mrt_mle.hpp"
#include "stats.hpp"

using namespace elicit;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char b[64];
  std::snprintf(b, sizeof b, f, a);
  return b;
}

std::vector<double> dirichlet(std::mt19937_64& g, std::size_t k, double floor = 0.0) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> v(k);
  double s = 0.0;
  for (auto& x : v) s += (x = e(g));
  for (auto& x : v) x = floor + (1.0 - floor * k) * x / s;
  return v;
}

// Kolmogorov-Smirnov against a continuous CDF, Stephens' small-sample
// correction, asymptotic Kolmogorov tail.
double ks_pvalue(std::vector<double> xs, const std::function<double(double)>& cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k)
    p += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
  return std::clamp(p, 0.0, 1.0);
}

// Criterion 1
Outcome mean_difference_identity() {
  std::mt19937_64 g(101);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const int J = 3 + static_cast<int>(g() % 4);
    LeParams p;
    p.delta = u(g);
    p.p0 = 0.9 * u(g);
    p.p1 = 0.9 * u(g);
    const ControlDistribution latent{J, dirichlet(g, J + 1)};
    const auto control = observed_control(p, latent);
    const auto treat = le_forward(p, control);
    const double direct = expected_count(treat.probs) - expected_count(control.probs);
    worst = std::max(worst, std::abs(mean_difference_analytic(p, control) - direct));
  }
  return {worst < 1e-12, "max |analytic - forward| = " + fmt("%.3g", worst) + " over 1000 draws"};
}

// Criterion 2
Outcome closed_form_round_trip() {
  std::mt19937_64 g(202);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  int unidentified = 0;
  for (int i = 0; i < 500; ++i) {
    LeParams p;
    do p.delta = u(g);
    while (std::abs(p.delta - 0.5) < 0.05);
    p.p0 = 0.5 * u(g);
    p.p1 = 0.5 * u(g);
    const ControlDistribution latent{3, dirichlet(g, 4, 0.02)};
    const auto control = observed_control(p, latent);
    const auto r = solve_le_closed_form(control, le_forward(p, control));
    if (!r.identified) {
      ++unidentified;
      continue;
    }
    worst = std::max({worst, std::abs(r.params.delta - p.delta), std::abs(r.params.p0 - p.p0),
                      std::abs(r.params.p1 - p.p1)});
  }
  return {worst < 1e-8 && unidentified == 0,
          "max error " + fmt("%.3g", worst) + ", unidentified " + std::to_string(unidentified) +
              "/500"};
}

const ControlDistribution kNullLatent{4, {0.1, 0.25, 0.3, 0.2, 0.15}};

LeParams null_params() {
  LeParams p;
  p.delta = 0.3;
  p.p0 = 0.05;
  p.p1 = 0.10;
  return p;
}

// Criterion 3
Outcome j_test_size() {
  int rejected = 0;
  std::vector<double> stats;
  int dof = 0;
  for (int r = 0; r < 1000; ++r) {
    const auto s = simulate_le(null_params(), kNullLatent, 2000, 0.5, 30000 + r);
    const auto res = j_test(s, MisreportSpec::Unrestricted, DropPolicy::fixed(0));
    rejected += res.p_value < 0.05;
    stats.push_back(res.t_stat);
    dof = res.dof;
  }
  const double rate = rejected / 1000.0;
  const double ks = ks_pvalue(stats, [dof](double x) { return 1.0 - stats::chi2_sf(x, dof); });
  return {rate >= 0.03 && rate <= 0.07 && ks > 0.01,
          "rejection rate " + fmt("%.3f", rate) + " (target [0.03, 0.07]), KS vs chi2(" +
              std::to_string(dof) + ") p = " + fmt("%.3f", ks)};
}

// Criterion 4
Outcome j_test_power() {
  const ControlDistribution shifted{4, {0.0, 0.25, 0.3, 0.2, 0.25}};
  int rejected = 0;
  const int reps = 200;
  for (int r = 0; r < reps; ++r) {
    const auto s = simulate_le(null_params(), kNullLatent, shifted, 8000, 0.5, 40000 + r);
    rejected += j_test(s, MisreportSpec::Unrestricted, DropPolicy::fixed(0)).p_value < 0.05;
  }
  const double rate = rejected / static_cast<double>(reps);
  return {rate >= 0.9, "rejection rate " + fmt("%.3f", rate) + " over " + std::to_string(reps) +
                           " replications at n = 8000 (target >= 0.9)"};
}

// Criterion 5
Outcome mrt_golden() {
  McDesign d = reference_discrete_design();
  d.n = 2000;
  d.n_reps = 1000;
  d.seed = 5005;
  d.ordering = parse_ordering("x1-higher");
  const auto r = run_monte_carlo(d, {McEstimator::ClosedForm});
  const auto& agg = r.row("closed-form", "Pr(X*=1)");
  bool ok = std::abs(agg.mean - 0.634) <= 0.015 && std::abs(agg.sd / 0.029 - 1.0) <= 0.5;
  const std::vector<std::pair<std::string, double>> paper{
      {"Pr(X*=1|z=0)", 0.379},       {"Pr(X*=1|z=1)", 0.817},
      {"Pr(X1=1|X*=0,z=0)", 0.267}, {"Pr(X1=1|X*=0,z=1)", 0.304},
      {"Pr(X1=1|X*=1,z=0)", 0.882}, {"Pr(X1=1|X*=1,z=1)", 0.900},
      {"Pr(X2=1|X*=0,z=0)", 0.268}, {"Pr(X2=1|X*=0,z=1)", 0.287},
      {"Pr(X2=1|X*=1,z=0)", 0.732}, {"Pr(X2=1|X*=1,z=1)", 0.750},
      {"Pr(X3=1|X*=0,z=0)", 0.267}, {"Pr(X3=1|X*=0,z=1)", 0.284},
      {"Pr(X3=1|X*=1,z=0)", 0.884}, {"Pr(X3=1|X*=1,z=1)", 0.892}};
  double worst = 0.0;
  std::string worst_name;
  for (const auto& [name, value] : paper) {
    const double dev = std::abs(r.row("closed-form", name).mean - value);
    if (dev > worst) worst = dev, worst_name = name;
  }
  ok = ok && worst <= 0.02;
  return {ok, "Pr(X*=1) mean " + fmt("%.4f", agg.mean) + " (0.634 +- 0.015), sd " +
                  fmt("%.4f", agg.sd) + " (0.029 +- 50%), max per-cell deviation " +
                  fmt("%.4f", worst) + " at " + worst_name + ", failed reps " +
                  std::to_string(agg.n_failed)};
}

MrtLatent random_separated(std::mt19937_64& g) {
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (;;) {
    MrtLatent t;
    t.pr_xstar = std::uniform_real_distribution<double>(0.15, 0.85)(g);
    for (auto& row : t.pr_x) row = {u(g), u(g)};
    if (t.pr_x[0][0] > t.pr_x[0][1]) std::swap(t.pr_x[0][0], t.pr_x[0][1]);
    bool sep = true;
    for (const auto& row : t.pr_x) sep = sep && std::abs(row[0] - row[1]) >= 0.3;
    if (sep) return t;
  }
}

double latent_error(const MrtEstimate& e, const MrtLatent& t) {
  double w = std::abs(e.pr_xstar - t.pr_xstar);
  for (int j = 0; j < 3; ++j)
    for (int k = 0; k < 2; ++k) w = std::max(w, std::abs(e.pr_x_given_xstar[j][k] - t.pr_x[j][k]));
  return w;
}

// Criterion 6
Outcome mrt_round_trip() {
  std::mt19937_64 g(606);
  const OrderingRule rule = parse_ordering("x1-higher");
  double cf = 0.0, ex = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto t = random_separated(g);
    const auto joint = mrt_expected_joint(t, 1.0);
    cf = std::max(cf, latent_error(decompose_closed_form(joint, 1, rule), t));
    ex = std::max(ex, latent_error(decompose_extreme(joint, 1, rule), t));
  }
  return {cf < 1e-8 && ex < 1e-6,
          "max error closed-form " + fmt("%.3g", cf) + " (< 1e-8), extreme " + fmt("%.3g", ex) +
              " (< 1e-6) over 1000 instances"};
}

// Criterion 7
Outcome rank_test_power_and_size() {
  std::string detail;
  bool ok = true;
  for (std::size_t n : {500u, 1000u, 2000u}) {
    McDesign d = reference_discrete_design();
    d.n = n;
    d.n_reps = 1000;
    d.seed = 7000 + n;
    d.rank_boot = 199;
    const auto r = run_monte_carlo(d, {McEstimator::RankTest});
    double worst = 1.0;
    for (const auto& row : r.rows) worst = std::min(worst, row.mean);
    ok = ok && worst == 1.0;
    detail += "n=" + std::to_string(n) + " min rejection " + fmt("%.3f", worst) + "; ";
  }
  // Rank-1 truth: answers independent of the latent class.
  MrtLatent flat;
  flat.pr_xstar = 0.5;
  flat.pr_x = {{{0.6, 0.6}, {0.3, 0.3}, {0.45, 0.45}}};
  const auto probs = mrt_joint_probs(flat);
  std::mt19937_64 g(707);
  std::discrete_distribution<int> cell(probs.begin(), probs.end());
  int rejected = 0;
  const int reps = 500;
  for (int r = 0; r < reps; ++r) {
    MrtJoint j;
    for (int i = 0; i < 500; ++i) j.counts[static_cast<std::size_t>(cell(g))] += 1.0;
    j.n_cell = 500;
    rejected += rank_test(j, 199, 9000 + r).reject_rank1;
  }
  const double size = rejected / static_cast<double>(reps);
  ok = ok && size <= 0.07;
  detail += "size " + fmt("%.3f", size) + " under rank 1 at n=500 (<= 0.07)";
  return {ok, detail};
}

// Criterion 8
Outcome continuous_mle() {
  McDesign d = reference_continuous_design();
  d.ordering = parse_ordering("x1-higher");
  d.n = 2000;
  d.n_reps = 1000;
  d.seed = 8008;
  const auto big = run_monte_carlo(d, {McEstimator::Mle});
  struct Ref {
    const char* name;
    double truth, mean2000, sd2000;
  };
  const Ref refs[7] = {{"rho", 1, 0.985, 0.193},   {"alpha1", 1, 1.008, 0.126},
                       {"alpha0", -1, -0.990, 0.201}, {"beta1", 2, 2.036, 0.249},
                       {"beta0", -2, -2.044, 0.436}, {"gamma1", 2, 2.030, 0.240},
                       {"gamma0", -2, -2.031, 0.443}};
  bool ok = true;
  double worst_mean = 0.0, worst_sd = 0.0;
  for (const auto& r : refs) {
    const auto& row = big.row("mle", r.name);
    worst_mean = std::max(worst_mean, std::abs(row.mean - r.mean2000));
    worst_sd = std::max(worst_sd, std::abs(row.sd / r.sd2000 - 1.0));
  }
  ok = worst_mean <= 0.10 && worst_sd <= 0.5;

  d.n = 500;
  d.seed = 8500;
  const auto small = run_monte_carlo(d, {McEstimator::Mle});
  double worst_median = 0.0;
  for (const auto& r : refs)
    worst_median = std::max(worst_median, std::abs(small.row("mle", r.name).median - r.truth));
  ok = ok && worst_median <= 0.3;
  return {ok, "n=2000: max |mean - paper| " + fmt("%.3f", worst_mean) + " (<= 0.10), max sd ratio dev " +
                  fmt("%.2f", worst_sd) + " (<= 0.5), failed " +
                  std::to_string(big.rows[0].n_failed) + "; n=500: max |median - truth| " +
                  fmt("%.3f", worst_median) + " (<= 0.3)"};
}

// Criterion 9
Outcome correlation_sensitivity() {
  auto run = [](double sigma) {
    McDesign d = reference_discrete_design();
    d.kind = McDesign::Kind::DiscreteZCorrelated;
    d.sigma = sigma;
    d.n = 2000;
    d.n_reps = 1000;
    d.seed = 9009;
    d.ordering = parse_ordering("x1-higher");
    return run_monte_carlo(d, {McEstimator::ClosedForm});
  };
  const auto s20 = run(0.20), s05 = run(0.05), s00 = run(0.0);
  const double m = s20.row("closed-form", "Pr(X*=1|z=0)").mean;
  double worst = 0.0;
  std::string worst_name;
  for (const auto& row : s00.rows) {
    const double dev = std::abs(s05.row("closed-form", row.parameter).mean - row.mean);
    if (dev > worst) worst = dev, worst_name = row.parameter;
  }
  return {m >= 0.41 && m <= 0.45 && worst <= 0.02,
          "sigma=0.20 mean Pr(X*=1|z=0) " + fmt("%.4f", m) + " (in [0.41, 0.45]); sigma=0.05 vs 0 max mean shift " +
              fmt("%.4f", worst) + " at " + worst_name + " (<= 0.02); mechanism: " + s20.mechanism};
}

// Criterion 10
Outcome gradient_and_label_swap() {
  const MleParams truth = reference_continuous_design().continuous;
  std::mt19937_64 g(1010);
  std::normal_distribution<double> nrm(0.0, 1.5);
  double worst_grad = 0.0, worst_swap = 0.0;
  for (int i = 0; i < 20; ++i) {
    const auto sample = simulate_mrt_continuous(truth, 300, 1, 1100 + i);
    MleParams p = MleParams::zeros(1, true);
    auto flat = p.flat();
    for (auto& v : flat) v = nrm(g);
    p = MleParams::from_flat(flat, true);
    const auto ga = log_likelihood_gradient(p, sample);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < flat.size(); ++k) {
      const double h = 1e-5 * std::max(1.0, std::abs(flat[k]));
      auto up = flat, dn = flat;
      up[k] += h;
      dn[k] -= h;
      const double fd = (log_likelihood(MleParams::from_flat(up, true), sample) -
                         log_likelihood(MleParams::from_flat(dn, true), sample)) /
                        (2.0 * h);
      num = std::max(num, std::abs(ga[k] - fd));
      den = std::max(den, std::abs(fd));
    }
    worst_grad = std::max(worst_grad, num / std::max(den, 1e-12));
    worst_swap = std::max(worst_swap, std::abs(log_likelihood(p, sample) -
                                               log_likelihood(p.label_swapped(), sample)));
  }
  return {worst_grad < 1e-4 && worst_swap < 1e-10,
          "max relative gradient error " + fmt("%.3g", worst_grad) + " (< 1e-4), max label-swap gap " +
              fmt("%.3g", worst_swap) + " (< 1e-10)"};
}

// Criterion 11
std::string quote(const std::string& s) { return "'" + s + "'"; }

bool run_cli(const std::string& cli, const std::string& args, std::string& log) {
  const std::string cmd = quote(cli) + " " + args + " > /dev/null";
  const int rc = std::system(cmd.c_str());
  if (rc != 0) log += "command failed (" + std::to_string(rc) + "): " + args + "; ";
  return rc == 0;
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  return nlohmann::json::parse(in);
}

const nlohmann::json* find_table(const nlohmann::json& r, const std::string& name) {
  for (const auto& t : r["tables"])
    if (t["name"] == name) return &t;
  return nullptr;
}

bool schema_complete(const nlohmann::json& r, const std::vector<std::string>& tables,
                     std::string& log) {
  bool ok = r.value("schema_version", 0) == 1;
  for (const char* k : {"version", "seed", "config_hash", "started_at", "finished_at", "command"})
    ok = ok && r["metadata"].contains(k);
  for (const auto& name : tables) {
    const auto* t = find_table(r, name);
    if (!t) {
      log += "missing table " + name + "; ";
      ok = false;
      continue;
    }
    std::size_t se_col = SIZE_MAX;
    for (std::size_t c = 0; c < (*t)["columns"].size(); ++c)
      if ((*t)["columns"][c]["name"] == "se") se_col = c;
    for (const auto& row : (*t)["rows"]) {
      ok = ok && row.size() == (*t)["columns"].size();
      if (se_col != SIZE_MAX)
        ok = ok && (row[se_col].is_number() || row[se_col] == "unavailable");
    }
  }
  if (!ok) log += "schema check failed; ";
  return ok;
}

Outcome end_to_end(const std::string& cli, const std::string& dir) {
  std::string log;
  bool ok = !cli.empty();
  if (!ok) return {false, "no --cli given"};
  for (int J : {4, 5}) {
    const std::string data = dir + "/le_j" + std::to_string(J) + ".csv";
    const std::string rep = dir + "/test_le_j" + std::to_string(J) + ".json";
    ok = run_cli(cli, "simulate --set kind=le --j-count " + std::to_string(J) +
                          " --set delta=0.25 --set p0=0.05 --set p1=0.08 --n 3000 --seed " +
                          std::to_string(J) + " --set covariates=5 --set q1=0.2 --set q0=0.02 --data " +
                          quote(data),
                 log) && ok;
    ok = run_cli(cli, "test-le --input " + quote(data) + " --j-count " + std::to_string(J) +
                          " --seed 1 --n-boot 100 --format json --output " + quote(rep),
                 log) && ok;
    if (ok) {
      const auto r = read_json(rep);
      ok = schema_complete(r, {"j_tests", "estimates", "control_mean_test", "modified_le"}, log) && ok;
      const auto* jt = find_table(r, "j_tests");
      ok = ok && jt && (*jt)["rows"].size() == 4;
    }
  }
  const std::string mdata = dir + "/mrt5.csv", mrep = dir + "/mrt5.json";
  ok = run_cli(cli, "simulate --set kind=mrt --design discrete --n 2000 --seed 3 --set covariates=5 --data " +
                        quote(mdata),
               log) && ok;
  ok = run_cli(cli, "estimate-mrt --input " + quote(mdata) +
                        " --ordering x1-higher --seed 2 --n-boot 100 --format json --output " + quote(mrep) +
                        " --plot-output " + quote(dir + "/mrt5_plot.csv"),
               log) && ok;
  if (ok) {
    const auto r = read_json(mrep);
    ok = schema_complete(r, {"rank_tests", "mrt_estimates", "misreport", "aggregate"}, log) && ok;
    const auto* rt = find_table(r, "rank_tests");
    ok = ok && rt && (*rt)["rows"].size() == 11;  // overall + 5 binary covariates
  }
  // Failing input must give a nonzero exit status.
  const bool bad = std::system((quote(cli) + " test-le --input /nonexistent.csv --j-count 4 2> /dev/null").c_str()) != 0;
  ok = ok && bad;

  // Misreport-rate convention on the overall column of the application table.
  MrtEstimate e;
  e.pr_x_given_xstar[0] = {0.963, 0.293};
  const auto q = misreport_rates(e, 1, 0);
  const bool conv = std::abs(q.q1 - 0.293) < 1e-12 && std::abs(q.q0 - 0.037) < 1e-12;
  ok = ok && conv;
  return {ok, "test-le J=4/J=5 and estimate-mrt (3 answers + 5 covariates) reports schema-complete; "
              "q1 = " + fmt("%.3f", q.q1) + ", q0 = " + fmt("%.3f", q.q0) + (log.empty() ? "" : "; " + log)};
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli, dir = std::filesystem::temp_directory_path().string();
  std::set<int> only, expected;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--cli" && i + 1 < argc) cli = argv[++i];
    else if (a == "--workdir" && i + 1 < argc) dir = argv[++i];
    else if (a == "--expect-fail" && i + 1 < argc) expected.insert(std::atoi(argv[++i]));
    else only.insert(std::atoi(a.c_str()));
  }
  std::filesystem::create_directories(dir);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"mean-difference identity", mean_difference_identity},
      {"closed-form LE round trip", closed_form_round_trip},
      {"J-test size", j_test_size},
      {"J-test power", j_test_power},
      {"MRT golden numbers (discrete z)", mrt_golden},
      {"MRT exact round trip", mrt_round_trip},
      {"rank test power and size", rank_test_power_and_size},
      {"continuous-z MLE", continuous_mle},
      {"correlation sensitivity", correlation_sensitivity},
      {"MLE gradient and label swap", gradient_and_label_swap},
      {"end-to-end reports", [&] { return end_to_end(cli, dir); }}};

  int unexpected = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool xfail = expected.count(id) > 0;
    std::printf("[%s] %2d %s: %s (%.1fs)%s\n", o.pass ? "PASS" : "FAIL", id,
                criteria[i].first.c_str(), o.detail.c_str(), secs,
                xfail ? (o.pass ? " [declared expected failure, now passing]" : " [expected failure]")
                      : "");
    std::fflush(stdout);
    unexpected += o.pass == xfail;
  }
  return unexpected ? 1 : 0;
}
