#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <map>
#include <set>
#include <sstream>

#include "bootstrap.hpp"
#include "error.hpp"
#include "io_csv.hpp"
#include "le_core.hpp"
#include "le_gmm.hpp"
#include "monte_carlo.hpp"
#include "mrt_core.hpp"
#include "mrt_mle.hpp"
#include "rng.hpp"

namespace elicit {

namespace {

using CT = ColumnType;

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Table make_table(std::string name, std::vector<Column> cols) {
  Table t;
  t.name = std::move(name);
  t.columns = std::move(cols);
  return t;
}

Cell integer(long long v) { return static_cast<std::int64_t>(v); }
Cell text(std::string s) { return s; }
const Cell kUnavailable = std::monostate{};

std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_plot(const RunConfig& c, const std::vector<std::array<std::string, 4>>& rows) {
  if (!c.has("plot-output")) return;
  std::string out = "cell,estimate,ci_low,ci_high\n";
  for (const auto& r : rows) out += r[0] + "," + r[1] + "," + r[2] + "," + r[3] + "\n";
  write_file_atomic(c.require("plot-output"), out);
}

std::string plot_num(double v) { return std::isfinite(v) ? format_number(v) : "unavailable"; }

// LE

std::vector<std::string> free_names(MisreportSpec spec) {
  switch (spec) {
    case MisreportSpec::Unrestricted: return {"delta", "p0", "p1"};
    case MisreportSpec::EqualP: return {"delta", "p"};
    case MisreportSpec::NoMisreport: return {"delta"};
    case MisreportSpec::Strategic: return {"delta", "p"};
  }
  return {};
}

std::vector<double> free_values(const LeParams& p) {
  switch (p.spec) {
    case MisreportSpec::Unrestricted: return {p.delta, p.p0, p.p1};
    case MisreportSpec::EqualP: return {p.delta, p.p0};
    case MisreportSpec::NoMisreport: return {p.delta};
    case MisreportSpec::Strategic: return {p.delta, p.p_strategic};
  }
  return {};
}

DropPolicy drop_policy(const RunConfig& c) {
  const std::string d = c.get("drop", "min-p");
  if (d == "min-p") return DropPolicy::min_p_value();
  return DropPolicy::fixed(static_cast<int>(c.require_int("drop")));
}

LeSample subsample(const LeSample& s, std::span<const std::size_t> idx) {
  LeSample sub{s.j_count, {}};
  sub.records.reserve(idx.size());
  for (auto i : idx) sub.records.push_back(s.records[i]);
  return sub;
}

BootstrapConfig::Stratify le_stratify(const RunConfig& c) {
  const std::string s = c.get("stratify", "group");
  if (s == "group") return BootstrapConfig::Stratify::Group;
  if (s == "none") return BootstrapConfig::Stratify::None;
  fail(ErrorKind::Config, "stratify must be group or none for list experiments");
}

struct LeFit {
  GmmResult gmm;
  std::vector<double> boot_se;  // empty when not bootstrapped
  int boot_failed = 0;
};

LeFit fit_le(const RunConfig& c, const LeSample& sample, MisreportSpec spec, Report& report,
             std::uint64_t stream) {
  LeFit f;
  f.gmm = j_test(sample, spec, drop_policy(c));
  if (f.gmm.ridge_regularized)
    report.flag("ridge-regularized", std::string(to_string(spec)) + ": weight matrix ridge applied");
  if (!f.gmm.converged)
    report.flag("not-converged", std::string(to_string(spec)) + ": optimizer did not converge");
  const long long n_boot = c.get_int("n-boot", 0);
  if (n_boot <= 0) return f;
  std::vector<int> groups;
  for (const auto& r : sample.records) groups.push_back(r.t);
  const MomentSpec ms{sample.j_count, spec, f.gmm.dropped_index};
  BootstrapConfig bc;
  bc.n_reps = static_cast<int>(n_boot);
  bc.seed = Rng::stream(c.require_seed(), stream, 7).next();
  bc.stratify_by = le_stratify(c);
  try {
    const auto res = bootstrap(
        sample.records.size(), groups,
        [&](std::span<const std::size_t> idx) {
          return free_values(gmm_estimate(subsample(sample, idx), ms).theta_hat);
        },
        bc);
    f.boot_se = res.se;
    f.boot_failed = res.n_failed;
    if (res.n_failed > 0)
      report.flag("dropped-replicates", std::string(to_string(spec)) + ": " +
                                            std::to_string(res.n_failed) + " bootstrap replicates failed");
    if (res.few_replicates)
      report.flag("few-replicates", "fewer than 100 bootstrap replicates; SEs are rough");
  } catch (const Error& e) {
    report.flag("bootstrap-failed", std::string(to_string(spec)) + ": " + e.what());
  }
  return f;
}

void add_estimate_rows(Table& t, const std::string& spec_name, const LeFit& f, bool with_spec) {
  const auto names = free_names(f.gmm.theta_hat.spec);
  const auto vals = free_values(f.gmm.theta_hat);
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double asym = i < f.gmm.se.size() ? f.gmm.se[i] : std::nan("");
    const bool boot = !f.boot_se.empty();
    std::vector<Cell> row;
    if (with_spec) row.push_back(text(spec_name));
    row.push_back(text(names[i]));
    row.push_back(number(vals[i]));
    row.push_back(number(boot ? f.boot_se[i] : asym));
    row.push_back(text(boot ? "bootstrap" : "asymptotic"));
    t.add_row(std::move(row));
  }
}

struct MeanDiff {
  double estimate = 0.0, se = 0.0;
};

MeanDiff mean_difference(const LeSample& s) {
  double sum[2] = {0, 0}, sq[2] = {0, 0}, n[2] = {0, 0};
  for (const auto& r : s.records) {
    sum[r.t] += r.y;
    sq[r.t] += double(r.y) * r.y;
    n[r.t] += 1;
  }
  MeanDiff m;
  m.estimate = sum[1] / n[1] - sum[0] / n[0];
  double var = 0.0;
  for (int g = 0; g < 2; ++g) {
    if (n[g] < 2) return {m.estimate, std::nan("")};
    const double mu = sum[g] / n[g];
    var += (sq[g] - n[g] * mu * mu) / (n[g] - 1) / n[g];
  }
  m.se = std::sqrt(var);
  return m;
}

Table mean_difference_table(const LeSample& s) {
  auto t = make_table("mean_difference", {{"estimate", CT::Number}, {"se", CT::Number}});
  const auto m = mean_difference(s);
  t.add_row({number(m.estimate), number(m.se)});
  return t;
}

std::vector<std::pair<std::string, std::vector<std::size_t>>> le_cells(const LeData& d) {
  std::vector<std::pair<std::string, std::vector<std::size_t>>> out;
  for (std::size_t k = 0; k < d.z_names.size(); ++k) {
    std::map<int, std::vector<std::size_t>> by;
    for (std::size_t i = 0; i < d.sample.records.size(); ++i)
      by[d.sample.records[i].z[k]].push_back(i);
    for (auto& [v, idx] : by) out.emplace_back(d.z_names[k] + "=" + std::to_string(v), std::move(idx));
  }
  return out;
}

Report estimate_le(const RunConfig& c, Report report) {
  const int J = static_cast<int>(c.require_int("j-count"));
  const LeData d = load_le_csv(c.require("input"), J);
  const MisreportSpec spec = parse_misreport_spec(c.get("spec", "unrestricted"));

  const LeFit f = fit_le(c, d.sample, spec, report, 0);
  auto est = make_table("gmm_estimates", {{"parameter", CT::String},
                                          {"estimate", CT::Number},
                                          {"se", CT::Number},
                                          {"se_method", CT::String}});
  add_estimate_rows(est, to_string(spec), f, false);
  report.tables.push_back(std::move(est));

  auto fit = make_table("gmm_fit", {{"spec", CT::String},
                                    {"T", CT::Number},
                                    {"dof", CT::Integer},
                                    {"p_value", CT::Number},
                                    {"dropped_index", CT::Integer},
                                    {"converged", CT::Boolean},
                                    {"n", CT::Integer}});
  fit.add_row({text(to_string(spec)), number(f.gmm.t_stat), integer(f.gmm.dof),
               number(f.gmm.p_value), integer(f.gmm.dropped_index), f.gmm.converged,
               integer(static_cast<long long>(f.gmm.n))});
  report.tables.push_back(std::move(fit));
  report.tables.push_back(mean_difference_table(d.sample));

  auto cf = make_table("closed_form", {{"identified", CT::Boolean},
                                       {"delta", CT::Number},
                                       {"p0", CT::Number},
                                       {"p1", CT::Number},
                                       {"note", CT::String}});
  try {
    const auto emp = empirical_distributions(d.sample);
    const auto r = solve_le_closed_form(emp.control, emp.treatment);
    if (r.identified)
      cf.add_row({true, number(r.params.delta), number(r.params.p0), number(r.params.p1),
                  text("sample plug-in")});
    else
      cf.add_row({false, kUnavailable, kUnavailable, kUnavailable, text(r.reason)});
  } catch (const Error& e) {
    cf.add_row({false, kUnavailable, kUnavailable, kUnavailable, text(e.what())});
  }
  report.tables.push_back(std::move(cf));

  std::vector<std::array<std::string, 4>> plot;
  const double se0 = f.boot_se.empty() ? f.gmm.se[0] : f.boot_se[0];
  plot.push_back({"overall", plot_num(f.gmm.theta_hat.delta),
                  plot_num(f.gmm.theta_hat.delta - 1.96 * se0),
                  plot_num(f.gmm.theta_hat.delta + 1.96 * se0)});

  const auto cells = le_cells(d);
  if (!cells.empty()) {
    auto bc = make_table("gmm_by_cell", {{"cell", CT::String},
                                         {"n", CT::Integer},
                                         {"delta", CT::Number},
                                         {"se", CT::Number},
                                         {"T", CT::Number},
                                         {"p_value", CT::Number}});
    for (const auto& [name, idx] : cells) {
      try {
        const auto sub = subsample(d.sample, idx);
        validate(sub);
        const auto g = j_test(sub, spec, drop_policy(c));
        bc.add_row({text(name), integer(static_cast<long long>(idx.size())),
                    number(g.theta_hat.delta), number(g.se[0]), number(g.t_stat),
                    number(g.p_value)});
        plot.push_back({name, plot_num(g.theta_hat.delta),
                        plot_num(g.theta_hat.delta - 1.96 * g.se[0]),
                        plot_num(g.theta_hat.delta + 1.96 * g.se[0])});
      } catch (const Error& e) {
        bc.add_row({text(name), integer(static_cast<long long>(idx.size())), kUnavailable,
                    kUnavailable, kUnavailable, kUnavailable});
        report.flag("cell-failed", name + ": " + e.what());
      }
    }
    report.tables.push_back(std::move(bc));
  }
  write_plot(c, plot);
  return report;
}

Report test_le(const RunConfig& c, Report report) {
  const int J = static_cast<int>(c.require_int("j-count"));
  const LeData d = load_le_csv(c.require("input"), J);
  const auto specs = c.get_list("spec", "unrestricted,equal-p,no-misreport,strategic");
  if (specs.empty()) fail(ErrorKind::Config, "spec list is empty");

  auto jt = make_table("j_tests", {{"spec", CT::String},
                                   {"T", CT::Number},
                                   {"dof", CT::Integer},
                                   {"p_value", CT::Number},
                                   {"marker", CT::String},
                                   {"decision", CT::String},
                                   {"dropped_index", CT::Integer}});
  auto est = make_table("estimates", {{"spec", CT::String},
                                      {"parameter", CT::String},
                                      {"estimate", CT::Number},
                                      {"se", CT::Number},
                                      {"se_method", CT::String}});
  std::uint64_t stream = 0;
  for (const auto& name : specs) {
    const MisreportSpec spec = parse_misreport_spec(name);
    try {
      const LeFit f = fit_le(c, d.sample, spec, report, stream++);
      jt.add_row({text(to_string(spec)), number(f.gmm.t_stat), integer(f.gmm.dof),
                  number(f.gmm.p_value), text(significance_marker(f.gmm.p_value)),
                  text(f.gmm.p_value < 0.05 ? "rejected" : "not rejected"),
                  integer(f.gmm.dropped_index)});
      add_estimate_rows(est, to_string(spec), f, true);
    } catch (const Error& e) {
      jt.add_row({text(to_string(spec)), kUnavailable, kUnavailable, kUnavailable, text("-"),
                  text("unavailable"), kUnavailable});
      report.flag("spec-failed", std::string(to_string(spec)) + ": " + e.what());
    }
  }
  report.tables.push_back(std::move(jt));
  report.tables.push_back(std::move(est));
  report.tables.push_back(mean_difference_table(d.sample));

  const auto cm = control_mean_test(d.sample);
  auto zt = make_table("control_mean_test", {{"null_mean", CT::Number},
                                             {"mean", CT::Number},
                                             {"se", CT::Number},
                                             {"z", CT::Number},
                                             {"p_value", CT::Number},
                                             {"marker", CT::String}});
  zt.add_row({number(J / 2.0), number(cm.mean), number(cm.se), number(cm.z), number(cm.p_value),
              text(significance_marker(cm.p_value))});
  report.tables.push_back(std::move(zt));

  if (d.has_direct) {
    const long long n_boot = c.get_int("n-boot", 1000);
    const auto m = modified_le_check(d.sample, d.direct, static_cast<int>(n_boot),
                                     Rng::stream(c.require_seed(), 99, 7).next());
    auto mt = make_table("modified_le", {{"direct_rate", CT::Number},
                                         {"mean_difference", CT::Number},
                                         {"gap", CT::Number},
                                         {"gap_se", CT::Number},
                                         {"zero_gap_implies_truthful", CT::Boolean}});
    mt.add_row({number(m.direct_rate), number(m.mean_diff), number(m.gap), number(m.gap_se),
                !m.zero_gap_not_sufficient});
    report.tables.push_back(std::move(mt));
    report.flag("zero-gap-caveat",
                "a zero gap does not imply truthful reporting; it only implies "
                "(1-q1)*delta + q0*(1-delta) = delta + p*(1-2*delta)/2");
  }
  return report;
}

// simulate

Report simulate(const RunConfig& c, Report report) {
  const std::string kind = c.get("kind", "le");
  const std::string path = c.require("data");
  const std::uint64_t seed = c.require_seed();
  const auto n = static_cast<std::size_t>(c.get_int("n", 2000));
  const long long covariates = c.get_int("covariates", 0);
  if (covariates < 0) fail(ErrorKind::Config, "covariates must be nonnegative");
  auto covariate = [&](std::size_t i, long long k) {
    return Rng::stream(seed, i, 1000 + static_cast<std::uint64_t>(k)).bernoulli(0.5) ? 1 : 0;
  };

  std::ostringstream out;
  auto summary = make_table("summary", {{"quantity", CT::String}, {"value", CT::Number}});
  summary.add_row({text("records"), number(static_cast<double>(n))});

  if (kind == "le") {
    const int J = static_cast<int>(c.require_int("j-count"));
    LeParams p;
    p.spec = parse_misreport_spec(c.get("spec", "unrestricted"));
    p.delta = c.require_double("delta");
    p.p0 = c.get_double("p0", 0.0);
    p.p1 = c.get_double("p1", 0.0);
    p.p_strategic = c.get_double("p", 0.0);
    if (p.spec == MisreportSpec::EqualP) p.p1 = p.p0;
    if (p.spec == MisreportSpec::NoMisreport) p.p0 = p.p1 = 0.0;
    ControlDistribution latent{J, c.get_doubles("control")};
    if (latent.probs.empty()) latent.probs.assign(static_cast<std::size_t>(J + 1), 1.0 / (J + 1));
    const double share = c.get_double("share", 0.5);
    LeSample s;
    if (c.has("treatment-latent"))
      s = simulate_le(p, latent, ControlDistribution{J, c.get_doubles("treatment-latent")}, n,
                      share, seed);
    else
      s = simulate_le(p, latent, n, share, seed);
    const bool direct = c.has("q0") || c.has("q1");
    std::vector<int> answers;
    if (direct) answers = simulate_direct_responses(s, p.delta, c.get_double("q0", 0.0),
                                                    c.get_double("q1", 0.0), seed);
    out << "y,t";
    for (long long k = 1; k <= covariates; ++k) out << ",z_" << k;
    if (direct) out << ",x_direct";
    out << "\n";
    std::size_t ci = 0;
    for (std::size_t i = 0; i < s.records.size(); ++i) {
      const auto& r = s.records[i];
      out << r.y << "," << r.t;
      for (long long k = 1; k <= covariates; ++k) out << "," << covariate(i, k);
      if (direct) {
        out << ",";
        if (r.t == 0) out << answers[ci++];
      }
      out << "\n";
    }
    const auto emp = empirical_distributions(s);
    summary.add_row({text("control"), number(static_cast<double>(emp.n0))});
    summary.add_row({text("treatment"), number(static_cast<double>(emp.n1))});
  } else if (kind == "mrt") {
    McDesign design;
    const auto dk = parse_design_kind(c.get("design", "discrete"));
    design = is_discrete(dk) ? reference_discrete_design() : reference_continuous_design();
    design.kind = dk;
    design.sigma = c.get_double("sigma", 0.0);
    design.copula = parse_copula_mode(c.get("copula", "latent"));
    if (!is_discrete(dk)) {
      const auto q = static_cast<std::size_t>(c.get_int("z-dim", 1));
      if (q != 1) {
        // Same coefficients on every covariate, scaled to keep the index range.
        const MleParams base = design.continuous;
        MleParams p = MleParams::zeros(q, false);
        for (std::size_t a = 0; a < q; ++a) {
          const double s = 1.0 / static_cast<double>(q);
          p.rho[a] = base.rho[0] * s;
          p.alpha1[a] = base.alpha1[0] * s;
          p.alpha0[a] = base.alpha0[0] * s;
          p.beta1[a] = base.beta1[0] * s;
          p.beta0[a] = base.beta0[0] * s;
          p.gamma1[a] = base.gamma1[0] * s;
          p.gamma0[a] = base.gamma0[0] * s;
        }
        design.continuous = p;
      }
      design.z_dim = q;
    }
    validate(design);
    report.metadata["mechanism"] =
        design.sigma == 0.0 ? "conditionally independent" : to_string(design.copula);
    out << "x1,x2,x3";
    if (is_discrete(dk)) {
      const auto recs = simulate_mrt_discrete(design, n, seed);
      out << ",z_1";
      for (long long k = 2; k <= covariates; ++k) out << ",z_" << k;
      out << "\n";
      for (std::size_t i = 0; i < recs.size(); ++i) {
        const auto& r = recs[i];
        out << r.x1 << "," << r.x2 << "," << r.x3 << "," << r.z;
        for (long long k = 2; k <= covariates; ++k) out << "," << covariate(i, k);
        out << "\n";
      }
    } else {
      const auto s = simulate_mrt_continuous(design, n, seed);
      for (std::size_t k = 1; k <= design.z_dim; ++k) out << ",z_" << k;
      out << "\n";
      for (const auto& r : s.records) {
        out << r.x1 << "," << r.x2 << "," << r.x3;
        for (double z : r.z) out << "," << fmt_g(z);
        out << "\n";
      }
    }
  } else {
    fail(ErrorKind::Config, "kind must be le or mrt, got '" + kind + "'");
  }
  write_file_atomic(path, out.str());
  report.metadata["data"] = path;
  report.tables.push_back(std::move(summary));
  return report;
}

// MRT

const char* kMrtParams[7] = {"Pr(X*=1)",       "Pr(X1=1|X*=1)", "Pr(X1=1|X*=0)", "Pr(X2=1|X*=1)",
                             "Pr(X2=1|X*=0)", "Pr(X3=1|X*=1)", "Pr(X3=1|X*=0)"};

std::vector<double> mrt_values(const MrtEstimate& e) {
  std::vector<double> v{e.pr_xstar};
  for (int j = 0; j < 3; ++j) {
    v.push_back(e.pr_x_given_xstar[j][1]);
    v.push_back(e.pr_x_given_xstar[j][0]);
  }
  return v;
}

Report estimate_mrt_discrete(const RunConfig& c, Report report) {
  const MrtDiscreteData d = load_mrt_discrete_csv(c.require("input"));
  const OrderingRule ordering = parse_ordering(c.require("ordering"));
  const int x2_fix = static_cast<int>(c.get_int("x2-fix", 1));
  const std::uint64_t seed = c.require_seed();
  const int n_boot = static_cast<int>(c.get_int("n-boot", 1000));
  const int rank_boot = static_cast<int>(c.get_int("rank-boot", 499));
  const std::string method_name = c.get("method", "extreme");
  if (method_name != "extreme" && method_name != "closed-form")
    fail(ErrorKind::Config, "method must be extreme or closed-form");
  const bool extreme = method_name == "extreme";
  const int question = static_cast<int>(c.get_int("direct-question", 1));
  const int truth_for = static_cast<int>(c.get_int("affirmative-truth", 1));

  auto decompose = [&](const MrtJoint& j, bool use_extreme) {
    return use_extreme ? decompose_extreme(j, x2_fix, ordering)
                       : decompose_closed_form(j, x2_fix, ordering);
  };

  // Overall plus one marginal cell per covariate value.
  std::vector<std::pair<std::string, std::vector<std::size_t>>> cells;
  {
    std::vector<std::size_t> all(d.rows.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    cells.emplace_back("overall", std::move(all));
  }
  for (std::size_t k = 0; k < d.z_names.size(); ++k) {
    std::map<int, std::vector<std::size_t>> by;
    for (std::size_t i = 0; i < d.rows.size(); ++i) by[d.rows[i].z[k]].push_back(i);
    for (auto& [v, idx] : by) cells.emplace_back(d.z_names[k] + "=" + std::to_string(v), std::move(idx));
  }

  auto rank = make_table("rank_tests", {{"cell", CT::String},
                                        {"n", CT::Integer},
                                        {"statistic", CT::Number},
                                        {"p_value", CT::Number},
                                        {"reject_rank1", CT::Boolean},
                                        {"underpowered", CT::Boolean}});
  auto est = make_table("mrt_estimates", {{"cell", CT::String},
                                          {"parameter", CT::String},
                                          {"estimate", CT::Number},
                                          {"se", CT::Number},
                                          {"ci_low", CT::Number},
                                          {"ci_high", CT::Number},
                                          {"closed_form", CT::Number},
                                          {"extreme", CT::Number}});
  auto mis = make_table("misreport", {{"cell", CT::String},
                                      {"q1", CT::Number},
                                      {"se_q1", CT::Number},
                                      {"p_value_q1", CT::Number},
                                      {"q0", CT::Number},
                                      {"se_q0", CT::Number},
                                      {"p_value_q0", CT::Number},
                                      {"n", CT::Integer}});
  std::map<std::string, double> pr_by_cell;
  std::vector<std::array<std::string, 4>> plot;

  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    const auto& [name, idx] = cells[ci];
    const MrtJoint joint = joint_of(d.rows, idx, static_cast<int>(ci));
    const auto n = static_cast<long long>(idx.size());

    try {
      const auto rt = rank_test(joint, rank_boot, Rng::stream(seed, ci, 1).next());
      rank.add_row({text(name), integer(n), number(rt.statistic), number(rt.p_value),
                    rt.reject_rank1, rt.underpowered});
      if (!rt.reject_rank1)
        report.flag("rank-not-rejected", name + ": rank-1 not rejected; estimates may be unreliable");
    } catch (const Error& e) {
      rank.add_row({text(name), integer(n), kUnavailable, kUnavailable, kUnavailable, kUnavailable});
      report.flag("rank-test-failed", name + ": " + e.what());
    }

    std::optional<MrtEstimate> cf, ex;
    try {
      cf = decompose(joint, false);
      if (cf->clipped) report.flag("clipped", name + ": closed-form estimate clipped to [0,1]");
    } catch (const Error& e) {
      report.flag("closed-form-failed", name + ": " + e.what());
    }
    try {
      ex = decompose(joint, true);
    } catch (const Error& e) {
      report.flag("extreme-failed", name + ": " + e.what());
    }
    const std::optional<MrtEstimate>& main = extreme ? ex : cf;

    std::vector<double> se(9, std::nan("")), lo(9, std::nan("")), hi(9, std::nan(""));
    double p_q1 = std::nan(""), p_q0 = std::nan("");
    if (main && n_boot > 0) {
      BootstrapConfig bc;
      bc.n_reps = n_boot;
      bc.seed = Rng::stream(seed, ci, 2).next();
      bc.stratify_by = BootstrapConfig::Stratify::None;
      try {
        const auto res = bootstrap(
            idx.size(), {},
            [&](std::span<const std::size_t> b) {
              std::vector<std::size_t> rows(b.size());
              for (std::size_t i = 0; i < b.size(); ++i) rows[i] = idx[b[i]];
              const auto e = decompose(joint_of(d.rows, rows), extreme);
              auto v = mrt_values(e);
              const auto q = misreport_rates(e, question, truth_for);
              v.push_back(q.q1);
              v.push_back(q.q0);
              return v;
            },
            bc);
        for (std::size_t k = 0; k < 9; ++k) {
          se[k] = res.se[k];
          lo[k] = res.ci95[k].first;
          hi[k] = res.ci95[k].second;
        }
        std::vector<double> q1s, q0s;
        for (const auto& row : res.estimates) {
          q1s.push_back(row[7]);
          q0s.push_back(row[8]);
        }
        p_q1 = one_sided_pvalue(q1s, 0.0, Direction::Greater);
        p_q0 = one_sided_pvalue(q0s, 0.0, Direction::Greater);
        if (res.n_failed > 0)
          report.flag("dropped-replicates",
                      name + ": " + std::to_string(res.n_failed) + " bootstrap replicates failed");
        if (res.few_replicates)
          report.flag("few-replicates", "fewer than 100 bootstrap replicates; SEs are rough");
      } catch (const Error& e) {
        report.flag("bootstrap-failed", name + ": " + e.what());
      }
    }

    const auto cf_v = cf ? mrt_values(*cf) : std::vector<double>(7, std::nan(""));
    const auto ex_v = ex ? mrt_values(*ex) : std::vector<double>(7, std::nan(""));
    const auto& mv = extreme ? ex_v : cf_v;
    for (std::size_t k = 0; k < 7; ++k)
      est.add_row({text(name), text(kMrtParams[k]), number(mv[k]), number(se[k]), number(lo[k]),
                   number(hi[k]), number(cf_v[k]), number(ex_v[k])});
    if (main) {
      const auto q = misreport_rates(*main, question, truth_for);
      mis.add_row({text(name), number(q.q1), number(se[7]), number(p_q1), number(q.q0),
                   number(se[8]), number(p_q0), integer(n)});
      pr_by_cell[name] = main->pr_xstar;
    } else {
      mis.add_row({text(name), kUnavailable, kUnavailable, kUnavailable, kUnavailable, kUnavailable,
                   kUnavailable, integer(n)});
    }
    plot.push_back({name, plot_num(mv[0]), plot_num(lo[0]), plot_num(hi[0])});
  }

  auto agg = make_table("aggregate", {{"covariate", CT::String}, {"Pr(X*=1)", CT::Number}});
  for (std::size_t k = 0; k < d.z_names.size(); ++k) {
    std::vector<std::pair<MrtEstimate, double>> parts;
    bool ok = true;
    for (const auto& [name, idx] : cells) {
      if (name.rfind(d.z_names[k] + "=", 0) != 0) continue;
      const auto it = pr_by_cell.find(name);
      if (it == pr_by_cell.end()) {
        ok = false;
        break;
      }
      MrtEstimate e;
      e.pr_xstar = it->second;
      parts.emplace_back(e, static_cast<double>(idx.size()) / static_cast<double>(d.rows.size()));
    }
    if (ok && !parts.empty()) {
      double s = 0.0;
      for (auto& p : parts) s += p.second;
      for (auto& p : parts) p.second /= s;
      agg.add_row({text(d.z_names[k]), number(aggregate_unconditional(parts))});
    } else {
      agg.add_row({text(d.z_names[k]), kUnavailable});
    }
  }

  report.metadata["method"] = method_name;
  report.metadata["ordering"] = to_string(ordering);
  report.tables.push_back(std::move(rank));
  report.tables.push_back(std::move(est));
  report.tables.push_back(std::move(mis));
  if (!d.z_names.empty()) report.tables.push_back(std::move(agg));
  write_plot(c, plot);
  return report;
}

Report estimate_mrt_continuous(const RunConfig& c, Report report) {
  const MrtContinuousData d = load_mrt_continuous_csv(c.require("input"));
  const OrderingRule ordering = parse_ordering(c.require("ordering"));
  const std::uint64_t seed = c.require_seed();
  const std::string ic = c.get("intercept", "true");
  if (ic != "true" && ic != "false") fail(ErrorKind::Config, "intercept must be true or false");
  MleOptions opt;
  opt.intercept = ic == "true";
  const MleFit fit = mle_fit(d.sample, ordering, seed, opt);
  if (!fit.converged) report.flag("not-converged", "no likelihood start converged");
  if (!fit.se_available) report.flag("se-unavailable", "observed information is singular");
  if (fit.small_sample) report.flag("small-sample", "fewer than 100 records");

  static const char* blocks[7] = {"rho", "alpha1", "alpha0", "beta1", "beta0", "gamma1", "gamma0"};
  std::vector<std::string> coef_names;
  if (opt.intercept) coef_names.push_back("intercept");
  for (const auto& z : d.z_names) coef_names.push_back(z);

  auto t = make_table("mle", {{"block", CT::String},
                              {"coefficient", CT::String},
                              {"estimate", CT::Number},
                              {"se", CT::Number}});
  const auto v = fit.params.flat();
  const auto s = fit.se.flat();
  const std::size_t q = fit.params.block_size();
  for (std::size_t b = 0; b < 7; ++b)
    for (std::size_t a = 0; a < q; ++a)
      t.add_row({text(blocks[b]), text(coef_names[a]), number(v[b * q + a]),
                 fit.se_available ? number(s[b * q + a]) : kUnavailable});

  auto info = make_table("mle_fit", {{"loglik", CT::Number},
                                     {"converged", CT::Boolean},
                                     {"starts_tried", CT::Integer},
                                     {"starts_converged", CT::Integer},
                                     {"n", CT::Integer},
                                     {"mean_Pr(X*=1|z)", CT::Number}});
  double mean_pr = 0.0;
  for (const auto& r : d.sample.records) {
    double lin = opt.intercept ? fit.params.rho[0] : 0.0;
    for (std::size_t k = 0; k < r.z.size(); ++k) lin += fit.params.rho[k + (opt.intercept ? 1 : 0)] * r.z[k];
    mean_pr += 1.0 / (1.0 + std::exp(-lin));
  }
  mean_pr /= static_cast<double>(d.sample.records.size());
  info.add_row({number(fit.loglik), fit.converged, integer(fit.starts_tried),
                integer(fit.starts_converged), integer(static_cast<long long>(d.sample.records.size())),
                number(mean_pr)});
  report.metadata["ordering"] = to_string(ordering);
  report.tables.push_back(std::move(t));
  report.tables.push_back(std::move(info));
  return report;
}

// Monte Carlo

Report montecarlo(const RunConfig& c, Report report) {
  const auto kind = parse_design_kind(c.get("design", "discrete"));
  McDesign d = is_discrete(kind) ? reference_discrete_design() : reference_continuous_design();
  d.kind = kind;
  d.sigma = c.get_double("sigma", 0.0);
  const bool correlated = kind == McDesign::Kind::DiscreteZCorrelated ||
                          kind == McDesign::Kind::ContinuousZCorrelated;
  if (!correlated && d.sigma != 0.0)
    fail(ErrorKind::Config, "sigma needs a correlated design");
  d.copula = parse_copula_mode(c.get("copula", "latent"));
  d.n = static_cast<std::size_t>(c.get_int("n", 2000));
  d.n_reps = static_cast<int>(c.get_int("reps", 1000));
  d.seed = c.require_seed();
  d.ordering = parse_ordering(c.get("ordering", "x1-higher"));
  d.x2_fix = static_cast<int>(c.get_int("x2-fix", 1));
  d.rank_boot = static_cast<int>(c.get_int("rank-boot", 199));

  std::set<McEstimator> est;
  for (const auto& e :
       c.get_list("estimators", is_discrete(kind) ? "closed-form,extreme,rank-test" : "mle"))
    est.insert(parse_estimator(e));
  const McResult r = run_monte_carlo(d, est);

  auto t = make_table("monte_carlo", {{"estimator", CT::String},
                                      {"parameter", CT::String},
                                      {"truth", CT::Number},
                                      {"mean", CT::Number},
                                      {"sd", CT::Number},
                                      {"median", CT::Number},
                                      {"n_ok", CT::Integer},
                                      {"n_failed", CT::Integer}});
  std::map<std::string, int> failed;
  for (const auto& row : r.rows) {
    t.add_row({text(row.estimator), text(row.parameter), number(row.truth), number(row.mean),
               number(row.sd), number(row.median), integer(row.n_ok), integer(row.n_failed)});
    failed[row.estimator] = row.n_failed;
  }
  for (const auto& [e, k] : failed)
    if (k > 0) report.flag("dropped-replicates", e + ": " + std::to_string(k) + " replications failed");
  report.metadata["mechanism"] = r.mechanism;
  report.metadata["design"] = to_string(kind);
  report.tables.push_back(std::move(t));
  return report;
}

}  // namespace

const char* significance_marker(double p) {
  if (!std::isfinite(p)) return "-";
  if (p < 0.05) return "✗";
  if (p < 0.1) return "†";
  return "✓";
}

Report run_subcommand(const RunConfig& c) {
  Report r;
  r.metadata["tool"] = "elicit";
  r.metadata["version"] = kVersion;
  r.metadata["command"] = c.subcommand;
  r.metadata["config_hash"] = "fnv1a64:" + c.hash();
  r.metadata["seed"] = c.get("seed", "none");
  r.metadata["started_at"] = utc_now();
  for (const auto& [k, v] : c.values()) r.metadata["config." + k] = v;
  if (c.has("format")) parse_format(c.get("format", "text"));

  if (c.subcommand == "simulate") r = simulate(c, std::move(r));
  else if (c.subcommand == "estimate-le") r = estimate_le(c, std::move(r));
  else if (c.subcommand == "test-le") r = test_le(c, std::move(r));
  else if (c.subcommand == "estimate-mrt") {
    if (parse_mrt_mode(c.get("mode", "discrete")) == MrtMode::Discrete)
      r = estimate_mrt_discrete(c, std::move(r));
    else
      r = estimate_mrt_continuous(c, std::move(r));
  } else if (c.subcommand == "montecarlo") r = montecarlo(c, std::move(r));
  else fail(ErrorKind::Config, "unknown subcommand '" + c.subcommand + "'");
  r.metadata["finished_at"] = utc_now();
  return r;
}

}  // namespace elicit
