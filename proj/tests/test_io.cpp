#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include <json.hpp>

#include "commands.hpp"
#include "config.hpp"
#include "error.hpp"
#include "io_csv.hpp"
#include "le_core.hpp"
#include "monte_carlo.hpp"
#include "report.hpp"

using namespace elicit;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("elicit_io_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

std::string slurp(const std::string& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Domain;
}

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

RunConfig config(const std::string& sub, std::vector<std::pair<std::string, std::string>> kv) {
  RunConfig c;
  c.subcommand = sub;
  for (auto& [k, v] : kv) c.set(k, v);
  return c;
}

}  // namespace

TEST_CASE("LE csv loading") {
  const auto d = parse_le_csv("y,t\n0,0\n4,1\n", 3);
  CHECK(d.sample.records.size() == 2);
  CHECK(d.sample.records[1].y == 4);
  CHECK_FALSE(d.has_direct);

  CHECK(message_of([] { parse_le_csv("y,t\n5,0\n1,1\n", 3); }).find("row 1: y exceeds J for control") !=
        std::string::npos);
  CHECK(kind_of([] { parse_le_csv("y,t\n5,0\n", 3); }) == ErrorKind::Load);
  CHECK(message_of([] { parse_le_csv("y,t\n1,0\n5,1\n", 3); }).find("row 2") != std::string::npos);
  CHECK(message_of([] { parse_le_csv("y\n1\n", 3); }).find("missing required column t") !=
        std::string::npos);
  CHECK(message_of([] { parse_le_csv("y,t\n1.5,0\n1,1\n", 3); }).find("not an integer") !=
        std::string::npos);
  CHECK(message_of([] { parse_le_csv("y,t\n,0\n1,1\n", 3); }).find("missing") != std::string::npos);
  CHECK(kind_of([] { parse_le_csv("y,t\n1,0\n2,0\n", 3); }) == ErrorKind::Load);  // empty group
  CHECK(kind_of([] { parse_le_csv("", 3); }) == ErrorKind::Load);

  const auto z = parse_le_csv("y,t,z_age,x_direct\n1,0,2,1\n2,1,3,\n0,0,2,0\n", 3);
  CHECK(z.z_names == std::vector<std::string>{"z_age"});
  CHECK(z.direct == std::vector<int>{1, 0});
  CHECK(kind_of([] { parse_le_csv("y,t,x_direct\n1,0,\n2,1,\n", 3); }) == ErrorKind::Load);
  CHECK(kind_of([] { parse_le_csv("y,t,x_direct\n1,0,1\n2,1,1\n", 3); }) == ErrorKind::Load);
}

TEST_CASE("MRT csv loading") {
  std::string all = "x1,x2,x3,z_1\n";
  for (int c = 0; c < 8; ++c)
    all += std::to_string(c >> 2) + "," + std::to_string((c >> 1) & 1) + "," +
           std::to_string(c & 1) + ",0\n";
  const auto d = parse_mrt_discrete_csv(all);
  const auto cells = joints_by_profile(d.rows);
  REQUIRE(cells.size() == 1);
  for (double v : cells[0].second.counts) CHECK(v == 1.0);
  CHECK(cells[0].second.n_cell == 8.0);

  CHECK(kind_of([] { parse_mrt_discrete_csv(""); }) == ErrorKind::Load);
  CHECK(kind_of([] { parse_mrt_discrete_csv("x1,x2,x3\n"); }) == ErrorKind::Load);
  CHECK(kind_of([] { parse_mrt_discrete_csv("x1,x2,x3\n2,0,1\n"); }) == ErrorKind::Load);
  CHECK(message_of([] { parse_mrt_discrete_csv("x1,x2,x3,z_1,z_2\n1,0,1,1,0.5\n"); })
            .find("mixed") != std::string::npos);
  const auto c = parse_mrt_continuous_csv("x1,x2,x3,z_1\n1,0,1,0.25\n0,0,1,1\n");
  CHECK(c.sample.records[0].z[0] == 0.25);
  CHECK(kind_of([] { parse_mrt_continuous_csv("x1,x2,x3\n1,0,1\n"); }) == ErrorKind::Load);
}

TEST_CASE("generator file conserves counts") {
  TempDir dir;
  const auto c = config("simulate", {{"kind", "mrt"}, {"n", "1500"}, {"seed", "4"},
                                     {"data", dir / "m.csv"}, {"covariates", "3"}});
  run_subcommand(c);
  const auto d = load_mrt_discrete_csv(dir / "m.csv");
  CHECK(d.z_names.size() == 3);
  double total = 0.0;
  for (const auto& [z, j] : joints_by_profile(d.rows)) total += j.n_cell;
  CHECK(total == 1500.0);

  // Same draws as the library generator.
  const auto recs = simulate_mrt_discrete(reference_discrete_design(), 1500, 4);
  bool same = true;
  for (std::size_t i = 0; i < recs.size(); ++i)
    same = same && recs[i].x1 == d.rows[i].x1 && recs[i].x2 == d.rows[i].x2 &&
           recs[i].x3 == d.rows[i].x3 && recs[i].z == d.rows[i].z[0];
  CHECK(same);
}

TEST_CASE("simulate then load reproduces the empirical distributions") {
  TempDir dir;
  const auto c = config("simulate", {{"kind", "le"}, {"j-count", "4"}, {"delta", "0.3"},
                                     {"p0", "0.05"}, {"p1", "0.1"}, {"n", "1000"}, {"seed", "12"},
                                     {"data", dir / "le.csv"}});
  run_subcommand(c);
  const auto loaded = load_le_csv(dir / "le.csv", 4);
  LeParams p;
  p.delta = 0.3;
  p.p0 = 0.05;
  p.p1 = 0.1;
  const auto direct = simulate_le(p, ControlDistribution{4, std::vector<double>(5, 0.2)}, 1000, 0.5, 12);
  const auto a = empirical_distributions(loaded.sample);
  const auto b = empirical_distributions(direct);
  CHECK(a.control.probs == b.control.probs);
  CHECK(a.treatment.probs == b.treatment.probs);
  CHECK(a.n0 == b.n0);

  // Determinism of the written file.
  auto c2 = c;
  c2.set("data", dir / "le2.csv");
  run_subcommand(c2);
  CHECK(slurp(dir / "le.csv") == slurp(dir / "le2.csv"));
}

TEST_CASE("config parsing and hashing") {
  RunConfig c;
  c.subcommand = "test-le";
  merge_config_text(c, "# comment\nj-count = 4\n  seed=3 # trailing\n\n", "cfg");
  CHECK(c.require_int("j-count") == 4);
  CHECK(c.require_seed() == 3);
  CHECK(kind_of([&] { merge_config_text(c, "bogus-key = 1\n", "cfg"); }) == ErrorKind::Config);
  CHECK(kind_of([&] { merge_config_text(c, "no equals sign\n", "cfg"); }) == ErrorKind::Config);
  CHECK(kind_of([&] { c.require_double("input"); }) == ErrorKind::Config);

  const std::string h = c.hash();
  c.set("output", "elsewhere.json");
  c.set("format", "csv");
  CHECK(c.hash() == h);
  c.set("seed", "4");
  CHECK(c.hash() != h);

  RunConfig s;
  s.subcommand = "montecarlo";
  CHECK(message_of([&] { s.require_seed(); }).find("seed") != std::string::npos);
  RunConfig fresh;
  CHECK(kind_of([&] { merge_config_file(fresh, "/nonexistent/file.cfg"); }) == ErrorKind::Config);
}

TEST_CASE("report rendering keeps numbers consistent across formats") {
  Report r;
  r.metadata["seed"] = "1";
  Table t;
  t.name = "demo";
  t.columns = {{"name", ColumnType::String}, {"value", ColumnType::Number}, {"se", ColumnType::Number},
               {"k", ColumnType::Integer}, {"ok", ColumnType::Boolean}};
  t.add_row({std::string("a"), 0.123456789, std::monostate{}, std::int64_t{3}, true});
  t.add_row({std::string("b, c"), -1234567.89, number(std::nan("")), std::int64_t{-1}, false});
  r.tables.push_back(t);
  r.flag("clipped", "cell 0");
  CHECK_THROWS_AS(r.tables[0].add_row({1.0}), Error);

  const auto js = nlohmann::json::parse(render(r, Format::Json));
  CHECK(js["schema_version"] == kSchemaVersion);
  CHECK(js["tables"][0]["rows"][0][2] == "unavailable");
  CHECK(js["tables"][0]["rows"][1][2] == "unavailable");
  CHECK(js["diagnostics"][0]["flag"] == "clipped");

  const std::string txt = render(r, Format::Text);
  const std::string csv = render(r, Format::Csv);
  for (const auto& row : js["tables"][0]["rows"]) {
    const std::string v = format_number(row[1].get<double>());
    CHECK(txt.find(v) != std::string::npos);
    CHECK(csv.find(v) != std::string::npos);
  }
  CHECK(txt.find("unavailable") != std::string::npos);
  CHECK(csv.find("\"b, c\"") != std::string::npos);
  CHECK(format_number(0.123456789) == "0.123457");
  CHECK(kind_of([] { parse_format("xml"); }) == ErrorKind::Config);

  TempDir dir;
  write_file_atomic(dir / "r.json", "{}");
  CHECK(slurp(dir / "r.json") == "{}");
  CHECK(kind_of([&] { write_file_atomic(dir / "missing/r.json", "x"); }) == ErrorKind::Io);
}

TEST_CASE("test-le on null data rejects nothing") {
  TempDir dir;
  run_subcommand(config("simulate", {{"kind", "le"}, {"j-count", "4"}, {"delta", "0.3"},
                                     {"control", "0.1,0.25,0.3,0.2,0.15"}, {"n", "4000"},
                                     {"seed", "21"}, {"data", dir / "null.csv"}}));
  const auto r = run_subcommand(config("test-le", {{"input", dir / "null.csv"}, {"j-count", "4"},
                                                   {"seed", "1"}}));
  const auto& t = r.table("j_tests");
  REQUIRE(t.rows.size() == 4);
  for (const auto& row : t.rows) {
    CHECK(std::get<std::string>(row[t.column("decision")]) == "not rejected");
    CHECK(std::get<double>(row[t.column("p_value")]) >= 0.05);
  }
  CHECK(r.metadata.at("seed") == "1");
  CHECK(r.metadata.at("config_hash").rfind("fnv1a64:", 0) == 0);
  const auto& e = r.table("estimates");
  for (const auto& row : e.rows) CHECK(row.size() == e.columns.size());
}

TEST_CASE("significance markers") {
  CHECK(std::string(significance_marker(0.01)) == "✗");
  CHECK(std::string(significance_marker(0.07)) == "†");
  CHECK(std::string(significance_marker(0.5)) == "✓");
}

TEST_CASE("estimate-le reports every estimate with an SE or a marker") {
  TempDir dir;
  run_subcommand(config("simulate", {{"kind", "le"}, {"j-count", "3"}, {"delta", "0.25"},
                                     {"p0", "0.05"}, {"p1", "0.1"}, {"control", "0.2,0.3,0.3,0.2"},
                                     {"n", "3000"}, {"seed", "5"}, {"covariates", "1"},
                                     {"data", dir / "le.csv"}}));
  const auto r = run_subcommand(config("estimate-le", {{"input", dir / "le.csv"}, {"j-count", "3"},
                                                       {"plot-output", dir / "plot.csv"}}));
  const auto& g = r.table("gmm_estimates");
  CHECK(g.rows.size() == 3);
  CHECK(r.table("closed_form").rows.size() == 1);
  CHECK(r.table("gmm_by_cell").rows.size() == 2);
  const std::string plot = slurp(dir / "plot.csv");
  CHECK(plot.rfind("cell,estimate,ci_low,ci_high\n", 0) == 0);
  CHECK(std::count(plot.begin(), plot.end(), '\n') == 4);
  CHECK(kind_of([&] { run_subcommand(config("estimate-le", {{"j-count", "3"}})); }) ==
        ErrorKind::Config);
  CHECK(kind_of([&] {
          run_subcommand(config("estimate-le", {{"input", dir / "nope.csv"}, {"j-count", "3"}}));
        }) == ErrorKind::Load);
}

TEST_CASE("montecarlo subcommand is reproducible") {
  const auto c = config("montecarlo", {{"n", "500"}, {"reps", "10"}, {"seed", "3"},
                                       {"estimators", "closed-form"}});
  const auto a = run_subcommand(c);
  const auto b = run_subcommand(c);
  CHECK(render(Report{{}, a.tables, a.diagnostics}, Format::Json) ==
        render(Report{{}, b.tables, b.diagnostics}, Format::Json));
  CHECK(a.metadata.at("config_hash") == b.metadata.at("config_hash"));
  CHECK(a.metadata.at("mechanism") == "conditionally independent");
  CHECK(kind_of([] { run_subcommand(config("montecarlo", {{"n", "500"}})); }) == ErrorKind::Config);
  CHECK(kind_of([] {
          run_subcommand(config("montecarlo", {{"seed", "1"}, {"sigma", "0.2"}}));
        }) == ErrorKind::Config);
  RunConfig u;
  u.subcommand = "bogus";
  CHECK(kind_of([&] { run_subcommand(u); }) == ErrorKind::Config);
}
