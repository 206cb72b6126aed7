#include <doctest.h>

#include <cmath>
#include <random>

#include "error.hpp"
#include "mrt_core.hpp"

using namespace elicit;

namespace {

const OrderingRule kHigher{1, OrderingRule::Direction::ClassOneHigher};
const OrderingRule kLower{1, OrderingRule::Direction::ClassOneLower};

MrtLatent reference_cell_z0() {
  MrtLatent t;
  t.pr_xstar = 0.378;
  t.pr_x = {{{0.269, 0.881}, {0.269, 0.731}, {0.269, 0.881}}};
  return t;
}

MrtLatent random_latent(std::mt19937_64& gen, double min_gap = 0.05) {
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (;;) {
    MrtLatent t;
    t.pr_xstar = u(gen);
    for (auto& row : t.pr_x) row = {u(gen), u(gen)};
    if (t.pr_x[0][0] > t.pr_x[0][1]) std::swap(t.pr_x[0][0], t.pr_x[0][1]);
    if (std::abs(t.pr_x[1][0] - t.pr_x[1][1]) < min_gap) continue;
    if (std::abs(t.pr_x[0][0] - t.pr_x[0][1]) < min_gap) continue;
    if (std::abs(t.pr_x[2][0] - t.pr_x[2][1]) < min_gap) continue;
    return t;
  }
}

MrtJoint sample_joint(const MrtLatent& t, int n, std::mt19937_64& gen) {
  auto p = mrt_joint_probs(t);
  std::discrete_distribution<int> cell(p.begin(), p.end());
  MrtJoint j;
  for (int i = 0; i < n; ++i) j.counts[cell(gen)] += 1;
  j.n_cell = n;
  return j;
}

void check_recovers(const MrtEstimate& e, const MrtLatent& t, double tol) {
  CHECK(std::abs(e.pr_xstar - t.pr_xstar) < tol);
  for (int q = 0; q < 3; ++q)
    for (int k = 0; k < 2; ++k) CHECK(std::abs(e.pr_x_given_xstar[q][k] - t.pr_x[q][k]) < tol);
}

}  // namespace

TEST_CASE("matrices: uniform joint") {
  MrtJoint j;
  j.counts.fill(1.0);
  j.n_cell = 8;
  auto m = build_matrices(j, 1);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) CHECK(m.m_x1x3(a, b) == 0.25);
  CHECK(std::abs(m.m_x1x3.determinant()) < 1e-15);
}

TEST_CASE("matrices: single observation") {
  MrtJoint j;
  j.at(1, 1, 1) = 1;
  j.n_cell = 1;
  auto m = build_matrices(j, 1);
  CHECK(m.m_x1x2x3(1, 1) == 1.0);
  CHECK(m.m_x1x2x3(0, 0) + m.m_x1x2x3(0, 1) + m.m_x1x2x3(1, 0) == 0.0);
  MrtJoint empty;
  CHECK_THROWS_AS(build_matrices(empty, 1), Error);
}

TEST_CASE("matrices: equal the latent matrix products") {
  std::mt19937_64 gen(2);
  for (int rep = 0; rep < 50; ++rep) {
    auto t = random_latent(gen);
    for (int x2 = 0; x2 < 2; ++x2) {
      auto m = build_matrices(mrt_expected_joint(t, 1.0), x2);
      Eigen::Matrix2d M1, M3joint;
      Eigen::Vector2d pi(1 - t.pr_xstar, t.pr_xstar), d;
      for (int k = 0; k < 2; ++k) {
        M1.col(k) << 1 - t.pr_x[0][k], t.pr_x[0][k];
        d[k] = x2 == 1 ? t.pr_x[1][k] : 1 - t.pr_x[1][k];
        M3joint.row(k) << (1 - t.pr_x[2][k]) * pi[k], t.pr_x[2][k] * pi[k];
      }
      CHECK((m.m_x1x2x3 - M1 * d.asDiagonal() * M3joint).cwiseAbs().maxCoeff() < 1e-14);
      CHECK((m.m_x1x3 - M1 * M3joint).cwiseAbs().maxCoeff() < 1e-14);
      CHECK((m.m_x1 - M1 * pi).cwiseAbs().maxCoeff() < 1e-14);
    }
  }
}

TEST_CASE("closed form: recovers the simulation truth exactly") {
  auto t = reference_cell_z0();
  auto e = decompose_closed_form(mrt_expected_joint(t, 2000), 1, kHigher);
  check_recovers(e, t, 1e-10);
  CHECK_FALSE(e.clipped);
  CHECK(e.method == MrtMethod::ClosedForm);
}

TEST_CASE("closed form: perfect measurement") {
  MrtLatent t;
  t.pr_xstar = 0.3;
  t.pr_x = {{{0, 1}, {0, 1}, {0, 1}}};
  auto e = decompose_closed_form(mrt_expected_joint(t, 1.0), 1, kHigher);
  CHECK(e.pr_xstar == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(e.eigen_gap == doctest::Approx(1.0).epsilon(1e-14));
  check_recovers(e, t, 1e-14);
}

TEST_CASE("closed form: round trip on random well-separated instances") {
  std::mt19937_64 gen(4);
  for (int rep = 0; rep < 1000; ++rep) {
    auto t = random_latent(gen);
    auto e = decompose_closed_form(mrt_expected_joint(t, 1.0), rep % 2, kHigher);
    check_recovers(e, t, 1e-8);
  }
}

TEST_CASE("closed form: ordering rule, not labels, pins the solution") {
  std::mt19937_64 gen(5);
  for (int rep = 0; rep < 200; ++rep) {
    auto t = random_latent(gen);
    MrtLatent swapped = t;
    swapped.pr_xstar = 1 - t.pr_xstar;
    for (auto& row : swapped.pr_x) std::swap(row[0], row[1]);
    auto a = decompose_closed_form(mrt_expected_joint(t, 1.0), 1, kHigher);
    auto b = decompose_closed_form(mrt_expected_joint(swapped, 1.0), 1, kLower);
    CHECK(b.pr_xstar == doctest::Approx(1 - a.pr_xstar).epsilon(1e-10));
    for (int q = 0; q < 3; ++q) {
      CHECK(std::abs(b.pr_x_given_xstar[q][0] - a.pr_x_given_xstar[q][1]) < 1e-10);
      CHECK(std::abs(b.pr_x_given_xstar[q][1] - a.pr_x_given_xstar[q][0]) < 1e-10);
    }
    auto c = decompose_closed_form(mrt_expected_joint(swapped, 1.0), 1, kHigher);
    CHECK(std::abs(c.pr_xstar - a.pr_xstar) < 1e-10);
  }
}

TEST_CASE("closed form: x2_fix choice does not change Pr(X*)") {
  std::mt19937_64 gen(6);
  for (int rep = 0; rep < 200; ++rep) {
    auto j = mrt_expected_joint(random_latent(gen), 1.0);
    CHECK(std::abs(decompose_closed_form(j, 0, kHigher).pr_xstar -
                   decompose_closed_form(j, 1, kHigher).pr_xstar) < 1e-8);
  }
}

TEST_CASE("closed form: ordering on question 2") {
  auto t = reference_cell_z0();
  auto e = decompose_closed_form(mrt_expected_joint(t, 1.0), 0,
                                 OrderingRule{2, OrderingRule::Direction::ClassOneHigher});
  check_recovers(e, t, 1e-10);
}

TEST_CASE("closed form: complex eigenvalues") {
  MrtJoint j;
  j.at(0, 1, 0) = 9;
  j.at(0, 1, 1) = 1;
  j.at(1, 1, 0) = 19;
  j.at(1, 1, 1) = 21;
  j.at(0, 0, 0) = 21;
  j.at(0, 0, 1) = 19;
  j.at(1, 0, 0) = 1;
  j.at(1, 0, 1) = 9;
  j.n_cell = 100;
  try {
    decompose_closed_form(j, 1, kHigher);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Decomposition);
  }
}

TEST_CASE("closed form: X2 uninformative is near-degenerate") {
  auto t = reference_cell_z0();
  t.pr_x[1] = {0.4, 0.4};
  try {
    decompose_closed_form(mrt_expected_joint(t, 1.0), 1, kHigher);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NearDegenerate);
  }
}

TEST_CASE("closed form: singular M13") {
  MrtJoint j;
  j.counts.fill(1.0);
  j.n_cell = 8;
  CHECK_THROWS_AS(decompose_closed_form(j, 1, kHigher), Error);
}

TEST_CASE("extreme: round trip") {
  std::mt19937_64 gen(7);
  check_recovers(decompose_extreme(mrt_expected_joint(reference_cell_z0(), 1.0), 1, kHigher),
                 reference_cell_z0(), 1e-6);
  for (int rep = 0; rep < 100; ++rep) {
    auto t = random_latent(gen);
    auto e = decompose_extreme(mrt_expected_joint(t, 1.0), rep % 2, kHigher);
    check_recovers(e, t, 1e-6);
    CHECK(e.method == MrtMethod::Extreme);
  }
}

TEST_CASE("extreme: agrees with an interior closed form and stays in [0,1]") {
  std::mt19937_64 gen(8);
  int compared = 0;
  for (int rep = 0; rep < 50; ++rep) {
    auto t = random_latent(gen, 0.3);
    auto j = sample_joint(t, 5000, gen);
    MrtEstimate ex;
    try {
      ex = decompose_extreme(j, 1, kHigher);
    } catch (const Error&) {
      continue;
    }
    CHECK(ex.pr_xstar >= 0.0);
    CHECK(ex.pr_xstar <= 1.0);
    for (auto& row : ex.pr_x_given_xstar)
      for (double v : row) CHECK((v >= 0.0 && v <= 1.0));
    try {
      auto cf = decompose_closed_form(j, 1, kHigher);
      if (cf.clipped) continue;
      ++compared;
      CHECK(std::abs(cf.pr_xstar - ex.pr_xstar) < 1e-4);
      for (int q = 0; q < 3; ++q)
        for (int k = 0; k < 2; ++k)
          CHECK(std::abs(cf.pr_x_given_xstar[q][k] - ex.pr_x_given_xstar[q][k]) < 1e-4);
    } catch (const Error&) {
    }
  }
  CHECK(compared >= 40);
}

TEST_CASE("extreme: never worse than the clipped closed form") {
  std::mt19937_64 gen(9);
  auto t = reference_cell_z0();
  t.pr_x[0] = {0.02, 0.97};
  t.pr_x[2] = {0.03, 0.99};
  int clipped = 0;
  for (int rep = 0; rep < 40; ++rep) {
    auto j = sample_joint(t, 300, gen);
    MrtEstimate cf, ex;
    try {
      cf = decompose_closed_form(j, 1, kHigher);
      ex = decompose_extreme(j, 1, kHigher);
    } catch (const Error&) {
      continue;
    }
    clipped += cf.clipped;
    auto m = build_matrices(j, 1);
    Eigen::Matrix2d A = m.m_x1x2x3 * m.m_x1x3.inverse();
    Eigen::Matrix2d M;
    M << 1 - cf.pr_x_given_xstar[0][0], 1 - cf.pr_x_given_xstar[0][1],
        cf.pr_x_given_xstar[0][0], cf.pr_x_given_xstar[0][1];
    Eigen::Matrix2d D = Eigen::Vector2d(cf.pr_x_given_xstar[1][0], cf.pr_x_given_xstar[1][1])
                            .asDiagonal();
    CHECK(ex.objective <= (A - M * D * M.inverse()).squaredNorm() + 1e-15);
  }
  CHECK(clipped > 0);
}

TEST_CASE("rank test: singular matrix and degenerate margins") {
  MrtJoint j;
  j.at(0, 0, 0) = 10;
  j.at(0, 1, 1) = 10;
  j.at(1, 0, 0) = 10;
  j.at(1, 1, 1) = 10;
  j.n_cell = 40;
  auto r = rank_test(j, 199, 1);
  CHECK(r.statistic == 0.0);
  CHECK(r.p_value == 1.0);
  CHECK_FALSE(r.reject_rank1);

  MrtJoint d;
  d.at(1, 0, 0) = 20;
  d.at(1, 1, 1) = 20;
  d.n_cell = 40;
  auto s = rank_test(d, 199, 1);
  CHECK(s.underpowered);
  CHECK_FALSE(s.reject_rank1);

  MrtJoint small = mrt_expected_joint(reference_cell_z0(), 16);
  CHECK(rank_test(small, 99, 1).underpowered);
}

TEST_CASE("rank test: strong signal rejects, deterministic") {
  auto j = mrt_expected_joint(reference_cell_z0(), 800);
  auto a = rank_test(j, 199, 3);
  auto b = rank_test(j, 199, 3);
  CHECK(a.reject_rank1);
  CHECK(a.p_value == doctest::Approx(1.0 / 200));
  CHECK(a.p_value == b.p_value);
}

TEST_CASE("aggregate") {
  MrtEstimate a, b;
  a.pr_xstar = 0.378;
  b.pr_xstar = 0.818;
  CHECK(aggregate_unconditional({{a, 0.4}, {b, 0.6}}) == doctest::Approx(0.642).epsilon(1e-14));
  CHECK(aggregate_unconditional({{a, 1.0}}) == 0.378);
  CHECK(aggregate_unconditional({{a, 0.5}, {a, 0.5}}) == doctest::Approx(0.378).epsilon(1e-15));
  CHECK_THROWS_AS(aggregate_unconditional({{a, 0.5}, {b, 0.6}}), Error);
}

TEST_CASE("misreport rates") {
  MrtEstimate e;
  e.pr_x_given_xstar[0] = {0.963, 0.293};
  auto r = misreport_rates(e, 1, 0);
  CHECK(r.q1 == doctest::Approx(0.293));
  CHECK(r.q0 == doctest::Approx(0.037));
  e.pr_x_given_xstar[0] = {1.0, 0.0};
  r = misreport_rates(e, 1, 0);
  CHECK(r.q1 == 0.0);
  CHECK(r.q0 == 0.0);
  e.pr_x_given_xstar[0] = {0.0, 1.0};
  r = misreport_rates(e, 1, 0);
  CHECK(r.q1 == 1.0);
  CHECK(r.q0 == 1.0);
  e.pr_x_given_xstar[2] = {0.1, 0.8};
  r = misreport_rates(e, 3, 1);
  CHECK(r.q1 == doctest::Approx(0.2));
  CHECK(r.q0 == doctest::Approx(0.1));
}

TEST_CASE("ordering parse") {
  auto r = parse_ordering("x2-lower");
  CHECK(r.question == 2);
  CHECK(r.direction == OrderingRule::Direction::ClassOneLower);
  CHECK(to_string(r) == "x2-lower");
  CHECK_THROWS_AS(parse_ordering("x4-higher"), Error);
}
