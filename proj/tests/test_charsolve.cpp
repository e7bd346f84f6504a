#include <doctest.h>

#include <cmath>
#include <sstream>

#include "goursat/charsolve.hpp"
#include "goursat/jet_index.hpp"

using namespace goursat;

namespace {

double max_exact_error(const SolutionSurface& S, const Expr& exact) {
  double err = 0.0;
  for (std::size_t ti = 0; ti < S.time_count(); ++ti) {
    for (std::size_t si = 0; si < S.node_count(); ++si) {
      ChartPoint m = S.point(ti, si);
      err = std::max(err, std::abs(m.z - eval(exact, m.env())));
    }
  }
  return err;
}

CauchyDatum worked_datum() {
  VarTable vt(4, 1);
  std::vector<Expr> X{parse("t1", vt), parse("t2", vt), parse("t3", vt), parse("exp(t2)", vt)};
  std::vector<Expr> P{parse("exp(t1+t3)", vt), parse("t1*exp(t2)", vt), parse("exp(t1+t3)", vt), parse("-t1", vt)};
  return CauchyDatum(X, parse("exp(t1+t3)", vt), P, ParamBox{{{0, 1}, {0, 1}, {0, 1}}});
}

CauchyDatum line_datum() {
  VarTable vt(2, 1);
  return CauchyDatum({parse("t1", vt), Expr(0.0)}, Expr(0.0), {Expr(0.0), Expr(0.0)}, ParamBox{{{-1.0, 1.0}}});
}

}  // namespace

TEST_CASE("flow config validation") {
  FlowConfig c;
  c.dt = 0.1;
  c.t_end = 1.0;
  CHECK(c.steps() == 10);
  CHECK(c.record_every() == 1);
  c.record_interval = 0.2;
  CHECK(c.record_every() == 2);
  c.dt = 0.0;
  CHECK_THROWS_AS(c.steps(), Error);
  c.dt = 2.0;
  CHECK_THROWS_AS(c.steps(), Error);
}

TEST_CASE("flow of p1 moves along x1 at constant slope") {
  VarTable vt(2, 1);
  ChartPoint m0 = ChartPoint::zero(2);
  m0.p(0) = 0.5;
  m0.p(1) = -2.0;
  FlowConfig cfg;
  cfg.dt = 0.01;
  cfg.t_end = 1.0;
  cfg.record_interval = 0.5;
  Trajectory tr = flow(hamiltonian_field(parse("p1", vt), 2), m0, cfg);
  REQUIRE(tr.times.size() == 3);
  CHECK(tr.times.back() == doctest::Approx(1.0));
  const ChartPoint& m = tr.states.back();
  CHECK(std::abs(m.x(0) - 1.0) <= 1e-13);
  CHECK(std::abs(m.x(1)) <= 1e-15);
  CHECK(std::abs(m.z - 0.5) <= 1e-13);
  CHECK((m.p - m0.p).norm() <= 1e-15);
}

TEST_CASE("zero field leaves the state fixed") {
  ChartPoint m0 = ChartPoint::zero(3);
  m0.z = 1.5;
  m0.x(2) = -0.25;
  FlowConfig cfg;
  cfg.dt = 0.1;
  Trajectory tr = flow(hamiltonian_field(Expr(0.0), 3), m0, cfg);
  CHECK(tr.times.size() == 11);
  for (const auto& m : tr.states) CHECK(m.coords() == m0.coords());
}

TEST_CASE("flow of z is an exponential decay of p") {
  VarTable vt(1, 1);
  ChartPoint m0 = ChartPoint::zero(1);
  m0.p(0) = 1.0;
  FlowConfig cfg;
  cfg.dt = 1e-3;
  cfg.t_end = 1.0;
  cfg.record_interval = 1.0;
  Trajectory tr = flow(hamiltonian_field(parse("z", vt), 1), m0, cfg);
  CHECK(std::abs(tr.states.back().p(0) - std::exp(-1.0)) <= 1e-12);
}

TEST_CASE("flat solve with f = p2 stays on z = 0") {
  VarTable vt(2, 1);
  FlowConfig cfg;
  cfg.dt = 0.05;
  cfg.t_end = 1.0;
  cfg.record_interval = 0.25;
  ParamGrid grid{ParamBox{{{-1.0, 1.0}}}, 5};
  SolutionSurface S = solve_first_order(parse("p2", vt), line_datum(), cfg, grid);
  CHECK(S.time_count() == 5);
  CHECK(S.node_count() == 5);
  CHECK(max_exact_error(S, Expr(0.0)) == 0.0);
  CHECK(S.theta_residual <= 1e-15);
  ChartPoint last = S.point(4, 4);
  CHECK(last.x(0) == doctest::Approx(1.0));
  CHECK(last.x(1) == doctest::Approx(1.0));
}

TEST_CASE("transport p1 - 1 from the x2 axis gives z = x1") {
  VarTable vt(2, 1);
  CauchyDatum N = lift_cauchy_datum({Expr(0.0), parse("t1", vt)}, Expr(0.0), parse("p1 - 1", vt), {0.0},
                                    VectorXd::Zero(2), ParamBox{{{0.0, 1.0}}});
  FlowConfig cfg;
  cfg.dt = 0.01;
  cfg.t_end = 2.0;
  cfg.record_interval = 0.1;
  SolutionSurface S = solve_first_order(parse("p1 - 1", vt), N, cfg, ParamGrid{N.box(), 6});
  CHECK(max_exact_error(S, parse("x1", vt)) <= 1e-12);
  CHECK(S.f_residual <= 1e-12);
  CHECK(S.theta_residual <= 1e-12);
}

TEST_CASE("solve rejects datums off the equation or characteristic") {
  VarTable vt(2, 1);
  FlowConfig cfg;
  cfg.dt = 0.1;
  ParamGrid grid{ParamBox{{{-1.0, 1.0}}}, 3};
  try {
    solve_first_order(parse("p2 - 1", vt), line_datum(), cfg, grid);
    FAIL("expected DatumNotOnEquation");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DatumNotOnEquation);
  }
  // Y_{p1} is tangent to a datum lying along x1.
  try {
    solve_first_order(parse("p1", vt), line_datum(), cfg, grid);
    FAIL("expected CharacteristicDatum");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CharacteristicDatum);
  }
}

TEST_CASE("surface CSV layout") {
  VarTable vt(2, 1);
  FlowConfig cfg;
  cfg.dt = 0.5;
  SolutionSurface S = solve_first_order(parse("p2", vt), line_datum(), cfg, ParamGrid{ParamBox{{{-1.0, 1.0}}}, 2});
  std::ostringstream os;
  S.write_csv(os);
  std::istringstream is(os.str());
  std::string header;
  std::getline(is, header);
  CHECK(header == "t,s1,x1,x2,z,p1,p2");
  int rows = 0;
  for (std::string line; std::getline(is, line);) {
    if (!line.empty() && line[0] != '#') ++rows;
  }
  CHECK(rows == 6);
}

TEST_CASE("find_relation recovers a linear dependency") {
  VarTable vt(2, 1);
  CauchyDatum N = line_datum();
  ParamGrid grid{N.box(), 9};
  RelationConfig cfg;
  cfg.degree = 1;
  RelationResult r = find_relation({parse("x1", vt), parse("2*x1", vt)}, N, cfg, grid);
  REQUIRE(r.basis == std::vector<std::string>{"1", "g1", "g2"});
  CHECK(std::abs(r.psi(0)) <= 1e-12);
  CHECK(std::abs(r.psi(1) + 2.0 * r.psi(2)) <= 1e-12);
  CHECK(r.residual <= 1e-12);
  CHECK(std::abs(r.psi.cwiseAbs().sum() - 1.0) <= 1e-12);
}

TEST_CASE("find_relation needs enough degree") {
  VarTable vt(2, 1);
  CauchyDatum N = line_datum();
  ParamGrid grid{N.box(), 9};
  RelationConfig cfg;
  cfg.degree = 1;
  std::vector<Expr> fs{parse("x1", vt), parse("x1^2", vt)};
  try {
    find_relation(fs, N, cfg, grid);
    FAIL("expected NoRelationFound");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoRelationFound);
  }
  cfg.degree = 2;
  RelationResult r = find_relation(fs, N, cfg, grid);
  REQUIRE(r.basis == std::vector<std::string>{"1", "g1", "g1*g1", "g1*g2", "g2", "g2*g2"});
  CHECK(std::abs(r.psi(2) + r.psi(4)) <= 1e-10);
  CHECK(std::abs(r.psi(2)) == doctest::Approx(0.5));
  Expr rel = r.relation();
  for (double x : {-0.9, 0.1, 0.7, 2.0}) CHECK(std::abs(eval(rel, {{"x1", x}})) <= 1e-10);
}

TEST_CASE("find_relation with exponential features") {
  VarTable vt(2, 1);
  CauchyDatum N = line_datum();
  RelationConfig cfg;
  cfg.degree = 1;
  cfg.exp_features = true;
  RelationResult r = find_relation({parse("x1", vt), parse("exp(x1) + 3", vt)}, N, cfg, ParamGrid{N.box(), 9});
  REQUIRE(r.basis == std::vector<std::string>{"1", "g1", "g2", "e1", "e2"});
  // g2 - e1 - 3 = 0
  CHECK(std::abs(r.psi(2) + r.psi(3)) <= 1e-10);
  CHECK(std::abs(r.psi(0) + 3.0 * r.psi(2)) <= 1e-10);
  CHECK(std::abs(r.psi(1)) + std::abs(r.psi(4)) <= 1e-10);
}

TEST_CASE("find_relation needs two functions") {
  VarTable vt(2, 1);
  CHECK_THROWS_AS(find_relation({parse("x1", vt)}, line_datum(), RelationConfig{}, ParamGrid{ParamBox{{{0, 1}}}, 3}),
                  Error);
}

TEST_CASE("surface residual on known graphs") {
  const int n = 2;
  std::vector<double> times{0.0, 0.1, 0.2, 0.3, 0.4};
  ParamGrid grid{ParamBox{{{0.0, 1.0}}}, 5};
  SolutionSurface flat(n, times, grid), bowl(n, times, grid);
  for (std::size_t ti = 0; ti < times.size(); ++ti) {
    for (std::size_t si = 0; si < grid.size(); ++si) {
      double s = grid.params(si)[0];
      ChartPoint m = ChartPoint::zero(n);
      m.x(0) = s;
      m.x(1) = times[ti];
      flat.set(ti, si, m);
      m.z = 0.5 * (m.x(0) * m.x(0) + m.x(1) * m.x(1));
      m.p = m.x;
      bowl.set(ti, si, m);
    }
  }
  VarTable vt(2, 2);
  SurfaceResidual a = mae_residual_on_surface(flat, parse("p11*p22 - p12^2", vt));
  CHECK(a.nodes == 9);
  CHECK(a.max_residual <= 1e-14);
  SurfaceResidual b = mae_residual_on_surface(bowl, parse("p11*p22 - p12^2 - 1", vt));
  CHECK(b.max_residual <= 1e-12);
  SurfaceResidual c = mae_residual_on_surface(bowl, parse("p11*p22 - p12^2", vt));
  CHECK(c.max_residual == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(mae_residual_on_surface(bowl, parse("p11", vt), 2).nodes == 4);
  CHECK(mae_residual_on_surface(bowl, parse("p11", vt), 0).nodes == 0);
}

TEST_CASE("surface residual rejects a non-graphical patch") {
  std::vector<double> times{0.0, 0.1, 0.2};
  ParamGrid grid{ParamBox{{{0.0, 1.0}}}, 3};
  SolutionSurface S(2, times, grid);
  for (std::size_t ti = 0; ti < times.size(); ++ti) {
    for (std::size_t si = 0; si < grid.size(); ++si) {
      ChartPoint m = ChartPoint::zero(2);
      m.x(0) = grid.params(si)[0] + times[ti];
      S.set(ti, si, m);
    }
  }
  VarTable vt(2, 2);
  CHECK_THROWS_AS(mae_residual_on_surface(S, parse("p11", vt)), Error);
}

TEST_CASE("monge solve on the flat equation") {
  VarTable vt(2, 1);
  MongeEquation eq;
  eq.B = BField::constant(MatrixXd::Zero(2, 2));
  MongeConfig cfg;
  cfg.flow.dt = 0.05;
  cfg.flow.t_end = 1.0;
  cfg.flow.record_interval = 0.25;
  cfg.grid = ParamGrid{ParamBox{{{-1.0, 1.0}}}, 7};
  cfg.relation.degree = 1;
  MongeResult r = monge_solve(eq, {parse("p1", vt), parse("p2", vt)}, line_datum(), cfg);
  CHECK(max_exact_error(r.surface, Expr(0.0)) <= 1e-14);
  CHECK(r.f_star_on_datum <= 1e-14);
  for (double d : r.first_integral_drift) CHECK(d <= 1e-14);
  REQUIRE(r.side_checks.size() == 5);
  for (const auto& sc : r.side_checks) {
    for (Side s : sc.sides) CHECK(s != Side::Neither);
  }
}

TEST_CASE("monge solve reproduces the worked solution on a short flow") {
  VarTable vt(4, 1);
  MongeEquation eq;
  eq.F = parse("p13*p24 - p14*p23", VarTable(4, 2));
  MongeConfig cfg;
  cfg.flow.dt = 1e-2;
  cfg.flow.t_end = 0.2;
  cfg.flow.record_interval = 0.05;
  cfg.grid = ParamGrid{ParamBox{{{0, 1}, {0, 1}, {0, 1}}}, 5};
  cfg.relation.exp_features = true;
  cfg.side_check_points = 3;
  cfg.conserved = {parse("p2 - x1*exp(x2)", vt)};
  std::vector<Expr> fs{parse("x1", vt), parse("x2", vt), parse("p1", vt), parse("p2", vt)};
  MongeResult r = monge_solve(eq, fs, worked_datum(), cfg);
  CHECK(r.f_star_on_datum <= 1e-9);
  CHECK(max_exact_error(r.surface, parse("x1*exp(x2) + exp(x1 + x3) - x1*x4", vt)) <= 1e-7);
  CHECK(r.surface.theta_residual <= 1e-8);
  CHECK(r.surface.f_residual <= 1e-8);
  REQUIRE(r.conserved_drift.size() == 1);
  CHECK(r.conserved_drift[0] <= 1e-8);
  for (const auto& sc : r.side_checks) {
    for (Side s : sc.sides) CHECK(s == sc.sides.front());
  }
}

TEST_CASE("monge solve rejects bad first integrals") {
  VarTable vt(4, 1);
  MongeEquation eq;
  eq.F = parse("p13*p24 - p14*p23", VarTable(4, 2));
  MongeConfig cfg;
  cfg.flow.dt = 0.1;
  cfg.grid = ParamGrid{ParamBox{{{0, 1}, {0, 1}, {0, 1}}}, 3};
  cfg.side_check_points = 1;
  try {
    monge_solve(eq, {parse("x1", vt), parse("z", vt)}, worked_datum(), cfg);
    FAIL("expected NotFirstIntegral");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotFirstIntegral);
  }
  try {
    monge_solve(eq, {parse("x1", vt), parse("x3", vt)}, worked_datum(), cfg);
    FAIL("expected SideMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SideMismatch);
  }
}

TEST_CASE("halving the step leaves the surface unchanged") {
  VarTable vt(4, 1);
  Expr f = parse("p2 - x1*exp(x2)", vt);
  CauchyDatum N = worked_datum();
  ParamGrid grid{N.box(), 3};
  FlowConfig a;
  a.dt = 0.02;
  a.t_end = 0.4;
  a.record_interval = 0.1;
  FlowConfig b = a;
  b.dt = 0.01;
  SolutionSurface Sa = solve_first_order(f, N, a, grid);
  SolutionSurface Sb = solve_first_order(f, N, b, grid);
  REQUIRE(Sa.time_count() == Sb.time_count());
  double diff = 0.0;
  for (std::size_t ti = 0; ti < Sa.time_count(); ++ti) {
    for (std::size_t si = 0; si < Sa.node_count(); ++si) {
      diff = std::max(diff, (Sa.point(ti, si).coords() - Sb.point(ti, si).coords()).norm());
    }
  }
  CHECK(diff <= 1e-7);
  CHECK(Sa.theta_residual <= 1e-8);
}

TEST_CASE("drift along a surface") {
  VarTable vt(2, 1);
  FlowConfig cfg;
  cfg.dt = 0.1;
  SolutionSurface S = solve_first_order(parse("p2", vt), line_datum(), cfg, ParamGrid{ParamBox{{{-1.0, 1.0}}}, 3});
  auto d = drift_along_surface(S, {parse("x1", vt), parse("x2", vt)});
  CHECK(d[0] == 0.0);
  CHECK(d[1] == doctest::Approx(1.0));
}
