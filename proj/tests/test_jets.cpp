#include <doctest.h>

#include <cmath>

#include "goursat/jet_index.hpp"
#include "goursat/jets.hpp"
#include "goursat/rng.hpp"

using namespace goursat;

namespace {

// p_I of an explicit solution at the origin.
double taylor_coefficient(const Expr& u, const std::string& index, int n) {
  Expr d = u;
  for (char c : index) d = diff(d, "x" + std::string(1, c));
  Env env;
  for (int i = 1; i <= n; ++i) env["x" + std::to_string(i)] = 0.0;
  return eval(d, env);
}

double max_taylor_error(const JetTable& jt, const Expr& u) {
  double err = std::abs(jt.z() - taylor_coefficient(u, "", jt.n()));
  for (const auto& [I, v] : jt.coefficients()) err = std::max(err, std::abs(v - taylor_coefficient(u, I, jt.n())));
  return err;
}

std::string det3() {
  return "p11*(p22*p33 - p23^2) - p12*(p12*p33 - p23*p13) + p13*(p12*p23 - p22*p13)";
}

}  // namespace

TEST_CASE("jet table basics") {
  JetTable jt(2, 2, VectorXd::Zero(2), 0.0);
  CHECK(!jt.complete());
  for (const auto& I : {"1", "2", "11", "12", "22"}) jt.set(I, 1.0);
  CHECK(jt.complete());
  jt.set("21", 3.0);
  CHECK(jt.get("12") == 3.0);
  CHECK(jt.env().at("p12") == 3.0);
  CHECK(jt.jet_point().P(1, 0) == 3.0);
  CHECK_THROWS_AS(jt.get("111"), Error);
}

TEST_CASE("wave equation jet matches x1*x2") {
  VarTable vt(2, 7);
  Expr F = parse("p22 - p11", vt);
  JetTable jt = formal_solve(F, parse("x1", vt), 2, 5);
  CHECK(jt.complete());
  CHECK(max_taylor_error(jt, parse("x1*x2", vt)) <= 1e-12);
  CHECK(jt.get("12") == doctest::Approx(1.0));
  CHECK(jet_residual(F, jt) <= 1e-12);
}

TEST_CASE("wave equation with a nonlinear datum") {
  VarTable vt(2, 7);
  Expr F = parse("p22 - p11", vt);
  JetTable jt = formal_solve(F, parse("sin(x1)", vt), 2, 6);
  CHECK(max_taylor_error(jt, parse("sin(x1)*sin(x2)", vt)) <= 1e-12);
}

TEST_CASE("characteristic datum is rejected") {
  VarTable vt(3, 4);
  try {
    formal_solve(parse("p12 - p3", vt), Expr(0.0), 3, 3);
    FAIL("expected CharacteristicDatum");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CharacteristicDatum);
  }
}

TEST_CASE("zero datum gives the zero jet") {
  VarTable vt(3, 5);
  JetTable jt = formal_solve(parse("p33 + p12 - p3", vt), Expr(0.0), 3, 3);
  CHECK(jt.coefficients().size() == static_cast<std::size_t>(sym_dim(3, 1) + sym_dim(3, 2) + sym_dim(3, 3)));
  for (const auto& [I, v] : jt.coefficients()) CHECK(v == 0.0);
}

TEST_CASE("worked fully nonlinear equation against its Taylor series") {
  VarTable vt(4, 5);
  Expr F = parse("p14*(p23 + p34) - (p13 - 1)*(p24 + p44)", vt);
  Expr u = parse("exp(x1 - x2)*(exp(x4) - 1)", vt);
  JetTable jt = formal_solve(F, parse("exp(x1 - x2)", vt), 4, 3);
  CHECK(max_taylor_error(jt, u) <= 1e-9);
  CHECK(jet_residual(F, jt) <= 1e-9);
  for (const auto& [I, v] : jt.coefficients()) {
    if (I.size() >= 3 && index_count(I, 4) >= 2) CHECK(std::abs(recompute_coefficient(F, jt, I) - v) <= 1e-10);
  }
}

TEST_CASE("second derivative seed is found by Newton") {
  VarTable vt(2, 4);
  // u = x2^2/2 + x1*x2 solves p22 * (1 + p11) = 1 with u_2 = x1 on x2 = 0.
  Expr F = parse("p22*(1 + p11) - 1", vt);
  FormalSolveConfig cfg;
  cfg.p_nn_guess = 3.0;
  JetTable jt = formal_solve(F, parse("x1", vt), 2, 4, cfg);
  CHECK(jt.get("22") == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(max_taylor_error(jt, parse("x2^2/2 + x1*x2", vt)) <= 1e-12);
}

TEST_CASE("recomputed coefficients agree on the wave jet") {
  VarTable vt(2, 8);
  Expr F = parse("p22 - p11 + p1*p2", vt);
  JetTable jt = formal_solve(F, parse("sin(x1)", vt), 2, 6);
  CHECK(jet_residual(F, jt) <= 1e-9);
  int checked = 0;
  for (const auto& [I, v] : jt.coefficients()) {
    if (I.size() < 3 || index_count(I, 2) < 2) continue;
    CHECK(std::abs(recompute_coefficient(F, jt, I) - v) <= 1e-10 * (1.0 + std::abs(v)));
    ++checked;
  }
  CHECK(checked == 2 + 3 + 4 + 5);
  CHECK_THROWS_AS(recompute_coefficient(F, jt, "22"), Error);
}

TEST_CASE("prolonged system of the Laplace equation") {
  VarTable vt(2, 4);
  Expr F = parse("p11 + p22", vt);
  JetTable jt = formal_solve(F, parse("x1", vt), 2, 3);
  LinearSystem sys = prolonged_fiber_system(F, jt, 1);
  CHECK(sys.equations == std::vector<std::string>{"1", "2"});
  CHECK(sys.unknowns == std::vector<std::string>{"111", "112", "122", "222"});
  MatrixXd want(2, 4);
  want << 1, 0, 1, 0, 0, 1, 0, 1;
  CHECK((sys.A - want).norm() <= 1e-15);
  CHECK(sys.c.norm() <= 1e-15);
  CHECK(sys.rank() == 2);
  CHECK(sys.free_parameters() == 2);
}

TEST_CASE("prolonged system with lower-order terms") {
  VarTable vt(2, 4);
  Expr F = parse("p12 - z", vt);
  JetTable jt(2, 2, VectorXd::Zero(2), 0.5);
  jt.set("1", 0.25);
  jt.set("2", -1.5);
  jt.set("11", 2.0);
  jt.set("12", 0.5);
  jt.set("22", 1.0);
  LinearSystem sys = prolonged_fiber_system(F, jt, 1);
  MatrixXd want(2, 4);
  want << 0, 1, 0, 0, 0, 0, 1, 0;
  CHECK((sys.A - want).norm() <= 1e-15);
  CHECK(sys.c(0) == doctest::Approx(0.25));
  CHECK(sys.c(1) == doctest::Approx(-1.5));
  CHECK_THROWS_AS(prolonged_fiber_system(F, JetTable(2, 1, VectorXd::Zero(2), 0.0), 1), Error);
}

TEST_CASE("free parameter counts") {
  VarTable vt(4, 7);
  Expr F = parse("p14*(p23 + p34) - (p13 - 1)*(p24 + p44)", vt);
  JetTable jt = formal_solve(F, parse("exp(x1 - x2)", vt), 4, 4);
  for (int k = 0; k <= 2; ++k) {
    LinearSystem sys = prolonged_fiber_system(F, jt, k);
    CHECK(sys.equations.size() == static_cast<std::size_t>(sym_dim(4, k)));
    CHECK(sys.free_parameters() == sym_dim(4, k + 2) - sym_dim(4, k));
  }
}

TEST_CASE("noncharacteristic examples") {
  VarTable vt(3, 2);
  JetPoint zero(ChartPoint::zero(3), MatrixXd::Zero(3, 3));
  CHECK(is_noncharacteristic(parse("p33 - p11", vt), zero, 1e-10));
  CHECK(!is_noncharacteristic(parse("p12 - p3", vt), zero, 1e-10));
  CHECK(!is_noncharacteristic(parse(det3(), vt), zero, 1e-10));
  JetPoint id(ChartPoint::zero(3), MatrixXd::Identity(3, 3));
  CHECK(is_noncharacteristic(parse(det3(), vt), id, 1e-10));
}

TEST_CASE("formal integrability") {
  Rng rng(17);
  VarTable vt2(2, 2), vt3(3, 2);
  Expr laplace = parse("p11 + p22", vt2);
  CHECK(formal_integrability_check(laplace, sample_equation_points(laplace, 2, 20, rng)));
  Expr hyper = parse("p11*p22 - p12^2 + 1", vt2);
  auto hs = sample_equation_points(hyper, 2, 20, rng);
  CHECK(hs.size() == 20);
  for (const auto& m : hs) CHECK(std::abs(eval(hyper, m.env())) <= 1e-10);
  CHECK(formal_integrability_check(hyper, hs));

  // det P on rank-one P: every cofactor vanishes.
  Expr det = parse(det3(), vt3);
  std::vector<JetPoint> rank_one;
  for (int k = 0; k < 10; ++k) {
    VectorXd v = VectorXd::Zero(3);
    for (int i = 0; i < 3; ++i) v(i) = rng.uniform(-1, 1);
    rank_one.emplace_back(ChartPoint::zero(3), v * v.transpose());
  }
  CHECK(!formal_integrability_check(det, rank_one));
  MatrixXd rank_two = MatrixXd::Zero(3, 3);
  rank_two(0, 0) = rank_two(1, 1) = 1.0;
  CHECK(formal_integrability_check(det, {JetPoint(ChartPoint::zero(3), rank_two)}));
}
