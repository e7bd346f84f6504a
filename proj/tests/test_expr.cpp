#include <doctest.h>

#include <cmath>

#include "goursat/expr.hpp"
#include "goursat/jet_index.hpp"
#include "goursat/rng.hpp"

using namespace goursat;

namespace {

Expr P(std::string_view s) { return parse(s, nullptr); }

Env random_env(const std::vector<std::string>& names, Rng& rng, double lo = -2.0, double hi = 2.0) {
  Env e;
  for (const auto& n : names) e[n] = rng.uniform(lo, hi);
  return e;
}

// Random expression over the given variables; log/sqrt only see exp(...) or squares + 1.
Expr random_expr(Rng& rng, const std::vector<std::string>& vars, int depth) {
  if (depth == 0 || rng.uniform() < 0.2) {
    if (rng.uniform() < 0.3) return Expr::constant(std::round(rng.uniform(-3, 3) * 4) / 4);
    return Expr::variable(vars[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(vars.size()) - 1))]);
  }
  Expr a = random_expr(rng, vars, depth - 1);
  switch (rng.uniform_int(0, 8)) {
    case 0: return a + random_expr(rng, vars, depth - 1);
    case 1: return a - random_expr(rng, vars, depth - 1);
    case 2: return a * random_expr(rng, vars, depth - 1);
    case 3: return a / (Expr(2.0) + pow(random_expr(rng, vars, depth - 1), Expr(2.0)));
    case 4: return sin(a);
    case 5: return cos(a);
    case 6: return log(Expr(1.0) + a * a);
    case 7: return sqrt(Expr(1.0) + exp(a));
    default: return pow(a, Expr(3.0));
  }
}

}  // namespace

TEST_CASE("parse examples") {
  VarTable vt(2, 2);
  Expr e = parse("p11*p22 - p12^2 + 1", vt);
  CHECK(eval(e, {{"p11", 1}, {"p22", 1}, {"p12", 1}}) == doctest::Approx(1.0));
  CHECK(variables(e) == std::set<std::string>{"p11", "p12", "p22"});

  Expr zero = parse("0", vt);
  CHECK(zero.is_constant(0.0));

  Expr f = parse("p2 + x1*exp(x2)", vt);
  CHECK(eval(f, {{"p2", 0.5}, {"x1", 2.0}, {"x2", 0.0}}) == doctest::Approx(2.5));
  CHECK(eval(P("z"), {{"z", 0.0}}) == 0.0);
  CHECK(eval(P("exp(x1+x1b)"), {{"x1", 0.0}, {"x1b", 0.0}}) == 1.0);
}

TEST_CASE("precedence and associativity") {
  CHECK(eval(P("2^3^2"), {}) == doctest::Approx(512.0));
  CHECK(eval(P("-2^2"), {}) == doctest::Approx(-4.0));
  CHECK(eval(P("2*-3"), {}) == doctest::Approx(-6.0));
  CHECK(eval(P("8/4/2"), {}) == doctest::Approx(1.0));
  CHECK(eval(P("1-2-3"), {}) == doctest::Approx(-4.0));
  CHECK(eval(P("1.5e2 + .5"), {}) == doctest::Approx(150.5));
  CHECK(eval(P("sqrt(16) + cos(0) + sin(0) + log(1)"), {}) == doctest::Approx(5.0));
}

TEST_CASE("multi-index names are canonicalized") {
  VarTable vt(3, 3);
  CHECK(to_string(parse("p21", vt)) == "p12");
  CHECK(to_string(parse("p321", vt)) == "p123");
  Expr d = diff(parse("p21*p31", vt), "p12");
  CHECK(to_string(d) == "p13");
}

TEST_CASE("parse errors") {
  VarTable vt(2, 2);
  CHECK_THROWS_AS(parse("1 +", vt), SyntaxError);
  CHECK_THROWS_AS(parse("(x1", vt), SyntaxError);
  CHECK_THROWS_AS(parse("x1 x2", vt), SyntaxError);
  CHECK_THROWS_AS(parse("foo(x1)", vt), Error);
  try {
    parse("x1 + 3*", vt);
    FAIL("expected a syntax error");
  } catch (const SyntaxError& e) {
    CHECK(e.position() == 7);
  }
  try {
    parse("x3 + p1", vt);
    FAIL("expected an unknown variable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownVariable);
  }
  try {
    parse("p111", vt);
    FAIL("order-3 jet variable is outside the table");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownVariable);
  }
}

TEST_CASE("eval errors") {
  try {
    eval(P("x1 + x2"), {{"x1", 1.0}});
    FAIL("expected unbound variable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnboundVariable);
  }
  try {
    eval(P("log(x1)"), {{"x1", -1.0}});
    FAIL("expected a domain error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DomainError);
  }
  CHECK_THROWS_AS(eval(P("sqrt(x1)"), {{"x1", -1.0}}), Error);
  CHECK_THROWS_AS(eval(P("1/x1"), {{"x1", 0.0}}), Error);
}

TEST_CASE("diff examples") {
  VarTable vt(2, 2);
  Expr F = parse("p11*p22-p12^2+1", vt);
  Rng rng(11);
  Expr d = diff(F, "p11");
  for (int k = 0; k < 10; ++k) {
    Env env = random_env({"p11", "p12", "p22"}, rng);
    CHECK(eval(d, env) == doctest::Approx(env["p22"]).epsilon(1e-14));
    const double h = 1e-5;
    Env a = env, b = env;
    a["p11"] += h;
    b["p11"] -= h;
    CHECK(std::abs(eval(d, env) - (eval(F, a) - eval(F, b)) / (2 * h)) <= 1e-6);
  }
  CHECK(diff(Expr(3.5), "x1").is_constant(0.0));
  Expr f = parse("p2+x1*exp(x2)", vt);
  Expr dx2 = diff(f, "x2");
  Env env{{"p2", 0.3}, {"x1", 1.7}, {"x2", -0.4}};
  CHECK(eval(dx2, env) == doctest::Approx(1.7 * std::exp(-0.4)));
}

TEST_CASE("diff agrees with central differences on random expressions") {
  Rng rng(2024);
  std::vector<std::string> vars{"x1", "x2", "z", "p1"};
  for (int trial = 0; trial < 100; ++trial) {
    Expr e = random_expr(rng, vars, 4);
    Env env = random_env(vars, rng);
    const std::string& v = vars[static_cast<std::size_t>(trial % 4)];
    const double h = 1e-5;
    Env a = env, b = env;
    a[v] += h;
    b[v] -= h;
    double fd = (eval(e, a) - eval(e, b)) / (2 * h);
    double exact = eval(diff(e, v), env);
    CHECK(std::abs(exact - fd) <= 1e-5 * std::max(1.0, std::abs(exact)));
  }
}

TEST_CASE("print then parse round-trips") {
  Rng rng(7);
  std::vector<std::string> vars{"x1", "x2", "z", "p1", "p2"};
  for (int trial = 0; trial < 200; ++trial) {
    Expr e = random_expr(rng, vars, 5);
    Expr back = parse(to_string(e), nullptr);
    for (int k = 0; k < 3; ++k) {
      Env env = random_env(vars, rng);
      double a = eval(e, env);
      double b = eval(back, env);
      CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)));
    }
  }
}

TEST_CASE("total derivative examples") {
  VarTable vt(2, 3);
  CHECK(to_string(total_derivative(parse("p2", vt), 1, vt)) == "p12");
  CHECK(total_derivative(Expr(4.0), 2, vt).is_constant(0.0));
  CHECK(to_string(total_derivative(parse("z", vt), 1, vt)) == "p1");
  Expr d = total_derivative(parse("x1*p1", vt), 1, vt);
  CHECK(eval(d, {{"x1", 2.0}, {"p1", 3.0}, {"p11", 5.0}}) == doctest::Approx(13.0));
  CHECK_THROWS_AS(total_derivative(parse("p111", vt), 1, vt), Error);
}

TEST_CASE("total derivatives commute") {
  VarTable vt(3, 4);
  Rng rng(99);
  std::vector<std::string> names = vt.jet_names(4);
  std::vector<std::string> low = vt.jet_names(2);
  for (int trial = 0; trial < 100; ++trial) {
    Expr e = random_expr(rng, low, 3);
    int i = rng.uniform_int(1, 3);
    int j = rng.uniform_int(1, 3);
    Expr a = total_derivative(total_derivative(e, i, vt), j, vt);
    Expr b = total_derivative(total_derivative(e, j, vt), i, vt);
    Env env = random_env(names, rng, -1.0, 1.0);
    double va = eval(a, env);
    double vb = eval(b, env);
    CHECK(std::abs(va - vb) <= 1e-10 * std::max(1.0, std::abs(va)));
  }
}

TEST_CASE("substitute and variables") {
  Expr e = P("x1*z + p1");
  Expr s = substitute(e, {{"z", P("x2^2")}});
  CHECK(variables(s) == std::set<std::string>{"p1", "x1", "x2"});
  CHECK(eval(s, {{"x1", 2.0}, {"x2", 3.0}, {"p1", 1.0}}) == doctest::Approx(19.0));
}

TEST_CASE("compiled programs match eval") {
  Rng rng(5);
  std::vector<std::string> vars{"x1", "x2", "z", "p1", "p2"};
  std::vector<Expr> outs;
  for (int k = 0; k < 20; ++k) outs.push_back(random_expr(rng, vars, 5));
  Program prog(outs, vars);
  CHECK(prog.output_count() == outs.size());
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> in;
    Env env;
    for (const auto& v : vars) {
      double x = rng.uniform(-2, 2);
      in.push_back(x);
      env[v] = x;
    }
    auto res = prog.run(in);
    for (std::size_t k = 0; k < outs.size(); ++k) {
      double want = eval(outs[k], env);
      CHECK(std::abs(res[k] - want) <= 1e-12 * std::max(1.0, std::abs(want)));
    }
  }
}

TEST_CASE("multi-index helpers") {
  CHECK(canonical_index("321") == "123");
  CHECK(index_append("13", 2) == "123");
  CHECK(index_count("1223", 2) == 2);
  CHECK(multi_indices(2, 2) == std::vector<std::string>{"11", "12", "22"});
  CHECK(sym_dim(3, 2) == 6);
  CHECK(sym_dim(4, 3) == 20);
  CHECK(jet_index_of("p12") == std::optional<std::string>("12"));
  CHECK(!jet_index_of("x1"));
  CHECK(jet_order("p123") == 3);
  CHECK(jet_order("z") == 0);
  VarTable vt(2, 2);
  CHECK(vt.admits("p22"));
  CHECK(!vt.admits("p222"));
  CHECK(vt.admits("t1"));
}
