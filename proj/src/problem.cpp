#include "goursat/problem.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "goursat/charsolve.hpp"
#include "goursat/jet_index.hpp"
#include "goursat/jets.hpp"
#include "goursat/mae.hpp"
#include "goursat/rng.hpp"

namespace goursat {

namespace {

[[noreturn]] void schema_error(const std::string& what) { throw Error(ErrorCode::SchemaError, what); }

Json vec_json(const VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Json mat_json(const MatrixXd& m) {
  Json a = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vec_json(m.row(r).transpose()));
  return a;
}

Json point_json(const ChartPoint& m) { return Json{{"x", vec_json(m.x)}, {"z", m.z}, {"p", vec_json(m.p)}}; }

// Reads optional settings from a block and records the value actually used.
class Block {
 public:
  Block(const Json& src, const std::string& name) : name_(name) {
    if (src.contains(name)) {
      if (!src[name].is_object()) schema_error("\"" + name + "\" must be an object");
      src_ = src[name];
    } else {
      src_ = Json::object();
    }
    out_ = Json::object();
  }

  double number(const std::string& key, double def) {
    double v = def;
    if (src_.contains(key)) {
      if (!src_[key].is_number()) schema_error(name_ + "." + key + " must be a number");
      v = src_[key].get<double>();
    }
    out_[key] = v;
    return v;
  }

  int integer(const std::string& key, int def, int min = 0) {
    int v = def;
    if (src_.contains(key)) {
      if (!src_[key].is_number_integer()) schema_error(name_ + "." + key + " must be an integer");
      v = src_[key].get<int>();
    }
    if (v < min) schema_error(name_ + "." + key + " must be at least " + std::to_string(min));
    out_[key] = v;
    return v;
  }

  bool boolean(const std::string& key, bool def) {
    bool v = def;
    if (src_.contains(key)) {
      if (!src_[key].is_boolean()) schema_error(name_ + "." + key + " must be a boolean");
      v = src_[key].get<bool>();
    }
    out_[key] = v;
    return v;
  }

  bool has(const std::string& key) const { return src_.contains(key); }
  const Json& raw(const std::string& key) const { return src_.at(key); }
  void echo(const std::string& key, Json v) { out_[key] = std::move(v); }
  Json result() const { return out_; }

 private:
  std::string name_;
  Json src_;
  Json out_;
};

std::string as_string(const Json& j, const std::string& what) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number()) {
    std::ostringstream os;
    os.precision(17);
    os << j.get<double>();
    return os.str();
  }
  schema_error(what + " must be an expression string");
}

Expr parse_expr(const Json& j, const VarTable& vt, const std::string& what) {
  std::string text = as_string(j, what);
  try {
    return parse(text, vt);
  } catch (const Error& e) {
    throw Error(e.code(), what + ": " + e.what(), e.details());
  }
}

std::vector<Expr> parse_expr_list(const Json& j, std::size_t size, const VarTable& vt, const std::string& what) {
  if (!j.is_array() || j.size() != size) schema_error(what + " must be an array of " + std::to_string(size));
  std::vector<Expr> out;
  for (std::size_t i = 0; i < size; ++i) out.push_back(parse_expr(j[i], vt, what + "[" + std::to_string(i) + "]"));
  return out;
}

VectorXd parse_vector(const Json& j, int size, const std::string& what) {
  if (!j.is_array() || static_cast<int>(j.size()) != size) {
    schema_error(what + " must be an array of " + std::to_string(size) + " numbers");
  }
  VectorXd v(size);
  for (int i = 0; i < size; ++i) {
    if (!j[i].is_number()) schema_error(what + " must contain numbers");
    v(i) = j[i].get<double>();
  }
  return v;
}

MatrixXd parse_matrix(const Json& j, int n, const std::string& what) {
  if (!j.is_array() || static_cast<int>(j.size()) != n) schema_error(what + " must be an n x n array");
  MatrixXd m(n, n);
  for (int r = 0; r < n; ++r) m.row(r) = parse_vector(j[r], n, what).transpose();
  return m;
}

ParamBox parse_box(const Json& j, int dim, const std::string& what) {
  if (!j.is_array() || static_cast<int>(j.size()) != dim) {
    schema_error(what + " must list " + std::to_string(dim) + " [lo, hi] ranges");
  }
  ParamBox box;
  for (int h = 0; h < dim; ++h) {
    VectorXd r = parse_vector(j[h], 2, what);
    box.ranges.emplace_back(r(0), r(1));
  }
  return box;
}

Json box_json(const ParamBox& box) {
  Json a = Json::array();
  for (const auto& [lo, hi] : box.ranges) a.push_back(Json::array({lo, hi}));
  return a;
}

struct Equation {
  std::optional<BField> B;
  std::optional<NForm> omega;
  Expr F;
  Json echo;
};

Equation parse_equation(const Json& problem, int n) {
  if (!problem.contains("equation") || !problem["equation"].is_object()) schema_error("missing \"equation\" object");
  const Json& eq = problem["equation"];
  int present = static_cast<int>(eq.contains("expr")) + static_cast<int>(eq.contains("b_matrix")) +
                static_cast<int>(eq.contains("nform"));
  if (present != 1) schema_error("equation needs exactly one of \"expr\", \"b_matrix\", \"nform\"");
  Equation out;
  VarTable order2(n, 2);
  VarTable order1(n, 1);
  if (eq.contains("expr")) {
    out.F = parse_expr(eq["expr"], order2, "equation.expr");
    out.echo = Json{{"expr", to_string(out.F)}};
  } else if (eq.contains("b_matrix")) {
    const Json& bm = eq["b_matrix"];
    if (!bm.is_array() || static_cast<int>(bm.size()) != n) schema_error("equation.b_matrix must have n rows");
    std::vector<std::vector<Expr>> rows;
    Json echo = Json::array();
    for (int r = 0; r < n; ++r) {
      rows.push_back(parse_expr_list(bm[r], n, order1, "equation.b_matrix[" + std::to_string(r) + "]"));
      Json row = Json::array();
      for (const auto& e : rows.back()) row.push_back(to_string(e));
      echo.push_back(row);
    }
    out.B = BField(n, rows);
    out.F = out.B->residual_expr();
    out.echo = Json{{"b_matrix", echo}, {"expr", to_string(out.F)}};
  } else {
    const Json& nf = eq["nform"];
    if (!nf.is_object()) schema_error("equation.nform must be an object");
    if (nf.contains("decomposable") == nf.contains("terms")) {
      schema_error("equation.nform needs exactly one of \"decomposable\", \"terms\"");
    }
    Json echo;
    if (nf.contains("decomposable")) {
      const Json& fs = nf["decomposable"];
      if (!fs.is_array() || static_cast<int>(fs.size()) != n) schema_error("nform.decomposable needs n covectors");
      std::vector<std::vector<Expr>> factors;
      Json e = Json::array();
      for (int k = 0; k < n; ++k) {
        factors.push_back(parse_expr_list(fs[k], 2 * n + 1, order1, "nform.decomposable[" + std::to_string(k) + "]"));
        Json row = Json::array();
        for (const auto& c : factors.back()) row.push_back(to_string(c));
        e.push_back(row);
      }
      out.omega = NForm::decomposable(n, factors);
      echo = Json{{"decomposable", e}};
    } else {
      const Json& ts = nf["terms"];
      if (!ts.is_object()) schema_error("nform.terms must map monomials to expressions");
      std::map<std::uint32_t, Expr> terms;
      for (auto it = ts.begin(); it != ts.end(); ++it) {
        double sign = 1.0;
        std::uint32_t mask = 0;
        try {
          mask = parse_monomial(it.key(), n, sign);
        } catch (const Error& e) {
          schema_error("nform term \"" + it.key() + "\": " + e.what());
        }
        Expr c = parse_expr(it.value(), order1, "nform.terms." + it.key());
        Expr term = sign < 0 ? -c : c;
        auto found = terms.find(mask);
        terms[mask] = found == terms.end() ? term : found->second + term;
      }
      Json e = Json::object();
      for (const auto& [mask, c] : terms) e[monomial_name(mask, n)] = to_string(c);
      out.omega = NForm::general(n, terms);
      echo = Json{{"terms", e}};
    }
    out.F = horizontalize_expr(*out.omega);
    echo["expr"] = to_string(out.F);
    out.echo = Json{{"nform", echo}};
  }
  return out;
}

int parse_n(const Json& problem) {
  if (!problem.is_object()) schema_error("problem file must be a JSON object");
  if (!problem.contains("n") || !problem["n"].is_number_integer()) schema_error("\"n\" must be an integer");
  int n = problem["n"].get<int>();
  if (n < 1 || n > 9) schema_error("\"n\" must be between 1 and 9");
  return n;
}

std::uint64_t parse_seed(const Json& problem) {
  if (!problem.contains("seed")) return 1;
  if (!problem["seed"].is_number_unsigned()) schema_error("\"seed\" must be a non-negative integer");
  return problem["seed"].get<std::uint64_t>();
}

struct PointSpec {
  ChartPoint m;
  std::optional<MatrixXd> P;
};

// Explicit "points", plus "random_points": {count, box} drawn from the seed.
std::vector<PointSpec> parse_points(const Json& problem, int n, Rng& rng, Json& echo) {
  std::vector<PointSpec> out;
  if (problem.contains("points")) {
    const Json& ps = problem["points"];
    if (!ps.is_array()) schema_error("\"points\" must be an array");
    for (const auto& pj : ps) {
      if (!pj.is_object()) schema_error("each point must be an object");
      PointSpec s;
      s.m = ChartPoint::zero(n);
      if (pj.contains("x")) s.m.x = parse_vector(pj["x"], n, "point.x");
      if (pj.contains("z")) {
        if (!pj["z"].is_number()) schema_error("point.z must be a number");
        s.m.z = pj["z"].get<double>();
      }
      if (pj.contains("p")) s.m.p = parse_vector(pj["p"], n, "point.p");
      if (pj.contains("P")) {
        MatrixXd P = parse_matrix(pj["P"], n, "point.P");
        s.P = 0.5 * (P + P.transpose());
      }
      out.push_back(s);
    }
  }
  if (problem.contains("random_points")) {
    const Json& rp = problem["random_points"];
    if (!rp.is_object() || !rp.contains("count") || !rp["count"].is_number_integer()) {
      schema_error("random_points needs an integer \"count\"");
    }
    int count = rp["count"].get<int>();
    double box = rp.contains("box") && rp["box"].is_number() ? rp["box"].get<double>() : 1.0;
    Rng local = rng.split(0x70696e74);
    for (int k = 0; k < count; ++k) {
      PointSpec s;
      s.m = ChartPoint::zero(n);
      for (int i = 0; i < n; ++i) s.m.x(i) = local.uniform(-box, box);
      s.m.z = local.uniform(-box, box);
      for (int i = 0; i < n; ++i) s.m.p(i) = local.uniform(-box, box);
      out.push_back(s);
    }
  }
  if (out.empty()) out.push_back(PointSpec{ChartPoint::zero(n), std::nullopt});
  echo = Json::array();
  for (const auto& s : out) {
    Json pj = point_json(s.m);
    if (s.P) pj["P"] = mat_json(*s.P);
    echo.push_back(pj);
  }
  return out;
}

Json error_details_json(const std::vector<std::pair<std::string, double>>& details) {
  Json d = Json::object();
  for (const auto& [k, v] : details) d[k] = v;
  return d;
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- analyze

Json analyze_point(const Equation& eq, const EquationJet& jet, int n, const PointSpec& spec, Rng& rng, int index,
                   Json& warnings) {
  Json r;
  r["base"] = point_json(spec.m);
  MatrixXd P;
  if (spec.P) {
    P = *spec.P;
    r["P_source"] = "given";
  } else {
    Rng local = rng.split(static_cast<std::uint64_t>(index));
    auto sampled = sample_fiber_point(jet, spec.m, local, 1e-13);
    if (!sampled) {
      throw Error(ErrorCode::InsufficientSamples, "no point of the equation found in the fiber",
                  {{"point", static_cast<double>(index)}});
    }
    P = *sampled;
    r["P_source"] = "sampled";
  }
  JetPoint m1(spec.m, P);
  r["P"] = mat_json(m1.P);
  double f;
  MatrixXd G;
  jet.residual_and_metric(m1, f, G);
  r["residual"] = f;
  if (std::abs(f) > 1e-8) warnings.push_back("point " + std::to_string(index) + " is not on the equation");
  r["metric"] = mat_json(G);
  const double tol = 1e-9;
  r["metric_rank"] = numerical_rank(G, tol);
  auto dec = decompose_metric(G, tol);
  Json dj{{"kind", kind_name(dec.kind)}, {"rank", dec.rank}};
  if (dec.kind == MetricDecomposition::Kind::Decomposable) {
    dj["v"] = vec_json(dec.v);
    dj["w"] = vec_json(dec.w);
  }
  if (dec.kind == MetricDecomposition::Kind::Rank1) {
    dj["v"] = vec_json(dec.v);
    dj["sign"] = dec.rank1_sign;
  }
  r["decomposition"] = dj;
  Json chars = Json::array();
  if (G.norm() > 1e-14) {
    for (const auto& eta : isotropic_directions(G, tol)) {
      chars.push_back(Json{{"eta", vec_json(eta)},
                           {"characteristic", is_characteristic_covector(G, eta, 1e-8)},
                           {"strongly_characteristic", strong_char_test(eq.F, m1, eta, 9, 1e-8)}});
    }
  }
  r["characteristic_covectors"] = chars;
  if (n == 2) {
    r["discriminant"] = discriminant_n2(G);
    r["type"] = plane_type_name(classify_n2(G, tol));
  }
  if (eq.B) {
    auto gr = goursat_point_report(*eq.B, m1, tol);
    Json g{{"kind", kind_name(gr.kind)}, {"residual", gr.residual}, {"rank", gr.rank}};
    g["adjugate"] = mat_json(gr.adjugate);
    g["metric"] = mat_json(gr.metric);
    if (gr.kind == GoursatPointReport::Kind::Regular) {
      g["right_kernel"] = vec_json(gr.a);
      g["left_kernel"] = vec_json(gr.b);
    }
    r["goursat"] = g;
  }
  return r;
}

CommandOutput cmd_analyze(const Json& problem) {
  auto t0 = std::chrono::steady_clock::now();
  const int n = parse_n(problem);
  const std::uint64_t seed = parse_seed(problem);
  Rng rng(seed);
  Equation eq = parse_equation(problem, n);
  Json points_echo;
  auto points = parse_points(problem, n, rng, points_echo);
  EquationJet jet(eq.F, n);
  Json warnings = Json::array();
  Json results = Json::array();
  for (std::size_t k = 0; k < points.size(); ++k) {
    results.push_back(analyze_point(eq, jet, n, points[k], rng, static_cast<int>(k), warnings));
  }
  CommandOutput out;
  out.report = Json{{"command", "analyze"},
                    {"config", {{"n", n}, {"equation", eq.echo}, {"points", points_echo},
                                {"rank_tol", 1e-9}, {"newton_tol", 1e-13}}},
                    {"rng", {{"seed", seed}}},
                    {"results", {{"points", results}}},
                    {"warnings", warnings},
                    {"timings", {{"total_ms", elapsed_ms(t0)}}}};
  return out;
}

// ---------------------------------------------------------------- reconstruct

// Reference frame rows: keys "xi" are coefficients of the total-derivative field d^_xi, "pi" of d_pi.
std::vector<std::vector<std::pair<std::string, Expr>>> parse_reference(const Json& j, int n, const std::string& what) {
  if (!j.is_array() || static_cast<int>(j.size()) != n) schema_error(what + " must list n vectors");
  VarTable vt(n, 1);
  std::vector<std::vector<std::pair<std::string, Expr>>> out;
  for (const auto& vj : j) {
    if (!vj.is_object()) schema_error(what + " vectors must be objects");
    std::vector<std::pair<std::string, Expr>> v;
    for (auto it = vj.begin(); it != vj.end(); ++it) {
      const std::string& key = it.key();
      bool ok = key.size() >= 2 && (key[0] == 'x' || key[0] == 'p');
      int idx = ok ? std::atoi(key.c_str() + 1) : 0;
      if (!ok || idx < 1 || idx > n || key != std::string(1, key[0]) + std::to_string(idx)) {
        schema_error(what + ": unknown component \"" + key + "\"");
      }
      v.emplace_back(key, parse_expr(it.value(), vt, what + "." + key));
    }
    out.push_back(v);
  }
  return out;
}

MatrixXd evaluate_reference(const std::vector<std::vector<std::pair<std::string, Expr>>>& ref, const ChartPoint& m) {
  const int n = m.n();
  MatrixXd rows = MatrixXd::Zero(static_cast<Eigen::Index>(ref.size()), 2 * n + 1);
  Env env = m.env();
  for (std::size_t r = 0; r < ref.size(); ++r) {
    for (const auto& [key, e] : ref[r]) {
      int i = std::atoi(key.c_str() + 1) - 1;
      double c = eval(e, env);
      if (key[0] == 'x') {
        rows(static_cast<Eigen::Index>(r), i) += c;
        rows(static_cast<Eigen::Index>(r), n) += c * m.p(i);
      } else {
        rows(static_cast<Eigen::Index>(r), n + 1 + i) += c;
      }
    }
  }
  return rows;
}

Json reference_echo(const std::vector<std::vector<std::pair<std::string, Expr>>>& ref) {
  Json a = Json::array();
  for (const auto& v : ref) {
    Json o = Json::object();
    for (const auto& [k, e] : v) o[k] = to_string(e);
    a.push_back(o);
  }
  return a;
}

ReconstructConfig parse_reconstruct_config(Block& b) {
  ReconstructConfig c;
  c.samples = b.integer("samples", c.samples, 1);
  c.newton_tol = b.number("newton_tol", c.newton_tol);
  c.rank_tol = b.number("rank_tol", c.rank_tol);
  c.ortho_tol = b.number("ortho_tol", c.ortho_tol);
  c.max_attempts_factor = b.integer("max_attempts_factor", c.max_attempts_factor, 1);
  return c;
}

CommandOutput cmd_reconstruct(const Json& problem) {
  auto t0 = std::chrono::steady_clock::now();
  const int n = parse_n(problem);
  const std::uint64_t seed = parse_seed(problem);
  Rng rng(seed);
  Equation eq = parse_equation(problem, n);
  Block rb(problem, "reconstruct");
  ReconstructConfig cfg = parse_reconstruct_config(rb);
  double angle_tol = rb.number("angle_tol", 1e-6);
  Json points_echo;
  auto points = parse_points(problem, n, rng, points_echo);

  std::optional<std::vector<std::vector<std::pair<std::string, Expr>>>> refD, refP;
  Json ref_echo = nullptr;
  if (problem.contains("reference")) {
    const Json& rj = problem["reference"];
    if (!rj.is_object() || !rj.contains("D") || !rj.contains("Dperp")) {
      schema_error("reference needs \"D\" and \"Dperp\"");
    }
    refD = parse_reference(rj["D"], n, "reference.D");
    refP = parse_reference(rj["Dperp"], n, "reference.Dperp");
    ref_echo = Json{{"D", reference_echo(*refD)}, {"Dperp", reference_echo(*refP)}};
  }

  Json warnings = Json::array();
  Json results = Json::array();
  bool all_match = true;
  for (std::size_t k = 0; k < points.size(); ++k) {
    const ChartPoint& m = points[k].m;
    Rng local = rng.split(static_cast<std::uint64_t>(k));
    Reconstruction rec;
    try {
      rec = reconstruct_distributions(eq.F, m, cfg, local);
    } catch (const Error& e) {
      auto details = e.details();
      details.emplace_back("point", static_cast<double>(k));
      throw Error(e.code(), e.what(), details);
    }
    Json r;
    r["base"] = point_json(m);
    r["D"] = mat_json(rec.D.rows);
    r["Dperp"] = mat_json(rec.Dperp.rows);
    r["samples"] = {{"accepted", rec.accepted},
                    {"rank1", rec.rank1_samples},
                    {"singular_discarded", rec.singular_discarded},
                    {"newton_failures", rec.newton_failures}};
    r["fill"] = {{"D", rec.fill_D}, {"Dperp", rec.fill_Dperp}};
    r["excess"] = {{"D", rec.excess_D}, {"Dperp", rec.excess_Dperp}};
    r["ortho_residual"] = rec.ortho_residual;
    r["max_angle_D_Dperp"] = rec.max_angle_D_Dperp;
    r["parabolic"] = rec.coincide;
    try {
      r["B"] = mat_json(recover_B(rec.D));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonTransversal) throw;
      r["B"] = nullptr;
      r["B_error"] = error_object(e);
      warnings.push_back("point " + std::to_string(k) + ": " + e.what());
    }
    if (refD) {
      MatrixXd a = evaluate_reference(*refD, m).transpose();
      MatrixXd b = evaluate_reference(*refP, m).transpose();
      auto maxang = [](const MatrixXd& u, const MatrixXd& v) { return principal_angles(u, v).maxCoeff(); };
      double direct = std::max(maxang(rec.D.columns(), a), maxang(rec.Dperp.columns(), b));
      double swapped = std::max(maxang(rec.D.columns(), b), maxang(rec.Dperp.columns(), a));
      bool swap = swapped < direct;
      double best = std::min(direct, swapped);
      r["reference"] = {{"swapped", swap},
                        {"angles_D", vec_json(principal_angles(rec.D.columns(), swap ? b : a))},
                        {"angles_Dperp", vec_json(principal_angles(rec.Dperp.columns(), swap ? a : b))},
                        {"max_angle", best},
                        {"match", best <= angle_tol}};
      all_match = all_match && best <= angle_tol;
    }
    results.push_back(r);
  }
  Json res{{"points", results}};
  if (refD) res["reference_match"] = all_match;
  CommandOutput out;
  out.report = Json{{"command", "reconstruct"},
                    {"config", {{"n", n}, {"equation", eq.echo}, {"points", points_echo},
                                {"reconstruct", rb.result()}, {"reference", ref_echo}}},
                    {"rng", {{"seed", seed}}},
                    {"results", res},
                    {"warnings", warnings},
                    {"timings", {{"total_ms", elapsed_ms(t0)}}}};
  return out;
}

// ---------------------------------------------------------------- solve

struct DatumSpec {
  std::optional<CauchyDatum> N;
  ParamGrid grid;
  Json echo;
};

DatumSpec parse_datum(const Json& problem, int n) {
  if (!problem.contains("datum") || !problem["datum"].is_object()) schema_error("solve needs a \"datum\" object");
  const Json& d = problem["datum"];
  if (n < 2) schema_error("solve needs n >= 2");
  VarTable vt(n, 1);
  DatumSpec out;
  if (!d.contains("X") || !d.contains("Z")) schema_error("datum needs \"X\" and \"Z\"");
  auto X = parse_expr_list(d["X"], n, vt, "datum.X");
  Expr Z = parse_expr(d["Z"], vt, "datum.Z");
  ParamBox box;
  if (d.contains("box")) {
    box = parse_box(d["box"], n - 1, "datum.box");
  } else {
    for (int h = 0; h < n - 1; ++h) box.ranges.emplace_back(0.0, 1.0);
  }
  int ppa = 11;
  if (d.contains("grid")) {
    if (!d["grid"].is_number_integer() || d["grid"].get<int>() < 1) schema_error("datum.grid must be a positive integer");
    ppa = d["grid"].get<int>();
  }
  out.grid = ParamGrid{box, ppa};
  Json xs = Json::array();
  for (const auto& e : X) xs.push_back(to_string(e));
  out.echo = Json{{"X", xs}, {"Z", to_string(Z)}};
  if (d.contains("P") == d.contains("lift_f")) schema_error("datum needs exactly one of \"P\" and \"lift_f\"");
  if (d.contains("P")) {
    auto P = parse_expr_list(d["P"], n, vt, "datum.P");
    Json ps = Json::array();
    for (const auto& e : P) ps.push_back(to_string(e));
    out.echo["P"] = ps;
    out.N.emplace(X, Z, P, box);
  } else {
    Expr f = parse_expr(d["lift_f"], vt, "datum.lift_f");
    VectorXd seed = d.contains("p_seed") ? parse_vector(d["p_seed"], n, "datum.p_seed") : VectorXd::Zero(n);
    std::vector<double> t0;
    if (d.contains("t0")) {
      VectorXd t = parse_vector(d["t0"], n - 1, "datum.t0");
      t0.assign(t.data(), t.data() + t.size());
    } else {
      for (const auto& [lo, hi] : box.ranges) t0.push_back(0.5 * (lo + hi));
    }
    out.echo["lift_f"] = to_string(f);
    out.echo["p_seed"] = vec_json(seed);
    out.echo["t0"] = t0;
    out.N.emplace(lift_cauchy_datum(X, Z, f, t0, seed, box));
  }
  out.echo["box"] = box_json(box);
  out.echo["grid"] = ppa;
  return out;
}

FlowConfig parse_flow(Block& b) {
  FlowConfig f;
  f.dt = b.number("dt", f.dt);
  if (!(f.dt > 0.0)) schema_error("flow.dt must be positive");
  if (b.has("t_span")) {
    VectorXd span = parse_vector(b.raw("t_span"), 2, "flow.t_span");
    f.t_begin = span(0);
    f.t_end = span(1);
  }
  if (!(f.t_end > f.t_begin)) schema_error("flow.t_span must be increasing");
  b.echo("t_span", Json::array({f.t_begin, f.t_end}));
  f.record_interval = b.number("record_interval", f.record_interval);
  return f;
}

// Max |z - exact(x)| over all surface nodes.
double surface_error(const SolutionSurface& S, const Expr& exact) {
  const int n = S.n();
  std::vector<std::string> xs;
  for (int i = 1; i <= n; ++i) xs.push_back(x_name(i));
  Program prog(std::vector<Expr>{exact}, xs);
  double worst = 0.0;
  for (std::size_t ti = 0; ti < S.time_count(); ++ti) {
    for (std::size_t si = 0; si < S.node_count(); ++si) {
      const double* row = S.raw(ti, si);
      double v;
      prog.run(row, &v);
      worst = std::max(worst, std::abs(row[n] - v));
    }
  }
  return worst;
}

Json relation_json(const RelationResult& r, int choice) {
  Json basis = Json::array();
  for (const auto& b : r.basis) basis.push_back(b);
  const VectorXd& chosen = choice == 0 ? r.psi : r.alternatives[static_cast<std::size_t>(choice - 1)];
  Json terms = Json::object();
  double scale = chosen.cwiseAbs().maxCoeff();
  for (Eigen::Index k = 0; k < chosen.size(); ++k) {
    if (std::abs(chosen(k)) > 1e-12 * scale) terms[r.basis[static_cast<std::size_t>(k)]] = chosen(k);
  }
  return Json{{"basis", basis},
              {"coefficients", vec_json(chosen)},
              {"terms", terms},
              {"expression", to_string(r.relation_for(chosen))},
              {"residual", r.residual},
              {"next_singular_ratio", r.next_singular_ratio},
              {"alternatives", static_cast<int>(r.alternatives.size())},
              {"choice", choice}};
}

CommandOutput cmd_solve(const Json& problem) {
  auto t0 = std::chrono::steady_clock::now();
  const int n = parse_n(problem);
  const std::uint64_t seed = parse_seed(problem);
  VarTable vt(n, 1);
  DatumSpec datum = parse_datum(problem, n);
  Block fb(problem, "flow");
  FlowConfig flow = parse_flow(fb);
  Block cb(problem, "checks");
  std::optional<Expr> exact;
  if (cb.has("exact_solution")) {
    exact = parse_expr(cb.raw("exact_solution"), vt, "checks.exact_solution");
    cb.echo("exact_solution", to_string(*exact));
  }
  bool order_check = cb.boolean("order_check", false);
  int mae_stride = cb.integer("mae_residual_stride", 0, 0);
  std::vector<Expr> conserved;
  if (cb.has("conserved")) {
    const Json& cj = cb.raw("conserved");
    if (!cj.is_array()) schema_error("checks.conserved must be an array");
    conserved = parse_expr_list(cj, cj.size(), vt, "checks.conserved");
    Json e = Json::array();
    for (const auto& c : conserved) e.push_back(to_string(c));
    cb.echo("conserved", e);
  }

  Json config{{"n", n}, {"datum", datum.echo}};
  Json results;
  Json warnings = Json::array();
  Json timings = Json::object();
  CommandOutput out;

  auto grid_check = verify_integral(*datum.N, datum.grid, 1e-8);
  results["datum_integral_residual"] = grid_check.max_residual;
  if (!grid_check.pass) {
    warnings.push_back("datum is not an integral submanifold of the contact distribution to 1e-8");
  }

  std::function<SolutionSurface(const FlowConfig&)> run;
  SolutionSurface S;
  if (problem.contains("intermediate_integral")) {
    if (problem.contains("first_integrals")) {
      schema_error("give either \"intermediate_integral\" or \"first_integrals\", not both");
    }
    Expr f = parse_expr(problem["intermediate_integral"], vt, "intermediate_integral");
    config["intermediate_integral"] = to_string(f);
    config["flow"] = fb.result();
    config["grid"] = datum.grid.points_per_axis;
    run = [&, f](const FlowConfig& fc) { return solve_first_order(f, *datum.N, fc, datum.grid); };
    auto ts = std::chrono::steady_clock::now();
    S = run(flow);
    timings["flow_ms"] = elapsed_ms(ts);
    results["method"] = "first_order";
    results["f"] = to_string(f);
    if (mae_stride > 0 && problem.contains("equation")) {
      Equation eq = parse_equation(problem, n);
      config["equation"] = eq.echo;
      auto mr = mae_residual_on_surface(S, eq.F, mae_stride);
      results["mae_residual"] = {{"max", mr.max_residual}, {"max_condition", mr.max_condition}, {"nodes", mr.nodes}};
    }
  } else {
    Equation eq = parse_equation(problem, n);
    config["equation"] = eq.echo;
    if (!problem.contains("first_integrals")) schema_error("solve needs \"first_integrals\" or \"intermediate_integral\"");
    const Json& fl = problem["first_integrals"];
    if (!fl.is_array() || fl.empty()) schema_error("first_integrals must be a non-empty array");
    auto f_list = parse_expr_list(fl, fl.size(), vt, "first_integrals");
    Json fe = Json::array();
    for (const auto& f : f_list) fe.push_back(to_string(f));
    config["first_integrals"] = fe;
    Block relb(problem, "relation");
    MongeConfig mc;
    mc.relation.degree = relb.integer("degree", 2, 1);
    mc.relation.exp_features = relb.boolean("exp_features", false);
    mc.relation.tol = relb.number("tol", 1e-8);
    Block sb(problem, "side_check");
    mc.side_check_points = sb.integer("points", 5, 1);
    mc.side_tol = sb.number("tol", 1e-8);
    Block rb(problem, "reconstruct");
    mc.reconstruct = parse_reconstruct_config(rb);
    mc.flow = flow;
    mc.grid = datum.grid;
    mc.seed = seed;
    mc.mae_stride = mae_stride;
    mc.conserved = conserved;
    config["relation"] = relb.result();
    config["side_check"] = sb.result();
    if (!eq.B) config["reconstruct"] = rb.result();
    config["flow"] = fb.result();
    MongeEquation me;
    if (eq.B) me.B = eq.B;
    me.F = eq.F;
    if (eq.B) me.F.reset();
    auto ts = std::chrono::steady_clock::now();
    MongeResult mr = monge_solve(me, f_list, *datum.N, mc);
    timings["monge_ms"] = elapsed_ms(ts);
    S = mr.surface;
    results["method"] = "monge";
    Json sides = Json::array();
    for (const auto& sc : mr.side_checks) {
      Json s = Json::array();
      for (auto side : sc.sides) s.push_back(side_name(side));
      sides.push_back(Json{{"params", sc.params}, {"sides", s}});
    }
    results["side_checks"] = sides;
    results["relation"] = relation_json(mr.relation, mr.relation_choice);
    results["f"] = to_string(mr.f_star);
    results["f_on_datum"] = mr.f_star_on_datum;
    if (mae_stride > 0) {
      results["mae_residual"] = {{"max", mr.mae.max_residual}, {"max_condition", mr.mae.max_condition},
                                 {"nodes", mr.mae.nodes}};
    }
    Json drift = Json::array();
    for (std::size_t i = 0; i < f_list.size(); ++i) {
      drift.push_back(Json{{"function", to_string(f_list[i])},
                           {"drift", mr.first_integral_drift[i]},
                           {"conserved_expected", static_cast<bool>(mr.first_integral_expected[i])}});
      if (mr.first_integral_expected[i] && mr.first_integral_drift[i] > 1e-6) {
        warnings.push_back("first integral " + to_string(f_list[i]) + " drifts although it commutes with f");
      }
    }
    results["first_integral_drift"] = drift;
    Expr f_star = mr.f_star;
    run = [&, f_star](const FlowConfig& fc) { return solve_first_order(f_star, *datum.N, fc, datum.grid); };
  }
  config["checks"] = cb.result();

  results["theta_residual"] = S.theta_residual;
  results["f_residual"] = S.f_residual;
  results["surface"] = {{"times", S.time_count()}, {"nodes", S.node_count()}};
  if (!conserved.empty()) {
    auto d = drift_along_surface(S, conserved);
    Json cj = Json::array();
    for (std::size_t i = 0; i < conserved.size(); ++i) cj.push_back({{"function", to_string(conserved[i])}, {"drift", d[i]}});
    results["conserved_drift"] = cj;
  }
  if (exact) {
    double err = surface_error(S, *exact);
    results["exact_error"] = err;
    if (order_check) {
      FlowConfig half = flow;
      half.dt = flow.dt / 2.0;
      auto ts = std::chrono::steady_clock::now();
      SolutionSurface S2 = run(half);
      timings["order_check_ms"] = elapsed_ms(ts);
      double err2 = surface_error(S2, *exact);
      results["order_check"] = {{"dt", flow.dt}, {"error", err}, {"dt_half", half.dt}, {"error_half", err2},
                                {"ratio", err2 > 0.0 ? err / err2 : std::numeric_limits<double>::infinity()}};
    }
  } else if (order_check) {
    warnings.push_back("order_check needs checks.exact_solution; skipped");
  }
  std::ostringstream csv;
  S.write_csv(csv);
  out.surface_csv = csv.str();
  timings["total_ms"] = elapsed_ms(t0);
  out.report = Json{{"command", "solve"},
                    {"config", config},
                    {"rng", {{"seed", seed}}},
                    {"results", results},
                    {"warnings", warnings},
                    {"timings", timings}};
  return out;
}

// ---------------------------------------------------------------- jet

CommandOutput cmd_jet(const Json& problem) {
  auto t0 = std::chrono::steady_clock::now();
  const int n = parse_n(problem);
  if (n < 2) schema_error("jet needs n >= 2");
  const std::uint64_t seed = parse_seed(problem);
  Rng rng(seed);
  Equation eq = parse_equation(problem, n);
  if (!problem.contains("jet") || !problem["jet"].is_object()) schema_error("jet needs a \"jet\" object");
  Block jb(problem, "jet");
  if (!jb.has("phi")) schema_error("jet.phi is required");
  VarTable vt(n, 1);
  Expr phi = parse_expr(jb.raw("phi"), vt, "jet.phi");
  for (const auto& v : variables(phi)) {
    if (v.rfind("x", 0) != 0 || v == x_name(n)) schema_error("jet.phi may only depend on x1..x(n-1)");
  }
  jb.echo("phi", to_string(phi));
  int K = jb.integer("order", 4, 2);
  FormalSolveConfig fc;
  fc.p_nn_guess = jb.number("p_nn_guess", 0.0);
  fc.newton_tol = jb.number("newton_tol", fc.newton_tol);
  fc.characteristic_tol = jb.number("characteristic_tol", fc.characteristic_tol);
  int samples = jb.integer("integrability_samples", 20, 0);
  std::optional<Expr> exact;
  if (jb.has("exact_solution")) {
    exact = parse_expr(jb.raw("exact_solution"), vt, "jet.exact_solution");
    jb.echo("exact_solution", to_string(*exact));
  }

  Json warnings = Json::array();
  Json results;
  JetTable jt = formal_solve(eq.F, phi, n, K, fc);
  results["seed_p_nn"] = jt.get(std::string(2, static_cast<char>('0' + n)));
  results["noncharacteristic"] = is_noncharacteristic(eq.F, jt.jet_point(), fc.characteristic_tol);
  results["jet_residual"] = jet_residual(eq.F, jt);
  if (samples > 0) {
    Rng local = rng.split(0x6a6574);
    try {
      auto pts = sample_equation_points(eq.F, n, samples, local);
      results["formally_integrable"] = formal_integrability_check(eq.F, pts);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InsufficientSamples) throw;
      results["formally_integrable"] = nullptr;
      warnings.push_back(std::string("integrability check skipped: ") + e.what());
    }
  }
  Json systems = Json::array();
  for (int k = 0; k <= K - 2; ++k) {
    auto sys = prolonged_fiber_system(eq.F, jt, k);
    int expected = static_cast<int>(sym_dim(n, k + 2)) - static_cast<int>(sym_dim(n, k));
    systems.push_back(Json{{"k", k},
                           {"equations", sys.equations.size()},
                           {"unknowns", sys.unknowns.size()},
                           {"rank", sys.rank()},
                           {"free_parameters", sys.free_parameters()},
                           {"expected_free_parameters", expected}});
  }
  results["prolonged_systems"] = systems;
  if (exact) {
    Env origin;
    for (int i = 1; i <= n; ++i) origin[x_name(i)] = 0.0;
    double worst = std::abs(eval(*exact, origin) - jt.z());
    for (const auto& [I, v] : jt.coefficients()) {
      Expr d = *exact;
      for (char c : I) d = diff(d, x_name(c - '0'));
      worst = std::max(worst, std::abs(eval(d, origin) - v));
    }
    results["exact_max_error"] = worst;
  }
  Json table = Json::object();
  for (int k = 1; k <= K; ++k) {
    for (const auto& I : multi_indices(n, k)) table[I] = jt.get(I);
  }
  results["coefficient_count"] = table.size();

  CommandOutput out;
  out.jets = table;
  out.report = Json{{"command", "jet"},
                    {"config", {{"n", n}, {"equation", eq.echo}, {"jet", jb.result()}}},
                    {"rng", {{"seed", seed}}},
                    {"results", results},
                    {"warnings", warnings},
                    {"timings", {{"total_ms", elapsed_ms(t0)}}}};
  return out;
}

}  // namespace

CommandOutput run_command(const std::string& command, const Json& problem) {
  if (command == "analyze") return cmd_analyze(problem);
  if (command == "reconstruct") return cmd_reconstruct(problem);
  if (command == "solve") return cmd_solve(problem);
  if (command == "jet") return cmd_jet(problem);
  throw Error(ErrorCode::InvalidArgument, "unknown command \"" + command + "\"");
}

Json error_object(const Error& e) {
  return Json{{"code", std::string(error_code_name(e.code()))},
              {"message", e.what()},
              {"details", error_details_json(e.details())}};
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::SchemaError:
    case ErrorCode::InvalidArgument:
    case ErrorCode::SyntaxError:
    case ErrorCode::UnknownVariable:
      return 2;
    case ErrorCode::IoError:
      return 4;
    default:
      return 3;
  }
}

}  // namespace goursat
