#include "goursat/charsolve.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <tuple>

#include "goursat/jet_index.hpp"
#include "goursat/rng.hpp"

namespace goursat {

namespace {

std::vector<std::string> chart_inputs(int n) { return VarTable(n, 1).chart_names(); }

}  // namespace

int FlowConfig::steps() const {
  if (!(dt > 0.0) || t_end < t_begin) throw Error(ErrorCode::InvalidArgument, "flow needs dt > 0 and t_end >= t_begin");
  if (dt > t_end - t_begin && t_end > t_begin) throw Error(ErrorCode::InvalidArgument, "dt exceeds the time span");
  return static_cast<int>(std::llround((t_end - t_begin) / dt));
}

int FlowConfig::record_every() const {
  if (record_interval <= 0.0) return 1;
  return std::max(1, static_cast<int>(std::llround(record_interval / dt)));
}

// ---------------------------------------------------------------- compiled fields

CompiledField::CompiledField(const VectorFieldExpr& V, bool with_jacobian) : dim_(2 * V.n() + 1) {
  auto names = chart_inputs(V.n());
  value_ = Program(V.components(), names);
  if (with_jacobian) {
    std::vector<Expr> outs;
    for (int k = 0; k < dim_; ++k) {
      for (int j = 0; j < dim_; ++j) {
        Expr d = diff(V.components()[k], names[j]);
        if (d.is_constant(0.0)) continue;
        entries_.push_back({k, j});
        outs.push_back(d);
      }
    }
    jac_ = Program(outs, names);
  }
}

void CompiledField::value(const double* y, double* out) const { value_.run(y, out); }

void CompiledField::jacobian_apply(const double* y, const double* v, int count, double* out) const {
  thread_local std::vector<double> j;
  j.resize(entries_.size());
  if (!entries_.empty()) jac_.run(y, j.data());
  std::fill(out, out + static_cast<std::ptrdiff_t>(count) * dim_, 0.0);
  for (int c = 0; c < count; ++c) {
    const double* vc = v + static_cast<std::ptrdiff_t>(c) * dim_;
    double* oc = out + static_cast<std::ptrdiff_t>(c) * dim_;
    for (std::size_t e = 0; e < entries_.size(); ++e) oc[entries_[e].row] += j[e] * vc[entries_[e].col];
  }
}

namespace {

// Classic RK4 on y' = rhs(y) for a flat state.
class Rk4 {
 public:
  explicit Rk4(std::size_t size) : k1_(size), k2_(size), k3_(size), k4_(size), tmp_(size) {}

  template <class Rhs>
  void step(std::vector<double>& y, double dt, Rhs&& rhs) {
    const std::size_t s = y.size();
    rhs(y.data(), k1_.data());
    for (std::size_t i = 0; i < s; ++i) tmp_[i] = y[i] + 0.5 * dt * k1_[i];
    rhs(tmp_.data(), k2_.data());
    for (std::size_t i = 0; i < s; ++i) tmp_[i] = y[i] + 0.5 * dt * k2_[i];
    rhs(tmp_.data(), k3_.data());
    for (std::size_t i = 0; i < s; ++i) tmp_[i] = y[i] + dt * k3_[i];
    rhs(tmp_.data(), k4_.data());
    for (std::size_t i = 0; i < s; ++i) y[i] += dt / 6.0 * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
  }

 private:
  std::vector<double> k1_, k2_, k3_, k4_, tmp_;
};

bool all_finite(const std::vector<double>& y) {
  return std::all_of(y.begin(), y.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace

Trajectory flow(const VectorFieldExpr& V, const ChartPoint& m0, const FlowConfig& cfg) {
  CompiledField cf(V);
  const int steps = cfg.steps();
  const int every = cfg.record_every();
  VectorXd c0 = m0.coords();
  std::vector<double> y(c0.data(), c0.data() + c0.size());
  Rk4 rk(y.size());
  Trajectory tr;
  tr.times.push_back(cfg.t_begin);
  tr.states.push_back(m0);
  auto rhs = [&cf](const double* s, double* out) { cf.value(s, out); };
  for (int k = 1; k <= steps; ++k) {
    rk.step(y, cfg.dt, rhs);
    if (!all_finite(y)) throw Error(ErrorCode::NonFiniteState, "flow left the finite range", {{"step", k}});
    if (k % every == 0 || k == steps) {
      tr.times.push_back(cfg.t_begin + k * cfg.dt);
      tr.states.push_back(ChartPoint::from_coords(Eigen::Map<VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()))));
    }
  }
  return tr;
}

// ---------------------------------------------------------------- surfaces

SolutionSurface::SolutionSurface(int n, std::vector<double> times, ParamGrid grid)
    : n_(n), times_(std::move(times)), grid_(std::move(grid)) {
  data_.assign(times_.size() * grid_.size() * stride(), 0.0);
}

ChartPoint SolutionSurface::point(std::size_t ti, std::size_t si) const {
  const double* r = raw(ti, si);
  return ChartPoint::from_coords(Eigen::Map<const VectorXd>(r, static_cast<Eigen::Index>(stride())));
}

void SolutionSurface::set(std::size_t ti, std::size_t si, const ChartPoint& m) {
  VectorXd c = m.coords();
  std::copy(c.data(), c.data() + c.size(), raw(ti, si));
}

void SolutionSurface::write_csv(std::ostream& os) const {
  os << "t";
  for (int h = 1; h < n_; ++h) os << ",s" << h;
  for (int i = 1; i <= n_; ++i) os << ",x" << i;
  os << ",z";
  for (int i = 1; i <= n_; ++i) os << ",p" << i;
  os << '\n';
  auto old = os.precision(17);
  for (std::size_t ti = 0; ti < time_count(); ++ti) {
    for (std::size_t si = 0; si < node_count(); ++si) {
      os << times_[ti];
      for (double s : grid_.params(si)) os << ',' << s;
      const double* r = raw(ti, si);
      for (std::size_t k = 0; k < stride(); ++k) os << ',' << r[k];
      os << '\n';
    }
  }
  os.precision(old);
}

SolutionSurface solve_first_order(const Expr& f, const CauchyDatum& N, const FlowConfig& cfg, const ParamGrid& grid,
                                  const std::string& datum_id) {
  const int n = N.n();
  const int dim = 2 * n + 1;
  const int ntan = n - 1;
  VectorFieldExpr V = hamiltonian_field(f, n);
  CompiledField cf(V, true);
  Program fprog(std::vector<Expr>{f}, chart_inputs(n));
  const int steps = cfg.steps();
  const int every = cfg.record_every();

  std::vector<double> times{cfg.t_begin};
  for (int k = 1; k <= steps; ++k) {
    if (k % every == 0 || k == steps) times.push_back(cfg.t_begin + k * cfg.dt);
  }
  SolutionSurface S(n, times, grid);
  S.provenance_f = to_string(f);
  S.provenance_datum = datum_id;

  std::vector<double> state(static_cast<std::size_t>(dim) * n);
  Rk4 rk(state.size());
  std::vector<double> vbuf(dim);
  auto rhs = [&](const double* s, double* out) {
    cf.value(s, out);
    cf.jacobian_apply(s, s + dim, ntan, out + dim);
  };
  auto theta_of = [n](const double* y, const double* v) {
    double r = v[n];
    for (int i = 0; i < n; ++i) r -= y[n + 1 + i] * v[i];
    return std::abs(r);
  };
  auto record = [&](std::size_t ti, std::size_t si) {
    std::copy(state.begin(), state.begin() + dim, S.raw(ti, si));
    double fv;
    fprog.run(state.data(), &fv);
    S.f_residual = std::max(S.f_residual, std::abs(fv));
    cf.value(state.data(), vbuf.data());
    double th = theta_of(state.data(), vbuf.data());
    for (int h = 0; h < ntan; ++h) th = std::max(th, theta_of(state.data(), state.data() + dim * (h + 1)));
    S.theta_residual = std::max(S.theta_residual, th);
  };

  for (std::size_t si = 0; si < grid.size(); ++si) {
    auto t = grid.params(si);
    ChartPoint m0 = N.at(t);
    MatrixXd tang = N.tangents(t);
    VectorXd c0 = m0.coords();
    std::copy(c0.data(), c0.data() + dim, state.begin());
    for (int h = 0; h < ntan; ++h) {
      for (int k = 0; k < dim; ++k) state[dim * (h + 1) + k] = tang(h, k);
    }
    double f0;
    fprog.run(state.data(), &f0);
    if (!(std::abs(f0) <= 1e-8)) {
      throw Error(ErrorCode::DatumNotOnEquation, "the first-order equation does not vanish on the datum",
                  {{"node", static_cast<double>(si)}, {"residual", f0}});
    }
    cf.value(state.data(), vbuf.data());
    MatrixXd rows(n, dim);
    for (int h = 0; h < ntan; ++h) rows.row(h) = tang.row(h).normalized();
    VectorXd v = Eigen::Map<VectorXd>(vbuf.data(), dim);
    if (v.norm() == 0.0) {
      throw Error(ErrorCode::CharacteristicDatum, "Hamiltonian field vanishes on the datum",
                  {{"node", static_cast<double>(si)}});
    }
    rows.row(ntan) = v.normalized().transpose();
    Eigen::JacobiSVD<MatrixXd> svd(rows);
    const VectorXd& sv = svd.singularValues();
    if (sv(sv.size() - 1) <= 1e-8 * sv(0)) {
      std::vector<std::pair<std::string, double>> details{{"node", static_cast<double>(si)}};
      for (std::size_t h = 0; h < t.size(); ++h) details.emplace_back("s" + std::to_string(h + 1), t[h]);
      throw Error(ErrorCode::CharacteristicDatum, "Hamiltonian field is tangent to the datum", details);
    }
    record(0, si);
    std::size_t ti = 1;
    for (int k = 1; k <= steps; ++k) {
      rk.step(state, cfg.dt, rhs);
      if (k % every == 0 || k == steps) {
        if (!all_finite(state)) {
          throw Error(ErrorCode::NonFiniteState, "characteristic left the finite range",
                      {{"node", static_cast<double>(si)}, {"step", k}});
        }
        record(ti++, si);
      }
    }
  }
  return S;
}

std::vector<double> drift_along_surface(const SolutionSurface& S, const std::vector<Expr>& qs) {
  std::vector<double> drift(qs.size(), 0.0);
  if (qs.empty()) return drift;
  Program prog(qs, chart_inputs(S.n()));
  std::vector<double> q0(qs.size()), q(qs.size());
  for (std::size_t si = 0; si < S.node_count(); ++si) {
    prog.run(S.raw(0, si), q0.data());
    for (std::size_t ti = 1; ti < S.time_count(); ++ti) {
      prog.run(S.raw(ti, si), q.data());
      for (std::size_t k = 0; k < qs.size(); ++k) drift[k] = std::max(drift[k], std::abs(q[k] - q0[k]));
    }
  }
  return drift;
}

// ---------------------------------------------------------------- relations

namespace {

void monomials(int features, int degree, int first, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  out.push_back(cur);
  if (static_cast<int>(cur.size()) == degree) return;
  for (int f = first; f < features; ++f) {
    cur.push_back(f);
    monomials(features, degree, f, cur, out);
    cur.pop_back();
  }
}

VectorXd normalize_relation(VectorXd psi) {
  double l1 = psi.cwiseAbs().sum();
  if (l1 > 0.0) psi /= l1;
  Eigen::Index big = 0;
  psi.cwiseAbs().maxCoeff(&big);
  if (psi(big) < 0.0) psi = -psi;
  return psi;
}

}  // namespace

Expr RelationResult::relation_for(const VectorXd& coeffs, double drop_below) const {
  double top = coeffs.cwiseAbs().maxCoeff();
  Expr r = 0.0;
  for (Eigen::Index j = 0; j < coeffs.size(); ++j) {
    if (std::abs(coeffs(j)) < drop_below * top) continue;
    r = r + Expr(coeffs(j)) * basis_exprs[j];
  }
  return r;
}

Expr RelationResult::relation(double drop_below) const { return relation_for(psi, drop_below); }

RelationResult find_relation(const std::vector<Expr>& f_list, const CauchyDatum& N, const RelationConfig& cfg,
                             const ParamGrid& grid) {
  const int k = static_cast<int>(f_list.size());
  if (k < 2) throw Error(ErrorCode::InvalidArgument, "find_relation needs at least two functions");
  const int features = cfg.exp_features ? 2 * k : k;
  std::vector<std::vector<int>> monos;
  std::vector<int> cur;
  monomials(features, cfg.degree, 0, cur, monos);

  RelationResult res;
  std::vector<Expr> feature_exprs;
  std::vector<std::string> feature_names;
  for (int i = 0; i < k; ++i) {
    feature_exprs.push_back(f_list[i]);
    feature_names.push_back("g" + std::to_string(i + 1));
  }
  if (cfg.exp_features) {
    for (int i = 0; i < k; ++i) {
      feature_exprs.push_back(exp(f_list[i]));
      feature_names.push_back("e" + std::to_string(i + 1));
    }
  }
  for (const auto& m : monos) {
    std::string name;
    Expr e = 1.0;
    for (int f : m) {
      name += (name.empty() ? "" : "*") + feature_names[f];
      e = e * feature_exprs[f];
    }
    res.basis.push_back(name.empty() ? "1" : name);
    res.basis_exprs.push_back(e);
  }

  Program gprog(f_list, chart_inputs(N.n()));
  const auto rows = static_cast<Eigen::Index>(grid.size());
  const auto cols = static_cast<Eigen::Index>(monos.size());
  MatrixXd A(rows, cols);
  std::vector<double> g(k), feat(features);
  for (Eigen::Index r = 0; r < rows; ++r) {
    VectorXd c = N.at(grid.params(static_cast<std::size_t>(r))).coords();
    gprog.run(c.data(), g.data());
    for (int i = 0; i < k; ++i) {
      feat[i] = g[i];
      if (cfg.exp_features) feat[k + i] = std::exp(g[i]);
    }
    for (Eigen::Index j = 0; j < cols; ++j) {
      double v = 1.0;
      for (int f : monos[j]) v *= feat[f];
      A(r, j) = v;
    }
  }
  if (!A.allFinite()) throw Error(ErrorCode::NonFiniteState, "relation features overflow on the datum");

  VectorXd norms = A.colwise().norm();
  const double zero_col = 1e-14 * std::sqrt(static_cast<double>(rows));
  std::vector<Eigen::Index> zero_cols;
  for (Eigen::Index j = 0; j < cols; ++j) {
    if (norms(j) <= zero_col) zero_cols.push_back(j);
  }
  if (!zero_cols.empty()) {
    for (std::size_t z = 0; z < zero_cols.size(); ++z) {
      VectorXd e = VectorXd::Zero(cols);
      e(zero_cols[z]) = 1.0;
      if (z == 0) {
        res.psi = e;
      } else {
        res.alternatives.push_back(e);
      }
    }
    res.residual = (A * res.psi).cwiseAbs().maxCoeff();
    res.next_singular_ratio = 0.0;
    return res;
  }

  MatrixXd As = A * norms.cwiseInverse().asDiagonal();
  MatrixXd R = Eigen::HouseholderQR<MatrixXd>(As).matrixQR().topRows(std::min(rows, cols)).triangularView<Eigen::Upper>();
  Eigen::JacobiSVD<MatrixXd> svd(R, Eigen::ComputeFullV);
  const VectorXd& s = svd.singularValues();
  const MatrixXd& V = svd.matrixV();
  auto candidate = [&](Eigen::Index col) {
    VectorXd psi = norms.cwiseInverse().asDiagonal() * V.col(col);
    return normalize_relation(psi);
  };
  Eigen::Index last = V.cols() - 1;
  res.psi = candidate(last);
  res.residual = (A * res.psi).cwiseAbs().maxCoeff();
  res.next_singular_ratio = (s.size() >= 2 && s(0) > 0.0) ? s(s.size() - 2) / s(0) : 0.0;
  for (Eigen::Index col = last - 1; col >= 0; --col) {
    VectorXd alt = candidate(col);
    if ((A * alt).cwiseAbs().maxCoeff() > cfg.tol) break;
    res.alternatives.push_back(alt);
  }
  if (!(res.residual <= cfg.tol)) {
    throw Error(ErrorCode::NoRelationFound, "no functional relation among the first integrals on the datum",
                {{"residual", res.residual}, {"degree", cfg.degree}, {"columns", static_cast<double>(cols)}});
  }
  return res;
}

// ---------------------------------------------------------------- surface residual

SurfaceResidual mae_residual_on_surface(const SolutionSurface& S, const Expr& F, int stride) {
  SurfaceResidual out;
  if (stride <= 0) return out;
  const int n = S.n();
  const int axes = n;  // time plus n-1 datum parameters
  std::vector<int> extent(axes);
  extent[0] = static_cast<int>(S.time_count());
  for (int h = 1; h < axes; ++h) extent[h] = S.grid().points_per_axis;
  for (int h = 0; h < axes; ++h) {
    if (extent[h] < 3) return out;
  }
  EquationJet eq(F, n);
  const int stencil = static_cast<int>(std::pow(3, axes));
  auto node_of = [&](const std::vector<int>& idx) {
    std::size_t si = 0;
    for (int h = axes - 1; h >= 1; --h) si = si * static_cast<std::size_t>(extent[h]) + static_cast<std::size_t>(idx[h]);
    return std::make_pair(static_cast<std::size_t>(idx[0]), si);
  };

  std::vector<int> idx(axes, 1);
  while (true) {
    auto [tc, sc] = node_of(idx);
    ChartPoint center = S.point(tc, sc);
    MatrixXd A(stencil, n + 1);
    MatrixXd rhs(stencil, n);
    std::vector<int> off(axes, -1);
    for (int r = 0; r < stencil; ++r) {
      std::vector<int> at(axes);
      for (int h = 0; h < axes; ++h) at[h] = idx[h] + off[h];
      auto [ti, si] = node_of(at);
      ChartPoint q = S.point(ti, si);
      A(r, 0) = 1.0;
      A.block(r, 1, 1, n) = (q.x - center.x).transpose();
      rhs.row(r) = (q.p - center.p).transpose();
      for (int h = 0; h < axes; ++h) {
        if (++off[h] <= 1) break;
        off[h] = -1;
      }
    }
    Eigen::JacobiSVD<MatrixXd> sx(A.rightCols(n));
    const VectorXd& sv = sx.singularValues();
    if (sv(n - 1) <= 1e-12 * sv(0)) {
      throw Error(ErrorCode::NonGraphicalPatch, "surface is not a graph over x near a grid node",
                  {{"time_index", static_cast<double>(tc)}, {"node", static_cast<double>(sc)}});
    }
    out.max_condition = std::max(out.max_condition, sv(0) / sv(n - 1));
    MatrixXd coef = A.colPivHouseholderQr().solve(rhs);
    MatrixXd J = coef.bottomRows(n).transpose();  // J(i,k) = d p_i / d x_k
    MatrixXd P = 0.5 * (J + J.transpose());
    double f = eq.residual(JetPoint(center, P));
    out.max_residual = std::max(out.max_residual, std::abs(f));
    ++out.nodes;

    int h = 0;
    for (; h < axes; ++h) {
      idx[h] += stride;
      if (idx[h] <= extent[h] - 2) break;
      idx[h] = 1;
    }
    if (h == axes) break;
  }
  return out;
}

// ---------------------------------------------------------------- Monge method

Expr MongeEquation::residual_expr() const {
  if (F) return *F;
  if (B) return B->residual_expr();
  throw Error(ErrorCode::InvalidArgument, "equation has neither F nor B");
}

MongeResult monge_solve(const MongeEquation& eq, const std::vector<Expr>& f_list, const CauchyDatum& N,
                        const MongeConfig& cfg) {
  const int n = N.n();
  MongeResult out;
  Expr F = eq.residual_expr();
  Rng rng(cfg.seed);

  const std::size_t total = cfg.grid.size();
  const int checks = std::max(1, std::min<int>(cfg.side_check_points, static_cast<int>(total)));
  std::optional<Side> global_side;
  std::vector<ChartPoint> check_points;
  for (int c = 0; c < checks; ++c) {
    std::size_t node = checks == 1 ? 0 : static_cast<std::size_t>(c) * (total - 1) / static_cast<std::size_t>(checks - 1);
    auto t = cfg.grid.params(node);
    ChartPoint m = N.at(t);
    check_points.push_back(m);
    DistFrame D, P;
    if (eq.B) {
      std::tie(D, P) = frames(*eq.B, m);
    } else {
      Rng local = rng.split(static_cast<std::uint64_t>(c));
      auto rec = reconstruct_distributions(F, m, cfg.reconstruct, local);
      D = rec.D;
      P = rec.Dperp;
    }
    SideCheck sc;
    sc.params = t;
    std::optional<Side> point_side;
    for (std::size_t i = 0; i < f_list.size(); ++i) {
      auto r = first_integral_test(f_list[i], D, P, m, cfg.side_tol);
      sc.sides.push_back(r.side);
      if (r.side == Side::Neither) {
        throw Error(ErrorCode::NotFirstIntegral, "supplied function " + std::to_string(i + 1) +
                                                     " is not a first integral of either distribution",
                    {{"function", static_cast<double>(i + 1)}, {"check_point", c}, {"residual_D", r.residual_D},
                     {"residual_Dperp", r.residual_Dperp}});
      }
      if (r.both) continue;
      std::optional<Side>& ref = eq.B ? global_side : point_side;
      if (ref && *ref != r.side) {
        throw Error(ErrorCode::SideMismatch, "first integrals straddle D and Dperp",
                    {{"function", static_cast<double>(i + 1)}, {"check_point", c}});
      }
      ref = r.side;
    }
    out.side_checks.push_back(std::move(sc));
  }

  out.relation = find_relation(f_list, N, cfg.relation, cfg.grid);
  std::vector<VectorXd> candidates{out.relation.psi};
  for (const auto& a : out.relation.alternatives) candidates.push_back(a);

  std::optional<Error> last_error;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    Expr f_star = out.relation.relation_for(candidates[c]);
    try {
      out.surface = solve_first_order(f_star, N, cfg.flow, cfg.grid, "datum");
      out.f_star = f_star;
      out.relation_choice = static_cast<int>(c);
      last_error.reset();
      break;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::CharacteristicDatum) throw;
      last_error = e;
    }
  }
  if (last_error) throw *last_error;

  Program fs(std::vector<Expr>{out.f_star}, chart_inputs(n));
  for (std::size_t si = 0; si < out.surface.node_count(); ++si) {
    double v;
    fs.run(out.surface.raw(0, si), &v);
    out.f_star_on_datum = std::max(out.f_star_on_datum, std::abs(v));
  }
  out.mae = mae_residual_on_surface(out.surface, F, cfg.mae_stride);
  out.first_integral_drift = drift_along_surface(out.surface, f_list);
  for (const auto& fi : f_list) {
    Expr br = bracket(out.f_star, fi, n);
    bool expected = true;
    for (const auto& m : check_points) expected = expected && std::abs(eval(br, m.env())) <= 1e-8;
    out.first_integral_expected.push_back(expected);
  }
  out.conserved_drift = drift_along_surface(out.surface, cfg.conserved);
  return out;
}

}  // namespace goursat
