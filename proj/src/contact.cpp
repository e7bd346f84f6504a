#include "goursat/contact.hpp"

#include <cmath>

#include "goursat/jet_index.hpp"

namespace goursat {

namespace {

std::vector<std::string> chart_inputs(int n) { return VarTable(n, 1).chart_names(); }

}  // namespace

std::vector<std::string> param_names(int n) {
  std::vector<std::string> out;
  for (int h = 1; h < n; ++h) out.push_back("t" + std::to_string(h));
  return out;
}

ChartPoint ChartPoint::from_coords(const VectorXd& c) {
  const Eigen::Index n = (c.size() - 1) / 2;
  return {c.head(n), c(n), c.tail(n)};
}

VectorXd ChartPoint::coords() const {
  const Eigen::Index n = x.size();
  VectorXd c(2 * n + 1);
  c << x, z, p;
  return c;
}

void ChartPoint::bind(Env& env) const {
  for (int i = 0; i < n(); ++i) {
    env[x_name(i + 1)] = x(i);
    env[p_name(i + 1)] = p(i);
  }
  env["z"] = z;
}

Env ChartPoint::env() const {
  Env e;
  bind(e);
  return e;
}

Tangent Tangent::from_coords(const VectorXd& c) {
  const Eigen::Index n = (c.size() - 1) / 2;
  return {c.head(n), c(n), c.tail(n)};
}

Tangent Tangent::hat_x(const ChartPoint& m, int i) {
  Tangent t = zero(m.n());
  t.dx(i) = 1.0;
  t.dz = m.p(i);
  return t;
}

Tangent Tangent::d_p(int n, int i) {
  Tangent t = zero(n);
  t.dp(i) = 1.0;
  return t;
}

Tangent Tangent::d_z(int n) {
  Tangent t = zero(n);
  t.dz = 1.0;
  return t;
}

VectorXd Tangent::coords() const {
  const Eigen::Index n = dx.size();
  VectorXd c(2 * n + 1);
  c << dx, dz, dp;
  return c;
}

double theta_eval(const ChartPoint& m, const Tangent& v) { return v.dz - m.p.dot(v.dx); }

double omega_eval(const ChartPoint& /*m*/, const Tangent& v, const Tangent& w) {
  return v.dx.dot(w.dp) - w.dx.dot(v.dp);
}

VectorFieldExpr::VectorFieldExpr(int n, std::vector<Expr> components) : n_(n), comps_(std::move(components)) {
  if (static_cast<int>(comps_.size()) != 2 * n + 1) {
    throw Error(ErrorCode::InvalidArgument, "vector field needs 2n+1 components");
  }
}

Tangent VectorFieldExpr::at(const ChartPoint& m) const {
  Env env = m.env();
  VectorXd c(2 * n_ + 1);
  for (int k = 0; k < 2 * n_ + 1; ++k) c(k) = eval(comps_[k], env);
  return Tangent::from_coords(c);
}

Expr VectorFieldExpr::apply(const Expr& g) const {
  auto names = chart_inputs(n_);
  Expr r = 0.0;
  for (int k = 0; k < 2 * n_ + 1; ++k) {
    if (comps_[k].is_constant(0.0)) continue;
    r = r + comps_[k] * diff(g, names[k]);
  }
  return r;
}

VectorFieldExpr hamiltonian_field(const Expr& f, int n) {
  std::vector<Expr> c(2 * n + 1);
  Expr fz = diff(f, "z");
  Expr dz = 0.0;
  for (int i = 1; i <= n; ++i) {
    Expr fp = diff(f, p_name(i));
    Expr pi = Expr::variable(p_name(i));
    c[i - 1] = fp;
    dz = dz + pi * fp;
    c[n + i] = -(diff(f, x_name(i)) + pi * fz);
  }
  c[n] = dz;
  return VectorFieldExpr(n, std::move(c));
}

Expr bracket(const Expr& f, const Expr& g, int n) { return hamiltonian_field(f, n).apply(g); }

std::vector<int> all_indices(int n) {
  std::vector<int> s(n);
  for (int i = 0; i < n; ++i) s[i] = i;
  return s;
}

ChartPoint legendre(const ChartPoint& m, const std::vector<int>& S) {
  ChartPoint r = m;
  for (int a : S) {
    r.x(a) = m.p(a);
    r.p(a) = -m.x(a);
    r.z -= m.p(a) * m.x(a);
  }
  return r;
}

ChartPoint legendre_inverse(const ChartPoint& m, const std::vector<int>& S) {
  ChartPoint r = m;
  for (int a : S) {
    r.x(a) = -m.p(a);
    r.p(a) = m.x(a);
    r.z -= m.x(a) * m.p(a);
  }
  return r;
}

Tangent legendre_pushforward(const ChartPoint& m, const Tangent& v, const std::vector<int>& S) {
  Tangent r = v;
  for (int a : S) {
    r.dx(a) = v.dp(a);
    r.dp(a) = -v.dx(a);
    r.dz -= m.p(a) * v.dx(a) + m.x(a) * v.dp(a);
  }
  return r;
}

std::size_t ParamGrid::size() const {
  std::size_t s = 1;
  for (int h = 0; h < box.dimension(); ++h) s *= static_cast<std::size_t>(points_per_axis);
  return s;
}

std::vector<int> ParamGrid::multi_index(std::size_t k) const {
  std::vector<int> idx(box.dimension());
  for (int h = 0; h < box.dimension(); ++h) {
    idx[h] = static_cast<int>(k % static_cast<std::size_t>(points_per_axis));
    k /= static_cast<std::size_t>(points_per_axis);
  }
  return idx;
}

std::vector<double> ParamGrid::params(std::size_t k) const {
  auto idx = multi_index(k);
  std::vector<double> t(idx.size());
  for (std::size_t h = 0; h < idx.size(); ++h) {
    const auto& [lo, hi] = box.ranges[h];
    t[h] = points_per_axis == 1 ? lo : lo + (hi - lo) * idx[h] / static_cast<double>(points_per_axis - 1);
  }
  return t;
}

// ---------------------------------------------------------------- Cauchy data

CauchyDatum::CauchyDatum(std::vector<Expr> X, Expr Z, std::vector<Expr> P, ParamBox box)
    : n_(static_cast<int>(X.size())), X_(std::move(X)), Z_(std::move(Z)), P_(std::move(P)), box_(std::move(box)) {
  if (static_cast<int>(P_.size()) != n_) throw Error(ErrorCode::InvalidArgument, "datum P needs n components");
  compile();
}

CauchyDatum::CauchyDatum(std::vector<Expr> X, Expr Z, ParamBox box)
    : n_(static_cast<int>(X.size())), X_(std::move(X)), Z_(std::move(Z)), box_(std::move(box)) {
  compile();
}

void CauchyDatum::compile() {
  if (n_ < 2) throw Error(ErrorCode::InvalidArgument, "datum needs n >= 2");
  if (box_.dimension() != n_ - 1) throw Error(ErrorCode::InvalidArgument, "datum box must have n-1 ranges");
  auto params = param_names(n_);
  std::vector<Expr> outs;
  for (const auto& e : X_) outs.push_back(e);
  outs.push_back(Z_);
  for (const auto& t : params) {
    for (const auto& e : X_) outs.push_back(diff(e, t));
    outs.push_back(diff(Z_, t));
  }
  xz_ = Program(outs, params);
  if (!P_.empty()) {
    std::vector<Expr> pouts = P_;
    for (const auto& t : params) {
      for (const auto& e : P_) pouts.push_back(diff(e, t));
    }
    p_ = Program(pouts, params);
  }
}

void CauchyDatum::xz_at(const std::vector<double>& t, VectorXd& x, double& z, MatrixXd& jx, VectorXd& jz) const {
  std::vector<double> out(xz_.output_count());
  xz_.run(t.data(), out.data());
  x.resize(n_);
  for (int i = 0; i < n_; ++i) x(i) = out[i];
  z = out[n_];
  jx.resize(n_ - 1, n_);
  jz.resize(n_ - 1);
  std::size_t k = n_ + 1;
  for (int h = 0; h < n_ - 1; ++h) {
    for (int i = 0; i < n_; ++i) jx(h, i) = out[k++];
    jz(h) = out[k++];
  }
}

VectorXd CauchyDatum::lift_p(const std::vector<double>& t) const {
  VectorXd x;
  double z;
  MatrixXd jx;
  VectorXd jz;
  xz_at(t, x, z, jx, jz);
  Eigen::JacobiSVD<MatrixXd> svd(jx, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const VectorXd& s = svd.singularValues();
  if (s(s.size() - 1) <= 1e-10 * std::max(1.0, s(0))) {
    throw Error(ErrorCode::RankDeficientDatum, "dX/dt is rank deficient", {{"t1", t[0]}, {"sigma_min", s(s.size() - 1)}});
  }
  VectorXd p0 = svd.solve(jz);
  VectorXd nu = svd.matrixV().col(n_ - 1);
  double lambda = nu.dot(lift_->p_seed);

  std::vector<double> in(2 * n_ + 1);
  std::vector<double> out(n_ + 1);
  auto residual = [&](double lam, double& slope) {
    VectorXd p = p0 + lam * nu;
    for (int i = 0; i < n_; ++i) in[i] = x(i);
    in[n_] = z;
    for (int i = 0; i < n_; ++i) in[n_ + 1 + i] = p(i);
    lift_->f_and_grad.run(in.data(), out.data());
    slope = 0.0;
    for (int i = 0; i < n_; ++i) slope += out[1 + i] * nu(i);
    return out[0];
  };
  double slope = 0.0;
  double r = residual(lambda, slope);
  for (int it = 0; it < 50 && std::abs(r) > 1e-12; ++it) {
    if (slope == 0.0 || !std::isfinite(slope)) break;
    double step = -r / slope;
    double trial_slope = 0.0;
    double trial = residual(lambda + step, trial_slope);
    int halvings = 0;
    while (std::abs(trial) > std::abs(r) && halvings < 30) {
      step *= 0.5;
      trial = residual(lambda + step, trial_slope);
      ++halvings;
    }
    lambda += step;
    r = trial;
    slope = trial_slope;
  }
  if (!(std::abs(r) <= 1e-12)) {
    std::vector<std::pair<std::string, double>> details;
    for (std::size_t h = 0; h < t.size(); ++h) details.emplace_back("t" + std::to_string(h + 1), t[h]);
    details.emplace_back("residual", r);
    throw Error(ErrorCode::NewtonDivergence, "Newton lift of the datum did not converge", details);
  }
  return p0 + lambda * nu;
}

ChartPoint CauchyDatum::at(const std::vector<double>& t) const {
  VectorXd x;
  double z;
  MatrixXd jx;
  VectorXd jz;
  xz_at(t, x, z, jx, jz);
  VectorXd p(n_);
  if (lift_) {
    p = lift_p(t);
  } else {
    std::vector<double> out(p_.output_count());
    p_.run(t.data(), out.data());
    for (int i = 0; i < n_; ++i) p(i) = out[i];
  }
  return {x, z, p};
}

MatrixXd CauchyDatum::tangents(const std::vector<double>& t) const {
  VectorXd x;
  double z;
  MatrixXd jx;
  VectorXd jz;
  xz_at(t, x, z, jx, jz);
  MatrixXd rows(n_ - 1, 2 * n_ + 1);
  rows.leftCols(n_) = jx;
  rows.col(n_) = jz;
  if (lift_) {
    const double eps = 1e-6;
    for (int h = 0; h < n_ - 1; ++h) {
      auto tp = t;
      auto tm = t;
      tp[h] += eps;
      tm[h] -= eps;
      rows.block(h, n_ + 1, 1, n_) = ((lift_p(tp) - lift_p(tm)) / (2.0 * eps)).transpose();
    }
  } else {
    std::vector<double> out(p_.output_count());
    p_.run(t.data(), out.data());
    for (int h = 0; h < n_ - 1; ++h) {
      for (int i = 0; i < n_; ++i) rows(h, n_ + 1 + i) = out[n_ + h * n_ + i];
    }
  }
  return rows;
}

CauchyDatum lift_cauchy_datum(std::vector<Expr> X, Expr Z, const Expr& f, const std::vector<double>& t0,
                              const VectorXd& p_seed, ParamBox box) {
  CauchyDatum N(std::move(X), std::move(Z), std::move(box));
  const int n = N.n();
  std::vector<Expr> outs{f};
  for (int i = 1; i <= n; ++i) outs.push_back(diff(f, p_name(i)));
  N.lift_ = CauchyDatum::Lift{f, p_seed, Program(outs, chart_inputs(n))};
  // Surface rank and convergence problems at the reference parameter right away.
  (void)N.at(t0);
  return N;
}

IntegralCheck verify_integral(const CauchyDatum& N, const ParamGrid& grid, double tol) {
  IntegralCheck check;
  const int n = N.n();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    auto t = grid.params(k);
    ChartPoint m = N.at(t);
    MatrixXd rows = N.tangents(t);
    for (int h = 0; h < n - 1; ++h) {
      double r = std::abs(rows(h, n) - m.p.dot(rows.row(h).head(n).transpose()));
      if (!(r <= check.max_residual)) {
        check.max_residual = r;
        check.worst_params = t;
      }
    }
  }
  check.pass = check.max_residual <= tol;
  return check;
}

}  // namespace goursat
