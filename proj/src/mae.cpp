#include "goursat/mae.hpp"

#include <cmath>
#include <limits>

#include "goursat/jet_index.hpp"
#include "goursat/rng.hpp"

namespace goursat {

BField::BField(int n, std::vector<std::vector<Expr>> entries) : n_(n), B_(std::move(entries)) {
  if (static_cast<int>(B_.size()) != n) throw Error(ErrorCode::InvalidArgument, "B needs n rows");
  for (const auto& row : B_) {
    if (static_cast<int>(row.size()) != n) throw Error(ErrorCode::InvalidArgument, "B needs n columns");
  }
}

BField BField::constant(const MatrixXd& B) {
  const int n = static_cast<int>(B.rows());
  std::vector<std::vector<Expr>> e(n, std::vector<Expr>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) e[i][j] = Expr::constant(B(i, j));
  }
  return BField(n, std::move(e));
}

MatrixXd BField::at(const ChartPoint& m) const {
  Env env = m.env();
  MatrixXd r(n_, n_);
  for (int i = 0; i < n_; ++i) {
    for (int j = 0; j < n_; ++j) r(i, j) = eval(B_[i][j], env);
  }
  return r;
}

Expr det_expr(const std::vector<std::vector<Expr>>& m) {
  const std::size_t n = m.size();
  if (n == 1) return m[0][0];
  if (n == 2) return m[0][0] * m[1][1] - m[0][1] * m[1][0];
  Expr total = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    if (m[0][c].is_constant(0.0)) continue;
    std::vector<std::vector<Expr>> minor;
    for (std::size_t r = 1; r < n; ++r) {
      std::vector<Expr> row;
      for (std::size_t k = 0; k < n; ++k) {
        if (k != c) row.push_back(m[r][k]);
      }
      minor.push_back(std::move(row));
    }
    Expr term = m[0][c] * det_expr(minor);
    total = (c % 2 == 0) ? total + term : total - term;
  }
  return total;
}

Expr BField::residual_expr() const {
  std::vector<std::vector<Expr>> m(n_, std::vector<Expr>(n_));
  for (int i = 0; i < n_; ++i) {
    for (int j = 0; j < n_; ++j) {
      int a = std::min(i, j) + 1;
      int b = std::max(i, j) + 1;
      std::string idx{static_cast<char>('0' + a), static_cast<char>('0' + b)};
      m[i][j] = Expr::variable(p_name(idx)) - B_[i][j];
    }
  }
  return det_expr(m);
}

double goursat_residual(const BField& B, const JetPoint& m1) { return (m1.P - B.at(m1.base)).determinant(); }

std::string kind_name(GoursatPointReport::Kind kind) {
  switch (kind) {
    case GoursatPointReport::Kind::OffEquation: return "off-equation";
    case GoursatPointReport::Kind::Regular: return "regular";
    case GoursatPointReport::Kind::Singular: return "singular";
  }
  return "unknown";
}

GoursatPointReport goursat_point_report(const BField& B, const JetPoint& m1, double tol) {
  const int n = m1.n();
  MatrixXd M = m1.P - B.at(m1.base);
  GoursatPointReport r;
  r.residual = M.determinant();
  r.adjugate = adjugate(M);
  r.rank = numerical_rank(M, tol);
  if (r.rank == n) {
    r.kind = GoursatPointReport::Kind::OffEquation;
    r.metric = 0.5 * (r.adjugate + r.adjugate.transpose());
  } else if (r.rank == n - 1) {
    r.kind = GoursatPointReport::Kind::Regular;
    Eigen::JacobiSVD<MatrixXd> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
    r.a = svd.matrixV().col(n - 1);
    r.b = svd.matrixU().col(n - 1);
    r.metric = 0.5 * (r.adjugate + r.adjugate.transpose());
  } else {
    r.kind = GoursatPointReport::Kind::Singular;
    r.metric = MatrixXd::Zero(n, n);
  }
  return r;
}

std::pair<DistFrame, DistFrame> frames(const BField& B, const ChartPoint& m) {
  const int n = B.n();
  MatrixXd b = B.at(m);
  DistFrame D{MatrixXd::Zero(n, 2 * n + 1)};
  DistFrame P{MatrixXd::Zero(n, 2 * n + 1)};
  for (int i = 0; i < n; ++i) {
    D.rows(i, i) = P.rows(i, i) = 1.0;
    D.rows(i, n) = P.rows(i, n) = m.p(i);
    D.rows.block(i, n + 1, 1, n) = b.row(i);
    P.rows.block(i, n + 1, 1, n) = b.col(i).transpose();
  }
  return {D, P};
}

std::vector<VectorFieldExpr> frame_fields(const BField& B, bool perp) {
  const int n = B.n();
  std::vector<VectorFieldExpr> out;
  for (int i = 0; i < n; ++i) {
    std::vector<Expr> c(2 * n + 1, Expr(0.0));
    c[i] = 1.0;
    c[n] = Expr::variable(p_name(i + 1));
    for (int j = 0; j < n; ++j) c[n + 1 + j] = perp ? B.entries()[j][i] : B.entries()[i][j];
    out.emplace_back(n, std::move(c));
  }
  return out;
}

NForm nform_from_frame(const std::vector<VectorFieldExpr>& fields) {
  if (fields.empty()) throw Error(ErrorCode::InvalidArgument, "empty frame");
  const int n = fields.front().n();
  std::vector<std::vector<Expr>> factors;
  for (const auto& Y : fields) {
    const auto& c = Y.components();
    std::vector<Expr> rho(2 * n + 1, Expr(0.0));
    for (int i = 0; i < n; ++i) {
      rho[i] = -c[n + 1 + i];
      rho[n + 1 + i] = c[i];
    }
    factors.push_back(std::move(rho));
  }
  return NForm::decomposable(n, std::move(factors));
}

double horizontalize(const NForm& omega, const JetPoint& m1) {
  MatrixXd W = tautological_frame(m1);
  if (omega.is_decomposable()) return (omega.factor_matrix(m1.base) * W).determinant();
  return omega.at(m1.base).evaluate(W);
}

Expr horizontalize_expr(const NForm& omega) {
  const int n = omega.n();
  // W[k][i]: flattened coordinate k of w_i.
  std::vector<std::vector<Expr>> W(2 * n + 1, std::vector<Expr>(n, Expr(0.0)));
  for (int i = 0; i < n; ++i) {
    W[i][i] = 1.0;
    W[n][i] = Expr::variable(p_name(i + 1));
    for (int j = 0; j < n; ++j) {
      int a = std::min(i, j) + 1;
      int b = std::max(i, j) + 1;
      W[n + 1 + j][i] = Expr::variable(p_name(std::string{static_cast<char>('0' + a), static_cast<char>('0' + b)}));
    }
  }
  if (omega.is_decomposable()) {
    std::vector<std::vector<Expr>> M(n, std::vector<Expr>(n, Expr(0.0)));
    for (int k = 0; k < n; ++k) {
      for (int i = 0; i < n; ++i) {
        Expr s = 0.0;
        for (int c = 0; c < 2 * n + 1; ++c) s = s + omega.factors()[k][c] * W[c][i];
        M[k][i] = s;
      }
    }
    return det_expr(M);
  }
  Expr total = 0.0;
  for (const auto& [mask, coef] : omega.terms()) {
    std::vector<std::vector<Expr>> sub;
    for (int k = 0; k < 2 * n + 1; ++k) {
      if (mask & (1U << k)) sub.push_back(W[k]);
    }
    total = total + coef * det_expr(sub);
  }
  return total;
}

bool lychagin_test(const Expr& f, const NForm& omega, const ChartPoint& m, double tol) {
  const int n = m.n();
  Env env = m.env();
  VarTable vt(n, 1);
  auto names = vt.chart_names();
  VectorXd df(2 * n + 1);
  for (int k = 0; k < 2 * n + 1; ++k) df(k) = eval(diff(f, names[k]), env);
  if (df.norm() == 0.0) return true;
  VectorXd theta = VectorXd::Zero(2 * n + 1);
  theta.head(n) = -m.p;
  theta(n) = 1.0;
  VectorXd Y = hamiltonian_field(f, n).at(m).coords();
  Form om = omega.at(m);
  Form result = wedge(Form::covector(df), wedge(Form::covector(theta), interior(Y, om)));
  double scale = df.norm() * theta.norm() * std::max(Y.norm(), 1e-300) * std::max(om.max_abs(), 1e-300);
  return result.max_abs() <= tol * scale;
}

std::string side_name(Side s) {
  switch (s) {
    case Side::InD: return "D";
    case Side::InDperp: return "Dperp";
    case Side::Neither: return "neither";
  }
  return "unknown";
}

FirstIntegralResult first_integral_test(const Expr& f, const DistFrame& D, const DistFrame& Dperp, const ChartPoint& m,
                                        double tol) {
  VectorXd Y = hamiltonian_field(f, m.n()).at(m).coords();
  if (Y.norm() == 0.0) throw Error(ErrorCode::ZeroField, "Hamiltonian field vanishes at the point");
  FirstIntegralResult r;
  r.residual_D = membership_residual(D.columns(), Y);
  r.residual_Dperp = membership_residual(Dperp.columns(), Y);
  bool inD = r.residual_D <= tol;
  bool inP = r.residual_Dperp <= tol;
  r.both = inD && inP;
  r.side = inD ? Side::InD : inP ? Side::InDperp : Side::Neither;
  return r;
}

FirstIntegralResult first_integral_test(const Expr& f, const BField& B, const ChartPoint& m, double tol) {
  auto [D, P] = frames(B, m);
  return first_integral_test(f, D, P, m, tol);
}

// ---------------------------------------------------------------- reconstruction

namespace {

struct LinePair {
  VectorXd first;
  VectorXd second;
};

double excess_ratio(const MatrixXd& rows, int n) {
  Eigen::JacobiSVD<MatrixXd> svd(rows);
  const VectorXd& s = svd.singularValues();
  if (s.size() <= n || s(0) == 0.0) return 0.0;
  return s(n) / s(0);
}

// Orthonormal basis of the top-n right singular directions and the fill/excess ratios.
MatrixXd top_span(const MatrixXd& rows, int n, double& fill, double& excess) {
  Eigen::JacobiSVD<MatrixXd> svd(rows, Eigen::ComputeThinV);
  const VectorXd& s = svd.singularValues();
  fill = s.size() >= n && s(0) > 0.0 ? s(n - 1) / s(0) : 0.0;
  excess = s.size() > n && s(0) > 0.0 ? s(n) / s(0) : 0.0;
  return svd.matrixV().leftCols(std::min<Eigen::Index>(n, svd.matrixV().cols()));
}

class Cluster {
 public:
  Cluster(int dim, int n) : n_(n), gram_(MatrixXd::Zero(dim, dim)) {}

  void add(const VectorXd& l) {
    lines_.push_back(l);
    gram_ += l * l.transpose();
    dirty_ = true;
  }

  double extension(const VectorXd& l) {
    if (dirty_) {
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram_);
      basis_ = es.eigenvectors().rightCols(n_);
      dirty_ = false;
    }
    return (l - basis_ * (basis_.transpose() * l)).norm();
  }

  MatrixXd rows() const {
    MatrixXd r(lines_.size(), gram_.rows());
    for (std::size_t k = 0; k < lines_.size(); ++k) r.row(static_cast<Eigen::Index>(k)) = lines_[k].transpose();
    return r;
  }

 private:
  int n_;
  MatrixXd gram_;
  MatrixXd basis_;
  bool dirty_ = true;
  std::vector<VectorXd> lines_;
};

}  // namespace

Reconstruction reconstruct_distributions(const Expr& F, const ChartPoint& m, const ReconstructConfig& cfg, Rng& rng) {
  const int n = m.n();
  const int dim = 2 * n + 1;
  EquationJet eq(F, n);
  Reconstruction out;
  std::vector<LinePair> pairs;
  int attempts = 0;
  const int max_attempts = cfg.samples * cfg.max_attempts_factor;
  while (static_cast<int>(pairs.size()) < cfg.samples && attempts < max_attempts) {
    ++attempts;
    auto P = sample_fiber_point(eq, m, rng, cfg.newton_tol);
    if (!P) {
      ++out.newton_failures;
      if (out.newton_failures >= 3 && pairs.empty()) {
        throw Error(ErrorCode::InsufficientSamples, "no point of the equation found in the fiber",
                    {{"newton_failures", out.newton_failures}});
      }
      continue;
    }
    JetPoint m1(m, *P);
    auto dec = decompose_metric(eq.metric(m1), cfg.rank_tol);
    switch (dec.kind) {
      case MetricDecomposition::Kind::Zero:
        ++out.singular_discarded;
        continue;
      case MetricDecomposition::Kind::NotDecomposable:
        throw Error(ErrorCode::NotGoursatType, "metric is not decomposable at a fiber sample",
                    {{"sample", static_cast<double>(attempts - 1)}, {"metric_rank", dec.rank}});
      case MetricDecomposition::Kind::Rank1: {
        VectorXd l = lift_to_ambient(m1, dec.v).normalized();
        pairs.push_back({l, l});
        ++out.rank1_samples;
        break;
      }
      case MetricDecomposition::Kind::Decomposable:
        pairs.push_back({lift_to_ambient(m1, dec.v).normalized(), lift_to_ambient(m1, dec.w).normalized()});
        break;
    }
  }
  out.accepted = static_cast<int>(pairs.size());
  if (out.accepted < n + 1) {
    throw Error(ErrorCode::InsufficientSamples, "too few usable fiber samples",
                {{"accepted", out.accepted}, {"attempts", attempts}});
  }

  // Orient the first n+1 pairs by exhaustive search, the rest greedily.
  const int seed_count = n + 1;
  unsigned best_mask = 0;
  double best_score = std::numeric_limits<double>::infinity();
  for (unsigned mask = 0; mask < (1U << (seed_count - 1)); ++mask) {
    MatrixXd A(seed_count, dim), B(seed_count, dim);
    for (int k = 0; k < seed_count; ++k) {
      bool flip = k > 0 && (mask >> (k - 1)) & 1U;
      A.row(k) = (flip ? pairs[k].second : pairs[k].first).transpose();
      B.row(k) = (flip ? pairs[k].first : pairs[k].second).transpose();
    }
    double score = excess_ratio(A, n) + excess_ratio(B, n);
    if (score < best_score) {
      best_score = score;
      best_mask = mask;
    }
  }
  Cluster cd(dim, n), cp(dim, n);
  for (int k = 0; k < seed_count; ++k) {
    bool flip = k > 0 && (best_mask >> (k - 1)) & 1U;
    cd.add(flip ? pairs[k].second : pairs[k].first);
    cp.add(flip ? pairs[k].first : pairs[k].second);
  }
  for (std::size_t k = seed_count; k < pairs.size(); ++k) {
    const auto& pr = pairs[k];
    double keep = cd.extension(pr.first) + cp.extension(pr.second);
    double swap = cd.extension(pr.second) + cp.extension(pr.first);
    if (keep <= swap) {
      cd.add(pr.first);
      cp.add(pr.second);
    } else {
      cd.add(pr.second);
      cp.add(pr.first);
    }
  }

  MatrixXd span_d = top_span(cd.rows(), n, out.fill_D, out.excess_D);
  MatrixXd span_p = top_span(cp.rows(), n, out.fill_Dperp, out.excess_Dperp);
  if (out.excess_D > cfg.rank_tol * 1e3 || out.excess_Dperp > cfg.rank_tol * 1e3) {
    throw Error(ErrorCode::NotGoursatType, "characteristic lines do not fit in two n-dimensional spaces",
                {{"excess_D", out.excess_D}, {"excess_Dperp", out.excess_Dperp}});
  }
  if (out.fill_D <= cfg.rank_tol || out.fill_Dperp <= cfg.rank_tol) {
    throw Error(ErrorCode::InsufficientSamples, "characteristic lines do not fill n-dimensional spaces",
                {{"fill_D", out.fill_D}, {"fill_Dperp", out.fill_Dperp}, {"accepted", out.accepted}});
  }
  out.D.rows = span_d.transpose();
  out.Dperp.rows = span_p.transpose();

  double ortho = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      Tangent u = Tangent::from_coords(out.D.rows.row(i).transpose());
      Tangent v = Tangent::from_coords(out.Dperp.rows.row(j).transpose());
      ortho = std::max(ortho, std::abs(omega_eval(m, u, v)));
    }
  }
  out.ortho_residual = ortho;
  if (ortho > cfg.ortho_tol) {
    throw Error(ErrorCode::OrthogonalityViolation, "reconstructed spans are not omega-orthogonal",
                {{"omega_max", ortho}});
  }
  VectorXd ang = principal_angles(out.D.columns(), out.Dperp.columns());
  out.max_angle_D_Dperp = ang.size() > 0 ? ang.maxCoeff() : 0.0;
  out.coincide = out.max_angle_D_Dperp <= 1e-6;
  return out;
}

MatrixXd recover_B(const DistFrame& D) {
  const int n = D.n();
  MatrixXd X = D.rows.leftCols(n);
  Eigen::JacobiSVD<MatrixXd> svd(X);
  const VectorXd& s = svd.singularValues();
  if (s(0) == 0.0 || s(n - 1) <= 1e-9 * s(0)) {
    throw Error(ErrorCode::NonTransversal,
                "frame is not transversal to the p-fibres; apply a shift x -> x + eps p chart change first",
                {{"sigma_min_ratio", s(0) == 0.0 ? 0.0 : s(n - 1) / s(0)}});
  }
  MatrixXd R = X.fullPivLu().solve(D.rows);
  return R.block(0, n + 1, n, n);
}

}  // namespace goursat
