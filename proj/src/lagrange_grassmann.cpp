#include "goursat/lagrange_grassmann.hpp"

#include <cmath>

#include "goursat/jet_index.hpp"
#include "goursat/rng.hpp"

namespace goursat {

JetPoint::JetPoint(ChartPoint m, MatrixXd P_) : base(std::move(m)), P(std::move(P_)) {
  if (P.rows() != base.n() || P.cols() != base.n()) throw Error(ErrorCode::InvalidArgument, "P must be n x n");
  // Keep the upper triangle authoritative.
  for (int i = 0; i < P.rows(); ++i) {
    for (int j = 0; j < i; ++j) P(i, j) = P(j, i);
  }
}

void JetPoint::bind(Env& env) const {
  base.bind(env);
  for (int i = 0; i < n(); ++i) {
    for (int j = i; j < n(); ++j) {
      std::string idx{static_cast<char>('1' + i), static_cast<char>('1' + j)};
      env[p_name(idx)] = P(i, j);
    }
  }
}

Env JetPoint::env() const {
  Env e;
  bind(e);
  return e;
}

MatrixXd tautological_frame(const JetPoint& m1) {
  const int n = m1.n();
  MatrixXd W = MatrixXd::Zero(2 * n + 1, n);
  for (int i = 0; i < n; ++i) {
    W(i, i) = 1.0;
    W(n, i) = m1.base.p(i);
    W.block(n + 1, i, n, 1) = m1.P.col(i);
  }
  return W;
}

VectorXd lift_to_ambient(const JetPoint& m1, const VectorXd& v) { return tautological_frame(m1) * v; }

// ---------------------------------------------------------------- EquationJet

EquationJet::EquationJet(Expr F, int n) : n_(n), F_(std::move(F)) {
  VarTable vt(n, 2);
  std::vector<Expr> outs{F_};
  for (int i = 1; i <= n; ++i) {
    for (int j = i; j <= n; ++j) {
      std::string idx{static_cast<char>('0' + i), static_cast<char>('0' + j)};
      outs.push_back(diff(F_, p_name(idx)));
    }
  }
  prog_ = Program(outs, vt.jet_names(2));
}

std::vector<double> EquationJet::inputs(const JetPoint& m1) const {
  std::vector<double> in;
  in.reserve(prog_.input_count());
  for (int i = 0; i < n_; ++i) in.push_back(m1.base.x(i));
  in.push_back(m1.base.z);
  for (int i = 0; i < n_; ++i) in.push_back(m1.base.p(i));
  for (int i = 0; i < n_; ++i) {
    for (int j = i; j < n_; ++j) in.push_back(m1.P(i, j));
  }
  return in;
}

void EquationJet::residual_and_metric(const JetPoint& m1, double& f, MatrixXd& G) const {
  auto in = inputs(m1);
  std::vector<double> out(prog_.output_count());
  prog_.run(in.data(), out.data());
  f = out[0];
  G.resize(n_, n_);
  std::size_t k = 1;
  for (int i = 0; i < n_; ++i) {
    for (int j = i; j < n_; ++j) {
      double v = out[k++];
      if (i == j) {
        G(i, i) = v;
      } else {
        G(i, j) = G(j, i) = 0.5 * v;
      }
    }
  }
}

double EquationJet::residual(const JetPoint& m1) const {
  double f;
  MatrixXd G;
  residual_and_metric(m1, f, G);
  return f;
}

MatrixXd EquationJet::metric(const JetPoint& m1) const {
  double f;
  MatrixXd G;
  residual_and_metric(m1, f, G);
  return G;
}

MatrixXd metric_of_equation(const Expr& F, const JetPoint& m1) { return EquationJet(F, m1.n()).metric(m1); }

// ---------------------------------------------------------------- ranks and characteristics

VectorRank vector_rank(const MatrixXd& Pdot, double tol) {
  VectorRank r;
  r.rank = numerical_rank(Pdot, tol);
  if (r.rank == 0) {
    r.radical = MatrixXd::Identity(Pdot.rows(), Pdot.cols());
  } else {
    r.radical = kernel_basis(Pdot, tol);
  }
  return r;
}

namespace {

constexpr double kZeroMetric = 1e-14;

}  // namespace

bool is_characteristic_covector(const MatrixXd& G, const VectorXd& eta, double tol) {
  double gn = G.norm();
  if (gn <= kZeroMetric) throw Error(ErrorCode::SingularPoint, "metric vanishes: every covector is characteristic");
  return std::abs(eta.dot(G * eta)) <= tol * gn * eta.squaredNorm();
}

bool is_characteristic_covector(const Expr& F, const JetPoint& m1, const VectorXd& eta, double tol) {
  return is_characteristic_covector(metric_of_equation(F, m1), eta, tol);
}

std::string kind_name(MetricDecomposition::Kind kind) {
  switch (kind) {
    case MetricDecomposition::Kind::Zero: return "zero";
    case MetricDecomposition::Kind::Rank1: return "rank1";
    case MetricDecomposition::Kind::Decomposable: return "decomposable";
    case MetricDecomposition::Kind::NotDecomposable: return "not_decomposable";
  }
  return "unknown";
}

MetricDecomposition decompose_metric(const MatrixXd& G, double tol) {
  MetricDecomposition d;
  const Eigen::Index n = G.rows();
  double gn = G.norm();
  if (gn <= kZeroMetric) {
    d.kind = MetricDecomposition::Kind::Zero;
    return d;
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(G);
  const VectorXd& lam = es.eigenvalues();
  const MatrixXd& U = es.eigenvectors();
  double scale = lam.cwiseAbs().maxCoeff();
  std::vector<Eigen::Index> alive;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (std::abs(lam(k)) > tol * scale) alive.push_back(k);
  }
  d.rank = static_cast<int>(alive.size());
  if (alive.size() == 1) {
    d.kind = MetricDecomposition::Kind::Rank1;
    d.v = std::sqrt(std::abs(lam(alive[0]))) * U.col(alive[0]);
    d.w = d.v;
    d.rank1_sign = lam(alive[0]) > 0 ? 1.0 : -1.0;
    return d;
  }
  if (alive.size() == 2 && lam(alive[0]) * lam(alive[1]) < 0.0) {
    // eigenvalues are ascending, so alive[0] is the negative one
    VectorXd a = std::sqrt(lam(alive[1])) * U.col(alive[1]);
    VectorXd b = std::sqrt(-lam(alive[0])) * U.col(alive[0]);
    d.kind = MetricDecomposition::Kind::Decomposable;
    d.v = a + b;
    d.w = a - b;
    return d;
  }
  d.kind = MetricDecomposition::Kind::NotDecomposable;
  return d;
}

bool strong_char_test(const Expr& F, const JetPoint& m1, const VectorXd& eta, int samples, double tol) {
  EquationJet eq(F, m1.n());
  double f0;
  MatrixXd G;
  eq.residual_and_metric(m1, f0, G);
  double scale = std::max(G.norm(), 1e-300);
  MatrixXd E = eta * eta.transpose();
  for (int k = 0; k < samples; ++k) {
    double t = samples == 1 ? 1.0 : -1.0 + 2.0 * k / static_cast<double>(samples - 1);
    JetPoint q(m1.base, m1.P + t * E);
    if (std::abs(eq.residual(q)) > tol * scale) return false;
  }
  return true;
}

std::vector<VectorXd> isotropic_directions(const MatrixXd& G, double tol) {
  std::vector<VectorXd> out;
  auto d = decompose_metric(G, tol);
  const Eigen::Index n = G.rows();
  if (d.kind == MetricDecomposition::Kind::Zero) return out;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(G);
  const VectorXd& lam = es.eigenvalues();
  const MatrixXd& U = es.eigenvectors();
  if (d.kind == MetricDecomposition::Kind::Rank1) {
    if (n == 2) {
      VectorXd u = d.v.normalized();
      VectorXd perp(2);
      perp << -u(1), u(0);
      out.push_back(perp);
    }
    return out;
  }
  if (n == 2 && lam(0) < 0.0 && lam(1) > 0.0) {
    VectorXd a = std::sqrt(-lam(0)) * U.col(1);
    VectorXd b = std::sqrt(lam(1)) * U.col(0);
    out.push_back((a + b).normalized());
    out.push_back((a - b).normalized());
  }
  return out;
}

std::string plane_type_name(PlaneType t) {
  switch (t) {
    case PlaneType::Hyperbolic: return "hyperbolic";
    case PlaneType::Parabolic: return "parabolic";
    case PlaneType::Elliptic: return "elliptic";
  }
  return "unknown";
}

double discriminant_n2(const MatrixXd& G) { return 4.0 * (G(0, 1) * G(0, 1) - G(0, 0) * G(1, 1)); }

PlaneType classify_n2(const MatrixXd& G, double tol) {
  double delta = discriminant_n2(G);
  double scale = 4.0 * (G(0, 1) * G(0, 1) + std::abs(G(0, 0) * G(1, 1)));
  if (std::abs(delta) <= tol * scale || scale == 0.0) return PlaneType::Parabolic;
  return delta > 0.0 ? PlaneType::Hyperbolic : PlaneType::Elliptic;
}

MatrixXd random_symmetric(int n, Rng& rng) {
  MatrixXd S(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) S(i, j) = S(j, i) = rng.uniform(-1.0, 1.0);
  }
  return S;
}

std::optional<MatrixXd> sample_fiber_point(const EquationJet& eq, const ChartPoint& m, Rng& rng, double newton_tol,
                                           int tries) {
  const int n = eq.n();
  for (int attempt = 0; attempt < tries; ++attempt) {
    MatrixXd P0 = random_symmetric(n, rng);
    MatrixXd Q = random_symmetric(n, rng);
    double t = 0.0;
    double f;
    MatrixXd G;
    eq.residual_and_metric(JetPoint(m, P0), f, G);
    bool ok = false;
    for (int it = 0; it < 60 && std::isfinite(f); ++it) {
      if (std::abs(f) <= newton_tol) {
        ok = true;
        break;
      }
      double slope = (G.array() * Q.array()).sum();
      if (slope == 0.0 || !std::isfinite(slope)) break;
      double step = -f / slope;
      double ft = 0.0;
      MatrixXd Gt;
      int halvings = 0;
      while (true) {
        eq.residual_and_metric(JetPoint(m, P0 + (t + step) * Q), ft, Gt);
        if (std::isfinite(ft) && std::abs(ft) <= std::abs(f)) break;
        if (++halvings > 30) break;
        step *= 0.5;
      }
      t += step;
      f = ft;
      G = Gt;
      if (std::abs(t) > 1e3) break;
    }
    if (ok) return P0 + t * Q;
  }
  return std::nullopt;
}

}  // namespace goursat
