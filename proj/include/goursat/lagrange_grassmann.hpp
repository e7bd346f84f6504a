#pragma once

#include <optional>
#include <string>
#include <vector>

#include "goursat/contact.hpp"

namespace goursat {

class Rng;

// A point of the chart together with a Lagrangian plane given by the symmetric matrix P.
struct JetPoint {
  ChartPoint base;
  MatrixXd P;

  JetPoint() = default;
  JetPoint(ChartPoint m, MatrixXd P_);

  int n() const { return base.n(); }
  void bind(Env& env) const;
  Env env() const;
};

// Columns are the tautological vectors w_i = d^_xi + p_ij d_pj in flattened coordinates.
MatrixXd tautological_frame(const JetPoint& m1);
// Ambient vector sum_i v_i w_i.
VectorXd lift_to_ambient(const JetPoint& m1, const VectorXd& v);

// Residual, gradient in P and the metric of a second-order equation F, compiled once.
class EquationJet {
 public:
  EquationJet(Expr F, int n);

  int n() const { return n_; }
  const Expr& F() const { return F_; }
  double residual(const JetPoint& m1) const;
  // Metric in the tautological frame: G_ii = F_pii, G_ij = F_pij / 2.
  MatrixXd metric(const JetPoint& m1) const;
  void residual_and_metric(const JetPoint& m1, double& f, MatrixXd& G) const;

 private:
  std::vector<double> inputs(const JetPoint& m1) const;
  int n_;
  Expr F_;
  Program prog_;
};

MatrixXd metric_of_equation(const Expr& F, const JetPoint& m1);

struct VectorRank {
  int rank = 0;
  MatrixXd radical;  // orthonormal columns
};

VectorRank vector_rank(const MatrixXd& Pdot, double tol);

bool is_characteristic_covector(const Expr& F, const JetPoint& m1, const VectorXd& eta, double tol);
bool is_characteristic_covector(const MatrixXd& G, const VectorXd& eta, double tol);

struct MetricDecomposition {
  enum class Kind { Zero, Rank1, Decomposable, NotDecomposable };
  Kind kind = Kind::Zero;
  int rank = 0;
  VectorXd v;
  VectorXd w;
  double rank1_sign = 0.0;  // sign of the surviving eigenvalue for Rank1
};

std::string kind_name(MetricDecomposition::Kind kind);

MetricDecomposition decompose_metric(const MatrixXd& G, double tol);

bool strong_char_test(const Expr& F, const JetPoint& m1, const VectorXd& eta, int samples, double tol);

// Real isotropic directions of G (all of them for n = 2): two for indefinite rank 2,
// one for rank 1, none when definite.
std::vector<VectorXd> isotropic_directions(const MatrixXd& G, double tol);

enum class PlaneType { Hyperbolic, Parabolic, Elliptic };
std::string plane_type_name(PlaneType t);
// n = 2 discriminant F_p12^2 - 4 F_p11 F_p22 from the metric.
double discriminant_n2(const MatrixXd& G);
PlaneType classify_n2(const MatrixXd& G, double tol);

// Random symmetric matrix with entries uniform in [-1, 1].
MatrixXd random_symmetric(int n, Rng& rng);

// Newton along P0 + t Q to F = 0, retrying up to `tries` random directions.
std::optional<MatrixXd> sample_fiber_point(const EquationJet& eq, const ChartPoint& m, Rng& rng, double newton_tol,
                                           int tries = 20);

}  // namespace goursat
