#pragma once

#include <string>
#include <utility>
#include <vector>

#include "goursat/forms.hpp"
#include "goursat/lagrange_grassmann.hpp"

namespace goursat {

class Rng;

// Right-hand matrix of det(P - B) = 0; entries are expressions in (x, z, p).
class BField {
 public:
  BField(int n, std::vector<std::vector<Expr>> entries);
  static BField constant(const MatrixXd& B);

  int n() const { return n_; }
  const std::vector<std::vector<Expr>>& entries() const { return B_; }
  MatrixXd at(const ChartPoint& m) const;
  // det(P - B) as an expression in the order-2 jet variables.
  Expr residual_expr() const;

 private:
  int n_;
  std::vector<std::vector<Expr>> B_;
};

Expr det_expr(const std::vector<std::vector<Expr>>& m);

double goursat_residual(const BField& B, const JetPoint& m1);

struct GoursatPointReport {
  enum class Kind { OffEquation, Regular, Singular };
  Kind kind = Kind::OffEquation;
  double residual = 0.0;
  int rank = 0;
  MatrixXd adjugate;
  MatrixXd metric;  // symmetrized adjugate
  VectorXd a;       // right kernel of P - B
  VectorXd b;       // left kernel of P - B
};

std::string kind_name(GoursatPointReport::Kind kind);

GoursatPointReport goursat_point_report(const BField& B, const JetPoint& m1, double tol);

// n spanning vectors stored as rows of an n x (2n+1) array.
struct DistFrame {
  MatrixXd rows;

  int n() const { return static_cast<int>(rows.rows()); }
  MatrixXd columns() const { return rows.transpose(); }
};

// D = <d^_xi + b_ij d_pj>, Dperp = <d^_xi + b_ji d_pj>.
std::pair<DistFrame, DistFrame> frames(const BField& B, const ChartPoint& m);
std::vector<VectorFieldExpr> frame_fields(const BField& B, bool perp);

// Omega = (Y_1 -| d theta) ^ ... ^ (Y_n -| d theta).
NForm nform_from_frame(const std::vector<VectorFieldExpr>& fields);

double horizontalize(const NForm& omega, const JetPoint& m1);
// The same value as an expression in the order-2 jet variables.
Expr horizontalize_expr(const NForm& omega);

bool lychagin_test(const Expr& f, const NForm& omega, const ChartPoint& m, double tol);

enum class Side { InD, InDperp, Neither };
std::string side_name(Side s);

struct FirstIntegralResult {
  Side side = Side::Neither;
  bool both = false;
  double residual_D = 0.0;
  double residual_Dperp = 0.0;
};

FirstIntegralResult first_integral_test(const Expr& f, const DistFrame& D, const DistFrame& Dperp, const ChartPoint& m,
                                        double tol);
FirstIntegralResult first_integral_test(const Expr& f, const BField& B, const ChartPoint& m, double tol);

struct ReconstructConfig {
  int samples = 200;
  double newton_tol = 1e-13;
  double rank_tol = 1e-9;
  double ortho_tol = 1e-8;
  int max_attempts_factor = 5;
};

struct Reconstruction {
  DistFrame D;
  DistFrame Dperp;
  int accepted = 0;
  int rank1_samples = 0;
  int singular_discarded = 0;
  int newton_failures = 0;
  double fill_D = 0.0;       // sigma_n / sigma_1 of the stacked lines
  double fill_Dperp = 0.0;
  double excess_D = 0.0;     // sigma_{n+1} / sigma_1
  double excess_Dperp = 0.0;
  double ortho_residual = 0.0;
  double max_angle_D_Dperp = 0.0;
  bool coincide = false;  // D = Dperp, the parabolic case
};

Reconstruction reconstruct_distributions(const Expr& F, const ChartPoint& m, const ReconstructConfig& cfg, Rng& rng);

// Row-reduces the frame to <d^_xi + b_ij d_pj> and returns b_ij.
MatrixXd recover_B(const DistFrame& D);

}  // namespace goursat
