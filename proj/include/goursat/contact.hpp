#pragma once

#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "goursat/expr.hpp"
#include "goursat/linalg.hpp"

namespace goursat {

// Coordinates are ordered (x1..xn, z, p1..pn) whenever a point or vector is flattened.
struct ChartPoint {
  VectorXd x;
  double z = 0.0;
  VectorXd p;

  ChartPoint() = default;
  ChartPoint(VectorXd x_, double z_, VectorXd p_) : x(std::move(x_)), z(z_), p(std::move(p_)) {}
  static ChartPoint zero(int n) { return {VectorXd::Zero(n), 0.0, VectorXd::Zero(n)}; }
  static ChartPoint from_coords(const VectorXd& c);

  int n() const { return static_cast<int>(x.size()); }
  VectorXd coords() const;
  void bind(Env& env) const;
  Env env() const;
};

struct Tangent {
  VectorXd dx;
  double dz = 0.0;
  VectorXd dp;

  Tangent() = default;
  Tangent(VectorXd dx_, double dz_, VectorXd dp_) : dx(std::move(dx_)), dz(dz_), dp(std::move(dp_)) {}
  static Tangent zero(int n) { return {VectorXd::Zero(n), 0.0, VectorXd::Zero(n)}; }
  static Tangent from_coords(const VectorXd& c);
  // Total-derivative direction d^_xi = d_xi + p_i d_z, with i zero-based.
  static Tangent hat_x(const ChartPoint& m, int i);
  static Tangent d_p(int n, int i);
  static Tangent d_z(int n);

  int n() const { return static_cast<int>(dx.size()); }
  VectorXd coords() const;
};

double theta_eval(const ChartPoint& m, const Tangent& v);
double omega_eval(const ChartPoint& m, const Tangent& v, const Tangent& w);

// Components ordered like flattened coordinates.
class VectorFieldExpr {
 public:
  VectorFieldExpr() = default;
  VectorFieldExpr(int n, std::vector<Expr> components);

  int n() const { return n_; }
  const std::vector<Expr>& components() const { return comps_; }
  Tangent at(const ChartPoint& m) const;
  Expr apply(const Expr& g) const;  // directional derivative V(g)

 private:
  int n_ = 0;
  std::vector<Expr> comps_;
};

VectorFieldExpr hamiltonian_field(const Expr& f, int n);
Expr bracket(const Expr& f, const Expr& g, int n);

// Indices in S are zero-based.
ChartPoint legendre(const ChartPoint& m, const std::vector<int>& S);
ChartPoint legendre_inverse(const ChartPoint& m, const std::vector<int>& S);
Tangent legendre_pushforward(const ChartPoint& m, const Tangent& v, const std::vector<int>& S);
std::vector<int> all_indices(int n);

struct ParamBox {
  std::vector<std::pair<double, double>> ranges;
  int dimension() const { return static_cast<int>(ranges.size()); }
};

// Tensor grid of `points_per_axis` nodes per parameter axis, first axis fastest.
struct ParamGrid {
  ParamBox box;
  int points_per_axis = 2;

  std::size_t size() const;
  std::vector<int> multi_index(std::size_t k) const;
  std::vector<double> params(std::size_t k) const;
};

// (n-1)-parameter integral submanifold of the contact structure. X and Z are
// expressions in t1..t_{n-1}; P is either symbolic or lifted per sample by Newton on f = 0.
class CauchyDatum {
 public:
  CauchyDatum(std::vector<Expr> X, Expr Z, std::vector<Expr> P, ParamBox box);

  int n() const { return n_; }
  const ParamBox& box() const { return box_; }
  bool lifted() const { return lift_.has_value(); }
  const std::vector<Expr>& X() const { return X_; }
  const Expr& Z() const { return Z_; }
  const std::vector<Expr>& P() const { return P_; }

  ChartPoint at(const std::vector<double>& t) const;
  // Row h is d m / d t_h in flattened coordinates.
  MatrixXd tangents(const std::vector<double>& t) const;

 private:
  friend CauchyDatum lift_cauchy_datum(std::vector<Expr> X, Expr Z, const Expr& f, const std::vector<double>& t0,
                                       const VectorXd& p_seed, ParamBox box);
  CauchyDatum(std::vector<Expr> X, Expr Z, ParamBox box);
  void compile();
  void xz_at(const std::vector<double>& t, VectorXd& x, double& z, MatrixXd& jx, VectorXd& jz) const;
  VectorXd lift_p(const std::vector<double>& t) const;

  struct Lift {
    Expr f;
    VectorXd p_seed;
    Program f_and_grad;  // f, df/dp_i over chart inputs
  };

  int n_ = 0;
  std::vector<Expr> X_;
  Expr Z_;
  std::vector<Expr> P_;
  ParamBox box_;
  Program xz_;  // X, Z, then dX/dt, dZ/dt
  Program p_;   // P, then dP/dt
  std::optional<Lift> lift_;
};

CauchyDatum lift_cauchy_datum(std::vector<Expr> X, Expr Z, const Expr& f, const std::vector<double>& t0,
                              const VectorXd& p_seed, ParamBox box);

struct IntegralCheck {
  double max_residual = 0.0;
  std::vector<double> worst_params;
  bool pass = false;
};

IntegralCheck verify_integral(const CauchyDatum& N, const ParamGrid& grid, double tol);

std::vector<std::string> param_names(int n);

}  // namespace goursat
