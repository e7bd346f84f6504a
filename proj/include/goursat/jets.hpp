#pragma once

#include <map>
#include <string>
#include <vector>

#include "goursat/lagrange_grassmann.hpp"

namespace goursat {

// Truncated jet of a solution at a base point: coefficients p_I for 1 <= |I| <= order.
class JetTable {
 public:
  JetTable() = default;
  JetTable(int n, int order, VectorXd x, double z);

  int n() const { return n_; }
  int order() const { return order_; }
  const VectorXd& x() const { return x_; }
  double z() const { return z_; }
  const std::map<std::string, double>& coefficients() const { return coeffs_; }

  bool has(const std::string& index) const { return coeffs_.count(index) != 0; }
  double get(const std::string& index) const;
  void set(const std::string& index, double v);
  bool complete() const;

  Env env() const;
  JetPoint jet_point() const;  // order-2 part

 private:
  int n_ = 0;
  int order_ = 0;
  VectorXd x_;
  double z_ = 0.0;
  std::map<std::string, double> coeffs_;
};

bool is_noncharacteristic(const Expr& F, const JetPoint& m1, double tol);

// True iff the metric of F is non-zero (relative to 1 + |P|) at every sample.
bool formal_integrability_check(const Expr& F, const std::vector<JetPoint>& samples, double rel_tol = 1e-12);
std::vector<JetPoint> sample_equation_points(const Expr& F, int n, int count, Rng& rng, double box = 1.0);

// Equations D_I F = 0 for |I| = k, linear in the unknowns p_J with |J| = k + 2:
// A * p = c with c_I = -(D_I F with the unknowns set to zero).
struct LinearSystem {
  std::vector<std::string> equations;
  std::vector<std::string> unknowns;
  MatrixXd A;
  VectorXd c;

  int rank(double tol = 1e-9) const;
  int free_parameters(double tol = 1e-9) const { return static_cast<int>(unknowns.size()) - rank(tol); }
};

LinearSystem prolonged_fiber_system(const Expr& F, const JetTable& jt, int k);

struct FormalSolveConfig {
  double p_nn_guess = 0.0;
  double newton_tol = 1e-12;
  int newton_max_iter = 50;
  double characteristic_tol = 1e-10;
};

// Normalized datum: x_n = z = 0, p_h = 0 for h < n, p_n = phi(x1..x_{n-1}); base point at the origin.
JetTable formal_solve(const Expr& F, const Expr& phi, int n, int K, const FormalSolveConfig& cfg = {});

// Recomputes a coefficient with h >= 2 copies of n, applying the total derivatives in reverse order.
double recompute_coefficient(const Expr& F, const JetTable& jt, const std::string& index);

// max |D_I F| over |I| <= order - 2 on the table.
double jet_residual(const Expr& F, const JetTable& jt);

}  // namespace goursat
