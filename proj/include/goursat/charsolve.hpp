#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "goursat/contact.hpp"
#include "goursat/mae.hpp"

namespace goursat {

struct FlowConfig {
  double dt = 1e-3;
  double t_begin = 0.0;
  double t_end = 1.0;
  double record_interval = 0.0;  // 0 records every step

  int steps() const;
  int record_every() const;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<ChartPoint> states;
};

// A vector field compiled for repeated evaluation on flattened coordinates,
// with its sparse Jacobian for variational equations.
class CompiledField {
 public:
  explicit CompiledField(const VectorFieldExpr& V, bool with_jacobian = false);

  int dimension() const { return dim_; }
  void value(const double* y, double* out) const;
  // out_k = sum_j dV_k/dy_j * v_j for each of `count` vectors stored contiguously.
  void jacobian_apply(const double* y, const double* v, int count, double* out) const;

 private:
  struct Entry {
    int row;
    int col;
  };
  int dim_;
  Program value_;
  Program jac_;
  std::vector<Entry> entries_;
};

Trajectory flow(const VectorFieldExpr& V, const ChartPoint& m0, const FlowConfig& cfg);

// Nodes indexed by recorded flow time and datum-grid parameter node.
class SolutionSurface {
 public:
  SolutionSurface() = default;
  SolutionSurface(int n, std::vector<double> times, ParamGrid grid);

  int n() const { return n_; }
  const std::vector<double>& times() const { return times_; }
  const ParamGrid& grid() const { return grid_; }
  std::size_t time_count() const { return times_.size(); }
  std::size_t node_count() const { return grid_.size(); }

  double* raw(std::size_t ti, std::size_t si) { return data_.data() + (ti * node_count() + si) * stride(); }
  const double* raw(std::size_t ti, std::size_t si) const {
    return data_.data() + (ti * node_count() + si) * stride();
  }
  ChartPoint point(std::size_t ti, std::size_t si) const;
  void set(std::size_t ti, std::size_t si, const ChartPoint& m);

  std::string provenance_f;
  std::string provenance_datum;
  double theta_residual = 0.0;
  double f_residual = 0.0;

  // Columns: t, s1..s_{n-1}, x1..xn, z, p1..pn.
  void write_csv(std::ostream& os) const;

 private:
  std::size_t stride() const { return static_cast<std::size_t>(2 * n_ + 1); }
  int n_ = 0;
  std::vector<double> times_;
  ParamGrid grid_;
  std::vector<double> data_;
};

SolutionSurface solve_first_order(const Expr& f, const CauchyDatum& N, const FlowConfig& cfg, const ParamGrid& grid,
                                  const std::string& datum_id = "datum");

struct RelationConfig {
  int degree = 2;
  bool exp_features = false;
  double tol = 1e-8;
};

struct RelationResult {
  std::vector<std::string> basis;  // monomial names in g1.., e1.. (= exp(g1)) ..
  std::vector<Expr> basis_exprs;   // the same monomials in terms of the f_i
  VectorXd psi;
  double residual = 0.0;
  double next_singular_ratio = 0.0;  // second-smallest / largest singular value
  std::vector<VectorXd> alternatives;  // further near-null directions, normalized like psi

  Expr relation(double drop_below = 1e-12) const;
  Expr relation_for(const VectorXd& coeffs, double drop_below = 1e-12) const;
};

RelationResult find_relation(const std::vector<Expr>& f_list, const CauchyDatum& N, const RelationConfig& cfg,
                             const ParamGrid& grid);

struct SurfaceResidual {
  double max_residual = 0.0;
  double max_condition = 0.0;
  std::size_t nodes = 0;
};

SurfaceResidual mae_residual_on_surface(const SolutionSurface& S, const Expr& F, int stride = 1);

struct MongeEquation {
  std::optional<BField> B;
  std::optional<Expr> F;

  Expr residual_expr() const;
};

struct MongeConfig {
  FlowConfig flow;
  RelationConfig relation;
  ParamGrid grid;
  int side_check_points = 5;
  double side_tol = 1e-8;
  ReconstructConfig reconstruct;
  std::uint64_t seed = 1;
  int mae_stride = 0;  // 0 skips the surface residual
  std::vector<Expr> conserved;
};

struct SideCheck {
  std::vector<double> params;
  std::vector<Side> sides;
};

struct MongeResult {
  SolutionSurface surface;
  RelationResult relation;
  Expr f_star;
  double f_star_on_datum = 0.0;
  std::vector<SideCheck> side_checks;
  SurfaceResidual mae;
  std::vector<double> first_integral_drift;
  std::vector<bool> first_integral_expected;  // bracket with f* vanishes on the datum
  std::vector<double> conserved_drift;
  int relation_choice = 0;  // 0 = psi, k = alternatives[k-1]
};

MongeResult monge_solve(const MongeEquation& eq, const std::vector<Expr>& f_list, const CauchyDatum& N,
                        const MongeConfig& cfg);

// Max |q(node) - q(initial node)| along the flow for each q.
std::vector<double> drift_along_surface(const SolutionSurface& S, const std::vector<Expr>& qs);

}  // namespace goursat
