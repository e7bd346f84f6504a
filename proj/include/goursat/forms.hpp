#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "goursat/contact.hpp"

namespace goursat {

// Constant-coefficient exterior form on R^dim. Basis monomials e^S are keyed by
// the bitmask of S; bit k is the k-th flattened chart coordinate.
class Form {
 public:
  Form(int dim, int degree) : dim_(dim), degree_(degree) {}
  static Form covector(const VectorXd& c);

  int dim() const { return dim_; }
  int degree() const { return degree_; }
  const std::map<std::uint32_t, double>& terms() const { return terms_; }
  void add(std::uint32_t mask, double c);
  double coefficient(std::uint32_t mask) const;
  double max_abs() const;

  // Value on the columns of v (dim x degree).
  double evaluate(const MatrixXd& v) const;

 private:
  int dim_;
  int degree_;
  std::map<std::uint32_t, double> terms_;
};

Form wedge(const Form& a, const Form& b);
Form interior(const VectorXd& v, const Form& a);

// Symbolic n-form on the chart: a wedge of covectors or a sum of basis monomials.
class NForm {
 public:
  static NForm decomposable(int n, std::vector<std::vector<Expr>> factors);
  static NForm general(int n, std::map<std::uint32_t, Expr> terms);

  int n() const { return n_; }
  bool is_decomposable() const { return decomposable_; }
  const std::vector<std::vector<Expr>>& factors() const { return factors_; }
  const std::map<std::uint32_t, Expr>& terms() const { return terms_; }

  Form at(const ChartPoint& m) const;
  // Rows are the covectors evaluated at m (decomposable forms only).
  MatrixXd factor_matrix(const ChartPoint& m) const;

 private:
  int n_ = 0;
  bool decomposable_ = true;
  std::vector<std::vector<Expr>> factors_;
  std::map<std::uint32_t, Expr> terms_;
};

// Parses "dx1^dp2" style monomials; returns the mask and the sign of sorting.
std::uint32_t parse_monomial(const std::string& text, int n, double& sign);
std::string monomial_name(std::uint32_t mask, int n);

}  // namespace goursat
