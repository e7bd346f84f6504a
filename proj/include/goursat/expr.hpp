#pragma once

#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "goursat/errors.hpp"

namespace goursat {

class VarTable;

enum class Op { Const, Var, Neg, Exp, Log, Sin, Cos, Sqrt, Add, Sub, Mul, Div, Pow };

struct Node;

// Immutable expression DAG. Copies share structure.
class Expr {
 public:
  Expr();
  Expr(double value);  // NOLINT(google-explicit-constructor)

  static Expr constant(double value);
  static Expr variable(std::string name);
  static Expr unary(Op op, Expr arg);
  static Expr binary(Op op, Expr lhs, Expr rhs);

  Op op() const;
  double value() const;
  const std::string& name() const;
  Expr arg() const;  // unary operand, or lhs of a binary node
  Expr rhs() const;

  bool is_constant() const { return op() == Op::Const; }
  bool is_constant(double v) const { return is_constant() && value() == v; }
  const Node* id() const { return node_.get(); }

 private:
  explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);
Expr pow(const Expr& a, const Expr& b);
Expr exp(const Expr& a);
Expr log(const Expr& a);
Expr sin(const Expr& a);
Expr cos(const Expr& a);
Expr sqrt(const Expr& a);

using Env = std::unordered_map<std::string, double>;

// Grammar: expr := term (('+'|'-') term)*; term := unary (('*'|'/') unary)*;
// unary := '-' unary | power; power := primary ('^' unary)?;
// primary := number | identifier | func '(' expr ')' | '(' expr ')'.
// Identifiers pI are canonicalized (p21 -> p12). With vt == nullptr any identifier is accepted.
Expr parse(std::string_view text, const VarTable* vt);
Expr parse(std::string_view text, const VarTable& vt);

std::string to_string(const Expr& e);

double eval(const Expr& e, const Env& env);

Expr diff(const Expr& e, std::string_view var);

std::set<std::string> variables(const Expr& e);

Expr substitute(const Expr& e, const std::map<std::string, Expr>& replacement);

// D_i e = d/dx_i e + p_i d/dz e + sum_I p_{I,i} d/dp_I e, with i in 1..n.
Expr total_derivative(const Expr& e, int i, const VarTable& vt);

// Flat register program for repeated evaluation of several expressions
// over a fixed ordered list of inputs.
class Program {
 public:
  Program() = default;
  Program(std::span<const Expr> outputs, const std::vector<std::string>& inputs);

  std::size_t input_count() const { return n_inputs_; }
  std::size_t output_count() const { return outputs_.size(); }
  std::size_t instruction_count() const { return code_.size(); }

  void run(const double* in, double* out) const;
  std::vector<double> run(std::span<const double> in) const;

 private:
  struct Instr {
    Op op;
    int dst;
    int a;
    int b;
  };
  std::size_t n_inputs_ = 0;
  std::vector<double> init_;  // registers: inputs, then constants, then temporaries
  std::vector<Instr> code_;
  std::vector<int> outputs_;
};

}  // namespace goursat
