#include "goursat/expr.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <tuple>

#include "goursat/jet_index.hpp"

namespace goursat {

struct Node {
  Op op = Op::Const;
  double value = 0.0;
  std::string name;
  std::shared_ptr<const Node> a;
  std::shared_ptr<const Node> b;
};

namespace {

bool is_int(double v) { return std::isfinite(v) && std::floor(v) == v; }

double checked_log(double a) {
  if (!(a > 0.0)) throw Error(ErrorCode::DomainError, "log of non-positive value", {{"argument", a}});
  return std::log(a);
}

double checked_sqrt(double a) {
  if (a < 0.0) throw Error(ErrorCode::DomainError, "sqrt of negative value", {{"argument", a}});
  return std::sqrt(a);
}

double checked_div(double a, double b) {
  if (b == 0.0) throw Error(ErrorCode::DomainError, "division by zero");
  return a / b;
}

double checked_pow(double a, double b) {
  if (a < 0.0 && !is_int(b)) {
    throw Error(ErrorCode::DomainError, "negative base with non-integer exponent", {{"base", a}, {"exponent", b}});
  }
  if (a == 0.0 && b < 0.0) throw Error(ErrorCode::DomainError, "zero raised to a negative power");
  return std::pow(a, b);
}

double apply_unary(Op op, double a) {
  switch (op) {
    case Op::Neg: return -a;
    case Op::Exp: return std::exp(a);
    case Op::Log: return checked_log(a);
    case Op::Sin: return std::sin(a);
    case Op::Cos: return std::cos(a);
    case Op::Sqrt: return checked_sqrt(a);
    default: break;
  }
  throw Error(ErrorCode::InvalidArgument, "not a unary operator");
}

double apply_binary(Op op, double a, double b) {
  switch (op) {
    case Op::Add: return a + b;
    case Op::Sub: return a - b;
    case Op::Mul: return a * b;
    case Op::Div: return checked_div(a, b);
    case Op::Pow: return checked_pow(a, b);
    default: break;
  }
  throw Error(ErrorCode::InvalidArgument, "not a binary operator");
}

bool is_unary(Op op) {
  return op == Op::Neg || op == Op::Exp || op == Op::Log || op == Op::Sin || op == Op::Cos || op == Op::Sqrt;
}

}  // namespace

Expr::Expr() : Expr(constant(0.0)) {}
Expr::Expr(double value) : Expr(constant(value)) {}

Expr Expr::constant(double value) {
  auto n = std::make_shared<Node>();
  n->op = Op::Const;
  n->value = value;
  return Expr(std::shared_ptr<const Node>(std::move(n)));
}

Expr Expr::variable(std::string name) {
  auto n = std::make_shared<Node>();
  n->op = Op::Var;
  n->name = std::move(name);
  return Expr(std::shared_ptr<const Node>(std::move(n)));
}

Expr Expr::unary(Op op, Expr arg) {
  if (arg.is_constant()) {
    try {
      double v = apply_unary(op, arg.value());
      if (std::isfinite(v)) return constant(v);
    } catch (const Error&) {
      // keep the node; evaluation reports the domain error
    }
  }
  if (op == Op::Neg && arg.op() == Op::Neg) return arg.arg();
  auto n = std::make_shared<Node>();
  n->op = op;
  n->a = arg.node_;
  return Expr(std::shared_ptr<const Node>(std::move(n)));
}

Expr Expr::binary(Op op, Expr a, Expr b) {
  if (a.is_constant() && b.is_constant()) {
    try {
      double v = apply_binary(op, a.value(), b.value());
      if (std::isfinite(v)) return constant(v);
    } catch (const Error&) {
    }
  }
  switch (op) {
    case Op::Add:
      if (a.is_constant(0.0)) return b;
      if (b.is_constant(0.0)) return a;
      break;
    case Op::Sub:
      if (b.is_constant(0.0)) return a;
      if (a.is_constant(0.0)) return unary(Op::Neg, b);
      break;
    case Op::Mul:
      if (a.is_constant(0.0) || b.is_constant(0.0)) return constant(0.0);
      if (a.is_constant(1.0)) return b;
      if (b.is_constant(1.0)) return a;
      if (a.is_constant(-1.0)) return unary(Op::Neg, b);
      if (b.is_constant(-1.0)) return unary(Op::Neg, a);
      break;
    case Op::Div:
      if (a.is_constant(0.0)) return constant(0.0);
      if (b.is_constant(1.0)) return a;
      break;
    case Op::Pow:
      if (b.is_constant(0.0)) return constant(1.0);
      if (b.is_constant(1.0)) return a;
      break;
    default:
      throw Error(ErrorCode::InvalidArgument, "not a binary operator");
  }
  auto n = std::make_shared<Node>();
  n->op = op;
  n->a = a.node_;
  n->b = b.node_;
  return Expr(std::shared_ptr<const Node>(std::move(n)));
}

Op Expr::op() const { return node_->op; }
double Expr::value() const { return node_->value; }
const std::string& Expr::name() const { return node_->name; }
Expr Expr::arg() const { return Expr(node_->a); }
Expr Expr::rhs() const { return Expr(node_->b); }

Expr operator+(const Expr& a, const Expr& b) { return Expr::binary(Op::Add, a, b); }
Expr operator-(const Expr& a, const Expr& b) { return Expr::binary(Op::Sub, a, b); }
Expr operator*(const Expr& a, const Expr& b) { return Expr::binary(Op::Mul, a, b); }
Expr operator/(const Expr& a, const Expr& b) { return Expr::binary(Op::Div, a, b); }
Expr operator-(const Expr& a) { return Expr::unary(Op::Neg, a); }
Expr pow(const Expr& a, const Expr& b) { return Expr::binary(Op::Pow, a, b); }
Expr exp(const Expr& a) { return Expr::unary(Op::Exp, a); }
Expr log(const Expr& a) { return Expr::unary(Op::Log, a); }
Expr sin(const Expr& a) { return Expr::unary(Op::Sin, a); }
Expr cos(const Expr& a) { return Expr::unary(Op::Cos, a); }
Expr sqrt(const Expr& a) { return Expr::unary(Op::Sqrt, a); }

// ---------------------------------------------------------------- parsing

namespace {

class Parser {
 public:
  Parser(std::string_view text, const VarTable* vt) : s_(text), vt_(vt) {}

  Expr parse_all() {
    Expr e = parse_sum();
    skip_ws();
    if (pos_ != s_.size()) throw SyntaxError(pos_, std::string("unexpected '") + s_[pos_] + "'");
    return e;
  }

 private:
  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\n' || s_[pos_] == '\r')) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expr parse_sum() {
    Expr e = parse_product();
    while (true) {
      if (accept('+')) {
        e = e + parse_product();
      } else if (accept('-')) {
        e = e - parse_product();
      } else {
        return e;
      }
    }
  }

  Expr parse_product() {
    Expr e = parse_unary();
    while (true) {
      if (accept('*')) {
        e = e * parse_unary();
      } else if (accept('/')) {
        e = e / parse_unary();
      } else {
        return e;
      }
    }
  }

  Expr parse_unary() {
    if (accept('-')) return -parse_unary();
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  Expr parse_power() {
    Expr base = parse_primary();
    if (accept('^')) return pow(base, parse_unary());
    return base;
  }

  Expr parse_primary() {
    skip_ws();
    if (pos_ >= s_.size()) throw SyntaxError(pos_, "unexpected end of input");
    char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = parse_sum();
      if (!accept(')')) throw SyntaxError(pos_, "expected ')'");
      return e;
    }
    if ((c >= '0' && c <= '9') || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
    throw SyntaxError(pos_, std::string("unexpected '") + c + "'");
  }

  Expr parse_number() {
    std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.')) ++pos_;
    if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
      std::size_t save = pos_;
      ++pos_;
      if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
      if (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      } else {
        pos_ = save;
      }
    }
    double v = 0.0;
    auto res = std::from_chars(s_.data() + start, s_.data() + pos_, v);
    if (res.ec != std::errc() || res.ptr != s_.data() + pos_) throw SyntaxError(start, "malformed number");
    return Expr::constant(v);
  }

  Expr parse_identifier() {
    std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
    std::string name(s_.substr(start, pos_ - start));
    static const std::map<std::string, Op> functions = {
        {"exp", Op::Exp}, {"log", Op::Log}, {"sin", Op::Sin}, {"cos", Op::Cos}, {"sqrt", Op::Sqrt}};
    if (auto it = functions.find(name); it != functions.end()) {
      if (!accept('(')) throw SyntaxError(pos_, "expected '(' after " + name);
      Expr arg = parse_sum();
      if (!accept(')')) throw SyntaxError(pos_, "expected ')'");
      return Expr::unary(it->second, arg);
    }
    if (name.size() >= 2 && name[0] == 'p') {
      bool digits = true;
      for (std::size_t k = 1; k < name.size(); ++k) digits = digits && name[k] >= '1' && name[k] <= '9';
      if (digits) name = "p" + canonical_index(name.substr(1));
    }
    if (vt_ != nullptr && !vt_->admits(name)) {
      throw Error(ErrorCode::UnknownVariable, "unknown variable '" + name + "'");
    }
    return Expr::variable(name);
  }

  std::string_view s_;
  const VarTable* vt_;
  std::size_t pos_ = 0;
};

}  // namespace

Expr parse(std::string_view text, const VarTable* vt) { return Parser(text, vt).parse_all(); }
Expr parse(std::string_view text, const VarTable& vt) { return Parser(text, &vt).parse_all(); }

// ---------------------------------------------------------------- printing

namespace {

int precedence(const Expr& e) {
  switch (e.op()) {
    case Op::Const: return e.value() < 0.0 || std::signbit(e.value()) ? 3 : 5;
    case Op::Var: return 5;
    case Op::Add:
    case Op::Sub: return 1;
    case Op::Mul:
    case Op::Div: return 2;
    case Op::Neg: return 3;
    case Op::Pow: return 4;
    default: return 5;
  }
}

std::string number_text(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void print(const Expr& e, std::string& out) {
  auto child = [&out](const Expr& c, bool parens) {
    if (parens) out += '(';
    print(c, out);
    if (parens) out += ')';
  };
  int p = precedence(e);
  switch (e.op()) {
    case Op::Const: out += number_text(e.value()); return;
    case Op::Var: out += e.name(); return;
    case Op::Neg:
      out += '-';
      child(e.arg(), precedence(e.arg()) <= 3);
      return;
    case Op::Exp: out += "exp("; print(e.arg(), out); out += ')'; return;
    case Op::Log: out += "log("; print(e.arg(), out); out += ')'; return;
    case Op::Sin: out += "sin("; print(e.arg(), out); out += ')'; return;
    case Op::Cos: out += "cos("; print(e.arg(), out); out += ')'; return;
    case Op::Sqrt: out += "sqrt("; print(e.arg(), out); out += ')'; return;
    case Op::Pow:
      child(e.arg(), precedence(e.arg()) <= 4);
      out += '^';
      child(e.rhs(), precedence(e.rhs()) < 3);
      return;
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div: {
      child(e.arg(), precedence(e.arg()) < p);
      const char* sym = e.op() == Op::Add ? " + " : e.op() == Op::Sub ? " - " : e.op() == Op::Mul ? "*" : "/";
      out += sym;
      bool strict = e.op() == Op::Sub || e.op() == Op::Div;
      int q = precedence(e.rhs());
      child(e.rhs(), q < p || (strict && q == p));
      return;
    }
  }
}

}  // namespace

std::string to_string(const Expr& e) {
  std::string out;
  print(e, out);
  return out;
}

// ---------------------------------------------------------------- evaluation

namespace {

double eval_rec(const Expr& e, const Env& env, std::unordered_map<const Node*, double>& memo) {
  switch (e.op()) {
    case Op::Const: return e.value();
    case Op::Var: {
      auto it = env.find(e.name());
      if (it == env.end()) throw Error(ErrorCode::UnboundVariable, "unbound variable '" + e.name() + "'");
      return it->second;
    }
    default: break;
  }
  if (auto it = memo.find(e.id()); it != memo.end()) return it->second;
  double v = is_unary(e.op()) ? apply_unary(e.op(), eval_rec(e.arg(), env, memo))
                              : apply_binary(e.op(), eval_rec(e.arg(), env, memo), eval_rec(e.rhs(), env, memo));
  memo.emplace(e.id(), v);
  return v;
}

}  // namespace

double eval(const Expr& e, const Env& env) {
  std::unordered_map<const Node*, double> memo;
  return eval_rec(e, env, memo);
}

// ---------------------------------------------------------------- differentiation

namespace {

Expr diff_rec(const Expr& e, std::string_view v, std::unordered_map<const Node*, Expr>& memo) {
  switch (e.op()) {
    case Op::Const: return Expr::constant(0.0);
    case Op::Var: return Expr::constant(e.name() == v ? 1.0 : 0.0);
    default: break;
  }
  if (auto it = memo.find(e.id()); it != memo.end()) return it->second;
  const Expr& a = e.arg();
  const Expr& b = e.rhs();
  Expr da = diff_rec(a, v, memo);
  Expr r;
  switch (e.op()) {
    case Op::Neg: r = -da; break;
    case Op::Exp: r = e * da; break;
    case Op::Log: r = da / a; break;
    case Op::Sin: r = cos(a) * da; break;
    case Op::Cos: r = -(sin(a) * da); break;
    case Op::Sqrt: r = da / (Expr(2.0) * e); break;
    case Op::Add: r = da + diff_rec(b, v, memo); break;
    case Op::Sub: r = da - diff_rec(b, v, memo); break;
    case Op::Mul: r = da * b + a * diff_rec(b, v, memo); break;
    case Op::Div: {
      Expr db = diff_rec(b, v, memo);
      r = da / b - a * db / (b * b);
      break;
    }
    case Op::Pow: {
      if (b.is_constant()) {
        r = b * pow(a, Expr(b.value() - 1.0)) * da;
      } else {
        Expr db = diff_rec(b, v, memo);
        r = e * (db * log(a) + b * da / a);
      }
      break;
    }
    default: break;
  }
  memo.emplace(e.id(), r);
  return r;
}

void collect(const Expr& e, std::set<std::string>& out, std::unordered_map<const Node*, bool>& seen) {
  if (e.op() == Op::Const) return;
  if (e.op() == Op::Var) {
    out.insert(e.name());
    return;
  }
  if (!seen.emplace(e.id(), true).second) return;
  collect(e.arg(), out, seen);
  if (!is_unary(e.op())) collect(e.rhs(), out, seen);
}

Expr subst_rec(const Expr& e, const std::map<std::string, Expr>& rep, std::unordered_map<const Node*, Expr>& memo) {
  if (e.op() == Op::Const) return e;
  if (e.op() == Op::Var) {
    auto it = rep.find(e.name());
    return it == rep.end() ? e : it->second;
  }
  if (auto it = memo.find(e.id()); it != memo.end()) return it->second;
  Expr r = is_unary(e.op()) ? Expr::unary(e.op(), subst_rec(e.arg(), rep, memo))
                            : Expr::binary(e.op(), subst_rec(e.arg(), rep, memo), subst_rec(e.rhs(), rep, memo));
  memo.emplace(e.id(), r);
  return r;
}

}  // namespace

Expr diff(const Expr& e, std::string_view var) {
  std::unordered_map<const Node*, Expr> memo;
  return diff_rec(e, var, memo);
}

std::set<std::string> variables(const Expr& e) {
  std::set<std::string> out;
  std::unordered_map<const Node*, bool> seen;
  collect(e, out, seen);
  return out;
}

Expr substitute(const Expr& e, const std::map<std::string, Expr>& replacement) {
  std::unordered_map<const Node*, Expr> memo;
  return subst_rec(e, replacement, memo);
}

Expr total_derivative(const Expr& e, int i, const VarTable& vt) {
  if (i < 1 || i > vt.n()) throw Error(ErrorCode::InvalidArgument, "total derivative index out of range");
  Expr result = diff(e, x_name(i));
  for (const auto& v : variables(e)) {
    if (v == "z") {
      result = result + Expr::variable(p_name(i)) * diff(e, "z");
    } else if (auto idx = jet_index_of(v)) {
      if (static_cast<int>(idx->size()) + 1 > vt.order()) {
        throw Error(ErrorCode::JetOrderOverflow, "total derivative of " + v + " exceeds jet order cap " +
                                                     std::to_string(vt.order()));
      }
      result = result + Expr::variable(p_name(index_append(*idx, i))) * diff(e, v);
    }
  }
  return result;
}

// ---------------------------------------------------------------- compiled programs

Program::Program(std::span<const Expr> outputs, const std::vector<std::string>& inputs) : n_inputs_(inputs.size()) {
  std::unordered_map<std::string, int> input_reg;
  for (std::size_t k = 0; k < inputs.size(); ++k) input_reg.emplace(inputs[k], static_cast<int>(k));
  init_.assign(inputs.size(), 0.0);
  std::map<double, int> const_reg;
  std::map<std::tuple<int, int, int>, int> cse;
  std::unordered_map<const Node*, int> node_reg;

  std::function<int(const Expr&)> emit = [&](const Expr& e) -> int {
    if (e.op() == Op::Const) {
      auto it = const_reg.find(e.value());
      if (it != const_reg.end()) return it->second;
      int r = static_cast<int>(init_.size());
      init_.push_back(e.value());
      const_reg.emplace(e.value(), r);
      return r;
    }
    if (e.op() == Op::Var) {
      auto it = input_reg.find(e.name());
      if (it == input_reg.end()) throw Error(ErrorCode::UnboundVariable, "unbound variable '" + e.name() + "'");
      return it->second;
    }
    if (auto it = node_reg.find(e.id()); it != node_reg.end()) return it->second;
    int a = emit(e.arg());
    int b = is_unary(e.op()) ? -1 : emit(e.rhs());
    auto key = std::make_tuple(static_cast<int>(e.op()), a, b);
    int r;
    if (auto it = cse.find(key); it != cse.end()) {
      r = it->second;
    } else {
      r = static_cast<int>(init_.size());
      init_.push_back(0.0);
      code_.push_back({e.op(), r, a, b});
      cse.emplace(key, r);
    }
    node_reg.emplace(e.id(), r);
    return r;
  };
  for (const auto& e : outputs) outputs_.push_back(emit(e));
}

void Program::run(const double* in, double* out) const {
  thread_local std::vector<double> regs;
  regs.assign(init_.begin(), init_.end());
  for (std::size_t k = 0; k < n_inputs_; ++k) regs[k] = in[k];
  double* r = regs.data();
  for (const Instr& ins : code_) {
    double a = r[ins.a];
    switch (ins.op) {
      case Op::Neg: r[ins.dst] = -a; break;
      case Op::Exp: r[ins.dst] = std::exp(a); break;
      case Op::Log: r[ins.dst] = checked_log(a); break;
      case Op::Sin: r[ins.dst] = std::sin(a); break;
      case Op::Cos: r[ins.dst] = std::cos(a); break;
      case Op::Sqrt: r[ins.dst] = checked_sqrt(a); break;
      case Op::Add: r[ins.dst] = a + r[ins.b]; break;
      case Op::Sub: r[ins.dst] = a - r[ins.b]; break;
      case Op::Mul: r[ins.dst] = a * r[ins.b]; break;
      case Op::Div: r[ins.dst] = checked_div(a, r[ins.b]); break;
      case Op::Pow: {
        double b = r[ins.b];
        r[ins.dst] = b == 2.0 ? a * a : checked_pow(a, b);
        break;
      }
      default: break;
    }
  }
  for (std::size_t k = 0; k < outputs_.size(); ++k) out[k] = r[outputs_[k]];
}

std::vector<double> Program::run(std::span<const double> in) const {
  if (in.size() != n_inputs_) throw Error(ErrorCode::InvalidArgument, "program input size mismatch");
  std::vector<double> out(outputs_.size());
  run(in.data(), out.data());
  return out;
}

}  // namespace goursat
