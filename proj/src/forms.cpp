#include "goursat/forms.hpp"

#include <bit>
#include <cmath>
#include <sstream>

#include "goursat/jet_index.hpp"

namespace goursat {

namespace {

std::vector<int> bits_of(std::uint32_t mask) {
  std::vector<int> out;
  for (int k = 0; mask != 0; ++k, mask >>= 1) {
    if (mask & 1U) out.push_back(k);
  }
  return out;
}

// Sign of merging sorted S and T: (-1)^{#(s,t) with s > t}.
double merge_sign(std::uint32_t s, std::uint32_t t) {
  int inversions = 0;
  for (int b : bits_of(t)) inversions += std::popcount(s >> (b + 1));
  return (inversions % 2 == 0) ? 1.0 : -1.0;
}

}  // namespace

Form Form::covector(const VectorXd& c) {
  Form f(static_cast<int>(c.size()), 1);
  for (Eigen::Index k = 0; k < c.size(); ++k) f.add(1U << k, c(k));
  return f;
}

void Form::add(std::uint32_t mask, double c) {
  if (c == 0.0) return;
  terms_[mask] += c;
}

double Form::coefficient(std::uint32_t mask) const {
  auto it = terms_.find(mask);
  return it == terms_.end() ? 0.0 : it->second;
}

double Form::max_abs() const {
  double m = 0.0;
  for (const auto& [mask, c] : terms_) m = std::max(m, std::abs(c));
  return m;
}

double Form::evaluate(const MatrixXd& v) const {
  double total = 0.0;
  for (const auto& [mask, c] : terms_) {
    auto rows = bits_of(mask);
    MatrixXd sub(degree_, degree_);
    for (int r = 0; r < degree_; ++r) sub.row(r) = v.row(rows[r]);
    total += c * (degree_ == 0 ? 1.0 : sub.determinant());
  }
  return total;
}

Form wedge(const Form& a, const Form& b) {
  Form r(a.dim(), a.degree() + b.degree());
  for (const auto& [sa, ca] : a.terms()) {
    for (const auto& [sb, cb] : b.terms()) {
      if (sa & sb) continue;
      r.add(sa | sb, merge_sign(sa, sb) * ca * cb);
    }
  }
  return r;
}

Form interior(const VectorXd& v, const Form& a) {
  Form r(a.dim(), a.degree() - 1);
  for (const auto& [mask, c] : a.terms()) {
    auto idx = bits_of(mask);
    for (std::size_t j = 0; j < idx.size(); ++j) {
      double vj = v(idx[j]);
      if (vj == 0.0) continue;
      double sign = (j % 2 == 0) ? 1.0 : -1.0;
      r.add(mask & ~(1U << idx[j]), sign * vj * c);
    }
  }
  return r;
}

NForm NForm::decomposable(int n, std::vector<std::vector<Expr>> factors) {
  NForm f;
  f.n_ = n;
  f.decomposable_ = true;
  for (const auto& row : factors) {
    if (static_cast<int>(row.size()) != 2 * n + 1) throw Error(ErrorCode::InvalidArgument, "covector needs 2n+1 entries");
  }
  f.factors_ = std::move(factors);
  return f;
}

NForm NForm::general(int n, std::map<std::uint32_t, Expr> terms) {
  NForm f;
  f.n_ = n;
  f.decomposable_ = false;
  f.terms_ = std::move(terms);
  return f;
}

MatrixXd NForm::factor_matrix(const ChartPoint& m) const {
  Env env = m.env();
  MatrixXd rows(factors_.size(), 2 * n_ + 1);
  for (std::size_t k = 0; k < factors_.size(); ++k) {
    for (int c = 0; c < 2 * n_ + 1; ++c) rows(k, c) = eval(factors_[k][c], env);
  }
  return rows;
}

Form NForm::at(const ChartPoint& m) const {
  const int dim = 2 * n_ + 1;
  if (decomposable_) {
    MatrixXd rows = factor_matrix(m);
    Form r(dim, 0);
    r.add(0U, 1.0);
    for (Eigen::Index k = 0; k < rows.rows(); ++k) r = wedge(r, Form::covector(rows.row(k).transpose()));
    return r;
  }
  Env env = m.env();
  Form r(dim, n_);
  for (const auto& [mask, e] : terms_) r.add(mask, eval(e, env));
  return r;
}

std::uint32_t parse_monomial(const std::string& text, int n, double& sign) {
  std::vector<int> slots;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, '^')) {
    while (!tok.empty() && tok.front() == ' ') tok.erase(tok.begin());
    while (!tok.empty() && tok.back() == ' ') tok.pop_back();
    if (tok == "dz") {
      slots.push_back(n);
    } else if (tok.size() >= 3 && tok[0] == 'd' && (tok[1] == 'x' || tok[1] == 'p')) {
      int i = std::stoi(tok.substr(2));
      if (i < 1 || i > n) throw Error(ErrorCode::SchemaError, "form index out of range in '" + text + "'");
      slots.push_back(tok[1] == 'x' ? i - 1 : n + i);
    } else {
      throw Error(ErrorCode::SchemaError, "cannot read form monomial '" + text + "'");
    }
  }
  std::uint32_t mask = 0;
  int inversions = 0;
  for (std::size_t a = 0; a < slots.size(); ++a) {
    if (mask & (1U << slots[a])) throw Error(ErrorCode::SchemaError, "repeated factor in '" + text + "'");
    mask |= 1U << slots[a];
    for (std::size_t b = a + 1; b < slots.size(); ++b) inversions += slots[a] > slots[b] ? 1 : 0;
  }
  sign = (inversions % 2 == 0) ? 1.0 : -1.0;
  return mask;
}

std::string monomial_name(std::uint32_t mask, int n) {
  std::string out;
  for (int k : bits_of(mask)) {
    if (!out.empty()) out += "^";
    if (k < n) {
      out += "dx" + std::to_string(k + 1);
    } else if (k == n) {
      out += "dz";
    } else {
      out += "dp" + std::to_string(k - n);
    }
  }
  return out;
}

}  // namespace goursat
