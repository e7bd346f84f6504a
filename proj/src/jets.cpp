#include "goursat/jets.hpp"

#include <cmath>
#include <unordered_map>

#include "goursat/jet_index.hpp"
#include "goursat/rng.hpp"

namespace goursat {

JetTable::JetTable(int n, int order, VectorXd x, double z) : n_(n), order_(order), x_(std::move(x)), z_(z) {}

double JetTable::get(const std::string& index) const {
  auto it = coeffs_.find(canonical_index(index));
  if (it == coeffs_.end()) throw Error(ErrorCode::InvalidArgument, "jet table has no coefficient p" + index);
  return it->second;
}

void JetTable::set(const std::string& index, double v) { coeffs_[canonical_index(index)] = v; }

bool JetTable::complete() const {
  for (int k = 1; k <= order_; ++k) {
    for (const auto& I : multi_indices(n_, k)) {
      if (!has(I)) return false;
    }
  }
  return true;
}

Env JetTable::env() const {
  Env e;
  for (int i = 0; i < n_; ++i) e[x_name(i + 1)] = x_(i);
  e["z"] = z_;
  for (const auto& [I, v] : coeffs_) e[p_name(I)] = v;
  return e;
}

JetPoint JetTable::jet_point() const {
  VectorXd p(n_);
  MatrixXd P(n_, n_);
  for (int i = 1; i <= n_; ++i) {
    p(i - 1) = get(std::to_string(i));
    for (int j = 1; j <= n_; ++j) P(i - 1, j - 1) = has(index_append(std::to_string(i), j)) ? get(index_append(std::to_string(i), j)) : 0.0;
  }
  return JetPoint(ChartPoint(x_, z_, p), P);
}

bool is_noncharacteristic(const Expr& F, const JetPoint& m1, double tol) {
  const int n = m1.n();
  std::string nn{static_cast<char>('0' + n), static_cast<char>('0' + n)};
  return std::abs(eval(diff(F, p_name(nn)), m1.env())) > tol;
}

bool formal_integrability_check(const Expr& F, const std::vector<JetPoint>& samples, double rel_tol) {
  if (samples.empty()) return true;
  EquationJet eq(F, samples.front().n());
  for (const auto& s : samples) {
    double scale = 1.0 + s.P.norm();
    if (eq.metric(s).norm() <= rel_tol * scale) return false;
  }
  return true;
}

std::vector<JetPoint> sample_equation_points(const Expr& F, int n, int count, Rng& rng, double box) {
  EquationJet eq(F, n);
  std::vector<JetPoint> out;
  int misses = 0;
  while (static_cast<int>(out.size()) < count) {
    ChartPoint m = ChartPoint::zero(n);
    for (int i = 0; i < n; ++i) {
      m.x(i) = rng.uniform(-box, box);
      m.p(i) = rng.uniform(-box, box);
    }
    m.z = rng.uniform(-box, box);
    auto P = sample_fiber_point(eq, m, rng, 1e-12);
    if (!P) {
      if (++misses > 10 * count + 20) {
        throw Error(ErrorCode::InsufficientSamples, "could not find points of the equation", {{"found", out.size()}});
      }
      continue;
    }
    out.emplace_back(m, *P);
  }
  return out;
}

// ---------------------------------------------------------------- prolongation

namespace {

// Caches D_I F for canonical I, building each from its prefix.
class TotalDerivatives {
 public:
  TotalDerivatives(Expr F, int n, int cap) : F_(std::move(F)), vt_(n, cap) {}

  const Expr& get(const std::string& I) {
    if (I.empty()) return F_;
    auto it = cache_.find(I);
    if (it != cache_.end()) return it->second;
    std::string prefix = I.substr(0, I.size() - 1);
    int last = I.back() - '0';
    Expr base = get(prefix);
    return cache_.emplace(I, total_derivative(base, last, vt_)).first->second;
  }

  // Applies the derivatives in the reverse of the canonical order, uncached.
  Expr reversed(const std::string& I) const {
    Expr e = F_;
    for (auto it = I.rbegin(); it != I.rend(); ++it) e = total_derivative(e, *it - '0', vt_);
    return e;
  }

 private:
  Expr F_;
  VarTable vt_;
  std::unordered_map<std::string, Expr> cache_;
};

}  // namespace

int LinearSystem::rank(double tol) const { return numerical_rank(A, tol); }

LinearSystem prolonged_fiber_system(const Expr& F, const JetTable& jt, int k) {
  const int n = jt.n();
  if (jt.order() < k + 1) throw Error(ErrorCode::InvalidArgument, "jet table must be complete to order k+1");
  TotalDerivatives D(F, n, k + 2);
  LinearSystem sys;
  sys.equations = multi_indices(n, k);
  sys.unknowns = multi_indices(n, k + 2);
  sys.A = MatrixXd::Zero(sys.equations.size(), sys.unknowns.size());
  sys.c = VectorXd::Zero(sys.equations.size());
  Env env = jt.env();
  for (const auto& J : sys.unknowns) env[p_name(J)] = 0.0;
  for (std::size_t r = 0; r < sys.equations.size(); ++r) {
    const Expr& e = D.get(sys.equations[r]);
    sys.c(r) = -eval(e, env);
    for (std::size_t col = 0; col < sys.unknowns.size(); ++col) {
      Expr d = diff(e, p_name(sys.unknowns[col]));
      if (!d.is_constant(0.0)) sys.A(r, col) = eval(d, env);
    }
  }
  return sys;
}

// ---------------------------------------------------------------- formal Cauchy problem

namespace {

std::string remove_two(const std::string& I, char c) {
  std::string out;
  int removed = 0;
  for (char ch : I) {
    if (ch == c && removed < 2) {
      ++removed;
      continue;
    }
    out.push_back(ch);
  }
  return out;
}

}  // namespace

JetTable formal_solve(const Expr& F, const Expr& phi, int n, int K, const FormalSolveConfig& cfg) {
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "formal_solve needs n >= 2");
  if (K < 2) throw Error(ErrorCode::InvalidArgument, "formal_solve needs order >= 2");
  const char top = static_cast<char>('0' + n);
  JetTable jt(n, K, VectorXd::Zero(n), 0.0);

  std::unordered_map<std::string, Expr> phi_derivs;
  Env origin;
  for (int i = 1; i < n; ++i) origin[x_name(i)] = 0.0;
  auto phi_at = [&](const std::string& J) {
    auto it = phi_derivs.find(J);
    if (it == phi_derivs.end()) {
      Expr e = phi;
      for (char c : J) e = diff(e, x_name(c - '0'));
      it = phi_derivs.emplace(J, e).first;
    }
    return eval(it->second, origin);
  };

  for (int i = 1; i < n; ++i) jt.set(std::to_string(i), 0.0);
  jt.set(std::string(1, top), phi_at(""));

  TotalDerivatives D(F, n, K);
  std::string nn(2, top);
  for (int order = 2; order <= K; ++order) {
    auto indices = multi_indices(n, order);
    std::stable_sort(indices.begin(), indices.end(), [top](const std::string& a, const std::string& b) {
      return index_count(a, top - '0') < index_count(b, top - '0');
    });
    for (const auto& I : indices) {
      int h = index_count(I, n);
      if (h == 0) {
        jt.set(I, 0.0);
        continue;
      }
      if (h == 1) {
        std::string J = I.substr(0, I.size() - 1);
        jt.set(I, phi_at(J));
        continue;
      }
      Env env = jt.env();
      std::string var = p_name(I);
      if (order == 2) {
        double lam = cfg.p_nn_guess;
        double fval = 0.0;
        Expr dF = diff(F, var);
        bool converged = false;
        for (int it = 0; it <= cfg.newton_max_iter; ++it) {
          env[var] = lam;
          fval = eval(F, env);
          if (std::abs(fval) <= cfg.newton_tol) {
            converged = true;
            break;
          }
          double slope = eval(dF, env);
          if (slope == 0.0 || !std::isfinite(slope)) break;
          double step = -fval / slope;
          for (int half = 0; half < 30; ++half) {
            env[var] = lam + step;
            double trial = eval(F, env);
            if (std::isfinite(trial) && std::abs(trial) <= std::abs(fval)) break;
            step *= 0.5;
          }
          lam += step;
        }
        if (!converged) {
          throw Error(ErrorCode::NewtonDivergence, "Newton for the seed coefficient p_nn did not converge",
                      {{"residual", fval}, {"guess", cfg.p_nn_guess}});
        }
        jt.set(I, lam);
        env[var] = lam;
        double fnn = eval(dF, env);
        if (std::abs(fnn) <= cfg.characteristic_tol) {
          throw Error(ErrorCode::CharacteristicDatum, "dF/dp_nn vanishes at the seed point", {{"dF_dpnn", fnn}});
        }
        continue;
      }
      const Expr& e = D.get(remove_two(I, top));
      env[var] = 0.0;
      double rest = eval(e, env);
      double coef = eval(diff(e, var), env);
      if (std::abs(coef) <= cfg.characteristic_tol) {
        throw Error(ErrorCode::CharacteristicDatum, "dF/dp_nn vanishes at the seed point", {{"dF_dpnn", coef}});
      }
      jt.set(I, -rest / coef);
    }
  }
  return jt;
}

double recompute_coefficient(const Expr& F, const JetTable& jt, const std::string& index) {
  const int n = jt.n();
  const char top = static_cast<char>('0' + n);
  std::string I = canonical_index(index);
  if (index_count(I, n) < 2 || I.size() < 3) {
    throw Error(ErrorCode::InvalidArgument, "only coefficients of order >= 3 with two or more top indices are recursive");
  }
  TotalDerivatives D(F, n, jt.order());
  Expr e = D.reversed(remove_two(I, top));
  Env env = jt.env();
  std::string var = p_name(I);
  env[var] = 0.0;
  return -eval(e, env) / eval(diff(e, var), env);
}

double jet_residual(const Expr& F, const JetTable& jt) {
  const int n = jt.n();
  TotalDerivatives D(F, n, jt.order());
  Env env = jt.env();
  double worst = std::abs(eval(F, env));
  for (int k = 1; k <= jt.order() - 2; ++k) {
    for (const auto& I : multi_indices(n, k)) worst = std::max(worst, std::abs(eval(D.get(I), env)));
  }
  return worst;
}

}  // namespace goursat
