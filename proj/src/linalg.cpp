#include "goursat/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace goursat {

int numerical_rank(const MatrixXd& a, double rel_tol) {
  if (a.size() == 0) return 0;
  Eigen::JacobiSVD<MatrixXd> svd(a);
  const VectorXd& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  int r = 0;
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    if (s(k) > rel_tol * s(0)) ++r;
  }
  return r;
}

MatrixXd kernel_basis(const MatrixXd& a, double rel_tol) {
  const Eigen::Index cols = a.cols();
  if (a.rows() == 0) return MatrixXd::Identity(cols, cols);
  Eigen::JacobiSVD<MatrixXd> svd(a, Eigen::ComputeFullV);
  const VectorXd& s = svd.singularValues();
  double top = s.size() > 0 ? s(0) : 0.0;
  Eigen::Index r = 0;
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    if (top > 0.0 && s(k) > rel_tol * top) ++r;
  }
  return svd.matrixV().rightCols(cols - r);
}

MatrixXd orthonormal_span(const MatrixXd& columns, double rel_tol) {
  if (columns.cols() == 0) return MatrixXd(columns.rows(), 0);
  Eigen::JacobiSVD<MatrixXd> svd(columns, Eigen::ComputeThinU);
  const VectorXd& s = svd.singularValues();
  Eigen::Index r = 0;
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    if (s(0) > 0.0 && s(k) > rel_tol * s(0)) ++r;
  }
  return svd.matrixU().leftCols(r);
}

VectorXd principal_angles(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd qa = orthonormal_span(a, 1e-12);
  MatrixXd qb = orthonormal_span(b, 1e-12);
  // Sines of the angles from the residual of projecting qb onto span(qa) are accurate for small angles.
  MatrixXd resid = qb - qa * (qa.transpose() * qb);
  Eigen::JacobiSVD<MatrixXd> svd(resid);
  VectorXd sines = svd.singularValues();
  VectorXd angles(sines.size());
  for (Eigen::Index k = 0; k < sines.size(); ++k) angles(k) = std::asin(std::min(1.0, sines(k)));
  std::sort(angles.data(), angles.data() + angles.size());
  return angles;
}

double membership_residual(const MatrixXd& columns, const VectorXd& v) {
  double nv = v.norm();
  if (nv == 0.0) return 0.0;
  MatrixXd q = orthonormal_span(columns, 1e-12);
  VectorXd r = v - q * (q.transpose() * v);
  return r.norm() / nv;
}

MatrixXd adjugate(const MatrixXd& m) {
  const Eigen::Index n = m.rows();
  MatrixXd adj(n, n);
  if (n == 1) {
    adj(0, 0) = 1.0;
    return adj;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      MatrixXd minor(n - 1, n - 1);
      for (Eigen::Index r = 0, rr = 0; r < n; ++r) {
        if (r == j) continue;
        for (Eigen::Index c = 0, cc = 0; c < n; ++c) {
          if (c == i) continue;
          minor(rr, cc++) = m(r, c);
        }
        ++rr;
      }
      double sign = ((i + j) % 2 == 0) ? 1.0 : -1.0;
      adj(i, j) = sign * minor.determinant();
    }
  }
  return adj;
}

}  // namespace goursat
