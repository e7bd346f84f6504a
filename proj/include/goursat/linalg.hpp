#pragma once

#include <Eigen/Dense>

namespace goursat {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Number of singular values above rel_tol * sigma_max.
int numerical_rank(const MatrixXd& a, double rel_tol);

// Orthonormal basis of the kernel of a (columns), using rel_tol * sigma_max as the zero threshold.
MatrixXd kernel_basis(const MatrixXd& a, double rel_tol);

// Orthonormal basis (columns) of the column span, truncated to numerical rank.
MatrixXd orthonormal_span(const MatrixXd& columns, double rel_tol);

// Principal angles (radians, ascending) between the column spans of a and b.
VectorXd principal_angles(const MatrixXd& a, const MatrixXd& b);

// Distance of v from span(columns), relative to |v|.
double membership_residual(const MatrixXd& columns, const VectorXd& v);

MatrixXd adjugate(const MatrixXd& m);

}  // namespace goursat
