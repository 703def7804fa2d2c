#pragma once

#include <Eigen/Dense>

namespace cpml {

/// Eigenvalues in [-kPsdTolerance, 0) are treated as exact zeros.
inline constexpr double kPsdTolerance = 1e-8;

/// Schatten p-norm (sum_k |lambda_k|^p)^(1/p) of a symmetric matrix, p >= 1 finite.
double schatten_value(const Eigen::MatrixXd& M, double p);

/// Subgradient of schatten_value on the PSD cone: the identity for p = 1,
/// U diag(lambda^(p-1)) U^T * ||M||_p^(1-p) for p > 1, and zero at M = 0.
Eigen::MatrixXd schatten_subgrad(const Eigen::MatrixXd& M, double p);

/// Frobenius-nearest PSD matrix to (M + M^T) / 2: negative eigenvalues are clamped to zero.
Eigen::MatrixXd psd_project(const Eigen::MatrixXd& M);

}  // namespace cpml
