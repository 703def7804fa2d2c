#include "cpml/regularizer.hpp"

#include <cmath>
#include <stdexcept>

#include "cpml/error.hpp"

namespace cpml {

namespace {

void check_p(double p) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw std::invalid_argument("Schatten exponent p must be finite and >= 1");
}

void check_symmetric(const Eigen::MatrixXd& M) {
  if (M.rows() != M.cols()) throw std::invalid_argument("matrix must be square");
  if (!M.allFinite()) throw NumericalError("matrix has non-finite entries");
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) throw std::invalid_argument("matrix is not symmetric");
}

Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(const Eigen::MatrixXd& M, int options) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (M + M.transpose()), options);
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  return es;
}

double clamp_tiny(double lambda) { return (lambda < 0.0 && lambda >= -kPsdTolerance) ? 0.0 : lambda; }

}  // namespace

double schatten_value(const Eigen::MatrixXd& M, double p) {
  check_p(p);
  check_symmetric(M);
  if (M.size() == 0) return 0.0;
  const Eigen::VectorXd lambda = eig(M, Eigen::EigenvaluesOnly).eigenvalues();
  if (p == 1.0) {
    double s = 0.0;
    for (double l : lambda) s += std::abs(clamp_tiny(l));
    return s;
  }
  // Scale by the largest magnitude so large p does not overflow.
  const double top = lambda.cwiseAbs().maxCoeff();
  if (top == 0.0) return 0.0;
  double s = 0.0;
  for (double l : lambda) s += std::pow(std::abs(clamp_tiny(l)) / top, p);
  return top * std::pow(s, 1.0 / p);
}

Eigen::MatrixXd schatten_subgrad(const Eigen::MatrixXd& M, double p) {
  check_p(p);
  check_symmetric(M);
  const auto D = M.rows();
  if (p == 1.0) return Eigen::MatrixXd::Identity(D, D);
  auto es = eig(M, Eigen::ComputeEigenvectors);
  Eigen::VectorXd lambda = es.eigenvalues().cwiseMax(0.0);
  const double top = lambda.size() ? lambda.maxCoeff() : 0.0;
  if (top == 0.0) return Eigen::MatrixXd::Zero(D, D);
  // With mu = lambda / top: lambda^(p-1) * ||lambda||_p^(1-p) = mu^(p-1) * ||mu||_p^(1-p).
  Eigen::VectorXd mu = lambda / top;
  double norm_p = 0.0;
  for (double m : mu) norm_p += std::pow(m, p);
  norm_p = std::pow(norm_p, 1.0 / p);
  Eigen::VectorXd w(mu.size());
  for (Eigen::Index k = 0; k < mu.size(); ++k) w[k] = std::pow(mu[k], p - 1.0) * std::pow(norm_p, 1.0 - p);
  return es.eigenvectors() * w.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::MatrixXd psd_project(const Eigen::MatrixXd& M) {
  if (M.rows() != M.cols()) throw std::invalid_argument("psd_project: matrix must be square");
  if (!M.allFinite()) throw NumericalError("psd_project: non-finite entries");
  if (M.size() == 0) return M;
  auto es = eig(M, Eigen::ComputeEigenvectors);
  const Eigen::VectorXd lambda = es.eigenvalues().cwiseMax(0.0);
  Eigen::MatrixXd out = es.eigenvectors() * lambda.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

}  // namespace cpml
