#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <span>

#include "cpml/vdm.hpp"

namespace cpml {

/// Conjugate exponent q with 1/p + 1/q = 1; +infinity for p = 1.
double dual_exponent(double p);

/// Schatten q-norm of a symmetric matrix from the absolute eigenvalues; q = inf gives the spectral norm.
double schatten_q_norm(const Eigen::MatrixXd& X, double q);

/// Largest q-norm of A^{ij} over all observed pairs: an empirical stand-in for the domain diameter X*.
double x_star(const ProjectedData& proj, double q);

enum class RademacherMode { Auto, MonteCarlo, Exact };

struct RademacherEstimate {
  double estimate = 0.0;
  std::size_t mc_samples = 0;  // sign vectors averaged (2^m when exact)
  double mc_std_error = 0.0;   // 0 when exact
  double q = 2.0;
  std::size_t n_pairs = 0;     // floor(n/2)
  bool exact = false;
};

/// Auto switches to exhaustive sign enumeration when floor(n/2) is at most this.
inline constexpr std::size_t kExactRademacherPairs = 12;

/// (1/m) E_sigma || sum_i sigma_i A^{i, m+i} ||_q with m = floor(n/2), over
/// Rademacher sign vectors sigma.
RademacherEstimate empirical_rademacher(const ProjectedData& proj, double q, std::size_t mc_samples,
                                        std::uint64_t seed, RademacherMode mode = RademacherMode::Auto);

/// D^(1/2 - 1/p) 2 X*/sqrt(n) for p >= 2, D^(1 - 1/p) 2 X*/sqrt(n) for 1 <= p < 2.
double theorem1_bound(std::size_t D, std::size_t n, double x_star, double p);

/// Generalization gap bound with probability 1 - delta:
/// 8 D^(a(p) - 1/p) X* / sqrt(n lambda) + 4 (3 + 2 X*/sqrt(lambda)) / sqrt(n)
///   + 2 (1 + X*/sqrt(lambda)) sqrt(2 ln(1/delta) / n),  a(p) = 1/2 for p >= 2, 1 otherwise.
double theorem2_bound(std::size_t D, std::size_t n, double x_star, double p, double lambda, double delta);

}  // namespace cpml
