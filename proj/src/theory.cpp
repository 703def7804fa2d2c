#include "cpml/theory.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include "cpml/error.hpp"
#include "cpml/random.hpp"

namespace cpml {

double dual_exponent(double p) {
  if (!(p >= 1.0)) throw std::invalid_argument("dual_exponent: p must be >= 1");
  if (p == 1.0) return std::numeric_limits<double>::infinity();
  if (std::isinf(p)) return 1.0;
  return p / (p - 1.0);
}

double schatten_q_norm(const Eigen::MatrixXd& X, double q) {
  if (!(q >= 1.0)) throw std::invalid_argument("schatten_q_norm: q must be >= 1");
  if (X.rows() != X.cols()) throw std::invalid_argument("schatten_q_norm: matrix must be square");
  if (X.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (X + X.transpose()), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("schatten_q_norm: eigendecomposition failed");
  const Eigen::VectorXd s = es.eigenvalues().cwiseAbs();
  const double top = s.maxCoeff();
  if (std::isinf(q) || top == 0.0) return top;
  double acc = 0.0;
  for (double v : s) acc += std::pow(v / top, q);
  return top * std::pow(acc, 1.0 / q);
}

namespace {

Eigen::MatrixXd summed_outer(const ProjectedData& proj, std::size_t i, std::size_t j) {
  const Eigen::MatrixXd delta = proj.example(i) - proj.example(j);
  return delta * delta.transpose();
}

}  // namespace

double x_star(const ProjectedData& proj, double q) {
  if (proj.size() < 2) throw std::invalid_argument("x_star needs at least two examples");
  double best = 0.0;
  for (std::size_t i = 0; i < proj.size(); ++i)
    for (std::size_t j = i + 1; j < proj.size(); ++j) best = std::max(best, schatten_q_norm(summed_outer(proj, i, j), q));
  return best;
}

RademacherEstimate empirical_rademacher(const ProjectedData& proj, double q, std::size_t mc_samples,
                                        std::uint64_t seed, RademacherMode mode) {
  if (proj.size() < 2) throw std::invalid_argument("empirical_rademacher needs n >= 2");
  const std::size_t m = proj.size() / 2;
  const auto D = static_cast<Eigen::Index>(proj.num_features());
  std::vector<Eigen::MatrixXd> terms;
  terms.reserve(m);
  for (std::size_t i = 0; i < m; ++i) terms.push_back(summed_outer(proj, i, m + i));

  RademacherEstimate est;
  est.q = q;
  est.n_pairs = m;
  est.exact = mode == RademacherMode::Exact || (mode == RademacherMode::Auto && m <= kExactRademacherPairs);
  const double scale = 1.0 / static_cast<double>(m);
  Eigen::MatrixXd sum(D, D);

  if (est.exact) {
    if (m > 30) throw std::invalid_argument("exact Rademacher enumeration limited to 30 pairs");
    // sigma and -sigma give the same norm, so fix sigma_0 = +1 and enumerate the rest.
    const std::uint64_t patterns = std::uint64_t{1} << (m - 1);
    double acc = 0.0;
    for (std::uint64_t mask = 0; mask < patterns; ++mask) {
      sum = terms[0];
      for (std::size_t i = 1; i < m; ++i) {
        if (mask >> (i - 1) & 1U)
          sum -= terms[i];
        else
          sum += terms[i];
      }
      acc += schatten_q_norm(sum, q);
    }
    est.estimate = scale * acc / static_cast<double>(patterns);
    est.mc_samples = static_cast<std::size_t>(patterns) * 2;
    est.mc_std_error = 0.0;
    return est;
  }

  if (mc_samples == 0) throw std::invalid_argument("empirical_rademacher: mc_samples must be positive");
  Rng rng(seed);
  std::bernoulli_distribution coin(0.5);
  std::vector<double> values(mc_samples);
  double acc = 0.0;
  for (std::size_t s = 0; s < mc_samples; ++s) {
    sum.setZero();
    for (std::size_t i = 0; i < m; ++i) {
      if (coin(rng))
        sum += terms[i];
      else
        sum -= terms[i];
    }
    const double v = scale * schatten_q_norm(sum, q);
    values[s] = v;
    acc += v;
  }
  const double N = static_cast<double>(mc_samples);
  est.estimate = acc / N;
  est.mc_samples = mc_samples;
  if (mc_samples > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - est.estimate) * (v - est.estimate);
    const double var = ss / (N - 1.0);
    est.mc_std_error = std::sqrt(var / N);
  }
  return est;
}

double theorem1_bound(std::size_t D, std::size_t n, double x_star, double p) {
  if (!(p >= 1.0)) throw std::invalid_argument("theorem1_bound: p must be >= 1");
  if (D == 0 || n == 0) throw std::invalid_argument("theorem1_bound: D and n must be positive");
  if (!(x_star >= 0.0)) throw std::invalid_argument("theorem1_bound: X* must be non-negative");
  const double exponent = p >= 2.0 ? 0.5 - 1.0 / p : 1.0 - 1.0 / p;
  return std::pow(static_cast<double>(D), exponent) * 2.0 * x_star / std::sqrt(static_cast<double>(n));
}

double theorem2_bound(std::size_t D, std::size_t n, double x_star, double p, double lambda, double delta) {
  if (!(p >= 1.0)) throw std::invalid_argument("theorem2_bound: p must be >= 1");
  if (!(lambda > 0.0)) throw std::invalid_argument("theorem2_bound: lambda must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("theorem2_bound: delta must lie in (0,1)");
  if (D == 0 || n == 0) throw std::invalid_argument("theorem2_bound: D and n must be positive");
  const double alpha = p >= 2.0 ? 0.5 : 1.0;
  const double nd = static_cast<double>(n);
  const double root_lambda = std::sqrt(lambda);
  const double complexity = 8.0 * std::pow(static_cast<double>(D), alpha - 1.0 / p) * x_star / std::sqrt(nd * lambda);
  const double deviation = 4.0 * (3.0 + 2.0 * x_star / root_lambda) / std::sqrt(nd);
  const double confidence = 2.0 * (1.0 + x_star / root_lambda) * std::sqrt(2.0 * std::log(1.0 / delta) / nd);
  return complexity + deviation + confidence;
}

}  // namespace cpml
