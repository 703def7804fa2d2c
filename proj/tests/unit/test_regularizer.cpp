#include <doctest.h>

#include <random>

#include "cpml/regularizer.hpp"
#include "test_support.hpp"

using namespace cpml;

namespace {

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("schatten value oracles") {
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(3, 3);
  CHECK(schatten_value(I, 1.0) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(schatten_value(I, 2.0) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-14));
  Eigen::MatrixXd d = Eigen::Vector2d(3, 4).asDiagonal();
  CHECK(std::abs(schatten_value(d, 2.0) - 5.0) < 1e-12);
  CHECK(std::abs(schatten_value(d, 1.0) - 7.0) < 1e-12);
  CHECK(schatten_value(Eigen::MatrixXd::Zero(4, 4), 2.5) == 0.0);
  for (double p : {1.0, 1.5, 2.0, 3.0, 7.0})
    CHECK(schatten_value(Eigen::MatrixXd::Identity(5, 5), p) == doctest::Approx(std::pow(5.0, 1.0 / p)).epsilon(1e-14));
  CHECK_THROWS_AS(schatten_value(I, 0.5), std::invalid_argument);
}

TEST_CASE("trace and Frobenius special cases") {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 50; ++t) {
    auto M = testing::random_psd(2 + t % 6, rng);
    CHECK(std::abs(schatten_value(M, 1.0) - M.trace()) <= 1e-10 * std::max(1.0, M.trace()));
    CHECK(std::abs(schatten_value(M, 2.0) - M.norm()) <= 1e-10 * std::max(1.0, M.norm()));
  }
}

TEST_CASE("absolute homogeneity, monotonicity in p, and the large-p limit") {
  std::mt19937_64 rng(22);
  for (int t = 0; t < 30; ++t) {
    auto M = testing::random_psd(5, rng);
    for (double p : {1.0, 1.5, 2.0, 3.0})
      CHECK(schatten_value(3.5 * M, p) == doctest::Approx(3.5 * schatten_value(M, p)).epsilon(1e-12));
    double prev = schatten_value(M, 1.0);
    for (double p : {1.25, 1.5, 2.0, 3.0, 8.0}) {
      const double v = schatten_value(M, p);
      CHECK(v <= prev * (1 + 1e-12));
      prev = v;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    const double top = es.eigenvalues().cwiseAbs().maxCoeff();
    const double v64 = schatten_value(M, 64.0);
    CHECK(v64 >= top * (1 - 1e-12));
    CHECK(v64 <= top * std::pow(5.0, 1.0 / 64.0) * (1 + 1e-12));
  }
}

TEST_CASE("symmetric indefinite input uses absolute eigenvalues") {
  Eigen::MatrixXd d = Eigen::Vector2d(-3, 4).asDiagonal();
  CHECK(std::abs(schatten_value(d, 2.0) - 5.0) < 1e-12);
  CHECK(std::abs(schatten_value(d, 1.0) - 7.0) < 1e-12);
}

TEST_CASE("subgradient oracles") {
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(3, 3);
  CHECK(max_abs(schatten_subgrad(I * 2.0, 1.0) - I) == 0.0);
  CHECK(max_abs(schatten_subgrad(Eigen::MatrixXd::Zero(3, 3), 1.0) - I) == 0.0);
  Eigen::MatrixXd d = Eigen::Vector2d(3, 4).asDiagonal();
  Eigen::MatrixXd expected = Eigen::Vector2d(0.6, 0.8).asDiagonal();
  CHECK(max_abs(schatten_subgrad(d, 2.0) - expected) < 1e-12);
  for (double p : {1.5, 2.0, 3.0}) CHECK(max_abs(schatten_subgrad(Eigen::MatrixXd::Zero(3, 3), p)) == 0.0);
  CHECK_THROWS_AS(schatten_subgrad(I, 0.9), std::invalid_argument);
}

TEST_CASE("subgradient matches central differences for p > 1") {
  std::mt19937_64 rng(23);
  const double h = 1e-6;
  for (double p : {1.5, 2.0, 3.0})
    for (int t = 0; t < 20; ++t) {
      auto M = testing::random_pd(4, rng);
      auto G = schatten_subgrad(M, p);
      auto E = testing::random_symmetric(4, rng);
      E /= E.norm();
      const double fd = (schatten_value(M + h * E, p) - schatten_value(M - h * E, p)) / (2 * h);
      const double an = (G.array() * E.array()).sum();
      CHECK(std::abs(fd - an) <= 1e-6 * std::max(1.0, std::abs(an)));
    }
}

TEST_CASE("subgradient inequality holds on the PSD cone") {
  std::mt19937_64 rng(24);
  for (double p : {1.0, 1.5, 2.0, 3.0})
    for (int t = 0; t < 20; ++t) {
      auto M = testing::random_psd(4, rng, 1 + t % 4);
      auto N = testing::random_psd(4, rng, 1 + (t + 1) % 4);
      auto G = schatten_subgrad(M, p);
      const double lhs = schatten_value(N, p);
      const double rhs = schatten_value(M, p) + (G.array() * (N - M).array()).sum();
      CHECK(lhs >= rhs - 1e-9);
    }
}

TEST_CASE("psd projection") {
  Eigen::MatrixXd d = Eigen::Vector3d(2, -1, 0).asDiagonal();
  Eigen::MatrixXd expected = Eigen::Vector3d(2, 0, 0).asDiagonal();
  CHECK(max_abs(psd_project(d) - expected) < 1e-14);
  Eigen::MatrixXd swap(2, 2);
  swap << 0, 1, 1, 0;
  CHECK(max_abs(psd_project(swap) - Eigen::MatrixXd::Constant(2, 2, 0.5)) < 1e-14);
  std::mt19937_64 rng(25);
  for (int t = 0; t < 50; ++t) {
    auto M = testing::random_psd(5, rng, 2);
    CHECK(max_abs(psd_project(M) - M) < 1e-10);
    auto S = testing::random_symmetric(5, rng);
    auto P = psd_project(S);
    CHECK(max_abs(P - P.transpose()) == 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10);
    CHECK(max_abs(psd_project(P) - P) < 1e-10);
    // nearest: no PSD candidate is closer
    auto Q = testing::random_psd(5, rng);
    CHECK((S - P).norm() <= (S - Q).norm() + 1e-12);
  }
  Eigen::MatrixXd asym(2, 2);
  asym << 1, 2, 0, 1;
  Eigen::MatrixXd sym(2, 2);
  sym << 1, 1, 1, 1;
  CHECK(max_abs(psd_project(asym) - sym) < 1e-12);
}
