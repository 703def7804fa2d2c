#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "cpml/vdm.hpp"

namespace cpml {

enum class MetricKind { Single, Multi };

std::string_view to_string(MetricKind kind);
/// Accepts "single"/"cps" and "multi"/"cpm".
MetricKind parse_metric_kind(std::string_view text);

/// Outer products of the difference of two projected examples.
///
/// per_class[c] = (phi_c(x_i) - phi_c(x_j)) (phi_c(x_i) - phi_c(x_j))^T and
/// summed is their sum, which equals (phi(x_i) - phi(x_j)) (phi(x_i) - phi(x_j))^T.
struct PairDiff {
  std::vector<Eigen::MatrixXd> per_class;
  Eigen::MatrixXd summed;
};

PairDiff pair_diff(const Eigen::Ref<const Eigen::MatrixXd>& phi_i, const Eigen::Ref<const Eigen::MatrixXd>& phi_j);

/// CPs distance: sum_pq A_pq M_pq.
double distance_cps(const Eigen::MatrixXd& metric, const PairDiff& pd);
/// CPm distance: sum_c sum_pq A_c,pq M_c,pq.
double distance_cpm(std::span<const Eigen::MatrixXd> metrics, const PairDiff& pd);
/// CPs with the identity metric, i.e. the squared Frobenius distance of the projections.
double euclidean_baseline(const PairDiff& pd);

/// One shared D x D metric (CPs) or one metric per class (CPm).
class MetricModel {
 public:
  MetricModel() = default;
  static MetricModel single(Eigen::MatrixXd metric);
  static MetricModel multi(std::vector<Eigen::MatrixXd> metrics);
  static MetricModel identity(MetricKind kind, std::size_t num_features, std::size_t num_classes);
  static MetricModel zero(MetricKind kind, std::size_t num_features, std::size_t num_classes);

  MetricKind kind() const { return kind_; }
  std::size_t num_features() const { return mats_.empty() ? 0 : static_cast<std::size_t>(mats_.front().rows()); }

  /// The shared metric; throws for Multi.
  const Eigen::MatrixXd& matrix() const;
  /// All stored matrices: one for Single, C for Multi.
  const std::vector<Eigen::MatrixXd>& matrices() const { return mats_; }
  std::vector<Eigen::MatrixXd>& matrices() { return mats_; }
  const Eigen::MatrixXd& for_class(std::size_t c) const { return kind_ == MetricKind::Single ? mats_.front() : mats_[c]; }

  double distance(const Eigen::Ref<const Eigen::MatrixXd>& phi_i, const Eigen::Ref<const Eigen::MatrixXd>& phi_j) const;
  double distance(const PairDiff& pd) const;

  bool is_finite() const;
  /// Symmetric within sym_tol (max-abs) and min eigenvalue >= -eig_tol for every matrix.
  bool is_psd(double sym_tol = 1e-9, double eig_tol = 1e-8) const;

 private:
  MetricKind kind_ = MetricKind::Single;
  std::vector<Eigen::MatrixXd> mats_;
};

/// Factor-based embedding: row i holds L_c^T phi_c(x_i) for every class c,
/// where M_c = L_c L_c^T, so that d_M(x_i, x_j) is the squared Euclidean
/// distance between rows i and j. Requires PSD metrics.
Eigen::MatrixXd embed(const MetricModel& metric, const ProjectedData& proj);

}  // namespace cpml
