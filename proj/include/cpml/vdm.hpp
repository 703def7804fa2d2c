#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "cpml/data.hpp"

namespace cpml {

/// A projected example: D x C row-stochastic matrix, row d is the class
/// distribution conditioned on the value of feature d.
using ProjectedExample = Eigen::MatrixXd;

/// Dense n x D x C projection tensor. Example i is stored column-major, so
/// the class columns phi_c(x_i) are contiguous.
class ProjectedData {
 public:
  ProjectedData() = default;
  ProjectedData(std::size_t n, std::size_t num_features, std::size_t num_classes)
      : n_(n), rows_(num_features), cols_(num_classes), data_(n * num_features * num_classes, 0.0) {}

  std::size_t size() const { return n_; }
  std::size_t num_features() const { return rows_; }
  std::size_t num_classes() const { return cols_; }

  Eigen::Map<const Eigen::MatrixXd> example(std::size_t i) const {
    return {data_.data() + i * rows_ * cols_, static_cast<Eigen::Index>(rows_),
            static_cast<Eigen::Index>(cols_)};
  }
  Eigen::Map<Eigen::MatrixXd> example(std::size_t i) {
    return {data_.data() + i * rows_ * cols_, static_cast<Eigen::Index>(rows_),
            static_cast<Eigen::Index>(cols_)};
  }

  static ProjectedData from_examples(std::span<const ProjectedExample> examples);
  std::vector<ProjectedExample> to_examples() const;

 private:
  std::size_t n_ = 0, rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

/// Class-conditional value counts N_cd(f) of a training set.
class VdmModel {
 public:
  /// Marks a feature value as absent from training (projects like a value with zero counts).
  static constexpr int kUnseen = -1;

  static VdmModel fit(const CategoricalDataset& train, double smoothing = 0.0);

  std::size_t num_features() const { return cardinalities_.size(); }
  int num_classes() const { return num_classes_; }
  double smoothing() const { return smoothing_; }
  const std::vector<int>& cardinalities() const { return cardinalities_; }

  /// N_cd(f) with 0-based class, feature and value.
  long count(int c, std::size_t d, int f) const;
  /// Number of training rows with feature d equal to f.
  long value_total(std::size_t d, int f) const;

  /// Row d is (N_cd(f) + eps) / (sum_c N_cd(f) + C eps); uniform 1/C when that
  /// denominator is zero. Values outside [0, s_d) are treated as unseen.
  ProjectedExample project(std::span<const int> x) const;
  ProjectedData project_dataset(const CategoricalDataset& ds) const;

 private:
  void project_into(std::span<const int> x, Eigen::Ref<Eigen::MatrixXd> out) const;
  std::size_t offset(std::size_t d, int f) const { return (value_offset_[d] + f) * num_classes_; }

  int num_classes_ = 0;
  double smoothing_ = 0.0;
  std::vector<int> cardinalities_;
  std::vector<std::size_t> value_offset_;
  std::vector<long> counts_;  // [(offset_d + f) * C + c]
};

/// CSV dump of a projection: one row per example, D*C columns ordered by
/// feature then class.
void write_projection_csv(std::ostream& out, const ProjectedData& proj);

}  // namespace cpml
