#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cpml/data.hpp"
#include "cpml/distance.hpp"
#include "cpml/optimizer.hpp"
#include "cpml/vdm.hpp"

namespace cpml {

/// k-nearest-neighbour vote under d_M. Distance ties go to the lower training
/// index, vote ties to the smaller class index.
std::vector<int> knn_predict(const MetricModel& metric, const ProjectedData& train, std::span<const int> train_labels,
                             const ProjectedData& test, std::size_t k = 1);

double classification_accuracy(std::span<const int> predicted, std::span<const int> actual);

/// Number of (i, j, k) with y_i = y_j != y_k, i != j.
std::size_t count_valid_triplets(std::span<const int> labels);

/// Test triplets: every valid triplet when there are at most `count` of them,
/// otherwise `count` triplets sampled as in build_triplets.
ConstraintSet test_triplets(std::span<const int> labels, std::size_t count, std::uint64_t seed);

/// Fraction of triplets with d(i,j) < d(i,k); exact ties count as wrong.
double triplet_accuracy(const MetricModel& metric, const ProjectedData& proj, const ConstraintSet& triplets);
double triplet_accuracy(const MetricModel& metric, const ProjectedData& proj, std::span<const int> labels,
                        std::size_t num_triplets, std::uint64_t seed);

/// r(M restricted to noisy features) / r(M). Multi metrics average the per-class ratios.
/// An empty index set gives 0.
double noisy_ratio(const MetricModel& metric, std::span<const std::size_t> noisy_features, double p);

/// Default lambda grid 10^-4 .. 10^4.
std::vector<double> default_lambda_grid();

struct GridSearchResult {
  double best_lambda = 0.0;
  MetricModel best_metric;
  std::vector<double> lambdas;               // deduplicated, ascending
  std::vector<double> validation_accuracy;   // per lambda
};

/// Trains one model per lambda and keeps the best validation 1-NN accuracy
/// (ties go to the smaller lambda). Trainings that fail numerically are skipped.
GridSearchResult grid_search(const ProjectedData& train, std::span<const int> train_labels,
                             const ProjectedData& validation, std::span<const int> validation_labels,
                             std::span<const double> lambdas, const TrainConfig& config_template, std::size_t k = 1);

enum class Method { Euclidean, CpmlSingle, CpmlMulti };
std::string_view to_string(Method m);
Method parse_method(std::string_view text);

struct ExperimentConfig {
  Method method = Method::CpmlSingle;
  TrainConfig train;                         // lambda is ignored; selected on validation
  std::vector<double> lambda_grid = default_lambda_grid();
  std::size_t repeats = 50;
  std::uint64_t seed = 0;
  std::array<double, 3> ratios{0.6, 0.2, 0.2};
  bool stratified = true;
  std::size_t k = 1;
  std::size_t test_triplets = 10000;
  double smoothing = 0.0;
  unsigned threads = 1;
};

struct ExperimentReport {
  std::string dataset;
  Method method = Method::CpmlSingle;
  double p = 1.0;
  std::size_t repeats = 0;
  std::vector<double> class_acc;
  std::vector<double> triplet_acc;
  std::vector<double> selected_lambdas;
  std::vector<double> seconds;
  double class_acc_mean = 0.0, class_acc_std = 0.0;
  double triplet_acc_mean = 0.0, triplet_acc_std = 0.0;
  double seconds_per_repeat = 0.0;
};

struct RepeatResult {
  double class_acc = 0.0;
  double triplet_acc = 0.0;
  double lambda = 0.0;
  double seconds = 0.0;
};

/// One repeat: split, fit the projection on train, select lambda, evaluate on test.
RepeatResult run_repeat(const CategoricalDataset& ds, const ExperimentConfig& config, std::size_t repeat);

/// Repeats run_repeat with seeds derived from config.seed and aggregates mean
/// and sample standard deviation (0 for a single repeat).
ExperimentReport run_experiment(const CategoricalDataset& ds, const ExperimentConfig& config,
                                const std::string& name = "");

/// Noisy-feature control: synthetic data with `informative` class-dependent
/// features plus k noise features for each k in noisy_counts; CPML-s is
/// trained on all n rows for every p and the noisy_ratio of the result is kept.
struct NoisyExperimentConfig {
  std::size_t n = 1000;
  std::size_t informative = 8;
  int num_classes = 4;
  int cardinality = 0;
  double weight = 0.3;
  std::vector<std::size_t> noisy_counts{1, 4, 7, 10, 13};
  std::vector<double> ps{1.0, 2.0, 3.0};
  std::size_t repeats = 5;
  std::uint64_t seed = 0;
  double smoothing = 0.0;
  TrainConfig train;  // kind and p are overridden
  unsigned threads = 1;
};

struct NoisyCell {
  std::size_t noisy = 0;
  double p = 1.0;
  std::vector<double> ratios;  // per repeat
  double mean = 0.0, std = 0.0;
};

struct NoisyExperimentReport {
  std::vector<NoisyCell> cells;  // noisy-count major, p minor
  double seconds = 0.0;
};

NoisyExperimentReport noisy_experiment(const NoisyExperimentConfig& config);

double mean(std::span<const double> xs);
/// (n-1)-denominator standard deviation; 0 when fewer than two values.
double sample_std(std::span<const double> xs);

}  // namespace cpml
