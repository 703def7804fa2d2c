#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpml/distance.hpp"
#include "cpml/error.hpp"
#include "cpml/vdm.hpp"

namespace cpml {

enum class ConstraintKind { Triplet, Pair, Quad };

struct Triplet {
  std::size_t i, j, k;  // y_i == y_j != y_k
};
struct SignedPair {
  std::size_t i, j;
  int r;  // +1 same class, -1 different class
};
struct Quad {
  std::size_t i, j, k, l;  // y_i == y_j, y_k != y_l
};

struct ConstraintSet {
  ConstraintKind kind = ConstraintKind::Triplet;
  std::vector<Triplet> triplets;
  std::vector<SignedPair> pairs;
  std::vector<Quad> quads;
  double margin = 1.0;

  std::size_t size() const;
  /// Throws std::invalid_argument on out-of-range indices, label rule violations or b <= 0.
  void validate(std::span<const int> labels) const;
};

/// T triplets: anchor uniform over points with a same-class partner, j uniform
/// over the anchor's class minus the anchor, k uniform over the other classes.
ConstraintSet build_triplets(std::span<const int> labels, std::size_t count, std::uint64_t seed, double margin = 1.0);

/// ceil(count/2) same-class pairs (r = +1) and floor(count/2) cross-class pairs (r = -1).
ConstraintSet build_pairs(std::span<const int> labels, std::size_t count, std::uint64_t seed, double margin = 1.0);

/// Mean hinge losses; each requires the matching constraint kind.
double triplet_loss(const MetricModel& metric, const ProjectedData& proj, const ConstraintSet& cs);
double pair_loss(const MetricModel& metric, const ProjectedData& proj, const ConstraintSet& cs);
double quad_loss(const MetricModel& metric, const ProjectedData& proj, const ConstraintSet& cs);
/// Dispatches on cs.kind.
double constraint_loss(const MetricModel& metric, const ProjectedData& proj, const ConstraintSet& cs);

/// Sum of Schatten p-norms of all matrices of the metric.
double regularizer_value(const MetricModel& metric, double p);

/// loss + lambda * regularizer.
double objective(const MetricModel& metric, const ProjectedData& proj, const ConstraintSet& cs, double lambda, double p);

/// Mean of the violated hinge subgradients plus lambda times the Schatten
/// subgradient. For a Multi metric, entry c is the gradient w.r.t. M_c.
std::vector<Eigen::MatrixXd> subgradient(const MetricModel& metric, const ProjectedData& proj,
                                         const ConstraintSet& cs, double lambda, double p);

/// Precomputed hinge problem over a fixed constraint set.
///
/// The outer products A^{ij} (summed for Single, per class for Multi) are
/// cached in packed upper-triangular form for the distinct pairs referenced by
/// the constraints, so one loss evaluation costs O(pairs * D^2) for Single and
/// O(pairs * C * D^2) for Multi.
class HingeProblem {
 public:
  HingeProblem(const ProjectedData& proj, const ConstraintSet& cs, MetricKind kind);

  struct Evaluation {
    double loss = 0.0;
    std::size_t violated = 0;
    std::vector<Eigen::MatrixXd> gradient;  // empty unless requested
  };

  Evaluation evaluate(const MetricModel& metric, bool with_gradient) const;
  double loss(const MetricModel& metric) const { return evaluate(metric, false).loss; }

  MetricKind kind() const { return kind_; }
  std::size_t num_constraints() const { return terms_.size(); }
  std::size_t num_pairs() const { return pair_count_; }
  std::size_t num_features() const { return dim_; }
  std::size_t num_blocks() const { return blocks_; }

 private:
  // Hinge term [offset + coef * d(first) - d(second)]_+ ; second < 0 means absent.
  struct Term {
    double offset;
    double coef;
    std::int64_t first;
    std::int64_t second;
  };

  void pair_distances(const MetricModel& metric, std::vector<double>& out) const;

  MetricKind kind_;
  std::size_t dim_ = 0;
  std::size_t packed_ = 0;  // D (D + 1) / 2
  std::size_t blocks_ = 0;  // 1 for Single, C for Multi
  std::size_t pair_count_ = 0;
  std::vector<double> cache_;  // [pair][block][packed]
  std::vector<Term> terms_;
};

/// Backtracking line search result.
struct LineSearchResult {
  double step = 0.0;
  bool sufficient_decrease = false;
  int probes = 0;
  double value = 0.0;  // objective at the returned step
};

/// Armijo backtracking: the first step alpha in 1, decay, decay^2, ... with
/// f(alpha) <= f0 - alpha / 2 * grad_sq_norm. After max_probes failures returns
/// decay^max_probes with sufficient_decrease = false. With strict_first_decay
/// the step is decayed before the first test (alpha starts at decay).
template <typename Evaluator>
LineSearchResult line_search(Evaluator&& value_at, double f0, double grad_sq_norm, double decay, int max_probes,
                             bool strict_first_decay = false) {
  if (!(grad_sq_norm > 0.0)) throw std::invalid_argument("line_search: zero search direction");
  if (!(decay > 0.0 && decay < 1.0)) throw std::invalid_argument("line_search: decay must lie in (0,1)");
  if (max_probes < 1) throw std::invalid_argument("line_search: max_probes must be positive");
  LineSearchResult res;
  double alpha = strict_first_decay ? decay : 1.0;
  for (int k = strict_first_decay ? 1 : 0; k < max_probes + (strict_first_decay ? 1 : 0); ++k) {
    const double f = value_at(alpha);
    ++res.probes;
    if (!std::isfinite(f)) throw NumericalError("line_search: non-finite objective while probing");
    if (f <= f0 - 0.5 * alpha * grad_sq_norm) {
      res.step = alpha;
      res.sufficient_decrease = true;
      res.value = f;
      return res;
    }
    alpha *= decay;
  }
  if (strict_first_decay) alpha /= decay;  // the last tested step is decay^max_probes
  res.step = alpha;
  res.value = value_at(alpha);
  return res;
}

struct TrainConfig {
  double lambda = 0.01;
  double p = 1.0;
  double margin = 1.0;
  double step_decay = 0.1;
  std::size_t max_iters = 200;
  int max_linesearch = 30;
  double tol = 1e-5;
  std::size_t constraints = 0;  // 0 selects min(30 n, 100000)
  std::uint64_t seed = 0;
  MetricKind kind = MetricKind::Single;
  bool strict_alg2 = false;
  /// Update every class matrix of a Multi metric with the summed gradient,
  /// which keeps them tied (reproduces a Single run).
  bool tie_multi = false;

  void validate() const;
  std::size_t resolved_constraints(std::size_t n) const;
};

struct TrainReport {
  MetricModel final_metric;
  std::vector<double> objective_trace;
  std::vector<std::size_t> violated_counts;
  std::vector<double> step_sizes;  // 0 for skipped steps
  std::size_t iterations_run = 0;
  std::size_t constraint_count = 0;
  bool converged = false;
  double wall_time = 0.0;         // seconds, whole run
  double iteration_time = 0.0;    // seconds, iterations only (excludes cache setup)
};

/// Projected subgradient descent from the identity metric over the given constraints.
TrainReport train(const ProjectedData& proj, const ConstraintSet& cs, const TrainConfig& config,
                  const MetricModel* initial = nullptr);
/// Builds config.resolved_constraints(n) triplets from the labels, then trains.
TrainReport train(const ProjectedData& proj, std::span<const int> labels, const TrainConfig& config,
                  const MetricModel* initial = nullptr);

}  // namespace cpml
