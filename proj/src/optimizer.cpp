#include "cpml/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <unordered_map>

#include "cpml/random.hpp"
#include "cpml/regularizer.hpp"

namespace cpml {

std::size_t ConstraintSet::size() const {
  switch (kind) {
    case ConstraintKind::Triplet:
      return triplets.size();
    case ConstraintKind::Pair:
      return pairs.size();
    case ConstraintKind::Quad:
      return quads.size();
  }
  return 0;
}

void ConstraintSet::validate(std::span<const int> labels) const {
  if (!(margin > 0.0)) throw std::invalid_argument("margin b must be positive");
  const std::size_t n = labels.size();
  auto in_range = [n](std::initializer_list<std::size_t> idx) {
    for (auto i : idx)
      if (i >= n) throw std::invalid_argument("constraint index out of range");
  };
  for (const auto& t : triplets) {
    in_range({t.i, t.j, t.k});
    if (labels[t.i] != labels[t.j] || labels[t.i] == labels[t.k])
      throw std::invalid_argument("triplet violates y_i = y_j != y_k");
  }
  for (const auto& p : pairs) {
    in_range({p.i, p.j});
    if (p.r != 1 && p.r != -1) throw std::invalid_argument("pair sign must be +1 or -1");
    if ((labels[p.i] == labels[p.j]) != (p.r == 1)) throw std::invalid_argument("pair sign does not match labels");
  }
  for (const auto& q : quads) {
    in_range({q.i, q.j, q.k, q.l});
    if (labels[q.i] != labels[q.j] || labels[q.k] == labels[q.l])
      throw std::invalid_argument("quad violates y_i = y_j, y_k != y_l");
  }
}

namespace {

// Indices grouped by class, for uniform draws within or outside a class.
struct ClassIndex {
  std::vector<std::size_t> order;     // indices sorted by class
  std::vector<std::size_t> start;     // class c occupies order[start[c], start[c+1])
  std::vector<std::size_t> position;  // position of index i inside order

  explicit ClassIndex(std::span<const int> labels) {
    int C = 0;
    for (int y : labels) {
      if (y < 0) throw std::invalid_argument("labels must be non-negative");
      C = std::max(C, y + 1);
    }
    start.assign(static_cast<std::size_t>(C) + 1, 0);
    for (int y : labels) ++start[static_cast<std::size_t>(y) + 1];
    for (std::size_t c = 0; c < static_cast<std::size_t>(C); ++c) start[c + 1] += start[c];
    order.resize(labels.size());
    position.resize(labels.size());
    std::vector<std::size_t> fill(start.begin(), start.end() - 1);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      position[i] = fill[labels[i]];
      order[fill[labels[i]]++] = i;
    }
  }
  std::size_t class_size(int c) const { return start[c + 1] - start[c]; }
  std::size_t n() const { return order.size(); }

  std::size_t same_class_partner(std::size_t anchor, int c, Rng& rng) const {
    std::uniform_int_distribution<std::size_t> u(0, class_size(c) - 2);
    std::size_t k = u(rng);
    if (start[c] + k >= position[anchor]) ++k;
    return order[start[c] + k];
  }
  std::size_t other_class(int c, Rng& rng) const {
    std::uniform_int_distribution<std::size_t> u(0, n() - class_size(c) - 1);
    std::size_t k = u(rng);
    if (k >= start[c]) k += class_size(c);
    return order[k];
  }
};

}  // namespace

ConstraintSet build_triplets(std::span<const int> labels, std::size_t count, std::uint64_t seed, double margin) {
  if (count == 0) throw std::invalid_argument("triplet count must be positive");
  if (!(margin > 0.0)) throw std::invalid_argument("margin b must be positive");
  ClassIndex idx(labels);
  std::vector<std::size_t> anchors;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int c = labels[i];
    if (idx.class_size(c) >= 2 && idx.class_size(c) < idx.n()) anchors.push_back(i);
  }
  if (anchors.empty())
    throw DataError("cannot build triplets: need a class with two members and at least one other class");

  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, anchors.size() - 1);
  ConstraintSet cs;
  cs.kind = ConstraintKind::Triplet;
  cs.margin = margin;
  cs.triplets.reserve(count);
  for (std::size_t t = 0; t < count; ++t) {
    const std::size_t i = anchors[pick(rng)];
    const int c = labels[i];
    const std::size_t j = idx.same_class_partner(i, c, rng);
    const std::size_t k = idx.other_class(c, rng);
    cs.triplets.push_back({i, j, k});
  }
  return cs;
}

ConstraintSet build_pairs(std::span<const int> labels, std::size_t count, std::uint64_t seed, double margin) {
  if (count == 0) throw std::invalid_argument("pair count must be positive");
  if (!(margin > 0.0)) throw std::invalid_argument("margin b must be positive");
  ClassIndex idx(labels);
  std::vector<std::size_t> pos_anchors, neg_anchors;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int c = labels[i];
    if (idx.class_size(c) >= 2) pos_anchors.push_back(i);
    if (idx.class_size(c) < idx.n()) neg_anchors.push_back(i);
  }
  const std::size_t n_pos = count - count / 2;
  const std::size_t n_neg = count / 2;
  if (neg_anchors.empty()) throw DataError("cannot build pairs: single-class data");
  if (pos_anchors.empty()) throw DataError("cannot build pairs: no class has two members");

  Rng rng(seed);
  ConstraintSet cs;
  cs.kind = ConstraintKind::Pair;
  cs.margin = margin;
  cs.pairs.reserve(count);
  std::uniform_int_distribution<std::size_t> pick_pos(0, pos_anchors.size() - 1);
  for (std::size_t t = 0; t < n_pos; ++t) {
    const std::size_t i = pos_anchors[pick_pos(rng)];
    cs.pairs.push_back({i, idx.same_class_partner(i, labels[i], rng), 1});
  }
  std::uniform_int_distribution<std::size_t> pick_neg(0, neg_anchors.size() - 1);
  for (std::size_t t = 0; t < n_neg; ++t) {
    const std::size_t i = neg_anchors[pick_neg(rng)];
    cs.pairs.push_back({i, idx.other_class(labels[i], rng), -1});
  }
  return cs;
}

// ---------------------------------------------------------------------------

namespace {

std::size_t packed_size(std::size_t D) { return D * (D + 1) / 2; }

// Weights w with sum_pq A_pq M_pq = sum_packed A_packed * w.
void pack_weights(const Eigen::MatrixXd& M, double* w) {
  const auto D = M.rows();
  std::size_t t = 0;
  for (Eigen::Index p = 0; p < D; ++p) {
    w[t++] = M(p, p);
    for (Eigen::Index q = p + 1; q < D; ++q) w[t++] = M(p, q) + M(q, p);
  }
}

Eigen::MatrixXd unpack_symmetric(const double* a, std::size_t D) {
  Eigen::MatrixXd M(D, D);
  std::size_t t = 0;
  for (std::size_t p = 0; p < D; ++p)
    for (std::size_t q = p; q < D; ++q) {
      M(p, q) = a[t];
      M(q, p) = a[t];
      ++t;
    }
  return M;
}

double dot(const double* a, const double* b, std::size_t len) {
  double s = 0.0;
  for (std::size_t t = 0; t < len; ++t) s += a[t] * b[t];
  return s;
}

}  // namespace

HingeProblem::HingeProblem(const ProjectedData& proj, const ConstraintSet& cs, MetricKind kind)
    : kind_(kind),
      dim_(proj.num_features()),
      packed_(packed_size(proj.num_features())),
      blocks_(kind == MetricKind::Single ? 1 : proj.num_classes()) {
  if (!(cs.margin > 0.0)) throw std::invalid_argument("margin b must be positive");
  const std::size_t n = proj.size();
  std::unordered_map<std::uint64_t, std::int64_t> pair_id;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  auto id = [&](std::size_t i, std::size_t j) -> std::int64_t {
    if (i >= n || j >= n) throw std::invalid_argument("constraint index out of range");
    const auto key = (static_cast<std::uint64_t>(std::min(i, j)) << 32) | std::max(i, j);
    auto [it, inserted] = pair_id.try_emplace(key, static_cast<std::int64_t>(pairs.size()));
    if (inserted) pairs.emplace_back(i, j);
    return it->second;
  };

  const double b = cs.margin;
  switch (cs.kind) {
    case ConstraintKind::Triplet:
      for (const auto& t : cs.triplets) terms_.push_back({b, 1.0, id(t.i, t.j), id(t.i, t.k)});
      break;
    case ConstraintKind::Pair:
      for (const auto& p : cs.pairs) {
        const double r = p.r;
        terms_.push_back({1.0 - r * b, r, id(p.i, p.j), -1});
      }
      break;
    case ConstraintKind::Quad:
      for (const auto& q : cs.quads) terms_.push_back({b, 1.0, id(q.i, q.j), id(q.k, q.l)});
      break;
  }
  if (terms_.empty()) throw std::invalid_argument("empty constraint set");

  pair_count_ = pairs.size();
  cache_.assign(pair_count_ * blocks_ * packed_, 0.0);
  const std::size_t C = proj.num_classes();
  Eigen::MatrixXd delta(dim_, C);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    delta = proj.example(pairs[k].first) - proj.example(pairs[k].second);
    double* base = &cache_[k * blocks_ * packed_];
    for (std::size_t c = 0; c < C; ++c) {
      double* a = base + (kind_ == MetricKind::Single ? 0 : c * packed_);
      std::size_t t = 0;
      for (std::size_t p = 0; p < dim_; ++p)
        for (std::size_t q = p; q < dim_; ++q) a[t++] += delta(p, c) * delta(q, c);
    }
  }
}

void HingeProblem::pair_distances(const MetricModel& metric, std::vector<double>& out) const {
  if (metric.num_features() != dim_) throw std::invalid_argument("metric dimension does not match projection");
  if (metric.kind() != kind_) throw std::invalid_argument("metric kind does not match the cached problem");
  if (metric.matrices().size() != blocks_) throw std::invalid_argument("metric class count does not match projection");
  std::vector<double> w(blocks_ * packed_);
  for (std::size_t c = 0; c < blocks_; ++c) pack_weights(metric.matrices()[c], &w[c * packed_]);
  const std::size_t stride = blocks_ * packed_;
  out.resize(pair_count_);
  for (std::size_t k = 0; k < pair_count_; ++k) out[k] = dot(&cache_[k * stride], w.data(), stride);
}

HingeProblem::Evaluation HingeProblem::evaluate(const MetricModel& metric, bool with_gradient) const {
  std::vector<double> dist;
  pair_distances(metric, dist);
  Evaluation ev;
  const std::size_t stride = blocks_ * packed_;
  std::vector<double> grad(with_gradient ? stride : 0, 0.0);
  double total = 0.0;
  for (const auto& term : terms_) {
    double h = term.offset + term.coef * dist[term.first];
    if (term.second >= 0) h -= dist[term.second];
    if (h > 0.0) {
      total += h;
      ++ev.violated;
      if (with_gradient) {
        const double* a = &cache_[term.first * stride];
        for (std::size_t t = 0; t < stride; ++t) grad[t] += term.coef * a[t];
        if (term.second >= 0) {
          const double* s = &cache_[term.second * stride];
          for (std::size_t t = 0; t < stride; ++t) grad[t] -= s[t];
        }
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(terms_.size());
  ev.loss = total * inv;
  if (with_gradient) {
    for (std::size_t c = 0; c < blocks_; ++c) ev.gradient.push_back(unpack_symmetric(&grad[c * packed_], dim_) * inv);
  }
  return ev;
}

// ---------------------------------------------------------------------------

namespace {

double checked_loss(const MetricModel& metric, const ProjectedData& proj, const ConstraintSet& cs,
                    ConstraintKind expected) {
  if (cs.kind != expected) throw std::invalid_argument("constraint set has the wrong kind for this loss");
  if (cs.size() == 0) throw std::invalid_argument("empty constraint set");
  return HingeProblem(proj, cs, metric.kind()).loss(metric);
}

}  // namespace

double triplet_loss(const MetricModel& metric, const ProjectedData& proj, const ConstraintSet& cs) {
  return checked_loss(metric, proj, cs, ConstraintKind::Triplet);
}
double pair_loss(const MetricModel& metric, const ProjectedData& proj, const ConstraintSet& cs) {
  return checked_loss(metric, proj, cs, ConstraintKind::Pair);
}
double quad_loss(const MetricModel& metric, const ProjectedData& proj, const ConstraintSet& cs) {
  return checked_loss(metric, proj, cs, ConstraintKind::Quad);
}
double constraint_loss(const MetricModel& metric, const ProjectedData& proj, const ConstraintSet& cs) {
  return checked_loss(metric, proj, cs, cs.kind);
}

double regularizer_value(const MetricModel& metric, double p) {
  double r = 0.0;
  for (const auto& M : metric.matrices()) r += schatten_value(M, p);
  return r;
}

double objective(const MetricModel& metric, const ProjectedData& proj, const ConstraintSet& cs, double lambda,
                 double p) {
  const double loss = constraint_loss(metric, proj, cs);
  return lambda == 0.0 ? loss : loss + lambda * regularizer_value(metric, p);
}

std::vector<Eigen::MatrixXd> subgradient(const MetricModel& metric, const ProjectedData& proj,
                                         const ConstraintSet& cs, double lambda, double p) {
  if (cs.size() == 0) throw std::invalid_argument("empty constraint set");
  auto grads = HingeProblem(proj, cs, metric.kind()).evaluate(metric, true).gradient;
  if (lambda != 0.0)
    for (std::size_t c = 0; c < grads.size(); ++c) grads[c] += lambda * schatten_subgrad(metric.matrices()[c], p);
  return grads;
}

// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be finite and >= 0");
  if (!(p >= 1.0) || !std::isfinite(p)) throw std::invalid_argument("p must be finite and >= 1");
  if (!(margin > 0.0)) throw std::invalid_argument("margin b must be positive");
  if (!(step_decay > 0.0 && step_decay < 1.0)) throw std::invalid_argument("step_decay must lie in (0,1)");
  if (max_linesearch < 1) throw std::invalid_argument("max_linesearch must be positive");
  if (!(tol >= 0.0)) throw std::invalid_argument("tol must be non-negative");
}

std::size_t TrainConfig::resolved_constraints(std::size_t n) const {
  return constraints > 0 ? constraints : std::min<std::size_t>(30 * n, 100000);
}

TrainReport train(const ProjectedData& proj, const ConstraintSet& cs, const TrainConfig& config,
                  const MetricModel* initial) {
  using clock = std::chrono::steady_clock;
  config.validate();
  const auto t_start = clock::now();
  const HingeProblem problem(proj, cs, config.kind);
  const auto t_iter = clock::now();

  const std::size_t D = proj.num_features();
  const std::size_t C = proj.num_classes();
  MetricModel metric = initial ? *initial : MetricModel::identity(config.kind, D, C);
  if (metric.kind() != config.kind) throw std::invalid_argument("initial metric kind does not match config");
  if (!metric.is_finite()) throw NumericalError("initial metric has non-finite entries");

  const double lambda = config.lambda;
  const double p = config.p;
  auto regularizer = [&](const MetricModel& m) { return lambda == 0.0 ? 0.0 : lambda * regularizer_value(m, p); };

  TrainReport report;
  report.constraint_count = problem.num_constraints();
  auto eval = problem.evaluate(metric, true);
  double f = eval.loss + regularizer(metric);
  if (!std::isfinite(f)) throw NumericalError("non-finite initial objective");
  report.objective_trace.push_back(f);
  report.violated_counts.push_back(eval.violated);

  int stable = 0;
  MetricModel candidate = metric;
  for (std::size_t it = 0; it < config.max_iters; ++it) {
    std::vector<Eigen::MatrixXd> direction = std::move(eval.gradient);
    if (lambda != 0.0)
      for (std::size_t c = 0; c < direction.size(); ++c)
        direction[c] += lambda * schatten_subgrad(metric.matrices()[c], p);
    if (config.tie_multi && direction.size() > 1) {
      Eigen::MatrixXd shared = Eigen::MatrixXd::Zero(D, D);
      for (const auto& g : direction) shared += g;
      for (auto& g : direction) g = shared;
    }
    double grad_sq = 0.0;
    if (config.tie_multi && direction.size() > 1)
      grad_sq = direction.front().squaredNorm();
    else
      for (const auto& g : direction) grad_sq += g.squaredNorm();
    if (!std::isfinite(grad_sq)) throw NumericalError("non-finite subgradient");
    if (grad_sq == 0.0) {
      report.converged = true;
      break;
    }

    auto value_at = [&](double alpha) {
      auto& mats = candidate.matrices();
      for (std::size_t c = 0; c < mats.size(); ++c) mats[c] = psd_project(metric.matrices()[c] - alpha * direction[c]);
      return problem.loss(candidate) + regularizer(candidate);
    };
    const auto ls = line_search(value_at, f, grad_sq, config.step_decay, config.max_linesearch, config.strict_alg2);

    const double previous = f;
    if (ls.sufficient_decrease || ls.value <= f) {
      std::swap(metric, candidate);
      f = ls.value;
      report.step_sizes.push_back(ls.step);
    } else {
      report.step_sizes.push_back(0.0);
    }
    ++report.iterations_run;
    eval = problem.evaluate(metric, true);
    report.objective_trace.push_back(f);
    report.violated_counts.push_back(eval.violated);

    const double scale = std::max(std::abs(previous), std::numeric_limits<double>::min());
    const double rel = std::abs(previous - f) / scale;
    stable = rel < config.tol ? stable + 1 : 0;
    if (stable >= 3) {
      report.converged = true;
      break;
    }
  }

  report.final_metric = std::move(metric);
  const auto t_end = clock::now();
  report.wall_time = std::chrono::duration<double>(t_end - t_start).count();
  report.iteration_time = std::chrono::duration<double>(t_end - t_iter).count();
  return report;
}

TrainReport train(const ProjectedData& proj, std::span<const int> labels, const TrainConfig& config,
                  const MetricModel* initial) {
  config.validate();
  if (labels.size() != proj.size()) throw std::invalid_argument("label count does not match projection");
  auto cs = build_triplets(labels, config.resolved_constraints(proj.size()), config.seed, config.margin);
  return train(proj, cs, config, initial);
}

}  // namespace cpml
