#include "cpml/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "cpml/error.hpp"
#include "cpml/random.hpp"
#include "cpml/regularizer.hpp"

namespace cpml {

namespace {

// Runs fn(0..count-1) on up to `threads` workers; the first failure (by index) is rethrown.
template <typename Fn>
void for_each_index(std::size_t count, unsigned threads, Fn&& fn) {
  std::vector<std::exception_ptr> errors(count);
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < count;) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

std::vector<int> knn_predict(const MetricModel& metric, const ProjectedData& train, std::span<const int> train_labels,
                             const ProjectedData& test, std::size_t k) {
  const std::size_t n_train = train.size();
  if (n_train == 0) throw std::invalid_argument("knn_predict: empty training set");
  if (train_labels.size() != n_train) throw std::invalid_argument("knn_predict: label count mismatch");
  if (k == 0) throw std::invalid_argument("knn_predict: k must be at least 1");
  if (k > n_train) throw std::invalid_argument("knn_predict: k exceeds the number of training points");
  if (test.size() == 0) return {};
  if (test.num_features() != train.num_features() || test.num_classes() != train.num_classes())
    throw std::invalid_argument("knn_predict: train/test projection shapes differ");

  const Eigen::MatrixXd train_emb = embed(metric, train);
  const Eigen::MatrixXd test_emb = embed(metric, test);
  const int C = *std::max_element(train_labels.begin(), train_labels.end()) + 1;

  std::vector<int> predicted(test.size());
  std::vector<std::pair<double, std::size_t>> dist(n_train);
  std::vector<int> votes(static_cast<std::size_t>(C));
  for (std::size_t t = 0; t < test.size(); ++t) {
    const auto x = test_emb.row(static_cast<Eigen::Index>(t));
    for (std::size_t i = 0; i < n_train; ++i)
      dist[i] = {(train_emb.row(static_cast<Eigen::Index>(i)) - x).squaredNorm(), i};
    if (k == 1) {
      predicted[t] = train_labels[std::min_element(dist.begin(), dist.end())->second];
      continue;
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    std::fill(votes.begin(), votes.end(), 0);
    for (std::size_t r = 0; r < k; ++r) ++votes[train_labels[dist[r].second]];
    predicted[t] = static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
  }
  return predicted;
}

double classification_accuracy(std::span<const int> predicted, std::span<const int> actual) {
  if (predicted.size() != actual.size()) throw std::invalid_argument("accuracy: length mismatch");
  if (predicted.empty()) throw std::invalid_argument("accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == actual[i];
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

std::size_t count_valid_triplets(std::span<const int> labels) {
  std::vector<std::size_t> sizes;
  for (int y : labels) {
    if (y < 0) throw std::invalid_argument("labels must be non-negative");
    if (static_cast<std::size_t>(y) >= sizes.size()) sizes.resize(static_cast<std::size_t>(y) + 1, 0);
    ++sizes[static_cast<std::size_t>(y)];
  }
  const std::size_t n = labels.size();
  std::size_t total = 0;
  for (std::size_t s : sizes)
    if (s >= 2) total += s * (s - 1) * (n - s);
  return total;
}

ConstraintSet test_triplets(std::span<const int> labels, std::size_t count, std::uint64_t seed) {
  if (count == 0) throw std::invalid_argument("test triplet count must be positive");
  const std::size_t valid = count_valid_triplets(labels);
  if (valid == 0) throw DataError("cannot build test triplets: need a class with two members and another class");
  if (valid > count) return build_triplets(labels, count, seed);
  ConstraintSet cs;
  cs.triplets.reserve(valid);
  for (std::size_t i = 0; i < labels.size(); ++i)
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (j == i || labels[j] != labels[i]) continue;
      for (std::size_t k = 0; k < labels.size(); ++k)
        if (labels[k] != labels[i]) cs.triplets.push_back({i, j, k});
    }
  return cs;
}

double triplet_accuracy(const MetricModel& metric, const ProjectedData& proj, const ConstraintSet& triplets) {
  if (triplets.kind != ConstraintKind::Triplet || triplets.triplets.empty())
    throw std::invalid_argument("triplet_accuracy needs a non-empty triplet set");
  std::size_t correct = 0;
  for (const auto& t : triplets.triplets) {
    const auto xi = proj.example(t.i);
    correct += metric.distance(xi, proj.example(t.j)) < metric.distance(xi, proj.example(t.k));
  }
  return static_cast<double>(correct) / static_cast<double>(triplets.triplets.size());
}

double triplet_accuracy(const MetricModel& metric, const ProjectedData& proj, std::span<const int> labels,
                        std::size_t num_triplets, std::uint64_t seed) {
  if (labels.size() != proj.size()) throw std::invalid_argument("triplet_accuracy: label count mismatch");
  return triplet_accuracy(metric, proj, test_triplets(labels, num_triplets, seed));
}

double noisy_ratio(const MetricModel& metric, std::span<const std::size_t> noisy_features, double p) {
  const std::size_t D = metric.num_features();
  for (std::size_t d : noisy_features)
    if (d >= D) throw std::invalid_argument("noisy feature index out of range");
  double total = 0.0;
  for (const auto& M : metric.matrices()) {
    const double whole = schatten_value(M, p);
    if (whole == 0.0) throw std::invalid_argument("noisy_ratio: metric norm is zero");
    if (noisy_features.empty()) continue;
    const auto m = static_cast<Eigen::Index>(noisy_features.size());
    Eigen::MatrixXd sub(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
      for (Eigen::Index b = 0; b < m; ++b)
        sub(a, b) = M(static_cast<Eigen::Index>(noisy_features[a]), static_cast<Eigen::Index>(noisy_features[b]));
    total += schatten_value(sub, p) / whole;
  }
  return total / static_cast<double>(metric.matrices().size());
}

std::vector<double> default_lambda_grid() {
  std::vector<double> grid;
  for (int e = -4; e <= 4; ++e) grid.push_back(std::pow(10.0, e));
  return grid;
}

GridSearchResult grid_search(const ProjectedData& train_proj, std::span<const int> train_labels,
                             const ProjectedData& validation, std::span<const int> validation_labels,
                             std::span<const double> lambdas, const TrainConfig& config_template, std::size_t k) {
  if (lambdas.empty()) throw std::invalid_argument("grid_search: empty lambda grid");
  GridSearchResult res;
  res.lambdas.assign(lambdas.begin(), lambdas.end());
  std::sort(res.lambdas.begin(), res.lambdas.end());
  res.lambdas.erase(std::unique(res.lambdas.begin(), res.lambdas.end()), res.lambdas.end());

  const auto cs = build_triplets(train_labels, config_template.resolved_constraints(train_proj.size()),
                                 config_template.seed, config_template.margin);
  double best = -1.0;
  std::string last_error;
  for (double lambda : res.lambdas) {
    TrainConfig cfg = config_template;
    cfg.lambda = lambda;
    double acc = std::numeric_limits<double>::quiet_NaN();
    try {
      auto rep = train(train_proj, cs, cfg);
      acc = validation.size() == 0
                ? 0.0
                : classification_accuracy(knn_predict(rep.final_metric, train_proj, train_labels, validation, k),
                                          validation_labels);
      if (acc > best) {
        best = acc;
        res.best_lambda = lambda;
        res.best_metric = std::move(rep.final_metric);
      }
    } catch (const NumericalError& e) {
      last_error = e.what();
    }
    res.validation_accuracy.push_back(acc);
  }
  if (best < 0.0) throw NumericalError("grid_search: every training failed: " + last_error);
  return res;
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::Euclidean:
      return "euclidean";
    case Method::CpmlSingle:
      return "cpml-s";
    case Method::CpmlMulti:
      return "cpml-m";
  }
  return "?";
}

Method parse_method(std::string_view text) {
  if (text == "euclidean" || text == "identity") return Method::Euclidean;
  if (text == "cpml-s" || text == "single" || text == "cps") return Method::CpmlSingle;
  if (text == "cpml-m" || text == "multi" || text == "cpm") return Method::CpmlMulti;
  throw std::invalid_argument("unknown method '" + std::string(text) + "'");
}

RepeatResult run_repeat(const CategoricalDataset& ds, const ExperimentConfig& config, std::size_t repeat) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::uint64_t seed = derive_seed(config.seed, "repeat", repeat);
  SplitSpec spec{config.ratios, derive_seed(seed, "split"), config.stratified};
  const auto parts = split(ds, spec);
  const auto vdm = VdmModel::fit(parts.train, config.smoothing);
  const auto train_proj = vdm.project_dataset(parts.train);
  const auto val_proj = vdm.project_dataset(parts.validation);
  const auto test_proj = vdm.project_dataset(parts.test);

  RepeatResult out;
  MetricModel metric;
  if (config.method == Method::Euclidean) {
    metric = MetricModel::identity(MetricKind::Single, ds.num_features(), static_cast<std::size_t>(ds.num_classes()));
    out.lambda = 0.0;
  } else {
    TrainConfig cfg = config.train;
    cfg.kind = config.method == Method::CpmlSingle ? MetricKind::Single : MetricKind::Multi;
    cfg.seed = derive_seed(seed, "constraints");
    auto gs = grid_search(train_proj, parts.train.labels(), val_proj, parts.validation.labels(), config.lambda_grid,
                          cfg, config.k);
    metric = std::move(gs.best_metric);
    out.lambda = gs.best_lambda;
  }
  out.class_acc = classification_accuracy(
      knn_predict(metric, train_proj, parts.train.labels(), test_proj, config.k), parts.test.labels());
  out.triplet_acc = triplet_accuracy(metric, test_proj, parts.test.labels(), config.test_triplets,
                                     derive_seed(seed, "test-triplets"));
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

ExperimentReport run_experiment(const CategoricalDataset& ds, const ExperimentConfig& config, const std::string& name) {
  if (config.repeats == 0) throw std::invalid_argument("repeats must be at least 1");
  std::vector<RepeatResult> results(config.repeats);
  for_each_index(config.repeats, config.threads, [&](std::size_t r) { results[r] = run_repeat(ds, config, r); });

  ExperimentReport rep;
  rep.dataset = name;
  rep.method = config.method;
  rep.p = config.train.p;
  rep.repeats = config.repeats;
  for (const auto& r : results) {
    rep.class_acc.push_back(r.class_acc);
    rep.triplet_acc.push_back(r.triplet_acc);
    rep.selected_lambdas.push_back(r.lambda);
    rep.seconds.push_back(r.seconds);
  }
  rep.class_acc_mean = mean(rep.class_acc);
  rep.class_acc_std = sample_std(rep.class_acc);
  rep.triplet_acc_mean = mean(rep.triplet_acc);
  rep.triplet_acc_std = sample_std(rep.triplet_acc);
  rep.seconds_per_repeat = mean(rep.seconds);
  return rep;
}

NoisyExperimentReport noisy_experiment(const NoisyExperimentConfig& config) {
  if (config.repeats == 0) throw std::invalid_argument("repeats must be at least 1");
  if (config.noisy_counts.empty() || config.ps.empty()) throw std::invalid_argument("noisy experiment needs counts and p values");
  for (double p : config.ps)
    if (!(p >= 1.0) || !std::isfinite(p)) throw std::invalid_argument("Schatten exponent p must be >= 1");
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t per_cell = config.repeats;
  const std::size_t jobs = config.noisy_counts.size() * per_cell;
  // ratios[count index][p index][repeat]
  std::vector<std::vector<std::vector<double>>> ratios(
      config.noisy_counts.size(), std::vector<std::vector<double>>(config.ps.size(), std::vector<double>(per_cell)));

  for_each_index(jobs, config.threads, [&](std::size_t job) {
    const std::size_t ci = job / per_cell, r = job % per_cell;
    const std::size_t noisy = config.noisy_counts[ci];
    if (noisy == 0) return;  // ratio is 0 by definition
    SyntheticSpec spec;
    spec.n = config.n;
    spec.informative = config.informative;
    spec.noisy = noisy;
    spec.num_classes = config.num_classes;
    spec.cardinality = config.cardinality;
    spec.weight = config.weight;
    spec.seed = derive_seed(derive_seed(config.seed, "synthetic", noisy), "repeat", r);
    const auto ds = generate_synthetic(spec);
    const auto proj = VdmModel::fit(ds, config.smoothing).project_dataset(ds);
    std::vector<std::size_t> idx(noisy);
    std::iota(idx.begin(), idx.end(), config.informative);
    TrainConfig cfg = config.train;
    cfg.kind = MetricKind::Single;
    cfg.seed = derive_seed(spec.seed, "constraints");
    const auto cs = build_triplets(ds.labels(), cfg.resolved_constraints(ds.size()), cfg.seed, cfg.margin);
    for (std::size_t pi = 0; pi < config.ps.size(); ++pi) {
      cfg.p = config.ps[pi];
      ratios[ci][pi][r] = noisy_ratio(train(proj, cs, cfg).final_metric, idx, cfg.p);
    }
  });

  NoisyExperimentReport rep;
  for (std::size_t ci = 0; ci < config.noisy_counts.size(); ++ci)
    for (std::size_t pi = 0; pi < config.ps.size(); ++pi) {
      NoisyCell cell;
      cell.noisy = config.noisy_counts[ci];
      cell.p = config.ps[pi];
      cell.ratios = std::move(ratios[ci][pi]);
      cell.mean = mean(cell.ratios);
      cell.std = sample_std(cell.ratios);
      rep.cells.push_back(std::move(cell));
    }
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_std(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace cpml
