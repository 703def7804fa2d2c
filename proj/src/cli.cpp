#include "cpml/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <thread>

#include "cpml/data.hpp"
#include "cpml/error.hpp"
#include "cpml/random.hpp"
#include "cpml/theory.hpp"
#include "cpml/vdm.hpp"

namespace cpml::cli {
namespace {

using json = nlohmann::json;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty()) throw std::invalid_argument("config: '" + key + "' expects a number, got '" + text + "'");
  return v;
}

std::uint64_t parse_count(const std::string& key, const std::string& text) {
  if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos)
    throw std::invalid_argument("config: '" + key + "' expects a non-negative integer, got '" + text + "'");
  return std::stoull(text);
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

template <typename T>
std::string join(const std::vector<T>& xs, const char* sep = ",") {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += sep;
    if constexpr (std::is_floating_point_v<T>)
      s += fmt(xs[i]);
    else
      s += std::to_string(xs[i]);
  }
  return s;
}

unsigned default_threads() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CPML_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<unsigned>(std::min<long>(v, hw));
    } catch (const std::exception&) {
    }
  }
  return hw;
}

using ConfigLines = std::vector<std::pair<std::string, std::string>>;

void print_config(std::ostream& err, const std::string& command, const ConfigLines& lines) {
  err << "# cpml " << command << '\n';
  for (const auto& [k, v] : lines) err << "# " << k << '=' << v << '\n';
}

// ---------------------------------------------------------------------------

struct DataOptions {
  std::string path;
  std::optional<std::string> label;
  std::optional<std::size_t> label_index;
  bool synthetic = false;
  SyntheticSpec synth;
};

void add_synth_options(CLI::App& app, SyntheticSpec& s) {
  app.add_option("--n", s.n, "Number of synthetic examples")->capture_default_str();
  app.add_option("--features", s.informative, "Informative synthetic features")->capture_default_str();
  app.add_option("--noisy", s.noisy, "Noise features appended after the informative ones")->capture_default_str();
  app.add_option("--classes", s.num_classes, "Number of classes")->capture_default_str();
  app.add_option("--cardinality", s.cardinality, "Values per feature (0: max(4, classes))")->capture_default_str();
  app.add_option("--weight", s.weight, "Weight added to each class's favored value, in [0,1]")->capture_default_str();
}

void add_data_options(CLI::App& app, DataOptions& d) {
  app.add_option("--data", d.path, "CSV file with a header row; every column is categorical");
  app.add_option("--label", d.label, "Name of the label column");
  app.add_option("--label-index", d.label_index, "0-based index of the label column");
  app.add_flag("--synthetic", d.synthetic, "Use generated synthetic data instead of --data");
  add_synth_options(app, d.synth);
}

CategoricalDataset load_data(const DataOptions& d, std::uint64_t seed, ConfigLines& lines) {
  if (d.synthetic) {
    if (!d.path.empty()) throw std::invalid_argument("--data and --synthetic are mutually exclusive");
    SyntheticSpec s = d.synth;
    s.seed = derive_seed(seed, "synthetic");
    lines.emplace_back("data", "synthetic");
    lines.emplace_back("n", std::to_string(s.n));
    lines.emplace_back("features", std::to_string(s.informative));
    lines.emplace_back("noisy", std::to_string(s.noisy));
    lines.emplace_back("classes", std::to_string(s.num_classes));
    lines.emplace_back("cardinality", std::to_string(s.resolved_cardinality()));
    lines.emplace_back("weight", fmt(s.weight));
    return generate_synthetic(s);
  }
  if (d.path.empty()) throw std::invalid_argument("--data is required (or --synthetic)");
  if (d.label && d.label_index) throw std::invalid_argument("--label and --label-index are mutually exclusive");
  if (!d.label && !d.label_index) throw std::invalid_argument("one of --label or --label-index is required");
  lines.emplace_back("data", d.path);
  if (d.label) {
    lines.emplace_back("label", *d.label);
    return load_csv(d.path, LabelColumn{*d.label});
  }
  lines.emplace_back("label_index", std::to_string(*d.label_index));
  return load_csv(d.path, LabelColumn{*d.label_index});
}

std::string dataset_name(const DataOptions& d) {
  if (d.synthetic) return "synthetic";
  return std::filesystem::path(d.path).stem().string();
}

// Training options: config file first, explicit flags override it.
struct TrainOptions {
  std::string config_file;
  std::optional<double> lambda, p, b, step_decay, tol;
  std::optional<std::size_t> max_iters, constraints;
  std::optional<int> max_linesearch;
  std::optional<std::string> kind;
  std::optional<std::uint64_t> seed;
  bool strict_alg2 = false;
};

void add_train_options(CLI::App& app, TrainOptions& t, bool with_kind, bool with_p = true) {
  app.add_option("--config", t.config_file, "Flat key=value file (lambda, p, b, step_decay, max_iters, max_linesearch, tol, constraints, seed, kind)");
  app.add_option("--lambda", t.lambda, "Regularization weight (default 0.01)");
  if (with_p) app.add_option("--p", t.p, "Schatten exponent, >= 1 (default 1)");
  app.add_option("--b", t.b, "Hinge margin (default 1)");
  app.add_option("--step-decay", t.step_decay, "Backtracking factor in (0,1) (default 0.1)");
  app.add_option("--max-iters", t.max_iters, "Iteration cap (default 200)");
  app.add_option("--max-linesearch", t.max_linesearch, "Line-search probes per iteration (default 30)");
  app.add_option("--tol", t.tol, "Relative objective change for convergence (default 1e-5)");
  app.add_option("--constraints", t.constraints, "Number of triplets (0: min(30 n, 100000))");
  if (with_kind) app.add_option("--kind", t.kind, "single | multi (default single)");
  app.add_flag("--strict-alg2", t.strict_alg2, "Decay the step before the first line-search test");
  app.add_option("--seed", t.seed, "Base seed for every random stream (default 0)");
}

struct Resolved {
  TrainConfig cfg;
  std::uint64_t seed = 0;
};

Resolved resolve(const TrainOptions& t) {
  Resolved r;
  if (!t.config_file.empty()) {
    auto entries = read_config_file(t.config_file);
    apply_config(entries, r.cfg);
    if (auto it = entries.find("seed"); it != entries.end()) r.seed = parse_count("seed", it->second);
  }
  if (t.lambda) r.cfg.lambda = *t.lambda;
  if (t.p) r.cfg.p = *t.p;
  if (t.b) r.cfg.margin = *t.b;
  if (t.step_decay) r.cfg.step_decay = *t.step_decay;
  if (t.max_iters) r.cfg.max_iters = *t.max_iters;
  if (t.max_linesearch) r.cfg.max_linesearch = *t.max_linesearch;
  if (t.tol) r.cfg.tol = *t.tol;
  if (t.constraints) r.cfg.constraints = *t.constraints;
  if (t.kind) r.cfg.kind = parse_metric_kind(*t.kind);
  if (t.seed) r.seed = *t.seed;
  r.cfg.strict_alg2 = r.cfg.strict_alg2 || t.strict_alg2;
  r.cfg.validate();
  return r;
}

void describe(const TrainConfig& c, ConfigLines& lines, bool with_kind, bool with_lambda = true, bool with_p = true) {
  if (with_lambda) lines.emplace_back("lambda", fmt(c.lambda));
  if (with_p) lines.emplace_back("p", fmt(c.p));
  lines.emplace_back("b", fmt(c.margin));
  lines.emplace_back("step_decay", fmt(c.step_decay));
  lines.emplace_back("max_iters", std::to_string(c.max_iters));
  lines.emplace_back("max_linesearch", std::to_string(c.max_linesearch));
  lines.emplace_back("tol", fmt(c.tol));
  lines.emplace_back("constraints", c.constraints ? std::to_string(c.constraints) : "auto");
  if (with_kind) lines.emplace_back("kind", std::string(to_string(c.kind)));
  lines.emplace_back("strict_alg2", c.strict_alg2 ? "true" : "false");
}

std::vector<double> parse_lambda_grid(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(parse_double("lambda-grid", trim(item)));
  if (out.empty()) throw std::invalid_argument("--lambda-grid is empty");
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw DataError("cannot write '" + path.string() + "'");
  f << text;
}

json report_to_json(const ExperimentReport& r) {
  return json{{"dataset", r.dataset},
              {"method", std::string(to_string(r.method))},
              {"kind", r.method == Method::CpmlMulti ? "multi" : "single"},
              {"p", r.p},
              {"repeats", r.repeats},
              {"class_acc", r.class_acc},
              {"triplet_acc", r.triplet_acc},
              {"class_acc_mean", r.class_acc_mean},
              {"class_acc_std", r.class_acc_std},
              {"triplet_acc_mean", r.triplet_acc_mean},
              {"triplet_acc_std", r.triplet_acc_std},
              {"selected_lambdas", r.selected_lambdas},
              {"seconds_per_repeat", r.seconds_per_repeat}};
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Experiment options shared by evaluate and benchmark.

struct ExperimentOptions {
  std::size_t repeats = 50;
  std::size_t k = 1;
  std::size_t test_triplets = 10000;
  double smoothing = 0.0;
  std::string lambda_grid;
  std::optional<unsigned> threads;
  std::string out;
};

void add_experiment_options(CLI::App& app, ExperimentOptions& e) {
  app.add_option("--repeats", e.repeats, "Random 6:2:2 splits to average over")->capture_default_str();
  app.add_option("--k", e.k, "Neighbours for k-NN classification")->capture_default_str();
  app.add_option("--test-triplets", e.test_triplets, "Test triplets per repeat")->capture_default_str();
  app.add_option("--smoothing", e.smoothing, "Pseudocount added to the value/class counts")->capture_default_str();
  app.add_option("--lambda-grid", e.lambda_grid, "Comma-separated lambda candidates (default 1e-4,...,1e4)");
  app.add_option("--threads", e.threads, "Worker threads (default: CPML_THREADS or all cores)");
  app.add_option("--out", e.out, "Write the report as JSON to this path");
}

ExperimentConfig make_experiment(const ExperimentOptions& e, const Resolved& r, ConfigLines& lines) {
  if (e.repeats == 0) throw std::invalid_argument("--repeats must be at least 1");
  if (e.k == 0) throw std::invalid_argument("--k must be at least 1");
  ExperimentConfig cfg;
  cfg.train = r.cfg;
  cfg.seed = r.seed;
  cfg.repeats = e.repeats;
  cfg.k = e.k;
  cfg.test_triplets = e.test_triplets;
  cfg.smoothing = e.smoothing;
  cfg.threads = e.threads ? std::max(1u, *e.threads) : default_threads();
  if (!e.lambda_grid.empty()) cfg.lambda_grid = parse_lambda_grid(e.lambda_grid);
  lines.emplace_back("seed", std::to_string(cfg.seed));
  lines.emplace_back("repeats", std::to_string(cfg.repeats));
  lines.emplace_back("k", std::to_string(cfg.k));
  lines.emplace_back("test_triplets", std::to_string(cfg.test_triplets));
  lines.emplace_back("smoothing", fmt(cfg.smoothing));
  lines.emplace_back("lambda_grid", join(cfg.lambda_grid));
  lines.emplace_back("threads", std::to_string(cfg.threads));
  return cfg;
}

void print_report(std::ostream& out, const ExperimentReport& r) {
  out << "dataset=" << r.dataset << '\n'
      << "method=" << to_string(r.method) << '\n'
      << "p=" << fmt(r.p) << '\n'
      << "repeats=" << r.repeats << '\n'
      << "class_acc_mean=" << fixed(r.class_acc_mean, 6) << '\n'
      << "class_acc_std=" << fixed(r.class_acc_std, 6) << '\n'
      << "triplet_acc_mean=" << fixed(r.triplet_acc_mean, 6) << '\n'
      << "triplet_acc_std=" << fixed(r.triplet_acc_std, 6) << '\n'
      << "selected_lambdas=" << join(r.selected_lambdas) << '\n';
}

// ---------------------------------------------------------------------------

int cmd_train(const DataOptions& data, const TrainOptions& topts, double smoothing, const std::string& out_dir,
              const std::string& dump_projection, const std::string& init_metric, std::ostream& out,
              std::ostream& err) {
  const Resolved r = resolve(topts);
  ConfigLines lines;
  const auto ds = load_data(data, r.seed, lines);
  describe(r.cfg, lines, true);
  lines.emplace_back("seed", std::to_string(r.seed));
  lines.emplace_back("smoothing", fmt(smoothing));
  if (!out_dir.empty()) lines.emplace_back("out_dir", out_dir);
  if (!init_metric.empty()) lines.emplace_back("init_metric", init_metric);
  print_config(err, "train", lines);

  const auto parts = split(ds, SplitSpec{{0.6, 0.2, 0.2}, derive_seed(r.seed, "split"), true});
  const auto vdm = VdmModel::fit(parts.train, smoothing);
  const auto train_proj = vdm.project_dataset(parts.train);
  if (!dump_projection.empty()) {
    std::ostringstream os;
    write_projection_csv(os, train_proj);
    write_file(dump_projection, os.str());
  }

  const std::size_t D = ds.num_features();
  const auto C = static_cast<std::size_t>(ds.num_classes());
  std::optional<MetricModel> init;
  if (!init_metric.empty()) {
    Eigen::MatrixXd M = read_matrix_csv(init_metric);
    if (M.rows() != static_cast<Eigen::Index>(D) || M.cols() != static_cast<Eigen::Index>(D))
      throw DataError("initial metric must be " + std::to_string(D) + "x" + std::to_string(D));
    init = r.cfg.kind == MetricKind::Single ? MetricModel::single(M)
                                            : MetricModel::multi(std::vector<Eigen::MatrixXd>(C, M));
  }

  TrainConfig cfg = r.cfg;
  cfg.seed = derive_seed(r.seed, "constraints");
  const auto report = train(train_proj, parts.train.labels(), cfg, init ? &*init : nullptr);

  const auto val_proj = vdm.project_dataset(parts.validation);
  const auto test_proj = vdm.project_dataset(parts.test);
  const auto& metric = report.final_metric;
  const double val_acc = classification_accuracy(
      knn_predict(metric, train_proj, parts.train.labels(), val_proj, 1), parts.validation.labels());
  const double test_acc =
      classification_accuracy(knn_predict(metric, train_proj, parts.train.labels(), test_proj, 1), parts.test.labels());
  const double test_trip =
      triplet_accuracy(metric, test_proj, parts.test.labels(), 10000, derive_seed(r.seed, "test-triplets"));

  out << "iterations=" << report.iterations_run << '\n'
      << "converged=" << (report.converged ? "true" : "false") << '\n'
      << "constraints=" << report.constraint_count << '\n'
      << "initial_objective=" << fmt(report.objective_trace.front()) << '\n'
      << "final_objective=" << fmt(report.objective_trace.back()) << '\n'
      << "violated=" << report.violated_counts.back() << '\n'
      << "validation_acc=" << fixed(val_acc, 6) << '\n'
      << "test_acc=" << fixed(test_acc, 6) << '\n'
      << "test_triplet_acc=" << fixed(test_trip, 6) << '\n';

  if (!out_dir.empty()) {
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    const auto& mats = metric.matrices();
    for (std::size_t c = 0; c < mats.size(); ++c) {
      std::ostringstream os;
      write_matrix_csv(os, mats[c]);
      const std::string name = mats.size() == 1 ? "metric.csv" : "metric_" + std::to_string(c) + ".csv";
      write_file(dir / name, os.str());
    }
    write_file(dir / "report.json", train_report_json(report, r.cfg));
    out << "wrote=" << dir.string() << '\n';
  }
  return kOk;
}

int cmd_evaluate(const DataOptions& data, const TrainOptions& topts, const ExperimentOptions& eopts,
                 const std::string& method, std::ostream& out, std::ostream& err) {
  const Resolved r = resolve(topts);
  ConfigLines lines;
  const auto ds = load_data(data, r.seed, lines);
  const Method m = parse_method(method);
  lines.emplace_back("method", std::string(to_string(m)));
  describe(r.cfg, lines, false, false);
  ExperimentConfig cfg = make_experiment(eopts, r, lines);
  cfg.method = m;
  if (topts.lambda && eopts.lambda_grid.empty()) cfg.lambda_grid = {*topts.lambda};
  print_config(err, "evaluate", lines);

  const auto report = run_experiment(ds, cfg, dataset_name(data));
  print_report(out, report);
  if (!eopts.out.empty()) write_file(eopts.out, report_to_json(report).dump(2) + "\n");
  return kOk;
}

int cmd_benchmark(const DataOptions& data, const TrainOptions& topts, const ExperimentOptions& eopts,
                  std::ostream& out, std::ostream& err) {
  const Resolved r = resolve(topts);
  ConfigLines lines;
  const auto ds = load_data(data, r.seed, lines);
  describe(r.cfg, lines, false, false);
  ExperimentConfig cfg = make_experiment(eopts, r, lines);
  if (topts.lambda && eopts.lambda_grid.empty()) cfg.lambda_grid = {*topts.lambda};
  print_config(err, "benchmark", lines);

  const std::string name = dataset_name(data);
  out << std::left << std::setw(12) << "method" << std::setw(22) << "class_acc" << "triplet_acc" << '\n';
  json all = json::array();
  for (Method m : {Method::Euclidean, Method::CpmlSingle, Method::CpmlMulti}) {
    cfg.method = m;
    const auto rep = run_experiment(ds, cfg, name);
    out << std::left << std::setw(12) << to_string(m) << std::setw(22)
        << (fixed(rep.class_acc_mean, 3) + " +/- " + fixed(rep.class_acc_std, 3))
        << fixed(rep.triplet_acc_mean, 3) << " +/- " << fixed(rep.triplet_acc_std, 3) << '\n';
    all.push_back(report_to_json(rep));
  }
  if (!eopts.out.empty()) write_file(eopts.out, all.dump(2) + "\n");
  return kOk;
}

struct NoisyOptions {
  std::size_t n = 1000;
  std::size_t informative = 8;
  int classes = 4;
  int cardinality = 0;
  double weight = 0.3;
  std::vector<std::size_t> counts{1, 4, 7, 10, 13};
  std::vector<double> ps{1.0, 2.0, 3.0};
  std::size_t repeats = 5;
  std::optional<unsigned> threads;
  std::string out;
};

int cmd_noisy(const NoisyOptions& o, const TrainOptions& topts, std::ostream& out, std::ostream& err) {
  const Resolved r = resolve(topts);
  if (o.repeats == 0) throw std::invalid_argument("--repeats must be at least 1");
  NoisyExperimentConfig cfg;
  cfg.n = o.n;
  cfg.informative = o.informative;
  cfg.num_classes = o.classes;
  cfg.cardinality = o.cardinality;
  cfg.weight = o.weight;
  cfg.noisy_counts = o.counts;
  cfg.ps = o.ps;
  cfg.repeats = o.repeats;
  cfg.seed = r.seed;
  cfg.train = r.cfg;
  cfg.threads = o.threads ? std::max(1u, *o.threads) : default_threads();

  ConfigLines lines{{"n", std::to_string(cfg.n)},
                    {"informative", std::to_string(cfg.informative)},
                    {"classes", std::to_string(cfg.num_classes)},
                    {"cardinality", std::to_string(cfg.cardinality)},
                    {"weight", fmt(cfg.weight)},
                    {"noisy_counts", join(cfg.noisy_counts)},
                    {"p", join(cfg.ps)},
                    {"repeats", std::to_string(cfg.repeats)},
                    {"seed", std::to_string(cfg.seed)},
                    {"threads", std::to_string(cfg.threads)}};
  describe(cfg.train, lines, false, true, false);
  print_config(err, "noisy", lines);

  const auto rep = noisy_experiment(cfg);
  out << std::left << std::setw(8) << "noisy";
  for (double p : cfg.ps) out << std::setw(20) << ("p=" + fmt(p));
  out << '\n';
  json cells = json::array();
  for (std::size_t ci = 0; ci < cfg.noisy_counts.size(); ++ci) {
    out << std::left << std::setw(8) << cfg.noisy_counts[ci];
    for (std::size_t pi = 0; pi < cfg.ps.size(); ++pi) {
      const auto& cell = rep.cells[ci * cfg.ps.size() + pi];
      out << std::setw(20) << (fixed(cell.mean) + " +/- " + fixed(cell.std));
      cells.push_back({{"noisy", cell.noisy}, {"p", cell.p}, {"ratios", cell.ratios}, {"mean", cell.mean}, {"std", cell.std}});
    }
    out << '\n';
  }
  if (!o.out.empty()) write_file(o.out, json{{"cells", cells}, {"seconds", rep.seconds}}.dump(2) + "\n");
  return kOk;
}

struct RademacherOptions {
  std::vector<double> ps{1.0, 1.5, 2.0, 3.0};
  std::vector<std::size_t> ns{10, 50, 200};
  std::vector<std::size_t> dims{2, 4, 8};
  int classes = 3;
  int cardinality = 4;
  std::string mc = "2000";
  std::uint64_t seed = 0;
};

int cmd_rademacher(const RademacherOptions& o, std::ostream& out, std::ostream& err) {
  for (double p : o.ps)
    if (!(p >= 1.0) || !std::isfinite(p)) throw std::invalid_argument("--p values must be >= 1");
  for (std::size_t n : o.ns)
    if (n < 2) throw std::invalid_argument("--n values must be >= 2");
  for (std::size_t D : o.dims)
    if (D < 1) throw std::invalid_argument("--D values must be >= 1");
  RademacherMode mode = RademacherMode::Auto;
  std::size_t samples = 0;
  if (o.mc == "exact") {
    mode = RademacherMode::Exact;
    samples = 1;
  } else {
    samples = parse_count("mc", o.mc);
    if (samples == 0) throw std::invalid_argument("--mc must be positive or 'exact'");
  }
  print_config(err, "rademacher",
               {{"p", join(o.ps)},
                {"n", join(o.ns)},
                {"D", join(o.dims)},
                {"classes", std::to_string(o.classes)},
                {"cardinality", std::to_string(o.cardinality)},
                {"mc", o.mc},
                {"seed", std::to_string(o.seed)}});

  bool all_pass = true;
  for (double p : o.ps)
    for (std::size_t n : o.ns)
      for (std::size_t D : o.dims) {
        SyntheticSpec s;
        s.n = n;
        s.informative = D;
        s.num_classes = o.classes;
        s.cardinality = o.cardinality;
        s.weight = 0.5;
        const std::uint64_t cell = derive_seed(derive_seed(o.seed, "rademacher", n), "D", D);
        s.seed = derive_seed(cell, "synthetic");
        const auto ds = generate_synthetic(s);
        const auto proj = VdmModel::fit(ds).project_dataset(ds);
        const double q = dual_exponent(p);
        const double xs = x_star(proj, q);
        const auto est = empirical_rademacher(proj, q, samples, derive_seed(cell, "mc"), mode);
        const double bound = theorem1_bound(D, n, xs, p);
        const bool pass = est.estimate <= bound + 3.0 * est.mc_std_error;
        all_pass = all_pass && pass;
        out << "p=" << fmt(p) << " n=" << n << " D=" << D << " estimate=" << fmt(est.estimate)
            << " se=" << fmt(est.mc_std_error) << " bound=" << fmt(bound) << " x_star=" << fmt(xs)
            << (est.exact ? " exact" : " mc") << ' ' << (pass ? "PASS" : "FAIL") << '\n';
      }
  out << (all_pass ? "all PASS" : "some FAIL") << '\n';
  return all_pass ? kOk : kNumericalError;
}

int cmd_synth(SyntheticSpec s, std::uint64_t seed, const std::string& out_path, std::ostream& out, std::ostream& err) {
  s.seed = seed;
  print_config(err, "synth",
               {{"n", std::to_string(s.n)},
                {"features", std::to_string(s.informative)},
                {"noisy", std::to_string(s.noisy)},
                {"classes", std::to_string(s.num_classes)},
                {"cardinality", std::to_string(s.resolved_cardinality())},
                {"weight", fmt(s.weight)},
                {"seed", std::to_string(seed)}});
  const auto ds = generate_synthetic(s);
  if (out_path.empty()) {
    write_csv(out, ds);
  } else {
    std::ostringstream os;
    write_csv(os, ds);
    write_file(out_path, os.str());
  }
  return kOk;
}

}  // namespace

// ---------------------------------------------------------------------------

std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
  static const std::vector<std::string> known{"lambda", "p", "b", "step_decay", "max_iters",
                                              "max_linesearch", "tol", "constraints", "seed", "kind"};
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file '" + path.string() + "'");
  std::map<std::string, std::string> entries;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '-', '_');
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    entries[key] = trim(line.substr(eq + 1));
  }
  return entries;
}

void apply_config(const std::map<std::string, std::string>& entries, TrainConfig& c) {
  for (const auto& [key, value] : entries) {
    if (key == "lambda") c.lambda = parse_double(key, value);
    else if (key == "p") c.p = parse_double(key, value);
    else if (key == "b") c.margin = parse_double(key, value);
    else if (key == "step_decay") c.step_decay = parse_double(key, value);
    else if (key == "max_iters") c.max_iters = parse_count(key, value);
    else if (key == "max_linesearch") c.max_linesearch = static_cast<int>(parse_count(key, value));
    else if (key == "tol") c.tol = parse_double(key, value);
    else if (key == "constraints") c.constraints = parse_count(key, value);
    else if (key == "seed") c.seed = parse_count(key, value);
    else if (key == "kind") c.kind = parse_metric_kind(value);
    else throw std::invalid_argument("config: unknown key '" + key + "'");
  }
}

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m) {
  const auto old = out.precision(17);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << m(i, j);
    }
    out << '\n';
  }
  out.precision(old);
}

Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open matrix file '" + path.string() + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) {
      cell = trim(cell);
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size())
        throw DataError("matrix file '" + path.string() + "': bad number '" + cell + "'");
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw DataError("matrix file '" + path.string() + "': ragged rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("matrix file '" + path.string() + "' is empty");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

std::string train_report_json(const TrainReport& report, const TrainConfig& config) {
  json mats = json::array();
  for (const auto& M : report.final_metric.matrices()) mats.push_back(matrix_to_json(M));
  json j{{"kind", std::string(to_string(report.final_metric.kind()))},
         {"lambda", config.lambda},
         {"p", config.p},
         {"b", config.margin},
         {"step_decay", config.step_decay},
         {"max_iters", config.max_iters},
         {"tol", config.tol},
         {"iterations_run", report.iterations_run},
         {"constraint_count", report.constraint_count},
         {"converged", report.converged},
         {"objective_trace", report.objective_trace},
         {"violated_counts", report.violated_counts},
         {"step_sizes", report.step_sizes},
         {"wall_time", report.wall_time},
         {"iteration_time", report.iteration_time},
         {"metric", mats}};
  return j.dump(2) + "\n";
}

std::string experiment_report_json(const ExperimentReport& report) { return report_to_json(report).dump(2) + "\n"; }

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Categorical projected metric learning", "cpml"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  DataOptions data;
  TrainOptions topts;
  ExperimentOptions eopts;
  double smoothing = 0.0;
  std::string out_dir, dump_projection, init_metric, method = "cpml-s";

  auto* train_cmd = app.add_subcommand("train", "Fit a metric on the training split of a dataset");
  add_data_options(*train_cmd, data);
  add_train_options(*train_cmd, topts, true);
  train_cmd->add_option("--smoothing", smoothing, "Pseudocount added to the value/class counts")->capture_default_str();
  train_cmd->add_option("--out-dir", out_dir, "Write metric CSV(s) and report.json here");
  train_cmd->add_option("--dump-projection", dump_projection, "Write the training projection as CSV");
  train_cmd->add_option("--init-metric", init_metric, "Start from this D x D metric (headerless CSV)");

  DataOptions eval_data;
  TrainOptions eval_topts;
  auto* eval_cmd = app.add_subcommand("evaluate", "Repeated-split evaluation of one method");
  add_data_options(*eval_cmd, eval_data);
  add_train_options(*eval_cmd, eval_topts, false);
  add_experiment_options(*eval_cmd, eopts);
  eval_cmd->add_option("--method", method, "euclidean | cpml-s | cpml-m")->capture_default_str();

  DataOptions bench_data;
  TrainOptions bench_topts;
  ExperimentOptions bench_eopts;
  auto* bench_cmd = app.add_subcommand("benchmark", "Identity baseline, CPML-s and CPML-m on one dataset");
  add_data_options(*bench_cmd, bench_data);
  add_train_options(*bench_cmd, bench_topts, false);
  add_experiment_options(*bench_cmd, bench_eopts);

  SyntheticSpec synth;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic categorical dataset as CSV");
  add_synth_options(*synth_cmd, synth);
  synth_cmd->add_option("--seed", synth_seed, "Random seed")->capture_default_str();
  synth_cmd->add_option("--out", synth_out, "Output CSV (default: standard output)");

  NoisyOptions nopts;
  TrainOptions noisy_topts;
  auto* noisy_cmd = app.add_subcommand("noisy", "Share of the metric norm placed on noise features");
  noisy_cmd->add_option("--n", nopts.n, "Examples per dataset")->capture_default_str();
  noisy_cmd->add_option("--informative", nopts.informative, "Informative features")->capture_default_str();
  noisy_cmd->add_option("--classes", nopts.classes, "Number of classes")->capture_default_str();
  noisy_cmd->add_option("--cardinality", nopts.cardinality, "Values per feature (0: max(4, classes))")->capture_default_str();
  noisy_cmd->add_option("--weight", nopts.weight, "Favored-value weight")->capture_default_str();
  noisy_cmd->add_option("--noisy-counts", nopts.counts, "Numbers of noise features")->delimiter(',')->capture_default_str();
  noisy_cmd->add_option("--p", nopts.ps, "Schatten exponents")->delimiter(',')->capture_default_str();
  noisy_cmd->add_option("--repeats", nopts.repeats, "Datasets per cell")->capture_default_str();
  noisy_cmd->add_option("--threads", nopts.threads, "Worker threads (default: CPML_THREADS or all cores)");
  noisy_cmd->add_option("--out", nopts.out, "Write the table as JSON to this path");
  add_train_options(*noisy_cmd, noisy_topts, false, false);

  RademacherOptions ropts;
  auto* rad_cmd = app.add_subcommand("rademacher", "Check the empirical Rademacher complexity against its bound");
  rad_cmd->add_option("--p", ropts.ps, "Schatten exponents (>= 1)")->delimiter(',')->capture_default_str();
  rad_cmd->add_option("--n", ropts.ns, "Sample sizes")->delimiter(',')->capture_default_str();
  rad_cmd->add_option("--D", ropts.dims, "Feature counts")->delimiter(',')->capture_default_str();
  rad_cmd->add_option("--classes", ropts.classes, "Number of classes")->capture_default_str();
  rad_cmd->add_option("--cardinality", ropts.cardinality, "Values per feature")->capture_default_str();
  rad_cmd->add_option("--mc", ropts.mc, "Monte Carlo sign vectors, or 'exact'")->capture_default_str();
  rad_cmd->add_option("--seed", ropts.seed, "Random seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*train_cmd) return cmd_train(data, topts, smoothing, out_dir, dump_projection, init_metric, out, err);
    if (*eval_cmd) return cmd_evaluate(eval_data, eval_topts, eopts, method, out, err);
    if (*bench_cmd) return cmd_benchmark(bench_data, bench_topts, bench_eopts, out, err);
    if (*synth_cmd) return cmd_synth(synth, synth_seed, synth_out, out, err);
    if (*noisy_cmd) return cmd_noisy(nopts, noisy_topts, out, err);
    if (*rad_cmd) return cmd_rademacher(ropts, out, err);
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumericalError;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << "\n\n";
    for (auto* sub : app.get_subcommands()) err << sub->help();
    return kUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsage;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"cpml"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace cpml::cli
