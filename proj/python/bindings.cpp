#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cpml/data.hpp"
#include "cpml/distance.hpp"
#include "cpml/error.hpp"
#include "cpml/evaluation.hpp"
#include "cpml/optimizer.hpp"
#include "cpml/regularizer.hpp"
#include "cpml/theory.hpp"
#include "cpml/vdm.hpp"

namespace py = pybind11;
using namespace cpml;

namespace {

CategoricalDataset dataset_from_arrays(py::array_t<int, py::array::c_style | py::array::forcecast> values,
                                       std::vector<int> labels, std::vector<int> cardinalities, int num_classes) {
  if (values.ndim() != 2) throw std::invalid_argument("values must be a 2-d array");
  const auto n = static_cast<std::size_t>(values.shape(0));
  const auto D = static_cast<std::size_t>(values.shape(1));
  std::vector<int> flat(values.data(), values.data() + n * D);
  if (cardinalities.empty()) {
    cardinalities.assign(D, 1);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t d = 0; d < D; ++d) cardinalities[d] = std::max(cardinalities[d], flat[i * D + d] + 1);
  }
  if (num_classes <= 0)
    for (int y : labels) num_classes = std::max(num_classes, y + 1);
  return CategoricalDataset(D, std::move(flat), std::move(labels), std::move(cardinalities), num_classes);
}

py::array_t<int> dataset_values(const CategoricalDataset& ds) {
  py::array_t<int> out({ds.size(), ds.num_features()});
  std::copy(ds.values().begin(), ds.values().end(), out.mutable_data());
  return out;
}

// (n, D, C) array view of a projection.
py::array_t<double> projection_array(const ProjectedData& p) {
  const std::size_t n = p.size(), D = p.num_features(), C = p.num_classes();
  py::array_t<double> out({n, D, C});
  auto r = out.mutable_unchecked<3>();
  for (std::size_t i = 0; i < n; ++i) {
    auto x = p.example(i);
    for (std::size_t d = 0; d < D; ++d)
      for (std::size_t c = 0; c < C; ++c) r(i, d, c) = x(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(c));
  }
  return out;
}

ProjectedData projection_from_array(py::array_t<double, py::array::c_style | py::array::forcecast> a) {
  if (a.ndim() != 3) throw std::invalid_argument("projection must be an (n, D, C) array");
  const auto n = static_cast<std::size_t>(a.shape(0)), D = static_cast<std::size_t>(a.shape(1)),
             C = static_cast<std::size_t>(a.shape(2));
  ProjectedData p(n, D, C);
  auto r = a.unchecked<3>();
  for (std::size_t i = 0; i < n; ++i) {
    auto x = p.example(i);
    for (std::size_t d = 0; d < D; ++d)
      for (std::size_t c = 0; c < C; ++c) x(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(c)) = r(i, d, c);
  }
  return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Metric learning on value-difference projections of categorical data.";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<CategoricalDataset>(m, "CategoricalDataset")
      .def(py::init(&dataset_from_arrays), py::arg("values"), py::arg("labels"),
           py::arg("cardinalities") = std::vector<int>{}, py::arg("num_classes") = 0)
      .def("__len__", &CategoricalDataset::size)
      .def_property_readonly("num_features", &CategoricalDataset::num_features)
      .def_property_readonly("num_classes", &CategoricalDataset::num_classes)
      .def_property_readonly("values", &dataset_values)
      .def_property_readonly("labels", &CategoricalDataset::labels)
      .def_property_readonly("cardinalities", &CategoricalDataset::cardinalities)
      .def_readonly("feature_names", &CategoricalDataset::feature_names)
      .def_readonly("class_names", &CategoricalDataset::class_names)
      .def("subset", [](const CategoricalDataset& ds, std::vector<std::size_t> idx) { return ds.subset(idx); });

  m.def("load_csv", [](const std::string& path, const std::string& label) { return load_csv(path, LabelColumn{label}); },
        py::arg("path"), py::arg("label"));
  m.def("load_csv_index", [](const std::string& path, std::size_t col) { return load_csv(path, LabelColumn{col}); },
        py::arg("path"), py::arg("label_index"));

  m.def(
      "generate_synthetic",
      [](std::size_t n, std::size_t informative, std::size_t noisy, int num_classes, int cardinality, double weight,
         std::uint64_t seed) {
        return generate_synthetic(SyntheticSpec{n, informative, noisy, num_classes, cardinality, weight, seed});
      },
      py::arg("n") = 1000, py::arg("informative") = 8, py::arg("noisy") = 0, py::arg("num_classes") = 4,
      py::arg("cardinality") = 0, py::arg("weight") = 0.5, py::arg("seed") = 0);

  py::class_<ProjectedData>(m, "ProjectedData")
      .def(py::init(&projection_from_array))
      .def("__len__", &ProjectedData::size)
      .def_property_readonly("num_features", &ProjectedData::num_features)
      .def_property_readonly("num_classes", &ProjectedData::num_classes)
      .def("example", [](const ProjectedData& p, std::size_t i) -> Eigen::MatrixXd {
        if (i >= p.size()) throw py::index_error();
        return p.example(i);
      })
      .def("to_array", &projection_array);

  py::class_<VdmModel>(m, "VdmModel")
      .def_static("fit", &VdmModel::fit, py::arg("train"), py::arg("smoothing") = 0.0)
      .def_property_readonly("num_features", &VdmModel::num_features)
      .def_property_readonly("num_classes", &VdmModel::num_classes)
      .def("count", &VdmModel::count, py::arg("c"), py::arg("d"), py::arg("f"))
      .def("project", [](const VdmModel& v, std::vector<int> x) { return v.project(x); })
      .def("project_dataset", &VdmModel::project_dataset);

  py::enum_<MetricKind>(m, "MetricKind").value("Single", MetricKind::Single).value("Multi", MetricKind::Multi);

  py::class_<MetricModel>(m, "MetricModel")
      .def_static("single", &MetricModel::single)
      .def_static("multi", &MetricModel::multi)
      .def_static("identity", &MetricModel::identity, py::arg("kind"), py::arg("num_features"), py::arg("num_classes"))
      .def_property_readonly("kind", &MetricModel::kind)
      .def_property_readonly("matrices", [](const MetricModel& mm) { return mm.matrices(); })
      .def("distance", py::overload_cast<const Eigen::Ref<const Eigen::MatrixXd>&, const Eigen::Ref<const Eigen::MatrixXd>&>(
                           &MetricModel::distance, py::const_))
      .def("is_psd", &MetricModel::is_psd, py::arg("sym_tol") = 1e-9, py::arg("eig_tol") = 1e-8);

  m.def("schatten_value", &schatten_value, py::arg("M"), py::arg("p"));
  m.def("schatten_subgrad", &schatten_subgrad, py::arg("M"), py::arg("p"));
  m.def("psd_project", &psd_project, py::arg("M"));

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("lambda_", &TrainConfig::lambda)
      .def_readwrite("p", &TrainConfig::p)
      .def_readwrite("margin", &TrainConfig::margin)
      .def_readwrite("step_decay", &TrainConfig::step_decay)
      .def_readwrite("max_iters", &TrainConfig::max_iters)
      .def_readwrite("max_linesearch", &TrainConfig::max_linesearch)
      .def_readwrite("tol", &TrainConfig::tol)
      .def_readwrite("constraints", &TrainConfig::constraints)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("kind", &TrainConfig::kind)
      .def_readwrite("strict_alg2", &TrainConfig::strict_alg2);

  py::class_<TrainReport>(m, "TrainReport")
      .def_readonly("final_metric", &TrainReport::final_metric)
      .def_readonly("objective_trace", &TrainReport::objective_trace)
      .def_readonly("violated_counts", &TrainReport::violated_counts)
      .def_readonly("step_sizes", &TrainReport::step_sizes)
      .def_readonly("iterations_run", &TrainReport::iterations_run)
      .def_readonly("constraint_count", &TrainReport::constraint_count)
      .def_readonly("converged", &TrainReport::converged)
      .def_readonly("wall_time", &TrainReport::wall_time);

  m.def(
      "train",
      [](const ProjectedData& proj, std::vector<int> labels, const TrainConfig& cfg) {
        py::gil_scoped_release release;
        return train(proj, labels, cfg);
      },
      py::arg("proj"), py::arg("labels"), py::arg("config") = TrainConfig{});

  m.def(
      "knn_predict",
      [](const MetricModel& metric, const ProjectedData& tr, std::vector<int> labels, const ProjectedData& te,
         std::size_t k) { return knn_predict(metric, tr, labels, te, k); },
      py::arg("metric"), py::arg("train"), py::arg("train_labels"), py::arg("test"), py::arg("k") = 1);
  m.def(
      "classification_accuracy",
      [](std::vector<int> pred, std::vector<int> actual) { return classification_accuracy(pred, actual); });
  m.def(
      "triplet_accuracy",
      [](const MetricModel& metric, const ProjectedData& proj, std::vector<int> labels, std::size_t num,
         std::uint64_t seed) { return triplet_accuracy(metric, proj, labels, num, seed); },
      py::arg("metric"), py::arg("proj"), py::arg("labels"), py::arg("num_triplets") = 10000, py::arg("seed") = 0);
  m.def(
      "noisy_ratio",
      [](const MetricModel& metric, std::vector<std::size_t> idx, double p) { return noisy_ratio(metric, idx, p); },
      py::arg("metric"), py::arg("noisy_features"), py::arg("p"));

  py::enum_<Method>(m, "Method")
      .value("Euclidean", Method::Euclidean)
      .value("CpmlSingle", Method::CpmlSingle)
      .value("CpmlMulti", Method::CpmlMulti);

  py::class_<ExperimentReport>(m, "ExperimentReport")
      .def_readonly("class_acc", &ExperimentReport::class_acc)
      .def_readonly("triplet_acc", &ExperimentReport::triplet_acc)
      .def_readonly("selected_lambdas", &ExperimentReport::selected_lambdas)
      .def_readonly("class_acc_mean", &ExperimentReport::class_acc_mean)
      .def_readonly("class_acc_std", &ExperimentReport::class_acc_std)
      .def_readonly("triplet_acc_mean", &ExperimentReport::triplet_acc_mean)
      .def_readonly("triplet_acc_std", &ExperimentReport::triplet_acc_std)
      .def_readonly("seconds_per_repeat", &ExperimentReport::seconds_per_repeat);

  m.def(
      "run_experiment",
      [](const CategoricalDataset& ds, Method method, std::size_t repeats, std::uint64_t seed,
         std::vector<double> lambda_grid, const TrainConfig& train_cfg) {
        ExperimentConfig cfg;
        cfg.method = method;
        cfg.repeats = repeats;
        cfg.seed = seed;
        cfg.train = train_cfg;
        if (!lambda_grid.empty()) cfg.lambda_grid = std::move(lambda_grid);
        py::gil_scoped_release release;
        return run_experiment(ds, cfg);
      },
      py::arg("dataset"), py::arg("method") = Method::CpmlSingle, py::arg("repeats") = 50, py::arg("seed") = 0,
      py::arg("lambda_grid") = std::vector<double>{}, py::arg("train_config") = TrainConfig{});

  py::class_<RademacherEstimate>(m, "RademacherEstimate")
      .def_readonly("estimate", &RademacherEstimate::estimate)
      .def_readonly("mc_samples", &RademacherEstimate::mc_samples)
      .def_readonly("mc_std_error", &RademacherEstimate::mc_std_error)
      .def_readonly("q", &RademacherEstimate::q)
      .def_readonly("exact", &RademacherEstimate::exact);

  m.def("dual_exponent", &dual_exponent);
  m.def("x_star", &x_star, py::arg("proj"), py::arg("q"));
  m.def(
      "empirical_rademacher",
      [](const ProjectedData& proj, double q, std::size_t samples, std::uint64_t seed, bool exact) {
        return empirical_rademacher(proj, q, samples, seed, exact ? RademacherMode::Exact : RademacherMode::Auto);
      },
      py::arg("proj"), py::arg("q"), py::arg("mc_samples") = 2000, py::arg("seed") = 0, py::arg("exact") = false);
  m.def("theorem1_bound", &theorem1_bound, py::arg("D"), py::arg("n"), py::arg("x_star"), py::arg("p"));
  m.def("theorem2_bound", &theorem2_bound, py::arg("D"), py::arg("n"), py::arg("x_star"), py::arg("p"),
        py::arg("lambda_"), py::arg("delta"));
}
