#include "cpml/vdm.hpp"

#include <iomanip>
#include <ostream>
#include <stdexcept>

#include "cpml/error.hpp"

namespace cpml {

ProjectedData ProjectedData::from_examples(std::span<const ProjectedExample> examples) {
  if (examples.empty()) return {};
  const auto D = static_cast<std::size_t>(examples.front().rows());
  const auto C = static_cast<std::size_t>(examples.front().cols());
  ProjectedData out(examples.size(), D, C);
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (static_cast<std::size_t>(examples[i].rows()) != D || static_cast<std::size_t>(examples[i].cols()) != C)
      throw std::invalid_argument("projected examples must share one shape");
    out.example(i) = examples[i];
  }
  return out;
}

std::vector<ProjectedExample> ProjectedData::to_examples() const {
  std::vector<ProjectedExample> out;
  out.reserve(n_);
  for (std::size_t i = 0; i < n_; ++i) out.emplace_back(example(i));
  return out;
}

VdmModel VdmModel::fit(const CategoricalDataset& train, double smoothing) {
  if (!(smoothing >= 0.0)) throw std::invalid_argument("smoothing must be non-negative");
  VdmModel m;
  m.num_classes_ = train.num_classes();
  m.smoothing_ = smoothing;
  m.cardinalities_ = train.cardinalities();
  m.value_offset_.resize(m.cardinalities_.size());
  std::size_t total = 0;
  for (std::size_t d = 0; d < m.cardinalities_.size(); ++d) {
    m.value_offset_[d] = total;
    total += static_cast<std::size_t>(m.cardinalities_[d]);
  }
  m.counts_.assign(total * m.num_classes_, 0);
  for (std::size_t i = 0; i < train.size(); ++i) {
    const int c = train.label(i);
    for (std::size_t d = 0; d < train.num_features(); ++d) ++m.counts_[m.offset(d, train.value(i, d)) + c];
  }
  return m;
}

long VdmModel::count(int c, std::size_t d, int f) const {
  if (d >= num_features() || f < 0 || f >= cardinalities_[d] || c < 0 || c >= num_classes_) return 0;
  return counts_[offset(d, f) + c];
}

long VdmModel::value_total(std::size_t d, int f) const {
  long t = 0;
  for (int c = 0; c < num_classes_; ++c) t += count(c, d, f);
  return t;
}

void VdmModel::project_into(std::span<const int> x, Eigen::Ref<Eigen::MatrixXd> out) const {
  const double C = num_classes_;
  for (std::size_t d = 0; d < num_features(); ++d) {
    const int f = x[d];
    const bool seen = f >= 0 && f < cardinalities_[d];
    const long* row = seen ? &counts_[offset(d, f)] : nullptr;
    long total = 0;
    if (seen)
      for (int c = 0; c < num_classes_; ++c) total += row[c];
    const double denom = static_cast<double>(total) + C * smoothing_;
    for (int c = 0; c < num_classes_; ++c) {
      if (denom == 0.0) {
        out(d, c) = 1.0 / C;
      } else {
        const double n = seen ? static_cast<double>(row[c]) : 0.0;
        out(d, c) = (n + smoothing_) / denom;
      }
    }
  }
}

ProjectedExample VdmModel::project(std::span<const int> x) const {
  if (x.size() != num_features())
    throw std::invalid_argument("feature-count mismatch: expected " + std::to_string(num_features()) + ", got " +
                                std::to_string(x.size()));
  ProjectedExample out(num_features(), num_classes_);
  project_into(x, out);
  return out;
}

ProjectedData VdmModel::project_dataset(const CategoricalDataset& ds) const {
  if (ds.size() > 0 && ds.num_features() != num_features())
    throw std::invalid_argument("feature-count mismatch between model and dataset");
  ProjectedData out(ds.size(), num_features(), static_cast<std::size_t>(num_classes_));
  for (std::size_t i = 0; i < ds.size(); ++i) project_into(ds.row(i), out.example(i));
  return out;
}

void write_projection_csv(std::ostream& out, const ProjectedData& proj) {
  out << std::setprecision(17);
  for (std::size_t i = 0; i < proj.size(); ++i) {
    auto x = proj.example(i);
    for (Eigen::Index d = 0; d < x.rows(); ++d)
      for (Eigen::Index c = 0; c < x.cols(); ++c) out << (d == 0 && c == 0 ? "" : ",") << x(d, c);
    out << '\n';
  }
}

}  // namespace cpml
