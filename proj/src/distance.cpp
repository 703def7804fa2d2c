#include "cpml/distance.hpp"

#include <stdexcept>
#include <string>

#include "cpml/error.hpp"

namespace cpml {

std::string_view to_string(MetricKind kind) { return kind == MetricKind::Single ? "single" : "multi"; }

MetricKind parse_metric_kind(std::string_view text) {
  if (text == "single" || text == "cps" || text == "s") return MetricKind::Single;
  if (text == "multi" || text == "cpm" || text == "m") return MetricKind::Multi;
  throw std::invalid_argument("unknown metric kind '" + std::string(text) + "'");
}

PairDiff pair_diff(const Eigen::Ref<const Eigen::MatrixXd>& phi_i, const Eigen::Ref<const Eigen::MatrixXd>& phi_j) {
  if (phi_i.rows() != phi_j.rows() || phi_i.cols() != phi_j.cols())
    throw std::invalid_argument("pair_diff: projected examples have different shapes");
  const Eigen::MatrixXd delta = phi_i - phi_j;
  PairDiff pd;
  pd.per_class.reserve(static_cast<std::size_t>(delta.cols()));
  pd.summed = Eigen::MatrixXd::Zero(delta.rows(), delta.rows());
  for (Eigen::Index c = 0; c < delta.cols(); ++c) {
    pd.per_class.push_back(delta.col(c) * delta.col(c).transpose());
    pd.summed += pd.per_class.back();
  }
  return pd;
}

double distance_cps(const Eigen::MatrixXd& metric, const PairDiff& pd) {
  if (metric.rows() != pd.summed.rows() || metric.cols() != pd.summed.cols())
    throw std::invalid_argument("distance_cps: dimension mismatch");
  return pd.summed.cwiseProduct(metric).sum();
}

double distance_cpm(std::span<const Eigen::MatrixXd> metrics, const PairDiff& pd) {
  if (metrics.size() != pd.per_class.size()) throw std::invalid_argument("distance_cpm: class-count mismatch");
  double d = 0.0;
  for (std::size_t c = 0; c < metrics.size(); ++c) {
    if (metrics[c].rows() != pd.per_class[c].rows() || metrics[c].cols() != pd.per_class[c].cols())
      throw std::invalid_argument("distance_cpm: dimension mismatch");
    d += pd.per_class[c].cwiseProduct(metrics[c]).sum();
  }
  return d;
}

double euclidean_baseline(const PairDiff& pd) { return pd.summed.trace(); }

MetricModel MetricModel::single(Eigen::MatrixXd metric) {
  if (metric.rows() != metric.cols() || metric.rows() == 0) throw std::invalid_argument("metric must be square");
  MetricModel m;
  m.kind_ = MetricKind::Single;
  m.mats_.push_back(std::move(metric));
  return m;
}

MetricModel MetricModel::multi(std::vector<Eigen::MatrixXd> metrics) {
  if (metrics.empty()) throw std::invalid_argument("multi metric needs at least one class matrix");
  const auto D = metrics.front().rows();
  for (const auto& M : metrics)
    if (M.rows() != D || M.cols() != D || D == 0) throw std::invalid_argument("class metrics must be square and equal-sized");
  MetricModel m;
  m.kind_ = MetricKind::Multi;
  m.mats_ = std::move(metrics);
  return m;
}

MetricModel MetricModel::identity(MetricKind kind, std::size_t num_features, std::size_t num_classes) {
  const auto D = static_cast<Eigen::Index>(num_features);
  if (kind == MetricKind::Single) return single(Eigen::MatrixXd::Identity(D, D));
  return multi(std::vector<Eigen::MatrixXd>(num_classes, Eigen::MatrixXd::Identity(D, D)));
}

MetricModel MetricModel::zero(MetricKind kind, std::size_t num_features, std::size_t num_classes) {
  const auto D = static_cast<Eigen::Index>(num_features);
  if (kind == MetricKind::Single) return single(Eigen::MatrixXd::Zero(D, D));
  return multi(std::vector<Eigen::MatrixXd>(num_classes, Eigen::MatrixXd::Zero(D, D)));
}

const Eigen::MatrixXd& MetricModel::matrix() const {
  if (kind_ != MetricKind::Single || mats_.empty()) throw std::logic_error("matrix() requires a single metric");
  return mats_.front();
}

double MetricModel::distance(const Eigen::Ref<const Eigen::MatrixXd>& phi_i,
                             const Eigen::Ref<const Eigen::MatrixXd>& phi_j) const {
  if (phi_i.rows() != static_cast<Eigen::Index>(num_features()) || phi_j.rows() != phi_i.rows() ||
      phi_j.cols() != phi_i.cols())
    throw std::invalid_argument("distance: shape mismatch");
  if (kind_ == MetricKind::Multi && static_cast<std::size_t>(phi_i.cols()) != mats_.size())
    throw std::invalid_argument("distance: class-count mismatch");
  const Eigen::MatrixXd delta = phi_i - phi_j;
  double d = 0.0;
  for (Eigen::Index c = 0; c < delta.cols(); ++c)
    d += delta.col(c).dot(for_class(static_cast<std::size_t>(c)) * delta.col(c));
  return d;
}

double MetricModel::distance(const PairDiff& pd) const {
  return kind_ == MetricKind::Single ? distance_cps(mats_.front(), pd) : distance_cpm(mats_, pd);
}

bool MetricModel::is_finite() const {
  for (const auto& M : mats_)
    if (!M.allFinite()) return false;
  return true;
}

bool MetricModel::is_psd(double sym_tol, double eig_tol) const {
  for (const auto& M : mats_) {
    if (!M.allFinite()) return false;
    if ((M - M.transpose()).cwiseAbs().maxCoeff() > sym_tol) return false;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (M + M.transpose()), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() < -eig_tol) return false;
  }
  return true;
}

Eigen::MatrixXd embed(const MetricModel& metric, const ProjectedData& proj) {
  const auto D = static_cast<Eigen::Index>(proj.num_features());
  const auto C = static_cast<Eigen::Index>(proj.num_classes());
  if (proj.size() > 0 && static_cast<std::size_t>(D) != metric.num_features())
    throw std::invalid_argument("embed: feature-count mismatch");
  if (metric.kind() == MetricKind::Multi && static_cast<std::size_t>(C) != metric.matrices().size())
    throw std::invalid_argument("embed: class-count mismatch");

  std::vector<Eigen::MatrixXd> factors;  // L_c^T
  for (const auto& M : metric.matrices()) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (M + M.transpose()));
    if (es.info() != Eigen::Success) throw NumericalError("embed: eigendecomposition failed");
    Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    factors.push_back(root.asDiagonal() * es.eigenvectors().transpose());
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(proj.size()), D * C);
  for (std::size_t i = 0; i < proj.size(); ++i) {
    auto x = proj.example(i);
    for (Eigen::Index c = 0; c < C; ++c) {
      const auto& L = factors[metric.kind() == MetricKind::Single ? 0 : static_cast<std::size_t>(c)];
      out.row(static_cast<Eigen::Index>(i)).segment(c * D, D) = (L * x.col(c)).transpose();
    }
  }
  return out;
}

}  // namespace cpml
