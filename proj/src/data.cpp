#include "cpml/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "cpml/error.hpp"
#include "cpml/random.hpp"

namespace cpml {

CategoricalDataset::CategoricalDataset(std::size_t num_features, std::vector<int> values,
                                       std::vector<int> labels, std::vector<int> cardinalities,
                                       int num_classes)
    : num_features_(num_features),
      num_classes_(num_classes),
      values_(std::move(values)),
      labels_(std::move(labels)),
      cardinalities_(std::move(cardinalities)) {
  validate();
}

void CategoricalDataset::validate() const {
  if (num_features_ == 0) throw DataError("dataset has no features");
  if (cardinalities_.size() != num_features_)
    throw DataError("cardinality vector length does not match feature count");
  if (values_.size() != labels_.size() * num_features_)
    throw DataError("value matrix size does not match n x D");
  if (num_classes_ < 2) throw DataError("single class: at least two classes are required");
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] < 0 || labels_[i] >= num_classes_)
      throw DataError("label out of range at row " + std::to_string(i));
    for (std::size_t d = 0; d < num_features_; ++d) {
      int v = value(i, d);
      if (v < 0 || v >= cardinalities_[d])
        throw DataError("value out of range at (" + std::to_string(i) + "," + std::to_string(d) + ")");
    }
  }
}

std::string CategoricalDataset::decode_value(std::size_t d, int v) const {
  if (d < value_names.size() && v >= 0 && static_cast<std::size_t>(v) < value_names[d].size())
    return value_names[d][v];
  return std::to_string(v + 1);
}

std::string CategoricalDataset::decode_label(int c) const {
  if (c >= 0 && static_cast<std::size_t>(c) < class_names.size()) return class_names[c];
  return std::to_string(c + 1);
}

CategoricalDataset CategoricalDataset::subset(std::span<const std::size_t> indices) const {
  CategoricalDataset out;
  out.num_features_ = num_features_;
  out.num_classes_ = num_classes_;
  out.cardinalities_ = cardinalities_;
  out.feature_names = feature_names;
  out.value_names = value_names;
  out.class_names = class_names;
  out.values_.reserve(indices.size() * num_features_);
  out.labels_.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= size()) throw std::out_of_range("subset index out of range");
    auto r = row(i);
    out.values_.insert(out.values_.end(), r.begin(), r.end());
    out.labels_.push_back(labels_[i]);
  }
  return out;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  for (auto& c : cells) {
    auto b = c.find_first_not_of(" \t\r");
    auto e = c.find_last_not_of(" \t\r");
    c = (b == std::string::npos) ? std::string() : c.substr(b, e - b + 1);
  }
  return cells;
}

// Assigns dense codes in first-occurrence order.
struct Encoder {
  std::unordered_map<std::string, int> codes;
  std::vector<std::string> names;
  int encode(const std::string& s) {
    auto [it, inserted] = codes.try_emplace(s, static_cast<int>(names.size()));
    if (inserted) names.push_back(s);
    return it->second;
  }
};

}  // namespace

CategoricalDataset read_csv(std::istream& in, const LabelColumn& label) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty dataset: missing header row");
  auto header = split_line(line);
  const std::size_t cols = header.size();
  if (cols < 2) throw DataError("need at least one feature column and a label column");

  std::size_t label_col = 0;
  if (const auto* name = std::get_if<std::string>(&label)) {
    auto it = std::find(header.begin(), header.end(), *name);
    if (it == header.end()) throw DataError("missing label column '" + *name + "'");
    label_col = static_cast<std::size_t>(it - header.begin());
  } else {
    label_col = std::get<std::size_t>(label);
    if (label_col >= cols) throw DataError("missing label column index " + std::to_string(label_col));
  }

  const std::size_t num_features = cols - 1;
  std::vector<Encoder> feature_enc(num_features);
  Encoder label_enc;
  std::vector<int> values, labels;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = split_line(line);
    if (cells.size() != cols)
      throw DataError("row " + std::to_string(row + 1) + " has " + std::to_string(cells.size()) +
                      " cells, expected " + std::to_string(cols));
    std::size_t d = 0;
    for (std::size_t c = 0; c < cols; ++c) {
      if (cells[c].empty())
        throw DataError("empty cell at (" + std::to_string(row + 1) + "," + std::to_string(c + 1) + ")");
      if (c == label_col) {
        labels.push_back(label_enc.encode(cells[c]));
      } else {
        values.push_back(feature_enc[d++].encode(cells[c]));
      }
    }
    ++row;
  }
  if (row == 0) throw DataError("empty dataset: no data rows");
  if (label_enc.names.size() < 2) throw DataError("single class: at least two classes are required");

  std::vector<int> cards(num_features);
  for (std::size_t d = 0; d < num_features; ++d) cards[d] = static_cast<int>(feature_enc[d].names.size());
  CategoricalDataset ds(num_features, std::move(values), std::move(labels), std::move(cards),
                        static_cast<int>(label_enc.names.size()));
  for (std::size_t c = 0; c < cols; ++c)
    if (c != label_col) ds.feature_names.push_back(header[c]);
  for (auto& enc : feature_enc) ds.value_names.push_back(std::move(enc.names));
  ds.class_names = std::move(label_enc.names);
  return ds;
}

CategoricalDataset load_csv(const std::filesystem::path& path, const LabelColumn& label) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file '" + path.string() + "'");
  return read_csv(in, label);
}

void write_csv(std::ostream& out, const CategoricalDataset& ds) {
  for (std::size_t d = 0; d < ds.num_features(); ++d)
    out << (d < ds.feature_names.size() ? ds.feature_names[d] : "f" + std::to_string(d + 1)) << ',';
  out << "class\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t d = 0; d < ds.num_features(); ++d) out << ds.decode_value(d, ds.value(i, d)) << ',';
    out << ds.decode_label(ds.label(i)) << '\n';
  }
}

namespace {

std::size_t floor_count(double ratio, std::size_t n) {
  return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
}

// Spreads `total` over groups proportionally to `shares`, never exceeding `room`.
// Each group gets floor(share) plus at most one extra, extras going to the
// largest fractional parts first.
std::vector<std::size_t> apportion(std::size_t total, const std::vector<double>& shares,
                                   const std::vector<std::size_t>& room) {
  std::vector<std::size_t> out(shares.size());
  std::size_t used = 0;
  for (std::size_t g = 0; g < shares.size(); ++g) {
    out[g] = std::min(room[g], static_cast<std::size_t>(std::floor(shares[g] + 1e-9)));
    used += out[g];
  }
  std::vector<std::size_t> order(shares.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return shares[a] - std::floor(shares[a] + 1e-9) > shares[b] - std::floor(shares[b] + 1e-9);
  });
  // Second pass relaxes the one-extra rule only if the first cannot place everything.
  for (int pass = 0; pass < 2 && used < total; ++pass) {
    for (std::size_t g : order) {
      if (used >= total) break;
      bool allowed = pass == 1 || out[g] < static_cast<std::size_t>(std::ceil(shares[g] - 1e-9));
      if (allowed && out[g] < room[g]) {
        ++out[g];
        ++used;
      }
    }
  }
  return out;
}

}  // namespace

SplitIndices split_indices(const CategoricalDataset& ds, const SplitSpec& spec) {
  const auto& r = spec.ratios;
  for (double x : r)
    if (!(x >= 0.0)) throw std::invalid_argument("split ratios must be non-negative");
  if (std::abs(r[0] + r[1] + r[2] - 1.0) > 1e-12) throw std::invalid_argument("split ratios must sum to 1");

  const std::size_t n = ds.size();
  const std::size_t n_val = floor_count(r[1], n);
  const std::size_t n_test = floor_count(r[2], n);
  if (n_val + n_test > n) throw DataError("n too small for requested split ratios");
  const std::size_t n_train = n - n_val - n_test;
  if ((r[0] > 0 && n_train == 0) || (r[1] > 0 && n_val == 0) || (r[2] > 0 && n_test == 0))
    throw DataError("n too small for requested split ratios: n=" + std::to_string(n));

  Rng rng(spec.seed);
  SplitIndices out;
  if (!spec.stratified) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    out.validation.assign(idx.begin(), idx.begin() + n_val);
    out.test.assign(idx.begin() + n_val, idx.begin() + n_val + n_test);
    out.train.assign(idx.begin() + n_val + n_test, idx.end());
  } else {
    const int C = ds.num_classes();
    std::vector<std::vector<std::size_t>> members(C);
    for (std::size_t i = 0; i < n; ++i) members[ds.label(i)].push_back(i);
    std::vector<double> val_share(C), test_share(C);
    std::vector<std::size_t> room(C);
    for (int c = 0; c < C; ++c) {
      val_share[c] = r[1] * static_cast<double>(members[c].size());
      test_share[c] = r[2] * static_cast<double>(members[c].size());
      room[c] = members[c].size();
    }
    auto val_counts = apportion(n_val, val_share, room);
    for (int c = 0; c < C; ++c) room[c] -= val_counts[c];
    auto test_counts = apportion(n_test, test_share, room);
    for (int c = 0; c < C; ++c) {
      auto& m = members[c];
      std::shuffle(m.begin(), m.end(), rng);
      auto v_end = m.begin() + static_cast<std::ptrdiff_t>(val_counts[c]);
      auto t_end = v_end + static_cast<std::ptrdiff_t>(test_counts[c]);
      out.validation.insert(out.validation.end(), m.begin(), v_end);
      out.test.insert(out.test.end(), v_end, t_end);
      out.train.insert(out.train.end(), t_end, m.end());
    }
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.validation.begin(), out.validation.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

DatasetSplit split(const CategoricalDataset& ds, const SplitSpec& spec) {
  auto idx = split_indices(ds, spec);
  return {ds.subset(idx.train), ds.subset(idx.validation), ds.subset(idx.test)};
}

int SyntheticSpec::resolved_cardinality() const {
  return cardinality > 0 ? cardinality : std::max(4, num_classes);
}

CategoricalDataset generate_synthetic(const SyntheticSpec& spec) {
  const int s = spec.resolved_cardinality();
  const int C = spec.num_classes;
  const std::size_t D = spec.informative + spec.noisy;
  if (s < 2) throw std::invalid_argument("synthetic cardinality must be at least 2");
  if (C < 2) throw std::invalid_argument("synthetic data needs at least two classes");
  if (!(spec.weight >= 0.0 && spec.weight <= 1.0)) throw std::invalid_argument("weight must lie in [0,1]");
  if (D == 0) throw std::invalid_argument("synthetic data needs at least one feature");
  if (spec.n == 0) throw std::invalid_argument("synthetic data needs n >= 1");

  Rng rng(spec.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  // probs[d][c] is the value distribution of feature d for class c.
  std::vector<std::vector<std::discrete_distribution<int>>> dists(D);
  for (std::size_t d = 0; d < D; ++d) {
    std::vector<double> base(s);
    for (auto& u : base) u = unif(rng);
    const bool informative = d < spec.informative;
    for (int c = 0; c < C; ++c) {
      std::vector<double> w = base;
      if (informative) w[favored_value(c, s)] += spec.weight;
      double total = std::accumulate(w.begin(), w.end(), 0.0);
      for (auto& x : w) x /= total;
      dists[d].emplace_back(w.begin(), w.end());
    }
  }

  std::vector<int> values(spec.n * D), labels(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const int c = static_cast<int>(i % static_cast<std::size_t>(C));
    labels[i] = c;
    for (std::size_t d = 0; d < D; ++d) values[i * D + d] = dists[d][c](rng);
  }
  CategoricalDataset ds(D, std::move(values), std::move(labels), std::vector<int>(D, s), C);
  for (std::size_t d = 0; d < D; ++d)
    ds.feature_names.push_back((d < spec.informative ? "inf" : "noise") + std::to_string(d + 1));
  return ds;
}

}  // namespace cpml
