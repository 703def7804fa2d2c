#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace cpml {

/// n examples of D categorical features with class labels.
///
/// Values and labels are stored 0-based: feature d takes values in
/// [0, cardinalities[d]) and labels lie in [0, num_classes). When the data
/// came from a CSV the string dictionaries are kept in first-occurrence order,
/// so value_names[d][v] is the original cell text for code v.
class CategoricalDataset {
 public:
  CategoricalDataset() = default;
  CategoricalDataset(std::size_t num_features, std::vector<int> values, std::vector<int> labels,
                     std::vector<int> cardinalities, int num_classes);

  std::size_t size() const { return labels_.size(); }
  std::size_t num_features() const { return num_features_; }
  int num_classes() const { return num_classes_; }

  int value(std::size_t i, std::size_t d) const { return values_[i * num_features_ + d]; }
  std::span<const int> row(std::size_t i) const {
    return {values_.data() + i * num_features_, num_features_};
  }
  int label(std::size_t i) const { return labels_[i]; }
  const std::vector<int>& labels() const { return labels_; }
  const std::vector<int>& values() const { return values_; }
  const std::vector<int>& cardinalities() const { return cardinalities_; }

  std::vector<std::string> feature_names;
  std::vector<std::vector<std::string>> value_names;
  std::vector<std::string> class_names;

  /// Original string for feature d, code v. Falls back to the 1-based code
  /// when no dictionary is attached.
  std::string decode_value(std::size_t d, int v) const;
  std::string decode_label(int c) const;

  /// Rows `indices` in the given order; dictionaries, cardinalities and the
  /// class count are shared with the parent.
  CategoricalDataset subset(std::span<const std::size_t> indices) const;

  /// Throws DataError if a value or label is out of range.
  void validate() const;

 private:
  std::size_t num_features_ = 0;
  int num_classes_ = 0;
  std::vector<int> values_;
  std::vector<int> labels_;
  std::vector<int> cardinalities_;
};

/// Label column selected by header name or by 0-based column index.
using LabelColumn = std::variant<std::string, std::size_t>;

CategoricalDataset read_csv(std::istream& in, const LabelColumn& label);
CategoricalDataset load_csv(const std::filesystem::path& path, const LabelColumn& label);
void write_csv(std::ostream& out, const CategoricalDataset& ds);

struct SplitSpec {
  std::array<double, 3> ratios{0.6, 0.2, 0.2};  // train, validation, test
  std::uint64_t seed = 0;
  bool stratified = true;
};

struct SplitIndices {
  std::vector<std::size_t> train, validation, test;
};

struct DatasetSplit {
  CategoricalDataset train, validation, test;
};

/// Validation and test receive floor(ratio * n) rows; the remainder goes to train.
SplitIndices split_indices(const CategoricalDataset& ds, const SplitSpec& spec);
DatasetSplit split(const CategoricalDataset& ds, const SplitSpec& spec);

struct SyntheticSpec {
  std::size_t n = 1000;
  std::size_t informative = 8;
  std::size_t noisy = 0;
  int num_classes = 4;
  int cardinality = 0;  // 0 selects max(4, num_classes)
  double weight = 0.5;
  std::uint64_t seed = 0;

  int resolved_cardinality() const;
};

/// Multinomial features with one favored value per class on the informative
/// features. Informative features come first, then noisy ones; labels are
/// assigned round-robin.
CategoricalDataset generate_synthetic(const SyntheticSpec& spec);

/// 0-based favored value of class c for cardinality s.
inline int favored_value(int c, int s) { return c % s; }

}  // namespace cpml
