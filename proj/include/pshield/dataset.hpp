#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pshield/errors.hpp"

namespace pshield {

// Row-major feature storage; every row is one D-dimensional point.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  explicit FeatureMatrix(std::size_t cols) : cols_(cols) {}

  void push_row(std::span<const double> row) {
    if (cols_ == 0) cols_ = row.size();
    if (row.size() != cols_) {
      throw ShapeError("FeatureMatrix: row of width " +
                       std::to_string(row.size()) + ", expected " +
                       std::to_string(cols_));
    }
    data_.insert(data_.end(), row.begin(), row.end());
    ++rows_;
  }

  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0; }

 private:
  std::vector<double> data_;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
};

enum class SplitTag { Train, Test };

struct LabeledDataset {
  FeatureMatrix features;
  std::vector<int> labels;  // dense class indices in [0, num_classes)
  std::size_t num_classes = 0;
  SplitTag split = SplitTag::Train;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols(); }
};

struct TrainTestSplit {
  LabeledDataset train;
  LabeledDataset test;
};

enum class PoolMode { InDistribution, OutOfDistribution };

// Unlabeled attacker queries, pre-shuffled at creation so budget slicing is
// nested (a 200-query attack uses a prefix of the 2000-query one).
struct QueryPool {
  FeatureMatrix features;
  PoolMode mode = PoolMode::InDistribution;

  std::size_t size() const { return features.rows(); }
  std::size_t dim() const { return features.cols(); }
};

}  // namespace pshield
