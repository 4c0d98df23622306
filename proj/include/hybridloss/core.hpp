#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hybridloss/numeric.hpp"

namespace hybrid {

/// Dense per-label scores f(x), length k.
using ScoreVector = std::vector<double>;

/// Probability vector over a finite label set, length k.
using LabelDistribution = std::vector<double>;

/// Model parameters w, length n.
using WeightVector = std::vector<double>;

namespace detail {
inline std::string to_text(std::size_t v) { return std::to_string(v); }
}  // namespace detail

/// Finite label set of size k >= 2, optionally with distinct display names.
struct LabelSet {
  explicit LabelSet(std::size_t k) : size(k) { check(); }
  explicit LabelSet(std::vector<std::string> label_names)
      : size(label_names.size()), names(std::move(label_names)) {
    check();
  }

  std::size_t size = 0;
  std::vector<std::string> names;  // empty, or exactly `size` distinct entries

 private:
  void check() const {
    if (size < 2) throw std::invalid_argument("LabelSet: need at least 2 labels");
    if (!names.empty()) {
      if (names.size() != size)
        throw std::invalid_argument("LabelSet: name count does not match size");
      std::set<std::string> unique(names.begin(), names.end());
      if (unique.size() != size)
        throw std::invalid_argument("LabelSet: names must be distinct");
    }
  }
};

/// Sparse feature vector: sorted (index, value) pairs with zeros dropped.
class FeatureVector {
 public:
  using Entry = std::pair<std::size_t, double>;

  FeatureVector() = default;

  FeatureVector(std::size_t dimension, std::vector<Entry> entries)
      : dimension_(dimension) {
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.first < b.first; });
    for (const auto& [index, value] : entries) {
      if (index >= dimension_)
        throw std::invalid_argument("FeatureVector: index " + detail::to_text(index) +
                                    " out of range for dimension " +
                                    detail::to_text(dimension_));
      if (!std::isfinite(value))
        throw std::invalid_argument("FeatureVector: non-finite value");
      if (value == 0.0) continue;  // no explicit zeros
      if (!entries_.empty() && entries_.back().first == index)
        entries_.back().second += value;  // merge duplicate indices
      else
        entries_.emplace_back(index, value);
    }
    // merging may have produced exact zeros
    std::erase_if(entries_, [](const Entry& e) { return e.second == 0.0; });
  }

  std::size_t dimension() const { return dimension_; }
  const std::vector<Entry>& entries() const { return entries_; }

  double dot(const std::vector<double>& dense) const {
    double sum = 0.0;
    for (const auto& [index, value] : entries_) sum += dense[index] * value;
    return sum;
  }

  /// out += scale * this
  void add_to(double scale, std::vector<double>& out) const {
    for (const auto& [index, value] : entries_) out[index] += scale * value;
  }

  bool operator==(const FeatureVector&) const = default;

 private:
  std::size_t dimension_ = 0;
  std::vector<Entry> entries_;
};

/// One multiclass training pair: phi(x, y) precomputed for every label,
/// plus the observed label.
struct FlatInstance {
  std::vector<FeatureVector> features_per_label;
  std::size_t gold_label = 0;

  std::size_t label_count() const { return features_per_label.size(); }
  std::size_t dimension() const {
    return features_per_label.empty() ? 0 : features_per_label.front().dimension();
  }

  bool operator==(const FlatInstance&) const = default;
};

inline void validate_flat_instance(const FlatInstance& instance) {
  const std::size_t k = instance.label_count();
  if (k < 2) throw std::invalid_argument("FlatInstance: need at least 2 labels");
  if (instance.gold_label >= k)
    throw std::invalid_argument("FlatInstance: gold label " +
                                detail::to_text(instance.gold_label) +
                                " out of range for " + detail::to_text(k) + " labels");
  const std::size_t dim = instance.dimension();
  for (const FeatureVector& fv : instance.features_per_label)
    if (fv.dimension() != dim)
      throw std::invalid_argument("FlatInstance: inconsistent feature dimensions");
}

/// Linear scores f_y(x; w) = <w, phi(x, y)> for every label.
inline ScoreVector score_flat(const WeightVector& weights, const FlatInstance& instance) {
  const std::size_t dim = instance.dimension();
  if (weights.size() != dim)
    throw std::invalid_argument("score_flat: weight length " +
                                detail::to_text(weights.size()) +
                                " does not match feature dimension " +
                                detail::to_text(dim));
  ScoreVector scores(instance.label_count());
  for (std::size_t y = 0; y < scores.size(); ++y)
    scores[y] = instance.features_per_label[y].dot(weights);
  return scores;
}

/// argmax_y f_y; ties break to the lowest label index.
inline std::size_t predict(const ScoreVector& scores) {
  if (scores.empty()) throw std::invalid_argument("predict: empty score vector");
  if (!all_finite(scores)) throw std::invalid_argument("predict: non-finite score");
  return argmax_lowest(scores);
}

/// Normalized exponentials of the scores, computed with max subtraction.
inline LabelDistribution softmax(const ScoreVector& scores) {
  if (scores.empty()) throw std::invalid_argument("softmax: empty score vector");
  if (!all_finite(scores)) throw std::invalid_argument("softmax: non-finite score");
  const double max_score = *std::max_element(scores.begin(), scores.end());
  LabelDistribution probabilities(scores.size());
  double sum = 0.0;
  for (std::size_t y = 0; y < scores.size(); ++y) {
    probabilities[y] = std::exp(scores[y] - max_score);
    sum += probabilities[y];
  }
  for (double& p : probabilities) p /= sum;
  return probabilities;
}

/// Lowest-index argmax over labels other than `gold`.
inline std::size_t best_other_label(const ScoreVector& scores, std::size_t gold) {
  std::size_t best = gold == 0 ? 1 : 0;
  for (std::size_t y = 0; y < scores.size(); ++y)
    if (y != gold && scores[y] > scores[best]) best = y;
  return best;
}

/// M(f, y) = f_y - max_{y' != y} f_{y'}.
inline double margin(const ScoreVector& scores, std::size_t gold) {
  if (scores.size() < 2) throw std::invalid_argument("margin: need at least 2 labels");
  if (gold >= scores.size())
    throw std::invalid_argument("margin: gold label " + detail::to_text(gold) +
                                " out of range for " + detail::to_text(scores.size()) +
                                " labels");
  return scores[gold] - scores[best_other_label(scores, gold)];
}

}  // namespace hybrid
