// Random forest over the 10-slot feature vector: bootstrap sampling, greedy
// Gini splits over a per-node random feature subset, midpoint thresholds,
// and probability prediction by averaging per-tree leaf distributions.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mrseq/common.hpp"
#include "mrseq/features.hpp"

namespace mrseq::forest {

struct TreeNode {
  // Internal node: feature/threshold/left/right; x[feature] <= threshold
  // goes left. Leaf: left == -1 and counts holds the training class counts.
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::array<double, kNumClasses> counts{};

  bool is_leaf() const { return left < 0; }
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // node 0 is the root
};

struct ForestConfig {
  int n_trees = 100;
  int max_depth = 12;
  int min_samples_leaf = 2;
  int features_per_split = 4;  // ceil(sqrt(10))

  bool operator==(const ForestConfig&) const = default;
};

struct RandomForest {
  ForestConfig config;
  std::uint64_t seed = 0;
  std::vector<DecisionTree> trees;
};

// 1 - sum(p^2). Throws EmptyNode when all counts are zero.
double gini(const std::array<double, kNumClasses>& counts);

// Deterministic given seed. Requires >= 2 examples spanning >= 2 classes
// (DegenerateData otherwise). Candidate splits are scanned feature-ascending
// then threshold-ascending with strictly-greater gain comparison, so ties
// resolve to the lowest feature index, then the lowest threshold.
RandomForest fit_forest(const std::vector<feat::FeatureVector>& x, const std::vector<int>& y,
                        const ForestConfig& config, std::uint64_t seed);

Eigen::Vector4d predict_tree(const DecisionTree& tree, const feat::FeatureVector& fv);

// Mean of per-tree leaf frequency distributions; sums to 1 within 1e-9.
Eigen::Vector4d predict_forest(const RandomForest& model, const feat::FeatureVector& fv);

// Versioned JSON with explicit node arrays; the scaler that produced the
// training features travels with the model.
std::string forest_to_json(const RandomForest& model, const feat::ScalingParams& scaler);
RandomForest forest_from_json(std::string_view text, feat::ScalingParams* scaler);

}  // namespace mrseq::forest
